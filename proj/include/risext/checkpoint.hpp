// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "risext/binary_io.hpp"
#include "risext/errors.hpp"
#include "risext/network.hpp"

namespace risext {

inline nlohmann::json to_json(const ModelSpec& s) {
  return {{"arch", std::string(to_string(s.arch))},
          {"channels", s.channels},
          {"blocks", s.blocks},
          {"head_kernel", s.head_kernel},
          {"inner_kernel", s.inner_kernel},
          {"tail_kernel", s.tail_kernel},
          {"io_channels", s.io_channels},
          {"share_rk3_stages", s.share_rk3_stages}};
}

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.arch = parse_block_kind(j.at("arch").get<std::string>());
  s.channels = j.at("channels");
  s.blocks = j.at("blocks");
  s.head_kernel = j.at("head_kernel");
  s.inner_kernel = j.at("inner_kernel");
  s.tail_kernel = j.at("tail_kernel");
  s.io_channels = j.at("io_channels");
  s.share_rk3_stages = j.at("share_rk3_stages");
  s.validate();
  return s;
}

struct Checkpoint {
  static constexpr int kVersion = 1;
  ModelSpec spec;
  std::size_t epochs_completed = 0;
  nlohmann::json extra = nlohmann::json::object();  // free-form run metadata
};

/// "RISNET01" header whose manifest lists the architecture and every parameter
/// (name, shape, Adam step), then per parameter: value, first moment, second
/// moment as raw little-endian doubles. Gradients are not stored.
inline void save_checkpoint(const std::string& path, const Model& model,
                            std::size_t epochs_completed, const nlohmann::json& extra = {}) {
  nlohmann::json params = nlohmann::json::array();
  for (const Parameter* p : model.parameters())
    params.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"step", p->step}});
  nlohmann::json manifest = {{"format", "RISNET01"},
                             {"version", Checkpoint::kVersion},
                             {"dtype", "f64"},
                             {"spec", to_json(model.spec())},
                             {"epochs_completed", epochs_completed},
                             {"params", params},
                             {"payload", {"value", "adam_m", "adam_v"}},
                             {"extra", extra.is_null() ? nlohmann::json::object() : extra}};
  auto os = io::open_out(path);
  io::write_header(os, "RISNET01", manifest.dump());
  for (const Parameter* p : model.parameters()) {
    io::write_doubles(os, p->value.values());
    io::write_doubles(os, p->m.values());
    io::write_doubles(os, p->v.values());
  }
  if (!os) throw IoError("save_checkpoint: write to '" + path + "' failed");
}

/// Rebuilds the model from the manifest and restores values and optimizer
/// state; gradients start at zero.
inline std::pair<Model, Checkpoint> load_checkpoint(const std::string& path) {
  auto is = io::open_in(path);
  const std::string text = io::read_header(is, "RISNET01", "checkpoint");
  nlohmann::json j;
  Checkpoint ck;
  try {
    j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != Checkpoint::kVersion)
      throw FormatError("checkpoint: unsupported version " + j.at("version").dump());
    if (j.at("dtype") != "f64") throw FormatError("checkpoint: unsupported dtype");
    ck.spec = model_spec_from_json(j.at("spec"));
    ck.epochs_completed = j.at("epochs_completed");
    ck.extra = j.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint '" + path + "': bad manifest: " + e.what());
  }
  Model model(ck.spec);
  const auto params = model.parameters();
  const auto& listed = j.at("params");
  if (listed.size() != params.size())
    throw FormatError("checkpoint '" + path + "': lists " + std::to_string(listed.size()) +
                      " parameters, architecture has " + std::to_string(params.size()));
  std::uint64_t expected = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = listed[i];
    if (e.at("name") != params[i]->name || e.at("shape").get<Shape>() != params[i]->value.shape())
      throw FormatError("checkpoint '" + path + "': parameter " + std::to_string(i) + " is " +
                        e.at("name").get<std::string>() + ", expected " + params[i]->name);
    params[i]->step = e.at("step");
    expected += 3 * params[i]->size() * sizeof(double);
  }
  if (io::remaining_bytes(is) != expected)
    throw FormatError("checkpoint '" + path + "': payload is " +
                      std::to_string(io::remaining_bytes(is)) + " bytes, expected " +
                      std::to_string(expected));
  for (Parameter* p : params) {
    io::read_doubles(is, p->value.values(), "checkpoint");
    io::read_doubles(is, p->m.values(), "checkpoint");
    io::read_doubles(is, p->v.values(), "checkpoint");
    p->zero_grad();
  }
  return {std::move(model), std::move(ck)};
}

}  // namespace risext
