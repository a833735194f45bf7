/* Copyright 2026 The xpuscope Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "xpu/catalog_types.hpp"
#include "xpu/error.hpp"
#include "xpu/workload.hpp"

namespace xpu {

using Json = nlohmann::ordered_json;

namespace detail {

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const bool same = std::tolower(static_cast<unsigned char>(a[i - 1])) ==
                        std::tolower(static_cast<unsigned char>(b[j - 1]));
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (same ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

// Closest names first; only candidates within a third of the key length
// (at least 2 edits) are offered.
inline std::vector<std::string> suggest(std::string_view key,
                                        const std::vector<std::string>& names) {
  const std::size_t budget = std::max<std::size_t>(2, key.size() / 3);
  std::vector<std::pair<std::size_t, std::string>> scored;
  for (const auto& n : names) {
    const auto d = edit_distance(key, n);
    if (d <= budget) scored.emplace_back(d, n);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::string> out;
  for (auto& [d, n] : scored) out.push_back(n);
  return out;
}

inline void reject_unknown_fields(const Json& obj, const std::vector<std::string_view>& allowed,
                                  const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ValidationError(where + ": unknown field '" + it.key() + "'");
  }
}

inline const Json& require(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(where + ": missing field '" + key + "'");
  return *it;
}

inline double require_number(const Json& obj, const char* key, const std::string& where) {
  const Json& v = require(obj, key, where);
  if (!v.is_number()) throw ValidationError(where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

inline std::int64_t require_count(const Json& obj, const char* key, const std::string& where) {
  const double v = require_number(obj, key, where);
  if (v != std::floor(v) || std::abs(v) > 9.0e18)
    throw ValidationError(where + ": field '" + key + "' must be an integer");
  return static_cast<std::int64_t>(v);
}

inline std::string require_string(const Json& obj, const char* key, const std::string& where) {
  const Json& v = require(obj, key, where);
  if (!v.is_string()) throw ValidationError(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace detail

inline AcceleratorSpec platform_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("platform record must be an object");
  const std::string where =
      "platform '" + (j.contains("name") && j["name"].is_string() ? j["name"].get<std::string>()
                                                                  : std::string("?")) + "'";
  detail::reject_unknown_fields(
      j,
      {"name", "peak_flops", "mem_type", "mem_capacity_bytes", "mem_bw_bytes_per_s", "tdp_w",
       "idle_fraction", "prefill_power_fraction", "decode_power_fraction", "die_area_mm2",
       "interconnect_bw_bytes_per_s", "interconnect_latency_s", "allocation_quantum",
       "supported_parallelisms", "precision_note", "hierarchy"},
      where);
  using namespace detail;
  AcceleratorSpec s;
  s.name = require_string(j, "name", where);
  s.peak_flops = require_number(j, "peak_flops", where);
  const std::string mem = require_string(j, "mem_type", where);
  if (mem == "SRAM") s.mem_type = MemoryType::kSram;
  else if (mem == "DRAM") s.mem_type = MemoryType::kDram;
  else throw ValidationError(where + ": mem_type must be SRAM or DRAM");
  s.mem_capacity_bytes = require_number(j, "mem_capacity_bytes", where);
  s.mem_bw_bytes_per_s = require_number(j, "mem_bw_bytes_per_s", where);
  s.tdp_w = require_number(j, "tdp_w", where);
  s.idle_fraction = require_number(j, "idle_fraction", where);
  s.prefill_power_fraction = require_number(j, "prefill_power_fraction", where);
  s.decode_power_fraction = require_number(j, "decode_power_fraction", where);
  s.die_area_mm2 = require_number(j, "die_area_mm2", where);
  s.interconnect_bw_bytes_per_s = require_number(j, "interconnect_bw_bytes_per_s", where);
  s.interconnect_latency_s = require_number(j, "interconnect_latency_s", where);
  s.allocation_quantum = require_count(j, "allocation_quantum", where);
  const Json& par = require(j, "supported_parallelisms", where);
  if (!par.is_array()) throw ValidationError(where + ": supported_parallelisms must be an array");
  for (const auto& p : par) {
    if (p == "TP") s.supported_parallelisms.insert(Parallelism::kTensor);
    else if (p == "PP") s.supported_parallelisms.insert(Parallelism::kPipeline);
    else throw ValidationError(where + ": unknown parallelism " + p.dump());
  }
  if (j.contains("precision_note")) s.precision_note = require_string(j, "precision_note", where);
  if (j.contains("hierarchy") && !j["hierarchy"].is_null()) {
    const Json& h = j["hierarchy"];
    const std::string hw = where + ".hierarchy";
    if (!h.is_object()) throw ValidationError(hw + " must be an object");
    reject_unknown_fields(h, {"cores_per_block", "sram_per_block_bytes", "blocks_per_accelerator"},
                          hw);
    s.hierarchy = BlockHierarchy{require_count(h, "cores_per_block", hw),
                                 require_number(h, "sram_per_block_bytes", hw),
                                 require_count(h, "blocks_per_accelerator", hw)};
  }
  validate(s);
  return s;
}

inline Json to_json(const AcceleratorSpec& s) {
  Json j;
  j["name"] = s.name;
  j["peak_flops"] = s.peak_flops;
  j["mem_type"] = std::string(to_string(s.mem_type));
  j["mem_capacity_bytes"] = s.mem_capacity_bytes;
  j["mem_bw_bytes_per_s"] = s.mem_bw_bytes_per_s;
  j["tdp_w"] = s.tdp_w;
  j["idle_fraction"] = s.idle_fraction;
  j["prefill_power_fraction"] = s.prefill_power_fraction;
  j["decode_power_fraction"] = s.decode_power_fraction;
  j["die_area_mm2"] = s.die_area_mm2;
  j["interconnect_bw_bytes_per_s"] = s.interconnect_bw_bytes_per_s;
  j["interconnect_latency_s"] = s.interconnect_latency_s;
  j["allocation_quantum"] = s.allocation_quantum;
  Json par = Json::array();
  for (auto p : s.supported_parallelisms) par.push_back(std::string(to_string(p)));
  j["supported_parallelisms"] = par;
  j["precision_note"] = s.precision_note;
  if (s.hierarchy) {
    j["hierarchy"] = Json{{"cores_per_block", s.hierarchy->cores_per_block},
                          {"sram_per_block_bytes", s.hierarchy->sram_per_block_bytes},
                          {"blocks_per_accelerator", s.hierarchy->blocks_per_accelerator}};
  } else {
    j["hierarchy"] = nullptr;
  }
  return j;
}

inline LlmModelConfig model_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("model record must be an object");
  const std::string where =
      "model '" + (j.contains("name") && j["name"].is_string() ? j["name"].get<std::string>()
                                                               : std::string("?")) + "'";
  detail::reject_unknown_fields(j,
                                {"name", "n_layers", "d_model", "n_heads", "n_kv_heads", "d_head",
                                 "d_ff", "vocab_size", "n_params", "bytes_per_param",
                                 "bytes_per_kv_elem"},
                                where);
  using namespace detail;
  LlmModelConfig m;
  m.name = require_string(j, "name", where);
  m.n_layers = require_count(j, "n_layers", where);
  m.d_model = require_count(j, "d_model", where);
  m.n_heads = require_count(j, "n_heads", where);
  m.n_kv_heads = require_count(j, "n_kv_heads", where);
  m.d_head = require_count(j, "d_head", where);
  m.d_ff = require_count(j, "d_ff", where);
  m.vocab_size = require_count(j, "vocab_size", where);
  m.n_params = require_count(j, "n_params", where);
  m.bytes_per_param = j.contains("bytes_per_param") ? require_number(j, "bytes_per_param", where) : 2.0;
  m.bytes_per_kv_elem =
      j.contains("bytes_per_kv_elem") ? require_number(j, "bytes_per_kv_elem", where) : 2.0;
  validate_shape(m);
  check_param_count(m);
  return m;
}

inline Json to_json(const LlmModelConfig& m) {
  return Json{{"name", m.name},           {"n_layers", m.n_layers},
              {"d_model", m.d_model},     {"n_heads", m.n_heads},
              {"n_kv_heads", m.n_kv_heads}, {"d_head", m.d_head},
              {"d_ff", m.d_ff},           {"vocab_size", m.vocab_size},
              {"n_params", m.n_params},   {"bytes_per_param", m.bytes_per_param},
              {"bytes_per_kv_elem", m.bytes_per_kv_elem}};
}

// Immutable after construction; share by const reference across threads.
class Catalog {
 public:
  Catalog() = default;
  Catalog(std::vector<AcceleratorSpec> platforms, std::vector<LlmModelConfig> models)
      : platforms_(std::move(platforms)), models_(std::move(models)) {
    if (platforms_.empty()) throw ValidationError("catalog has no platforms");
    if (models_.empty()) throw ValidationError("catalog has no models");
    check_unique(platform_names(), "platform");
    check_unique(model_names(), "model");
  }

  const std::vector<AcceleratorSpec>& platforms() const { return platforms_; }
  const std::vector<LlmModelConfig>& models() const { return models_; }

  const AcceleratorSpec& platform(std::string_view name) const {
    for (const auto& p : platforms_)
      if (p.name == name) return p;
    throw NotFoundError("platform", std::string(name), detail::suggest(name, platform_names()));
  }

  const LlmModelConfig& model(std::string_view name) const {
    for (const auto& m : models_)
      if (m.name == name) return m;
    throw NotFoundError("model", std::string(name), detail::suggest(name, model_names()));
  }

  std::vector<std::string> platform_names() const {
    std::vector<std::string> out;
    for (const auto& p : platforms_) out.push_back(p.name);
    return out;
  }
  std::vector<std::string> model_names() const {
    std::vector<std::string> out;
    for (const auto& m : models_) out.push_back(m.name);
    return out;
  }

  // Content hash of the canonical serialization (FNV-1a 64, hex).
  std::string version() const {
    const std::string text = to_json().dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
      h ^= c;
      h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  Json to_json() const {
    Json j;
    j["platforms"] = Json::array();
    for (const auto& p : platforms_) j["platforms"].push_back(xpu::to_json(p));
    j["models"] = Json::array();
    for (const auto& m : models_) j["models"].push_back(xpu::to_json(m));
    return j;
  }

  bool operator==(const Catalog&) const = default;

 private:
  static void check_unique(std::vector<std::string> names, const char* what) {
    std::sort(names.begin(), names.end());
    auto dup = std::adjacent_find(names.begin(), names.end());
    if (dup != names.end())
      throw ValidationError(std::string("duplicate ") + what + " name '" + *dup + "'");
  }

  std::vector<AcceleratorSpec> platforms_;
  std::vector<LlmModelConfig> models_;
};

inline Catalog catalog_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("catalog must be a JSON object");
  detail::reject_unknown_fields(j, {"platforms", "models"}, "catalog");
  const Json& ps = detail::require(j, "platforms", "catalog");
  const Json& ms = detail::require(j, "models", "catalog");
  if (!ps.is_array() || !ms.is_array())
    throw ValidationError("catalog: 'platforms' and 'models' must be arrays");
  std::vector<AcceleratorSpec> platforms;
  for (const auto& p : ps) platforms.push_back(platform_from_json(p));
  std::vector<LlmModelConfig> models;
  for (const auto& m : ms) models.push_back(model_from_json(m));
  return Catalog(std::move(platforms), std::move(models));
}

inline Catalog parse_catalog(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("catalog is not valid JSON: ") + e.what());
  }
  return catalog_from_json(j);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Catalog load_catalog(const std::filesystem::path& path) {
  return parse_catalog(read_file(path));
}

inline std::string serialize(const Catalog& c) { return c.to_json().dump(2) + "\n"; }

}  // namespace xpu
