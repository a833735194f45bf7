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

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "xpu/error.hpp"

namespace xpu {

enum class MemoryType { kSram, kDram };
enum class Parallelism { kTensor, kPipeline };

inline std::string_view to_string(MemoryType t) {
  return t == MemoryType::kSram ? "SRAM" : "DRAM";
}
inline std::string_view to_string(Parallelism p) {
  return p == Parallelism::kTensor ? "TP" : "PP";
}

// Block / accelerator abstraction: a block is a group of compute cores with
// private SRAM; an accelerator is a collection of blocks.
struct BlockHierarchy {
  std::int64_t cores_per_block = 1;
  double sram_per_block_bytes = 0.0;
  std::int64_t blocks_per_accelerator = 1;

  bool operator==(const BlockHierarchy&) const = default;
};

// One accelerator platform. Memory fields describe the *accessible working
// memory*, the tier that holds weights and KV cache (SRAM on wafer-scale and
// LPU parts, HBM/DRAM elsewhere).
struct AcceleratorSpec {
  std::string name;
  double peak_flops = 0.0;  // FLOP/s, dense
  MemoryType mem_type = MemoryType::kDram;
  double mem_capacity_bytes = 0.0;
  double mem_bw_bytes_per_s = 0.0;
  double tdp_w = 0.0;
  double idle_fraction = 0.0;
  double prefill_power_fraction = 0.0;
  double decode_power_fraction = 0.0;
  double die_area_mm2 = 0.0;
  double interconnect_bw_bytes_per_s = 0.0;
  double interconnect_latency_s = 0.0;
  std::int64_t allocation_quantum = 1;
  std::set<Parallelism> supported_parallelisms;
  std::string precision_note;
  std::optional<BlockHierarchy> hierarchy;

  bool supports(Parallelism p) const {
    return supported_parallelisms.count(p) != 0;
  }
  // Arithmetic intensity where the roofline turns from bandwidth- to compute-bound.
  double ridge_point() const { return peak_flops / mem_bw_bytes_per_s; }

  bool operator==(const AcceleratorSpec&) const = default;
};

struct LlmModelConfig {
  std::string name;
  std::int64_t n_layers = 0;
  std::int64_t d_model = 0;
  std::int64_t n_heads = 0;
  std::int64_t n_kv_heads = 0;
  std::int64_t d_head = 0;
  std::int64_t d_ff = 0;
  std::int64_t vocab_size = 0;
  std::int64_t n_params = 0;
  double bytes_per_param = 2.0;
  double bytes_per_kv_elem = 2.0;

  bool operator==(const LlmModelConfig&) const = default;
};

// Structural invariants of a platform record. Throws ValidationError naming
// the record and the violated invariant.
inline void validate(const AcceleratorSpec& s) {
  auto fail = [&](const std::string& what) {
    throw ValidationError("platform '" + s.name + "': " + what);
  };
  if (s.name.empty()) throw ValidationError("platform with empty name");
  if (!(s.peak_flops > 0)) fail("peak_flops must be > 0");
  if (!(s.mem_capacity_bytes > 0)) fail("mem_capacity_bytes must be > 0");
  if (!(s.mem_bw_bytes_per_s > 0)) fail("mem_bw_bytes_per_s must be > 0");
  if (!(s.tdp_w > 0)) fail("tdp_w must be > 0");
  if (!(s.idle_fraction >= 0)) fail("idle_fraction must be >= 0");
  if (!(s.idle_fraction <= s.decode_power_fraction))
    fail("idle_fraction must be <= decode_power_fraction");
  if (!(s.decode_power_fraction <= 1)) fail("decode_power_fraction must be <= 1");
  if (!(s.prefill_power_fraction >= 0 && s.prefill_power_fraction <= 1))
    fail("prefill_power_fraction must be in [0, 1]");
  if (s.die_area_mm2 < 0) fail("die_area_mm2 must be >= 0");
  if (s.interconnect_bw_bytes_per_s < 0) fail("interconnect_bw_bytes_per_s must be >= 0");
  if (s.interconnect_latency_s < 0) fail("interconnect_latency_s must be >= 0");
  if (s.allocation_quantum < 1) fail("allocation_quantum must be >= 1");
  if (s.supported_parallelisms.empty()) fail("supported_parallelisms must be non-empty");
  if (s.hierarchy) {
    if (s.hierarchy->cores_per_block < 1 || s.hierarchy->blocks_per_accelerator < 1 ||
        s.hierarchy->sram_per_block_bytes < 0)
      fail("hierarchy fields must be positive");
  }
}

// Shape invariants of a model record (the parameter-count cross-check lives in
// the catalog loader, which has the workload oracle available).
inline void validate_shape(const LlmModelConfig& m) {
  auto fail = [&](const std::string& what) {
    throw ValidationError("model '" + m.name + "': " + what);
  };
  if (m.name.empty()) throw ValidationError("model with empty name");
  for (auto [v, field] : {std::pair{m.n_layers, "n_layers"}, {m.d_model, "d_model"},
                          {m.n_heads, "n_heads"}, {m.n_kv_heads, "n_kv_heads"},
                          {m.d_head, "d_head"}, {m.d_ff, "d_ff"},
                          {m.vocab_size, "vocab_size"}, {m.n_params, "n_params"}}) {
    if (v < 1) fail(std::string(field) + " must be >= 1");
  }
  if (m.d_model != m.n_heads * m.d_head) fail("d_model must equal n_heads * d_head");
  if (m.n_heads % m.n_kv_heads != 0) fail("n_kv_heads must divide n_heads");
  if (!(m.bytes_per_param > 0)) fail("bytes_per_param must be > 0");
  if (!(m.bytes_per_kv_elem > 0)) fail("bytes_per_kv_elem must be > 0");
}

}  // namespace xpu
