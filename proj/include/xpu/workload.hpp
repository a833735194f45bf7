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

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "xpu/catalog_types.hpp"
#include "xpu/error.hpp"

namespace xpu {

enum class Phase { kPrefill, kDecode };

inline std::string_view to_string(Phase p) {
  return p == Phase::kPrefill ? "prefill" : "decode";
}

inline Phase parse_phase(std::string_view s) {
  if (s == "prefill") return Phase::kPrefill;
  if (s == "decode") return Phase::kDecode;
  throw ValidationError("unknown phase '" + std::string(s) + "' (prefill or decode)");
}

struct InferencePoint {
  std::int64_t batch = 1;
  std::int64_t prompt_len = 1;   // s
  std::int64_t context_len = 1;  // t, >= prompt_len
  Phase phase = Phase::kPrefill;

  bool operator==(const InferencePoint&) const = default;
};

inline void validate(const InferencePoint& p) {
  if (p.batch < 1) throw ValidationError("batch must be >= 1");
  if (p.prompt_len < 1) throw ValidationError("prompt_len must be >= 1");
  if (p.context_len < p.prompt_len)
    throw ValidationError("context_len must be >= prompt_len");
}

// Element sizes used when a scenario overrides the model's defaults.
struct PrecisionOverrides {
  std::optional<double> bytes_per_param;
  std::optional<double> bytes_per_kv_elem;
  std::optional<double> bytes_per_act;

  bool operator==(const PrecisionOverrides&) const = default;
};

inline LlmModelConfig with_precision(LlmModelConfig m, const PrecisionOverrides& o) {
  if (o.bytes_per_param) m.bytes_per_param = *o.bytes_per_param;
  if (o.bytes_per_kv_elem) m.bytes_per_kv_elem = *o.bytes_per_kv_elem;
  return m;
}

namespace detail {
using Wide = unsigned __int128;
inline Wide wide(std::int64_t v) { return static_cast<Wide>(v); }
}  // namespace detail

// Prefill FLOPs for a batch of prompts. One multiply-accumulate counts as two
// FLOPs; attention (QK^T and scores*V) carries the causal 1/2 factor:
//   B * (2 * n_params * s + 2 * n_layers * s^2 * d_model)
// Evaluated in 128-bit integers, rounded once to double.
inline double prefill_flops(const LlmModelConfig& m, const InferencePoint& p) {
  validate(p);
  if (p.phase != Phase::kPrefill)
    throw ValidationError("prefill_flops requires a prefill point");
  using detail::wide;
  const auto s = wide(p.prompt_len);
  const auto per_seq = 2 * wide(m.n_params) * s + 2 * wide(m.n_layers) * s * s * wide(m.d_model);
  return static_cast<double>(wide(p.batch) * per_seq);
}

// FLOPs to generate one token for one sequence attending over t tokens.
inline double decode_flops_per_token(const LlmModelConfig& m, std::int64_t context_len) {
  if (context_len < 1) throw ValidationError("context_len must be >= 1");
  using detail::wide;
  return static_cast<double>(2 * wide(m.n_params) +
                             4 * wide(m.n_layers) * wide(context_len) * wide(m.d_model));
}

inline double weight_bytes(const LlmModelConfig& m) {
  return static_cast<double>(m.n_params) * m.bytes_per_param;
}

// K and V for every layer, kv head and position of every sequence in the batch.
inline double kv_cache_bytes(const LlmModelConfig& m, std::int64_t batch,
                             std::int64_t context_len) {
  if (batch < 0 || context_len < 0)
    throw ValidationError("batch and context_len must be non-negative");
  using detail::wide;
  const auto elems = 2 * wide(m.n_layers) * wide(m.n_kv_heads) * wide(m.d_head) *
                     wide(context_len) * wide(batch);
  return static_cast<double>(elems) * m.bytes_per_kv_elem;
}

// Parameter count rebuilt from the layer shapes, independent of n_params.
// Llama-style decoder: untied input embedding and LM head, GQA attention
// projections, gated MLP (gate, up, down), two RMSNorms per layer plus a
// final norm.
inline std::int64_t param_count_oracle(const LlmModelConfig& m) {
  for (auto [v, field] : {std::pair{m.n_layers, "n_layers"}, {m.d_model, "d_model"},
                          {m.n_heads, "n_heads"}, {m.n_kv_heads, "n_kv_heads"},
                          {m.d_head, "d_head"}, {m.d_ff, "d_ff"},
                          {m.vocab_size, "vocab_size"}}) {
    if (v < 1)
      throw ValidationError("model '" + m.name + "': missing shape field " + field,
                            "MissingShape");
  }
  const std::int64_t d = m.d_model;
  const std::int64_t q_dim = m.n_heads * m.d_head;
  const std::int64_t kv_dim = m.n_kv_heads * m.d_head;

  const std::int64_t embeddings = 2 * m.vocab_size * d;
  const std::int64_t attention = d * q_dim + 2 * d * kv_dim + q_dim * d;
  const std::int64_t mlp = 3 * d * m.d_ff;
  const std::int64_t norms = 2 * d;
  return embeddings + m.n_layers * (attention + mlp + norms) + d;
}

inline constexpr double kParamCountTolerance = 0.02;

inline void check_param_count(const LlmModelConfig& m) {
  const double oracle = static_cast<double>(param_count_oracle(m));
  const double rel = std::abs(oracle - static_cast<double>(m.n_params)) / oracle;
  if (rel > kParamCountTolerance) {
    throw ValidationError("model '" + m.name + "': n_params " + std::to_string(m.n_params) +
                          " differs from shape-derived count " +
                          std::to_string(static_cast<std::int64_t>(oracle)) + " by more than 2%");
  }
}

}  // namespace xpu
