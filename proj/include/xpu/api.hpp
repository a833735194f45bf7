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

// Request handlers shared by the CLI and the HTTP service. Both front ends
// build a parameter object, call dispatch(), and print the returned envelope,
// so their JSON output is identical for identical requests.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "xpu/catalog.hpp"
#include "xpu/comparator.hpp"
#include "xpu/distmodel.hpp"
#include "xpu/error.hpp"
#include "xpu/explorer.hpp"
#include "xpu/traces.hpp"
#include "xpu/workload.hpp"

namespace xpu::api {

struct Context {
  Catalog catalog;
  std::filesystem::path data_dir;  // bundled measurement files
};

struct Response {
  Json envelope;
  std::string csv;  // optional plot-ready table; empty when the command has none
};

struct ApiError {
  int status = 500;
  std::string code = "internal";
  std::string name = "Internal";
  std::string message;
  std::string reason;  // set for infeasible results

  Json to_json() const {
    Json j{{"status", status}, {"code", code}, {"error", name}, {"message", message}};
    if (!reason.empty()) j["reason"] = reason;
    return j;
  }
};

inline ApiError classify(const std::exception& e) {
  ApiError out;
  out.message = e.what();
  if (const auto* x = dynamic_cast<const Error*>(&e)) {
    out.code = std::string(to_string(x->kind()));
    out.name = x->name();
    switch (x->kind()) {
      case ErrorKind::kParse:
      case ErrorKind::kValidation: out.status = 400; break;
      case ErrorKind::kNotFound: out.status = 404; break;
      case ErrorKind::kInfeasible:
        out.status = 422;
        out.reason = static_cast<const InfeasibleError*>(x)->reason();
        break;
      case ErrorKind::kInternal: out.status = 500; break;
    }
  } else if (dynamic_cast<const nlohmann::json::exception*>(&e)) {
    out.status = 400;
    out.code = "validation";
    out.name = "ValidationError";
  }
  return out;
}

// CLI exit status for an error: 2 for infeasibility, 1 otherwise.
inline int exit_code(const ApiError& e) { return e.code == "infeasible" ? 2 : 1; }

// ---------------------------------------------------------------------------
// Parameter access. Values may arrive as JSON numbers (CLI, POST bodies) or as
// strings (query parameters); every getter normalizes and records what it
// used, and that record is what the envelope echoes.

class Params {
 public:
  Params(const Json& j, std::initializer_list<std::string_view> allowed) : j_(j) {
    if (j_.is_null()) j_ = Json::object();
    if (!j_.is_object()) throw ValidationError("request parameters must be a JSON object");
    for (const auto& [k, v] : j_.items()) {
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
        std::vector<std::string> names(allowed.begin(), allowed.end());
        throw ValidationError("unknown parameter '" + k + "'" + hint(k, names));
      }
    }
  }

  bool has(std::string_view key) const {
    auto it = j_.find(key);
    return it != j_.end() && !it->is_null();
  }

  std::optional<std::string> opt_string(std::string_view key) {
    if (!has(key)) return std::nullopt;
    const auto& v = j_.at(std::string(key));
    if (!v.is_string()) throw ValidationError("parameter '" + std::string(key) + "' must be a string");
    echo_[std::string(key)] = v;
    return v.get<std::string>();
  }
  std::string string(std::string_view key) {
    auto v = opt_string(key);
    if (!v) throw ValidationError("missing parameter '" + std::string(key) + "'");
    return *v;
  }
  std::string string(std::string_view key, std::string def) {
    auto v = opt_string(key);
    if (!v) echo_[std::string(key)] = def;
    return v.value_or(std::move(def));
  }

  // Large text payloads (CSV bodies) are echoed by size only.
  std::optional<std::string> opt_text(std::string_view key) {
    if (!has(key)) return std::nullopt;
    const auto& v = j_.at(std::string(key));
    if (!v.is_string()) throw ValidationError("parameter '" + std::string(key) + "' must be a string");
    echo_[std::string(key) + "_bytes"] = v.get_ref<const std::string&>().size();
    return v.get<std::string>();
  }

  std::optional<std::int64_t> opt_int(std::string_view key) {
    if (!has(key)) return std::nullopt;
    const auto v = to_int(j_.at(std::string(key)), key);
    echo_[std::string(key)] = v;
    return v;
  }
  std::int64_t integer(std::string_view key) {
    auto v = opt_int(key);
    if (!v) throw ValidationError("missing parameter '" + std::string(key) + "'");
    return *v;
  }
  std::int64_t integer(std::string_view key, std::int64_t def) {
    auto v = opt_int(key);
    if (!v) echo_[std::string(key)] = def;
    return v.value_or(def);
  }

  std::optional<double> opt_number(std::string_view key) {
    if (!has(key)) return std::nullopt;
    const auto v = to_double(j_.at(std::string(key)), key);
    echo_[std::string(key)] = v;
    return v;
  }
  double number(std::string_view key) {
    auto v = opt_number(key);
    if (!v) throw ValidationError("missing parameter '" + std::string(key) + "'");
    return *v;
  }
  double number(std::string_view key, double def) {
    auto v = opt_number(key);
    if (!v) echo_[std::string(key)] = def;
    return v.value_or(def);
  }

  bool boolean(std::string_view key, bool def) {
    bool v = def;
    if (has(key)) {
      const auto& x = j_.at(std::string(key));
      if (x.is_boolean()) v = x.get<bool>();
      else if (x.is_string() && (x == "true" || x == "1")) v = true;
      else if (x.is_string() && (x == "false" || x == "0")) v = false;
      else throw ValidationError("parameter '" + std::string(key) + "' must be a boolean");
    }
    echo_[std::string(key)] = v;
    return v;
  }

  // Array of strings or a comma-separated string. Absent yields `def`.
  std::vector<std::string> strings(std::string_view key, std::vector<std::string> def = {}) {
    std::vector<std::string> out;
    if (!has(key)) {
      out = std::move(def);
    } else {
      for (const auto& item : elements(j_.at(std::string(key)), key)) {
        if (!item.is_string())
          throw ValidationError("parameter '" + std::string(key) + "' must list strings");
        out.push_back(item.get<std::string>());
      }
    }
    echo_[std::string(key)] = out;
    return out;
  }

  std::vector<std::int64_t> integers(std::string_view key, std::vector<std::int64_t> def = {}) {
    std::vector<std::int64_t> out;
    if (!has(key)) {
      out = std::move(def);
    } else {
      for (const auto& item : elements(j_.at(std::string(key)), key)) out.push_back(to_int(item, key));
    }
    if (out.empty()) throw ValidationError("parameter '" + std::string(key) + "' must not be empty");
    echo_[std::string(key)] = out;
    return out;
  }

  const Json& raw(std::string_view key) const { return j_.at(std::string(key)); }
  void echo(std::string key, Json v) { echo_[std::move(key)] = std::move(v); }
  const Json& echoed() const { return echo_; }

 private:
  static std::string hint(const std::string& key, const std::vector<std::string>& names) {
    auto s = detail::suggest(key, names);
    return s.empty() ? "" : "; did you mean '" + s.front() + "'?";
  }

  static std::vector<Json> elements(const Json& v, std::string_view key) {
    std::vector<Json> out;
    if (v.is_array()) {
      for (const auto& x : v) out.push_back(x);
    } else if (v.is_string()) {
      for (auto part : csv::split(v.get_ref<const std::string&>()))
        if (!part.empty()) out.emplace_back(std::string(part));
    } else {
      out.push_back(v);
    }
    if (out.empty()) throw ValidationError("parameter '" + std::string(key) + "' must not be empty");
    return out;
  }

  static std::int64_t to_int(const Json& v, std::string_view key) {
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d == std::floor(d) && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
    }
    if (v.is_string()) {
      const auto& s = v.get_ref<const std::string&>();
      std::int64_t out = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      if (ec == std::errc() && ptr == s.data() + s.size() && !s.empty()) return out;
    }
    throw ValidationError("parameter '" + std::string(key) + "' must be an integer");
  }

  static double to_double(const Json& v, std::string_view key) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const auto& s = v.get_ref<const std::string&>();
      return csv::to_double(s, 0, key);
    }
    throw ValidationError("parameter '" + std::string(key) + "' must be a number");
  }

  Json j_;
  Json echo_ = Json::object();
};

inline PrecisionOverrides read_precision(Params& p) {
  PrecisionOverrides o;
  o.bytes_per_param = p.opt_number("bytes_per_param");
  o.bytes_per_kv_elem = p.opt_number("bytes_per_kv_elem");
  o.bytes_per_act = p.opt_number("bytes_per_act");
  return o;
}

inline std::vector<std::string> all_platforms(const Catalog& c) {
  std::vector<std::string> out;
  for (const auto& p : c.platforms()) out.push_back(p.name);
  return out;
}

inline std::vector<AcceleratorSpec> resolve_platforms(const Catalog& c,
                                                      const std::vector<std::string>& names) {
  std::vector<AcceleratorSpec> out;
  for (const auto& n : names) out.push_back(c.platform(n));
  return out;
}

inline Response envelope(const Context& ctx, std::string_view command, const Params& params,
                         Json results, const std::vector<std::string>& warnings = {},
                         std::string csv = {}) {
  Json env{{"command", std::string(command)},
           {"catalog_version", ctx.catalog.version()},
           {"parameters", params.echoed()},
           {"results", std::move(results)},
           {"warnings", warnings}};
  return {std::move(env), std::move(csv)};
}

inline Json read_json_file(const std::filesystem::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Handlers

inline Response platforms(const Context& ctx, const Json& j) {
  Params p(j, {});
  Json out = Json::array();
  for (const auto& s : ctx.catalog.platforms()) out.push_back(to_json(s));
  return envelope(ctx, "platforms", p, std::move(out));
}

inline Response models(const Context& ctx, const Json& j) {
  Params p(j, {});
  Json out = Json::array();
  for (const auto& m : ctx.catalog.models()) out.push_back(to_json(m));
  return envelope(ctx, "models", p, std::move(out));
}

inline Response roofline(const Context& ctx, const Json& j) {
  Params p(j, {"platforms", "ai_min", "ai_max", "samples"});
  const auto names = p.strings("platforms", all_platforms(ctx.catalog));
  const double lo = p.number("ai_min", 0.01);
  const double hi = p.number("ai_max", 1e4);
  const auto n = p.integer("samples", 100);
  if (n < 2 || n > 100000) throw ValidationError("samples must be in [2, 100000]");
  const auto ai = log_spaced(lo, hi, static_cast<int>(n));
  std::vector<Roofline> rs;
  Json out = Json::array();
  for (const auto& s : resolve_platforms(ctx.catalog, names)) {
    rs.push_back(xpu::roofline(s, ai));
    out.push_back(to_json(rs.back()));
  }
  return envelope(ctx, "roofline", p, std::move(out), {}, to_csv(rs));
}

inline Response equiv(const Context& ctx, const Json& j) {
  Params p(j, {"metric", "platforms"});
  const auto metric = parse_equiv_metric(p.string("metric"));
  p.echo("metric", std::string(to_string(metric)));
  const auto names = p.strings("platforms", all_platforms(ctx.catalog));
  const auto m = equivalency_matrix(metric, resolve_platforms(ctx.catalog, names));
  return envelope(ctx, "equiv", p, to_json(m), {}, to_csv(m));
}

inline Response scaleout(const Context& ctx, const Json& j) {
  Params p(j, {"model", "platforms", "batch", "context_len", "headroom", "max_devices",
               "bytes_per_param", "bytes_per_kv_elem", "reference"});
  const auto& base = ctx.catalog.model(p.string("model"));
  const auto names = p.strings("platforms", all_platforms(ctx.catalog));
  const auto batch = p.integer("batch", 1);
  const auto ctx_len = p.integer("context_len");
  const double headroom = p.number("headroom", 0.9);
  const auto max_devices = p.integer("max_devices", 4096);
  PrecisionOverrides prec;
  prec.bytes_per_param = p.opt_number("bytes_per_param");
  prec.bytes_per_kv_elem = p.opt_number("bytes_per_kv_elem");
  const bool with_reference = p.boolean("reference", false);
  if (batch < 1 || ctx_len < 1) throw ValidationError("batch and context_len must be >= 1");

  Json reference = nullptr;
  if (with_reference) reference = read_json_file(ctx.data_dir / "scaleout_reference.json");

  std::vector<std::string> warnings;
  Json rows = Json::array();
  std::size_t feasible = 0;
  std::optional<InfeasibleError> last_error;
  auto add_row = [&](const AcceleratorSpec& s, const std::string& label, const PrecisionOverrides& o) {
    const auto m = with_precision(base, o);
    Json row{{"platform", s.name},
             {"precision", label},
             {"bytes_per_param", m.bytes_per_param},
             {"bytes_per_kv_elem", m.bytes_per_kv_elem},
             {"resident_bytes", resident_bytes(m, batch, ctx_len)},
             {"usable_bytes_per_device", s.mem_capacity_bytes * headroom}};
    try {
      row["min_devices"] = min_devices(s, m, batch, ctx_len, headroom, max_devices);
      row["feasible"] = true;
      row["reason"] = "";
      ++feasible;
    } catch (const InfeasibleError& e) {
      row["min_devices"] = nullptr;
      row["feasible"] = false;
      row["reason"] = e.reason();
      last_error = e;
    }
    if (with_reference) {
      const auto& pub = reference["published_counts"];
      if (pub.contains(s.name)) {
        const bool match = row["min_devices"].is_number() &&
                           row["min_devices"].get<std::int64_t>() == pub[s.name].get<std::int64_t>();
        row["published_devices"] = pub[s.name];
        row["matches_published"] = match;
      }
    }
    rows.push_back(std::move(row));
  };

  for (const auto& s : resolve_platforms(ctx.catalog, names)) {
    add_row(s, prec.bytes_per_param || prec.bytes_per_kv_elem ? "override" : "catalog", prec);
    if (with_reference && reference["precision_settings"].contains(s.name)) {
      for (const auto& setting : reference["precision_settings"][s.name]) {
        PrecisionOverrides o;
        o.bytes_per_param = setting["bytes_per_param"].get<double>();
        o.bytes_per_kv_elem = setting["bytes_per_kv_elem"].get<double>();
        add_row(s, setting["label"].get<std::string>(), o);
      }
    }
  }
  if (feasible == 0 && last_error && rows.size() == 1) throw *last_error;

  Json results{{"model", base.name}, {"rows", rows}};
  if (with_reference) {
    results["reference"] = Json{{"description", reference["description"]},
                                {"published_device_range", reference["published_device_range"]},
                                {"published_counts", reference["published_counts"]}};
    for (const auto& row : rows) {
      if (row.contains("matches_published") && !row["matches_published"].get<bool>() &&
          row["precision"] == "catalog") {
        warnings.push_back(row["platform"].get<std::string>() + " at catalog precision needs " +
                           row["min_devices"].dump() + " devices; the published count is " +
                           row["published_devices"].dump() +
                           " (see the documented precision settings)");
      }
    }
  }
  return envelope(ctx, "scaleout", p, std::move(results), warnings);
}

inline InferencePoint read_point(Params& p, Phase default_phase = Phase::kDecode) {
  InferencePoint pt;
  pt.batch = p.integer("batch", 1);
  pt.context_len = p.integer("context_len");
  pt.prompt_len = p.integer("prompt_len", pt.context_len);
  pt.phase = parse_phase(p.string("phase", std::string(to_string(default_phase))));
  validate(pt);
  return pt;
}

inline Response estimate(const Context& ctx, const Json& j) {
  Params p(j, {"platform", "model", "batch", "context_len", "prompt_len", "phase", "mode", "tp",
               "pp", "headroom", "max_devices", "bytes_per_param", "bytes_per_kv_elem",
               "bytes_per_act"});
  const auto& plat = ctx.catalog.platform(p.string("platform"));
  const auto& model = ctx.catalog.model(p.string("model"));
  const auto point = read_point(p);
  const auto mode = parse_comm_mode(p.string("mode", "realistic"));
  const auto tp = p.opt_int("tp");
  const auto pp = p.opt_int("pp");
  ScenarioOptions opts;
  opts.headroom = p.number("headroom", 0.9);
  opts.max_devices = p.integer("max_devices", 4096);
  opts.precision = read_precision(p);
  validate(opts);

  std::vector<std::string> warnings;
  ScenarioEstimate e;
  if (tp || pp) {
    e = xpu::estimate(plat, model, point, {tp.value_or(1), pp.value_or(1)}, mode, opts);
  } else {
    // No plan given: the lowest-latency feasible plan (energy breaks ties).
    const auto all = evaluate_scenario(plat, model, point, mode, opts);
    e = all.front();
    for (const auto& c : all) {
      if (!c.feasible) continue;
      const double lc = c.latency(point.phase), le = e.latency(point.phase);
      if (!e.feasible || lc < le ||
          (lc == le && c.energy_per_token(point.phase) < e.energy_per_token(point.phase)))
        e = c;
    }
    warnings.push_back("plan chosen automatically: lowest " +
                       std::string(point.phase == Phase::kPrefill ? "TTFT" : "TPOT") + " over " +
                       std::to_string(all.size()) + " candidate plans");
  }
  require_feasible(e);
  return envelope(ctx, "estimate", p, to_json(e), warnings, to_csv(std::vector{e}));
}

inline SweepSpec read_sweep_spec(const Context& ctx, Params& p) {
  SweepSpec s;
  s.platforms = p.strings("platforms", all_platforms(ctx.catalog));
  s.models = p.strings("models");
  if (s.models.empty()) throw ValidationError("missing parameter 'models'");
  s.batches = p.integers("batches");
  s.context_lens = p.integers("context_lens");
  s.phases.clear();
  for (const auto& ph : p.strings("phases", {"prefill", "decode"})) s.phases.push_back(parse_phase(ph));
  const auto mode = p.string("mode", "both");
  if (mode == "both") s.mode = ModeSelection::kBoth;
  else s.mode = parse_comm_mode(mode) == CommMode::kOptimistic ? ModeSelection::kOptimistic
                                                               : ModeSelection::kRealistic;
  s.headroom = p.number("headroom", 0.9);
  s.overrides = read_precision(p);
  if (p.has("platform_overrides")) {
    const Json& po = p.raw("platform_overrides");
    if (!po.is_object()) throw ValidationError("platform_overrides must be an object");
    for (const auto& [name, v] : po.items()) {
      ctx.catalog.platform(name);
      Params sub(v, {"bytes_per_param", "bytes_per_kv_elem", "bytes_per_act"});
      s.platform_overrides[name] = read_precision(sub);
    }
    p.echo("platform_overrides", po);
  }
  validate(s);
  return s;
}

// Frontiers for every (model, batch, context, phase, mode) point of a sweep.
inline Json sweep_frontiers(const SweepSpec& spec, const std::vector<ScenarioEstimate>& est,
                            Json* infeasible) {
  Json out = Json::array();
  for (const auto& model : spec.models)
    for (auto b : spec.batches)
      for (auto t : spec.context_lens)
        for (auto ph : spec.phases)
          for (auto mode : modes_of(spec.mode)) {
            std::vector<ScenarioEstimate> cell;
            for (const auto& e : est) {
              if (e.model != model || e.point.batch != b || e.point.context_len != t ||
                  e.point.phase != ph || e.mode != mode)
                continue;
              if (e.feasible) {
                cell.push_back(e);
              } else if (infeasible) {
                infeasible->push_back(Json{{"platform", e.platform},
                                           {"model", e.model},
                                           {"batch", b},
                                           {"context_len", t},
                                           {"phase", std::string(to_string(ph))},
                                           {"mode", std::string(to_string(mode))},
                                           {"reason", e.reason}});
              }
            }
            const auto f = xpu::frontier(cell, ph, mode);
            Json fj{{"model", model},
                    {"batch", b},
                    {"context_len", t},
                    {"mode", std::string(to_string(mode))}};
            const Json fj_body = to_json(f);
            for (const auto& [k, v] : fj_body.items()) fj[k] = v;
            out.push_back(std::move(fj));
          }
  return out;
}

inline Response sweep(const Context& ctx, const Json& j) {
  Params p(j, {"platforms", "models", "batches", "context_lens", "phases", "mode", "headroom",
               "bytes_per_param", "bytes_per_kv_elem", "bytes_per_act", "platform_overrides"});
  const auto spec = read_sweep_spec(ctx, p);
  const auto est = run_sweep(ctx.catalog, spec);
  Json estimates = Json::array();
  for (const auto& e : est) estimates.push_back(to_json(e));
  Json infeasible = Json::array();
  Json frontiers = sweep_frontiers(spec, est, &infeasible);
  Json results{{"estimates", std::move(estimates)},
               {"frontiers", std::move(frontiers)},
               {"infeasible", std::move(infeasible)}};
  return envelope(ctx, "sweep", p, std::move(results), {}, to_csv(est));
}

inline Response frontier(const Context& ctx, const Json& j) {
  Params p(j, {"platforms", "model", "batch", "context_len", "phase", "mode", "headroom",
               "bytes_per_param", "bytes_per_kv_elem", "bytes_per_act"});
  SweepSpec s;
  s.platforms = p.strings("platforms", all_platforms(ctx.catalog));
  s.models = {p.string("model")};
  s.batches = {p.integer("batch", 1)};
  s.context_lens = {p.integer("context_len")};
  s.phases = {parse_phase(p.string("phase", "decode"))};
  const auto mode = p.string("mode", "both");
  if (mode == "both") s.mode = ModeSelection::kBoth;
  else s.mode = parse_comm_mode(mode) == CommMode::kOptimistic ? ModeSelection::kOptimistic
                                                               : ModeSelection::kRealistic;
  s.headroom = p.number("headroom", 0.9);
  s.overrides = read_precision(p);
  validate(s);
  const auto est = run_sweep(ctx.catalog, s);
  Json infeasible = Json::array();
  Json frontiers = sweep_frontiers(s, est, &infeasible);
  Json members = Json::object();
  std::string csv;
  for (auto m : modes_of(s.mode)) {
    const auto f = xpu::frontier(est, s.phases.front(), m);
    std::set<std::string> names;
    for (const auto& pt : f.points) names.insert(pt.platform);
    members[std::string(to_string(m))] = names;
    csv += to_csv(f);
  }
  Json results{{"members", std::move(members)},
               {"frontiers", std::move(frontiers)},
               {"infeasible", std::move(infeasible)}};
  return envelope(ctx, "frontier", p, std::move(results), {}, csv);
}

inline Response trace(const Context& ctx, const Json& j) {
  Params p(j, {"csv", "platform", "idle_hint_w", "threshold_multiplier", "merge_gap_periods",
               "tdp_w"});
  auto tr = parse_power_trace_csv(p.opt_text("csv").value_or(""));
  if (auto name = p.opt_string("platform")) tr.platform = *name;
  SegmentationOptions opts;
  opts.idle_power_hint_w = p.opt_number("idle_hint_w");
  opts.threshold_multiplier = p.number("threshold_multiplier", 1.15);
  opts.merge_gap_periods = p.number("merge_gap_periods", 2.0);
  if (!(opts.threshold_multiplier > 0) || opts.merge_gap_periods < 0)
    throw ValidationError("threshold_multiplier must be > 0 and merge_gap_periods >= 0");

  std::vector<std::string> warnings;
  std::optional<double> tdp = p.opt_number("tdp_w");
  if (!tdp && !tr.platform.empty()) {
    const auto names = ctx.catalog.platform_names();
    if (std::find(names.begin(), names.end(), tr.platform) != names.end())
      tdp = ctx.catalog.platform(tr.platform).tdp_w;
    else
      warnings.push_back("platform '" + tr.platform + "' is not in the catalog; fractions of TDP omitted");
  }
  const auto seg = segment_trace(tr, opts, tdp);
  if (seg.ambiguous) {
    warnings.push_back("AmbiguousPhases: " + std::to_string(seg.burst_count) +
                       " bursts found; segments left unlabeled as transition");
  }
  Json results{{"platform", tr.platform},
               {"tdp_w", tdp ? Json(*tdp) : Json(nullptr)},
               {"n_samples", tr.samples.size()},
               {"sample_period_s", tr.sample_period_s}};
  const Json seg_json = to_json(seg);
  for (const auto& [k, v] : seg_json.items()) results[k] = v;
  auto frac = [&](SegmentPhase ph) {
    const auto s = seg.first(ph);
    return s && tdp ? Json(s->fraction_of_tdp) : Json(nullptr);
  };
  results["prefill_fraction_of_tdp"] = frac(SegmentPhase::kPrefill);
  results["decode_fraction_of_tdp"] = frac(SegmentPhase::kDecode);

  std::string csv = "phase,start_s,end_s,peak_power_w,mean_power_w,energy_j\n";
  for (const auto& s : seg.segments) {
    csv += std::string(to_string(s.phase)) + "," + Json(s.start_s).dump() + "," +
           Json(s.end_s).dump() + "," + Json(s.peak_power_w).dump() + "," +
           Json(s.mean_power_w).dump() + "," + Json(phase_energy(s)).dump() + "\n";
  }
  return envelope(ctx, "trace", p, std::move(results), warnings, csv);
}

inline Response commenergy(const Context& ctx, const Json& j) {
  Params p(j, {"csv", "reference", "cycles_csv", "platform", "p_benchmark_w", "p_idle_w",
               "duration_s", "bytes", "distance_mm"});
  Json results;
  std::string csv;
  if (auto text = p.opt_text("csv")) {
    const auto report = comm_energy_report(parse_comm_energy_csv(*text), p.string("reference", "CS-3"));
    results = to_json(report);
    csv = "platform,distance_mm,joules,joules_per_byte,ratio_to_reference\n";
    for (const auto& r : report.rows) {
      csv += r.measurement.platform + "," +
             (r.measurement.distance_mm ? Json(*r.measurement.distance_mm).dump() : "") + "," +
             Json(r.energy.joules).dump() + "," + Json(r.energy.joules_per_byte).dump() + "," +
             (r.ratio_to_reference ? Json(*r.ratio_to_reference).dump() : "") + "\n";
    }
  } else {
    CommEnergyMeasurement m;
    m.platform = p.string("platform", "");
    m.p_benchmark_w = p.number("p_benchmark_w");
    m.p_idle_w = p.number("p_idle_w");
    m.duration_s = p.number("duration_s");
    m.bytes = p.number("bytes");
    m.distance_mm = p.opt_number("distance_mm");
    const auto e = comm_energy(m);
    results = Json{{"platform", m.platform},
                   {"joules", e.joules},
                   {"joules_per_byte", e.joules_per_byte},
                   {"note", "energy = (p_benchmark_w - p_idle_w) * duration_s; joules_per_byte = energy / bytes"}};
  }
  if (auto text = p.opt_text("cycles_csv")) {
    std::vector<std::pair<double, double>> table;
    const auto fit = fit_cycles_vs_distance(*text, &table);
    Json rows = Json::array();
    for (const auto& [d, c] : table) rows.push_back(Json{{"distance_mm", d}, {"cycles", c}});
    results["cycles_vs_distance"] = Json{{"rows", rows},
                                         {"slope_cycles_per_mm", fit.slope},
                                         {"intercept_cycles", fit.intercept},
                                         {"r_squared", fit.r_squared}};
  }
  return envelope(ctx, "commenergy", p, std::move(results), {}, csv);
}

inline Response bench(const Context& ctx, const Json& j) {
  Params p(j, {"csv", "latency_csv", "baseline", "metric", "platforms"});
  const auto baseline = p.string("baseline", "H100");
  Json results = Json::object();
  std::string csv;
  const bool has_bench = p.has("csv"), has_latency = p.has("latency_csv");
  if (!has_bench && !has_latency) throw ValidationError("provide 'csv' and/or 'latency_csv'");
  if (has_bench) {
    auto records = parse_bench_csv(*p.opt_text("csv"));
    const auto keep = p.strings("platforms", {"*"});
    if (keep != std::vector<std::string>{"*"}) {
      std::erase_if(records, [&](const BenchRecord& r) {
        return std::find(keep.begin(), keep.end(), r.platform) == keep.end();
      });
    }
    const auto m = speedup_matrix(records, baseline, parse_bench_metric(p.string("metric", "latency")));
    results["speedup"] = to_json(m);
    csv = "op,shape,platform,ratio\n";
    for (const auto& e : m.entries)
      csv += e.op + "," + e.shape + "," + e.platform + "," + (e.ratio ? Json(*e.ratio).dump() : "") + "\n";
  }
  if (has_latency) {
    const auto rep = latency_report(parse_latency_csv(*p.opt_text("latency_csv")), baseline);
    Json by_model = Json::object();
    for (const auto& [model, row] : rep) {
      Json r = Json::object();
      for (const auto& [plat, v] : row) r[plat] = v;
      by_model[model] = r;
    }
    results["latency_per_token"] = Json{{"baseline", baseline}, {"by_model", by_model}};
  }
  return envelope(ctx, "bench", p, std::move(results), {}, csv);
}

inline DutyCycleSide read_side(const Context& ctx, const Json& j, std::string_view which, Json* echo) {
  Params p(j, {"platform", "n_devices", "throughput_tok_s", "active_phase", "active_fraction"});
  const auto& spec = ctx.catalog.platform(p.string("platform"));
  const auto n = p.integer("n_devices", 1);
  const double thr = p.number("throughput_tok_s");
  double active = 0.0;
  if (auto f = p.opt_number("active_fraction")) {
    active = *f;
  } else {
    const auto ph = parse_phase(p.string("active_phase", "decode"));
    active = ph == Phase::kPrefill ? spec.prefill_power_fraction : spec.decode_power_fraction;
  }
  if (n < 1) throw ValidationError(std::string(which) + ".n_devices must be >= 1", "DegenerateInputs");
  *echo = p.echoed();
  return duty_side(spec, n, thr, active);
}

inline Response dutycycle(const Context& ctx, const Json& j) {
  Params p(j, {"a", "b", "published_duty_cycle"});
  if (!p.has("a") || !p.has("b")) throw ValidationError("parameters 'a' and 'b' are required");
  Json ea, eb;
  const auto a = read_side(ctx, p.raw("a"), "a", &ea);
  const auto b = read_side(ctx, p.raw("b"), "b", &eb);
  p.echo("a", ea);
  p.echo("b", eb);
  const auto published = p.opt_number("published_duty_cycle");
  const double d = duty_cycle_parity(a, b);
  auto side = [](const DutyCycleSide& s) {
    return Json{{"platform", s.platform},
                {"n_devices", s.n_devices},
                {"tdp_w", s.tdp_w},
                {"idle_fraction", s.idle_fraction},
                {"active_fraction", s.active_fraction},
                {"throughput_tok_s", s.throughput_tok_s},
                {"energy_per_token_full_duty_j", energy_per_token_at_duty(s, 1.0)}};
  };
  Json results{{"duty_cycle", d},
               {"a", side(a)},
               {"b", side(b)},
               {"energy_per_token_at_parity_j", energy_per_token_at_duty(a, d)}};
  if (published) results["published_duty_cycle"] = *published;
  return envelope(ctx, "dutycycle", p, std::move(results));
}

using Handler = std::function<Response(const Context&, const Json&)>;

inline const std::map<std::string, Handler, std::less<>>& handlers() {
  static const std::map<std::string, Handler, std::less<>> table{
      {"platforms", platforms}, {"models", models},       {"roofline", roofline},
      {"equiv", equiv},         {"scaleout", scaleout},   {"estimate", estimate},
      {"sweep", sweep},         {"frontier", frontier},   {"trace", trace},
      {"commenergy", commenergy}, {"bench", bench},       {"dutycycle", dutycycle}};
  return table;
}

inline Response dispatch(const Context& ctx, std::string_view command, const Json& params) {
  const auto& t = handlers();
  auto it = t.find(command);
  if (it == t.end()) {
    std::vector<std::string> names;
    for (const auto& [k, v] : t) names.push_back(k);
    throw NotFoundError("command", std::string(command), detail::suggest(std::string(command), names));
  }
  return it->second(ctx, params);
}

}  // namespace xpu::api
