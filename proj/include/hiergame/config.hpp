#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hiergame/errors.hpp"
#include "hiergame/game.hpp"
#include "hiergame/solver.hpp"

namespace hiergame {

// ---------------------------------------------------------------------------
// Set-spec serialization (the config-schema representation of feasible sets)
// ---------------------------------------------------------------------------

inline nlohmann::json set_spec_to_json(const ConvexSetSpec& set) {
  nlohmann::json j;
  switch (set.kind()) {
    case ConvexSetSpec::Kind::Box:
      j["variant"] = "box";
      j["lo"] = std::vector<double>(set.box_lo().data(), set.box_lo().data() + set.dim());
      j["hi"] = std::vector<double>(set.box_hi().data(), set.box_hi().data() + set.dim());
      break;
    case ConvexSetSpec::Kind::Ball:
      j["variant"] = "ball";
      j["center"] = std::vector<double>(set.ball_center().data(),
                                        set.ball_center().data() + set.dim());
      j["radius"] = set.ball_radius();
      break;
    case ConvexSetSpec::Kind::Simplex:
      j["variant"] = "simplex";
      j["dim"] = set.dim();
      break;
    case ConvexSetSpec::Kind::Product: {
      j["variant"] = "product";
      j["parts"] = nlohmann::json::array();
      for (const auto& p : set.parts()) j["parts"].push_back(set_spec_to_json(p));
      break;
    }
  }
  return j;
}

inline ConvexSetSpec set_spec_from_json(const nlohmann::json& j);

namespace detail {

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("set spec: expected an array of numbers");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

}  // namespace detail

inline ConvexSetSpec set_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("variant"))
    throw ConfigError("set spec: expected an object with a 'variant' key");
  const std::string variant = j.at("variant").get<std::string>();
  try {
    if (variant == "box")
      return ConvexSetSpec::box(detail::vector_from_json(j.at("lo")),
                                detail::vector_from_json(j.at("hi")));
    if (variant == "ball")
      return ConvexSetSpec::ball(detail::vector_from_json(j.at("center")),
                                 j.at("radius").get<double>());
    if (variant == "simplex") return ConvexSetSpec::simplex(j.at("dim").get<int>());
    if (variant == "product") {
      std::vector<ConvexSetSpec> parts;
      for (const auto& p : j.at("parts")) parts.push_back(set_spec_from_json(p));
      return ConvexSetSpec::product(std::move(parts));
    }
  } catch (const InputError& e) {
    throw ConfigError("set spec: " + std::string(e.what()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("set spec: malformed '" + variant + "': " + e.what());
  }
  throw ConfigError("set spec: unknown variant '" + variant + "'");
}

// Schedule selection as it appears in config files; turned into concrete
// Schedule objects per sweep value.
struct ScheduleSpec {
  enum class Type { TheoremGap, AsConvergence, Explicit };

  Type type = Type::TheoremGap;
  int T = 0;
  double gamma0 = 0.1, eta0 = 0.5;  // as_convergence
  int K = 5;                        // as_convergence / explicit
  std::vector<double> gamma, eta, delta, eps;  // explicit
  std::vector<std::int64_t> b;                 // explicit
};

struct ExperimentConfig {
  std::string benchmark;
  BenchmarkOverrides overrides;
  std::string scheme = "exact";  // exact | inexact
  ScheduleSpec schedule;
  int replicas = 1;
  std::uint64_t master_seed = 0;
  std::string out_dir = "out";
  double gap_tol = 1e-9;
  int record_stride = 0;
  std::vector<int> sweep;  // empty: single run at schedule.T
  bool timing = false;

  Schedule make_schedule(int T) const {
    switch (schedule.type) {
      case ScheduleSpec::Type::TheoremGap:
        return scheme == "inexact" ? inexact_gap_schedule(T) : theorem_gap_schedule(T);
      case ScheduleSpec::Type::AsConvergence:
        return as_convergence_schedule(T, schedule.gamma0, schedule.eta0, schedule.K);
      case ScheduleSpec::Type::Explicit: {
        if (T != schedule.T)
          throw ConfigError("explicit schedules cannot be swept over T");
        Schedule s;
        s.T = schedule.T;
        s.K = schedule.K;
        s.gamma = schedule.gamma;
        s.eta = schedule.eta;
        s.delta = schedule.delta;
        s.eps = schedule.eps;
        s.b = schedule.b;
        s.validate();
        return s;
      }
    }
    throw ConfigError("unreachable schedule type");
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj,
                                const std::set<std::string>& allowed,
                                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
T require(const nlohmann::json& obj, const std::string& key,
          const std::string& where) {
  if (!obj.contains(key))
    throw ConfigError("config: missing required key '" + key + "' in " + where);
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: key '" + key + "' in " + where + " has the wrong type");
  }
}

template <typename T>
T optional_or(const nlohmann::json& obj, const std::string& key, T fallback,
              const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: key '" + key + "' in " + where + " has the wrong type");
  }
}

inline ScheduleSpec parse_schedule_spec(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: 'schedule' must be an object");
  ScheduleSpec spec;
  const std::string type = require<std::string>(j, "type", "schedule");
  if (type == "theorem_gap") {
    reject_unknown_keys(j, {"type", "T"}, "schedule");
    spec.type = ScheduleSpec::Type::TheoremGap;
    spec.T = require<int>(j, "T", "schedule");
  } else if (type == "as_convergence") {
    reject_unknown_keys(j, {"type", "T", "gamma0", "eta0", "K"}, "schedule");
    spec.type = ScheduleSpec::Type::AsConvergence;
    spec.T = require<int>(j, "T", "schedule");
    spec.gamma0 = optional_or<double>(j, "gamma0", spec.gamma0, "schedule");
    spec.eta0 = optional_or<double>(j, "eta0", spec.eta0, "schedule");
    spec.K = optional_or<int>(j, "K", spec.K, "schedule");
  } else if (type == "explicit") {
    reject_unknown_keys(j, {"type", "K", "gamma", "eta", "delta", "eps", "b"}, "schedule");
    spec.type = ScheduleSpec::Type::Explicit;
    spec.K = require<int>(j, "K", "schedule");
    spec.gamma = require<std::vector<double>>(j, "gamma", "schedule");
    spec.eta = require<std::vector<double>>(j, "eta", "schedule");
    spec.delta = require<std::vector<double>>(j, "delta", "schedule");
    spec.b = require<std::vector<std::int64_t>>(j, "b", "schedule");
    spec.eps = optional_or<std::vector<double>>(
        j, "eps", std::vector<double>(spec.gamma.size(), 0.0), "schedule");
    spec.T = static_cast<int>(spec.gamma.size());
  } else {
    throw ConfigError("config: schedule type '" + type +
                      "' is not one of theorem_gap, as_convergence, explicit");
  }
  return spec;
}

}  // namespace detail

inline ExperimentConfig parse_config_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  detail::reject_unknown_keys(
      j,
      {"benchmark", "scheme", "schedule", "replicas", "master_seed", "outputs",
       "gap_tol", "record_stride", "sweep", "timing"},
      "top level");

  ExperimentConfig cfg;
  if (!j.contains("benchmark")) throw ConfigError("config: missing 'benchmark'");
  const auto& bj = j.at("benchmark");
  if (bj.is_string()) {
    cfg.benchmark = bj.get<std::string>();
  } else if (bj.is_object()) {
    detail::reject_unknown_keys(bj, {"name", "noise_scale", "block_dim", "oracle_mode"},
                                "benchmark");
    cfg.benchmark = detail::require<std::string>(bj, "name", "benchmark");
    if (bj.contains("noise_scale"))
      cfg.overrides.noise_scale = detail::require<double>(bj, "noise_scale", "benchmark");
    if (bj.contains("block_dim"))
      cfg.overrides.block_dim = detail::require<int>(bj, "block_dim", "benchmark");
    if (bj.contains("oracle_mode"))
      cfg.overrides.oracle_mode =
          detail::require<std::string>(bj, "oracle_mode", "benchmark");
  } else {
    throw ConfigError("config: 'benchmark' must be a string or object");
  }

  cfg.scheme = detail::optional_or<std::string>(j, "scheme", "exact", "top level");
  if (cfg.scheme != "exact" && cfg.scheme != "inexact")
    throw ConfigError("config: 'scheme' must be exact or inexact");

  if (!j.contains("schedule")) throw ConfigError("config: missing 'schedule'");
  cfg.schedule = detail::parse_schedule_spec(j.at("schedule"));
  if (cfg.scheme == "inexact" && cfg.schedule.type == ScheduleSpec::Type::AsConvergence)
    throw ConfigError("config: the as_convergence schedule supports only scheme = exact");
  if (cfg.schedule.type == ScheduleSpec::Type::Explicit) {
    bool has_eps = false;
    for (double e : cfg.schedule.eps) has_eps = has_eps || e > 0.0;
    if (has_eps != (cfg.scheme == "inexact"))
      throw ConfigError("config: 'scheme' must match the explicit eps sequence "
                        "(inexact needs some eps > 0, exact needs all eps = 0)");
  }

  cfg.replicas = detail::require<int>(j, "replicas", "top level");
  if (cfg.replicas < 1) throw ConfigError("config: 'replicas' must be >= 1");
  cfg.master_seed = detail::require<std::uint64_t>(j, "master_seed", "top level");

  if (j.contains("outputs")) {
    const auto& oj = j.at("outputs");
    if (oj.is_string()) {
      cfg.out_dir = oj.get<std::string>();
    } else if (oj.is_object()) {
      detail::reject_unknown_keys(oj, {"dir"}, "outputs");
      cfg.out_dir = detail::require<std::string>(oj, "dir", "outputs");
    } else {
      throw ConfigError("config: 'outputs' must be a string or object");
    }
  }

  cfg.gap_tol = detail::optional_or<double>(j, "gap_tol", cfg.gap_tol, "top level");
  if (!(cfg.gap_tol > 0.0)) throw ConfigError("config: 'gap_tol' must be > 0");
  cfg.record_stride =
      detail::optional_or<int>(j, "record_stride", cfg.record_stride, "top level");
  if (cfg.record_stride < 0) throw ConfigError("config: 'record_stride' must be >= 0");
  cfg.sweep = detail::optional_or<std::vector<int>>(j, "sweep", {}, "top level");
  cfg.timing = detail::optional_or<bool>(j, "timing", false, "top level");

  // Fail fast: benchmark must exist and every swept schedule must pass its
  // constructor guards before any work starts.
  (void)make_benchmark(cfg.benchmark, cfg.overrides);
  if (cfg.sweep.empty()) {
    (void)cfg.make_schedule(cfg.schedule.T);
  } else {
    for (int T : cfg.sweep) (void)cfg.make_schedule(T);
  }
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: parse error in " + path + ": " + e.what());
  }
  try {
    return parse_config_json(j);
  } catch (const InputError& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
}

}  // namespace hiergame
