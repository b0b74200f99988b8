#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hiergame/errors.hpp"
#include "hiergame/solver.hpp"

namespace hiergame {

// All floats in reports are serialized with 17 significant digits, which
// round-trips IEEE doubles exactly and keeps the files diff-able.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline bool eq_or_both_nan(double a, double b) {
  return a == b || (std::isnan(a) && std::isnan(b));
}

inline bool eq_vec(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return false;
  for (int i = 0; i < a.size(); ++i)
    if (!eq_or_both_nan(a[i], b[i])) return false;
  return true;
}

inline void json_number(std::string& out, double v) {
  if (std::isnan(v)) {
    out += "null";
  } else {
    out += format_double(v);
  }
}

}  // namespace detail

inline bool operator==(const OracleCounters& a, const OracleCounters& b) {
  return a.xi_samples == b.xi_samples && a.w_samples == b.w_samples &&
         a.lower_level_solves == b.lower_level_solves;
}

inline bool operator==(const RunReport& a, const RunReport& b) {
  auto vec_list_eq = [](const std::vector<Eigen::VectorXd>& u,
                        const std::vector<Eigen::VectorXd>& v) {
    if (u.size() != v.size()) return false;
    for (std::size_t i = 0; i < u.size(); ++i)
      if (!detail::eq_vec(u[i], v[i])) return false;
    return true;
  };
  auto dbl_list_eq = [](const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) return false;
    for (std::size_t i = 0; i < u.size(); ++i)
      if (!detail::eq_or_both_nan(u[i], v[i])) return false;
    return true;
  };
  return a.master_seed == b.master_seed && a.replica == b.replica &&
         a.dims == b.dims && vec_list_eq(a.iterates, b.iterates) &&
         vec_list_eq(a.epoch_averages, b.epoch_averages) &&
         detail::eq_vec(a.weighted_average, b.weighted_average) &&
         a.recorded_epochs == b.recorded_epochs &&
         dbl_list_eq(a.gap_series, b.gap_series) &&
         dbl_list_eq(a.dist_series, b.dist_series) &&
         a.counter_series == b.counter_series && a.counters == b.counters &&
         detail::eq_or_both_nan(a.wall_ms, b.wall_ms) &&
         detail::eq_or_both_nan(a.final_gap, b.final_gap) &&
         detail::eq_or_both_nan(a.final_dist, b.final_dist);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

// One row per recorded epoch per replica. wall_ms is reported as 0 unless
// timing is requested: measured times would break byte-level reproducibility
// of the canonical CSV outputs.
inline std::string report_csv(const std::vector<RunReport>& reports,
                              bool timing = false) {
  std::string out = "t,replica,gap,dist_least_norm,xi_count,w_count,wall_ms\n";
  for (const auto& r : reports) {
    for (std::size_t j = 0; j < r.recorded_epochs.size(); ++j) {
      out += std::to_string(r.recorded_epochs[j]);
      out += ',';
      out += std::to_string(r.replica);
      out += ',';
      out += format_double(r.gap_series[j]);
      out += ',';
      out += format_double(r.dist_series[j]);
      out += ',';
      out += std::to_string(r.counter_series[j].xi_samples);
      out += ',';
      out += std::to_string(r.counter_series[j].w_samples);
      out += ',';
      out += format_double(timing ? r.wall_ms : 0.0);
      out += '\n';
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON (hand-emitted so float formatting matches the CSV; parsed back with
// nlohmann). NaN maps to null.
// ---------------------------------------------------------------------------

namespace detail {

inline void json_vector(std::string& out, const Eigen::VectorXd& v) {
  out += '[';
  for (int i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    json_number(out, v[i]);
  }
  out += ']';
}

}  // namespace detail

inline std::string report_json(const RunReport& r, bool timing = true) {
  std::string out;
  out += "{\"master_seed\":" + std::to_string(r.master_seed);
  out += ",\"replica\":" + std::to_string(r.replica);
  out += ",\"dims\":[";
  for (std::size_t i = 0; i < r.dims.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(r.dims[i]);
  }
  out += "],\"iterates\":[";
  for (std::size_t i = 0; i < r.iterates.size(); ++i) {
    if (i) out += ',';
    detail::json_vector(out, r.iterates[i]);
  }
  out += "],\"epoch_averages\":[";
  for (std::size_t i = 0; i < r.epoch_averages.size(); ++i) {
    if (i) out += ',';
    detail::json_vector(out, r.epoch_averages[i]);
  }
  out += "],\"weighted_average\":";
  detail::json_vector(out, r.weighted_average);
  out += ",\"recorded_epochs\":[";
  for (std::size_t i = 0; i < r.recorded_epochs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(r.recorded_epochs[i]);
  }
  out += "],\"gap_series\":[";
  for (std::size_t i = 0; i < r.gap_series.size(); ++i) {
    if (i) out += ',';
    detail::json_number(out, r.gap_series[i]);
  }
  out += "],\"dist_series\":[";
  for (std::size_t i = 0; i < r.dist_series.size(); ++i) {
    if (i) out += ',';
    detail::json_number(out, r.dist_series[i]);
  }
  out += "],\"counter_series\":[";
  for (std::size_t i = 0; i < r.counter_series.size(); ++i) {
    if (i) out += ',';
    const auto& c = r.counter_series[i];
    out += "{\"xi_samples\":" + std::to_string(c.xi_samples) +
           ",\"w_samples\":" + std::to_string(c.w_samples) +
           ",\"lower_level_solves\":" + std::to_string(c.lower_level_solves) + "}";
  }
  out += "],\"counters\":{\"xi_samples\":" + std::to_string(r.counters.xi_samples) +
         ",\"w_samples\":" + std::to_string(r.counters.w_samples) +
         ",\"lower_level_solves\":" + std::to_string(r.counters.lower_level_solves) + "}";
  out += ",\"wall_ms\":";
  detail::json_number(out, timing ? r.wall_ms : 0.0);
  out += ",\"final_gap\":";
  detail::json_number(out, r.final_gap);
  out += ",\"final_dist\":";
  detail::json_number(out, r.final_dist);
  out += "}";
  return out;
}

inline std::string reports_json(const std::vector<RunReport>& reports,
                                bool timing = true) {
  std::string out = "[";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (i) out += ',';
    out += report_json(reports[i], timing);
  }
  out += "]\n";
  return out;
}

inline RunReport report_from_json(const nlohmann::json& j) {
  auto as_double = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                       : v.get<double>();
  };
  auto as_vector = [&](const nlohmann::json& v) {
    Eigen::VectorXd x(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) x[static_cast<int>(i)] = as_double(v[i]);
    return x;
  };
  auto as_counters = [](const nlohmann::json& v) {
    OracleCounters c;
    c.xi_samples = v.at("xi_samples").get<std::uint64_t>();
    c.w_samples = v.at("w_samples").get<std::uint64_t>();
    c.lower_level_solves = v.at("lower_level_solves").get<std::uint64_t>();
    return c;
  };
  RunReport r;
  r.master_seed = j.at("master_seed").get<std::uint64_t>();
  r.replica = j.at("replica").get<std::uint64_t>();
  r.dims = j.at("dims").get<std::vector<int>>();
  for (const auto& v : j.at("iterates")) r.iterates.push_back(as_vector(v));
  for (const auto& v : j.at("epoch_averages")) r.epoch_averages.push_back(as_vector(v));
  r.weighted_average = as_vector(j.at("weighted_average"));
  r.recorded_epochs = j.at("recorded_epochs").get<std::vector<int>>();
  for (const auto& v : j.at("gap_series")) r.gap_series.push_back(as_double(v));
  for (const auto& v : j.at("dist_series")) r.dist_series.push_back(as_double(v));
  for (const auto& v : j.at("counter_series")) r.counter_series.push_back(as_counters(v));
  r.counters = as_counters(j.at("counters"));
  r.wall_ms = as_double(j.at("wall_ms"));
  r.final_gap = as_double(j.at("final_gap"));
  r.final_dist = as_double(j.at("final_dist"));
  return r;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open output file " + path);
  f << content;
  if (!f) throw ConfigError("failed writing output file " + path);
}

enum class ReportFormat { Csv, Json };

// Spec-facing entry point: serialize reports to path in the chosen format.
inline void emit_report(const std::vector<RunReport>& reports,
                        ReportFormat format, const std::string& path,
                        bool timing = false) {
  if (format == ReportFormat::Csv) {
    write_text_file(path, report_csv(reports, timing));
  } else {
    write_text_file(path, reports_json(reports, timing));
  }
}

}  // namespace hiergame
