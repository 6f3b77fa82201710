// Copyright 2026 The nlsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NLSIM_REPORT_IO_HPP
#define NLSIM_REPORT_IO_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlsim/stats.hpp"

namespace nlsim::io {

using json = nlohmann::ordered_json;

/// JSON has no infinities; sentinel z scores serialize as strings so the
/// document round-trips byte for byte.
inline json number_or_sentinel(double x) {
  if (std::isnan(x)) return json("nan");
  if (std::isinf(x)) return json(x > 0 ? "inf" : "-inf");
  return json(x);
}

inline json direction_json(const geom::Direction& d) {
  return json::array({d.x, d.y, d.z});
}

/// Resolved configuration echoed into every report, so a report alone is
/// enough to reproduce itself.
struct ConfigEcho {
  std::string subcommand;
  double gamma = 0.0;
  std::string mode;
  int resample_count = 0;
  std::string ab_convention;
  std::string mbox_convention;
  std::string settings_source;
  std::size_t trials = 0;
  std::uint64_t master_seed = 0;
  int workers = 1;
  std::size_t chunk_size = 0;
  std::array<double, 4> c_hat{0.0, 0.0, 0.0, 1.0};
};

inline json config_json(const ConfigEcho& c) {
  json j;
  j["subcommand"] = c.subcommand;
  j["gamma"] = c.gamma;
  j["mode"] = c.mode;
  j["resample_count"] = c.resample_count;
  j["ab_convention"] = c.ab_convention;
  j["mbox_convention"] = c.mbox_convention;
  j["settings_source"] = c.settings_source;
  j["trials"] = c.trials;
  j["master_seed"] = c.master_seed;
  j["workers"] = c.workers;
  j["chunk_size"] = c.chunk_size;
  j["c_hat"] = json::array({c.c_hat[0], c.c_hat[1], c.c_hat[2], c.c_hat[3]});
  return j;
}

inline json setting_report_json(const stats::SettingReport& r) {
  json j;
  j["a"] = direction_json(r.setting.a);
  j["b"] = direction_json(r.setting.b);
  const auto cells = r.counts.cells();
  json counts;
  counts["pp"] = cells[0];
  counts["pm"] = cells[1];
  counts["mp"] = cells[2];
  counts["mm"] = cells[3];
  counts["total"] = r.counts.total();
  j["counts"] = counts;
  j["pmf_emp"] = json(r.pmf_emp.cells());
  j["pmf_qm"] = json(r.pmf_qm.cells());
  json z = json::array();
  for (double zi : r.cmp.z) z.push_back(number_or_sentinel(zi));
  j["z_scores"] = z;
  j["chi2"] = r.cmp.chi2;
  j["tv_distance"] = r.cmp.tv;
  j["tv_threshold"] = r.tv_threshold;
  j["support_violation"] = r.cmp.support_violation;
  json marg;
  marg["mean_alpha"] = r.marginals.mean_alpha;
  marg["mean_beta"] = r.marginals.mean_beta;
  marg["ref_alpha"] = r.marginals.ref_alpha;
  marg["ref_beta"] = r.marginals.ref_beta;
  marg["z_alpha"] = number_or_sentinel(r.marginals.z_alpha);
  marg["z_beta"] = number_or_sentinel(r.marginals.z_beta);
  j["marginals"] = marg;
  if (r.preflip) {
    json pf;
    pf["exact"] = r.preflip->exact;
    pf["unit_norm_prediction"] = r.preflip->unit_norm_prediction;
    pf["delta"] = r.preflip->delta;
    j["preflip"] = pf;
  }
  if (r.flip_identity_dev) j["flip_identity_dev"] = *r.flip_identity_dev;
  return j;
}

inline json summary_json(const stats::SweepSummary& s) {
  json j;
  j["max_abs_z"] = s.max_abs_z;
  j["mean_tv"] = s.mean_tv;
  j["max_marginal_abs_z"] = s.max_marginal_abs_z;
  j["max_flip_identity_dev"] = s.max_flip_identity_dev;
  j["support_violation"] = s.support_violation;
  json thresholds;
  thresholds["z_limit"] = stats::kZLimit;
  thresholds["flip_identity_tol"] = stats::kFlipIdentityTol;
  j["thresholds"] = thresholds;
  json pass;
  pass["cells"] = s.cells_pass;
  pass["tv"] = s.tv_pass;
  pass["flip_identity"] = s.flip_identity_pass;
  j["pass"] = pass;
  j["pass_all"] = s.pass();
  j["note"] = "per-cell |z| threshold, no multiplicity correction applied";
  return j;
}

/// Full report document: {schema_version, config, settings, calibration,
/// summary} with fixed key order throughout.
inline json report_json(const ConfigEcho& cfg, const stats::SweepReport& report) {
  json j;
  j["schema_version"] = 1;
  j["config"] = config_json(cfg);
  json settings = json::array();
  for (const auto& r : report.settings) settings.push_back(setting_report_json(r));
  j["settings"] = settings;
  json calib;
  json calib_settings = json::array();
  for (const auto& r : report.calibration)
    calib_settings.push_back(setting_report_json(r));
  calib["settings"] = calib_settings;
  calib["summary"] = summary_json(report.calibration_summary);
  j["calibration"] = calib;
  j["summary"] = summary_json(report.summary);
  return j;
}

inline std::string double_repr(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return json(x).dump();
}

/// One row per (setting, cell):
/// ax,ay,az,bx,by,bz,cell,count,p_emp,p_qm,z
inline std::string report_csv(const stats::SweepReport& report) {
  std::ostringstream out;
  out << "ax,ay,az,bx,by,bz,cell,count,p_emp,p_qm,z\n";
  for (const auto& r : report.settings) {
    const auto counts = r.counts.cells();
    const auto& pe = r.pmf_emp.cells();
    const auto& pq = r.pmf_qm.cells();
    for (std::size_t i = 0; i < 4; ++i) {
      out << double_repr(r.setting.a.x) << ',' << double_repr(r.setting.a.y) << ','
          << double_repr(r.setting.a.z) << ',' << double_repr(r.setting.b.x) << ','
          << double_repr(r.setting.b.y) << ',' << double_repr(r.setting.b.z) << ','
          << quantum::cell_labels()[i] << ',' << counts[i] << ','
          << double_repr(pe[i]) << ',' << double_repr(pq[i]) << ','
          << double_repr(r.cmp.z[i]) << '\n';
    }
  }
  return out.str();
}

/// Writes via a temporary file plus rename, so a failed run never leaves a
/// partial report behind.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_file_atomic: cannot open " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("write_file_atomic: write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::error_code ec2;
    std::filesystem::remove(tmp, ec2);
    throw std::runtime_error("write_file_atomic: rename failed for " + path);
  }
}

/// Settings file: JSON array of {"a": [x,y,z], "b": [x,y,z]}. Vectors are
/// normalized on load; deviations beyond 1e-6 are reported as warnings.
inline std::vector<stats::SettingPair> load_settings(
    const std::string& path, std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_settings: cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw std::runtime_error("load_settings: invalid JSON in " + path + ": " + e.what());
  }
  if (!doc.is_array()) throw std::runtime_error("load_settings: expected a JSON array");
  std::vector<stats::SettingPair> out;
  out.reserve(doc.size());
  std::size_t index = 0;
  for (const auto& entry : doc) {
    if (!entry.contains("a") || !entry.contains("b"))
      throw std::runtime_error("load_settings: entry missing \"a\" or \"b\"");
    const auto read_vec = [&](const json& v, const char* name) {
      if (!v.is_array() || v.size() != 3)
        throw std::runtime_error(std::string("load_settings: ") + name +
                                 " must be a 3-vector");
      const double x = v[0].get<double>();
      const double y = v[1].get<double>();
      const double z = v[2].get<double>();
      const double norm = std::sqrt(x * x + y * y + z * z);
      if (warnings != nullptr && std::abs(norm - 1.0) > 1e-6) {
        std::ostringstream msg;
        msg << "setting " << index << ": " << name << " norm " << norm
            << " deviates from 1, normalizing";
        warnings->push_back(msg.str());
      }
      return geom::normalized_direction(x, y, z);
    };
    const geom::Direction a = read_vec(entry["a"], "a");
    const geom::Direction b = read_vec(entry["b"], "b");
    out.push_back({a, b});
    ++index;
  }
  if (out.empty()) throw std::runtime_error("load_settings: no settings in " + path);
  return out;
}

}  // namespace nlsim::io

#endif  // NLSIM_REPORT_IO_HPP
