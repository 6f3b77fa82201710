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

#ifndef NLSIM_STATS_HPP
#define NLSIM_STATS_HPP

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "nlsim/protocol.hpp"
#include "nlsim/quantum.hpp"
#include "nlsim/resources.hpp"
#include "nlsim/rng.hpp"

namespace nlsim::stats {

inline constexpr double kZLimit = 4.0;
inline constexpr double kFlipIdentityTol = 1e-12;

struct CellCounts {
  std::uint64_t n_pp = 0;
  std::uint64_t n_pm = 0;
  std::uint64_t n_mp = 0;
  std::uint64_t n_mm = 0;

  static CellCounts from_cells(std::uint64_t pp, std::uint64_t pm, std::uint64_t mp,
                               std::uint64_t mm, std::uint64_t total) {
    if (pp + pm + mp + mm != total)
      throw std::invalid_argument("CellCounts: cells must sum to the declared total");
    return {pp, pm, mp, mm};
  }

  std::uint64_t total() const { return n_pp + n_pm + n_mp + n_mm; }

  void add(const OutcomePair& o) {
    if (o.alpha == +1)
      ++(o.beta == +1 ? n_pp : n_pm);
    else
      ++(o.beta == +1 ? n_mp : n_mm);
  }

  void merge(const CellCounts& c) {
    n_pp += c.n_pp;
    n_pm += c.n_pm;
    n_mp += c.n_mp;
    n_mm += c.n_mm;
  }

  std::array<std::uint64_t, 4> cells() const { return {n_pp, n_pm, n_mp, n_mm}; }

  double mean_alpha() const {
    const double n = static_cast<double>(total());
    return (static_cast<double>(n_pp + n_pm) - static_cast<double>(n_mp + n_mm)) / n;
  }

  double mean_beta() const {
    const double n = static_cast<double>(total());
    return (static_cast<double>(n_pp + n_mp) - static_cast<double>(n_pm + n_mm)) / n;
  }
};

struct Estimate {
  quantum::JointPMF pmf;
  std::array<double, 4> se;
};

/// Plug-in estimate p_i = n_i / N with per-cell binomial standard errors.
inline Estimate estimate(const CellCounts& counts) {
  const std::uint64_t n = counts.total();
  if (n == 0) throw std::invalid_argument("estimate: empty counts");
  const double inv = 1.0 / static_cast<double>(n);
  const auto cells = counts.cells();
  std::array<double, 4> p{};
  std::array<double, 4> se{};
  for (int i = 0; i < 4; ++i) {
    p[static_cast<std::size_t>(i)] = static_cast<double>(cells[static_cast<std::size_t>(i)]) * inv;
    const double pi = p[static_cast<std::size_t>(i)];
    se[static_cast<std::size_t>(i)] = std::sqrt(pi * (1.0 - pi) * inv);
  }
  return {quantum::JointPMF(p[0], p[1], p[2], p[3]), se};
}

struct Comparison {
  std::array<double, 4> z;
  double chi2;
  double tv;
  bool support_violation;
};

/// Per-cell z scores against a reference pmf, chi-square over cells with
/// reference probability > 0, and total variation distance. Cells where the
/// reference is degenerate (0 or 1) get z = 0 when the estimate matches
/// exactly and an infinity sentinel (plus the support_violation flag)
/// otherwise.
inline Comparison compare(const quantum::JointPMF& emp, const quantum::JointPMF& ref,
                          std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("compare: n must be positive");
  Comparison out{{}, 0.0, 0.0, false};
  const auto& pe = emp.cells();
  const auto& pr = ref.cells();
  for (std::size_t i = 0; i < 4; ++i) {
    const double diff = pe[i] - pr[i];
    out.tv += 0.5 * std::abs(diff);
    if (pr[i] <= 0.0 || pr[i] >= 1.0) {
      if (diff == 0.0) {
        out.z[i] = 0.0;
      } else {
        out.z[i] = std::copysign(std::numeric_limits<double>::infinity(), diff);
        out.support_violation = true;
      }
      if (pr[i] > 0.0) out.chi2 += diff * diff * static_cast<double>(n) / pr[i];
    } else {
      out.z[i] = diff / std::sqrt(pr[i] * (1.0 - pr[i]) / static_cast<double>(n));
      out.chi2 += diff * diff * static_cast<double>(n) / pr[i];
    }
  }
  return out;
}

/// Four-sigma-level total variation threshold for N samples against a
/// reference pmf: half the sum of the per-cell 4*SE bands.
inline double tv_confidence(const quantum::JointPMF& ref, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("tv_confidence: n must be positive");
  double acc = 0.0;
  for (double p : ref.cells())
    acc += 0.5 * 4.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  return acc;
}

struct SettingPair {
  geom::Direction a;
  geom::Direction b;
};

struct MarginalCheck {
  double mean_alpha;
  double mean_beta;
  double ref_alpha;
  double ref_beta;
  double z_alpha;
  double z_beta;
};

struct SettingReport {
  SettingPair setting;
  CellCounts counts;
  quantum::JointPMF pmf_emp;
  quantum::JointPMF pmf_qm;
  Comparison cmp;
  double tv_threshold;
  MarginalCheck marginals;
  std::optional<protocol::PreflipCorrelation> preflip;
  std::optional<double> flip_identity_dev;
};

/// Pass/fail is gated on the per-cell z threshold, the per-setting TV band,
/// and the flip-matching identity. Marginal z scores are computed and
/// reported alongside but are linear combinations of the same cells, so
/// they do not gate separately.
struct SweepSummary {
  double max_abs_z = 0.0;
  double mean_tv = 0.0;
  double max_marginal_abs_z = 0.0;
  double max_flip_identity_dev = 0.0;
  bool support_violation = false;
  bool cells_pass = true;
  bool tv_pass = true;
  bool flip_identity_pass = true;

  bool pass() const {
    return cells_pass && tv_pass && flip_identity_pass && !support_violation;
  }
};

struct SweepReport {
  std::vector<SettingReport> settings;
  SweepSummary summary;
  std::vector<SettingReport> calibration;
  SweepSummary calibration_summary;

  bool pass_all() const { return summary.pass() && calibration_summary.pass(); }
};

struct SweepOptions {
  std::size_t trials = 100000;
  std::uint64_t master_seed = 0;
  int workers = 1;
  std::size_t chunk_size = 1u << 16;
};

namespace detail {

inline constexpr std::uint64_t kPhaseProtocol = 1;
inline constexpr std::uint64_t kPhaseCalibration = 2;
inline constexpr std::uint64_t kPhaseSettings = 3;

/// Runs `task(0..n_tasks)` on a small worker pool. Tasks must write only to
/// their own slots. The first thrown exception is rethrown after joining,
/// so no partial results escape.
inline void run_tasks(std::size_t n_tasks, int workers,
                      const std::function<void(std::size_t)>& task) {
  if (workers <= 1) {
    for (std::size_t i = 0; i < n_tasks; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const int n_threads = std::min<int>(workers, static_cast<int>(n_tasks));
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int w = 0; w < n_threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n_tasks) return;
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// Chunked Monte Carlo accumulation. Every (setting, chunk) task owns the
/// stream substream(phase, setting, chunk) of the master seed, and partial
/// counts are reduced in fixed index order, so results do not depend on the
/// worker count.
template <typename MakeRunner>
std::vector<CellCounts> chunked_counts(MakeRunner&& make_runner, std::size_t n_settings,
                                       const SweepOptions& opt, std::uint64_t phase) {
  const std::size_t chunk = std::max<std::size_t>(1, opt.chunk_size);
  const std::size_t n_chunks = (opt.trials + chunk - 1) / chunk;
  const std::size_t n_tasks = n_settings * n_chunks;
  std::vector<CellCounts> task_counts(n_tasks);
  const RngStream master(opt.master_seed);
  run_tasks(n_tasks, opt.workers, [&](std::size_t idx) {
    const std::size_t s = idx / n_chunks;
    const std::size_t k = idx % n_chunks;
    RngStream rng = master.substream(phase).substream(s).substream(k);
    auto runner = make_runner(s);
    const std::size_t lo = k * chunk;
    const std::size_t hi = std::min(lo + chunk, opt.trials);
    CellCounts c;
    for (std::size_t i = lo; i < hi; ++i) c.add(runner(rng));
    task_counts[idx] = c;
  });
  std::vector<CellCounts> out(n_settings);
  for (std::size_t s = 0; s < n_settings; ++s)
    for (std::size_t k = 0; k < n_chunks; ++k)
      out[s].merge(task_counts[s * n_chunks + k]);
  return out;
}

inline double marginal_z(double mean, double ref, std::uint64_t n) {
  const double var = 1.0 - ref * ref;
  if (var <= 0.0)
    return (mean == ref) ? 0.0
                         : std::copysign(std::numeric_limits<double>::infinity(),
                                         mean - ref);
  return (mean - ref) / std::sqrt(var / static_cast<double>(n));
}

inline SettingReport make_setting_report(
    const SettingPair& st, const CellCounts& counts, const quantum::JointPMF& target,
    std::optional<protocol::PreflipCorrelation> preflip,
    std::optional<double> flip_identity_dev) {
  const Estimate est = estimate(counts);
  const Comparison cmp = compare(est.pmf, target, counts.total());
  const MarginalCheck marg{
      counts.mean_alpha(),
      counts.mean_beta(),
      target.mean_alpha(),
      target.mean_beta(),
      marginal_z(counts.mean_alpha(), target.mean_alpha(), counts.total()),
      marginal_z(counts.mean_beta(), target.mean_beta(), counts.total())};
  return SettingReport{st,
                       counts,
                       est.pmf,
                       target,
                       cmp,
                       tv_confidence(target, counts.total()),
                       marg,
                       preflip,
                       flip_identity_dev};
}

inline SweepSummary summarize(const std::vector<SettingReport>& reports) {
  SweepSummary s;
  if (reports.empty()) return s;
  double tv_sum = 0.0;
  for (const auto& r : reports) {
    for (double z : r.cmp.z)
      if (std::isfinite(z)) s.max_abs_z = std::max(s.max_abs_z, std::abs(z));
    s.support_violation = s.support_violation || r.cmp.support_violation;
    tv_sum += r.cmp.tv;
    if (r.cmp.tv > r.tv_threshold) s.tv_pass = false;
    for (double z : {r.marginals.z_alpha, r.marginals.z_beta})
      if (std::isfinite(z))
        s.max_marginal_abs_z = std::max(s.max_marginal_abs_z, std::abs(z));
    if (r.flip_identity_dev)
      s.max_flip_identity_dev = std::max(s.max_flip_identity_dev, *r.flip_identity_dev);
  }
  s.mean_tv = tv_sum / static_cast<double>(reports.size());
  s.cells_pass = !s.support_violation && s.max_abs_z <= kZLimit;
  s.flip_identity_pass = s.max_flip_identity_dev <= kFlipIdentityTol;
  return s;
}

}  // namespace detail

/// Uniformly random measurement settings, reproducible from the seed.
inline std::vector<SettingPair> random_settings(std::size_t count,
                                                std::uint64_t master_seed) {
  RngStream rng = RngStream(master_seed).substream(detail::kPhaseSettings);
  std::vector<SettingPair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const geom::Direction a = geom::sample_uniform_direction(rng);
    const geom::Direction b = geom::sample_uniform_direction(rng);
    out.push_back({a, b});
  }
  return out;
}

/// Full protocol sweep. For each setting, `opt.trials` protocol runs are
/// accumulated (chunked and reproducible as described above) and compared
/// against the exact target distribution; a calibration block repeats the
/// identical statistics with direct target sampling substituted for the
/// protocol, which validates the harness itself.
inline SweepReport run_sweep(const protocol::ProtocolConfig& cfg,
                             const std::vector<SettingPair>& settings,
                             const SweepOptions& opt) {
  if (settings.empty()) throw std::invalid_argument("run_sweep: no settings");
  if (opt.trials < 1000)
    throw std::invalid_argument("run_sweep: needs at least 1000 trials per setting");
  cfg.validate();
  const quantum::StateParam sp = quantum::state_params(cfg.gamma);

  std::vector<quantum::JointPMF> targets;
  std::vector<protocol::PreflipCorrelation> preflips;
  std::vector<double> flip_devs;
  targets.reserve(settings.size());
  preflips.reserve(settings.size());
  flip_devs.reserve(settings.size());
  for (const auto& st : settings) {
    targets.push_back(quantum::joint_pmf_qm(st.a, st.b, sp));
    const protocol::CanonicalSettings canon = protocol::canonicalize(st.a, st.b);
    const int pq =
        protocol::mbox_sign_product(canon.a.z, canon.b.z, cfg.mbox_convention);
    preflips.push_back(protocol::preflip_correlation_oracle(canon.a, canon.b, sp, pq,
                                                            cfg.ab_convention));
    flip_devs.push_back(
        protocol::flip_identity_deviation(canon.a, canon.b, sp, cfg.ab_convention));
  }

  const std::vector<CellCounts> proto_counts = detail::chunked_counts(
      [&](std::size_t s) {
        const SettingPair st = settings[s];
        return [st, &cfg](RngStream& rng) {
          const resources::SharedBundle bundle = resources::draw_bundle(rng, cfg.c_hat);
          return protocol::run_protocol(st.a, st.b, cfg, bundle, rng).outcome;
        };
      },
      settings.size(), opt, detail::kPhaseProtocol);

  const std::vector<CellCounts> calib_counts = detail::chunked_counts(
      [&](std::size_t s) {
        const quantum::JointPMF pmf = targets[s];
        return [pmf](RngStream& rng) { return quantum::sample_qm(pmf, rng); };
      },
      settings.size(), opt, detail::kPhaseCalibration);

  SweepReport report;
  report.settings.reserve(settings.size());
  report.calibration.reserve(settings.size());
  for (std::size_t s = 0; s < settings.size(); ++s) {
    report.settings.push_back(detail::make_setting_report(
        settings[s], proto_counts[s], targets[s], preflips[s], flip_devs[s]));
    report.calibration.push_back(detail::make_setting_report(
        settings[s], calib_counts[s], targets[s], std::nullopt, std::nullopt));
  }
  report.summary = detail::summarize(report.settings);
  report.calibration_summary = detail::summarize(report.calibration);
  return report;
}

/// Target distribution of the exactly solvable baseline: unbiased marginals
/// and correlation -a.b.
inline quantum::JointPMF singlet_target_pmf(const SettingPair& st) {
  const double corr = -geom::dot(st.a, st.b);
  const auto cell = [&](int alpha, int beta) {
    return 0.25 * (1.0 + alpha * beta * corr);
  };
  return quantum::JointPMF(cell(+1, +1), cell(+1, -1), cell(-1, +1), cell(-1, -1));
}

/// Sweep over the exactly solvable baseline runs; the anchor suite for the
/// whole pipeline. Structure and determinism match run_sweep.
inline SweepReport run_singlet_sweep(const std::vector<SettingPair>& settings,
                                     const SweepOptions& opt) {
  if (settings.empty()) throw std::invalid_argument("run_singlet_sweep: no settings");
  if (opt.trials < 1000)
    throw std::invalid_argument("run_singlet_sweep: needs at least 1000 trials per setting");

  std::vector<quantum::JointPMF> targets;
  targets.reserve(settings.size());
  for (const auto& st : settings) targets.push_back(singlet_target_pmf(st));

  const std::vector<CellCounts> base_counts = detail::chunked_counts(
      [&](std::size_t s) {
        const SettingPair st = settings[s];
        return [st](RngStream& rng) {
          return protocol::run_singlet_baseline(st.a, st.b, rng).outcome;
        };
      },
      settings.size(), opt, detail::kPhaseProtocol);

  const std::vector<CellCounts> calib_counts = detail::chunked_counts(
      [&](std::size_t s) {
        const quantum::JointPMF pmf = targets[s];
        return [pmf](RngStream& rng) { return quantum::sample_qm(pmf, rng); };
      },
      settings.size(), opt, detail::kPhaseCalibration);

  SweepReport report;
  report.settings.reserve(settings.size());
  report.calibration.reserve(settings.size());
  for (std::size_t s = 0; s < settings.size(); ++s) {
    report.settings.push_back(detail::make_setting_report(
        settings[s], base_counts[s], targets[s], std::nullopt, std::nullopt));
    report.calibration.push_back(detail::make_setting_report(
        settings[s], calib_counts[s], targets[s], std::nullopt, std::nullopt));
  }
  report.summary = detail::summarize(report.settings);
  report.calibration_summary = detail::summarize(report.calibration);
  return report;
}

}  // namespace nlsim::stats

#endif  // NLSIM_STATS_HPP
