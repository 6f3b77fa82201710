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

// Command line driver. Subcommands:
//   simulate           N protocol trials at a single setting
//   sweep              many settings, full report with calibration block
//   baseline           the exactly solvable anchor suite
//   verify-components  exact and analytic component checks
//
// Exit codes: 0 all thresholds pass, 1 statistical or invariant failure,
// 2 usage or I/O error.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nlsim/protocol.hpp"
#include "nlsim/report_io.hpp"
#include "nlsim/stats.hpp"

namespace {

using namespace nlsim;

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct CliUsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RawOptions {
  std::string config_file;
  double gamma = std::numbers::pi / 8.0;
  std::string mode = "strict";
  int resample_n = 0;
  std::string ab_convention = "corrected";
  std::string mbox_convention = "corrected";
  std::string settings_file;
  std::size_t random_settings = 0;
  std::size_t trials = 100000;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "json";
  int workers = 1;
  std::vector<double> a_vec;
  std::vector<double> b_vec;
};

// Flags override config-file values; the config file overrides built-in
// defaults. The seed additionally falls back to NONLOCAL_SIM_SEED.
void resolve_options(const CLI::App* sub, RawOptions& opt) {
  nlohmann::json file;
  if (!opt.config_file.empty()) {
    std::ifstream in(opt.config_file);
    if (!in) throw CliUsageError("cannot open config file " + opt.config_file);
    try {
      in >> file;
    } catch (const std::exception& e) {
      throw CliUsageError("invalid config file " + opt.config_file + ": " + e.what());
    }
  }
  const auto passed = [&](const std::string& flag) {
    const CLI::Option* o = sub->get_option_no_throw(flag);
    return o != nullptr && o->count() > 0;
  };
  const auto from_file = [&](const char* key, auto& slot) {
    if (file.contains(key)) slot = file[key].get<std::decay_t<decltype(slot)>>();
  };
  if (!passed("--gamma")) from_file("gamma", opt.gamma);
  if (!passed("--mode")) from_file("mode", opt.mode);
  if (!passed("--n")) from_file("n", opt.resample_n);
  if (!passed("--ab-convention")) from_file("ab_convention", opt.ab_convention);
  if (!passed("--mbox-convention")) from_file("mbox_convention", opt.mbox_convention);
  if (!passed("--settings")) from_file("settings", opt.settings_file);
  if (!passed("--random-settings")) from_file("random_settings", opt.random_settings);
  if (!passed("--trials")) from_file("trials", opt.trials);
  if (!passed("--out")) from_file("out", opt.out);
  if (!passed("--format")) from_file("format", opt.format);
  if (!passed("--workers")) from_file("workers", opt.workers);
  if (!passed("--seed")) {
    if (file.contains("seed")) {
      opt.seed = file["seed"].get<std::uint64_t>();
    } else if (const char* env = std::getenv("NONLOCAL_SIM_SEED")) {
      try {
        opt.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw CliUsageError("NONLOCAL_SIM_SEED is not an integer");
      }
    }
  }
}

resources::RunMode parse_mode(const RawOptions& opt) {
  if (opt.mode == "strict") return resources::RunMode::strict;
  if (opt.mode == "ideal") return resources::RunMode::ideal;
  if (opt.mode == "resample-n" || opt.mode == "resample")
    return resources::RunMode::resample;
  throw CliUsageError("unknown mode: " + opt.mode);
}

protocol::AbConvention parse_ab(const std::string& s) {
  if (s == "corrected") return protocol::AbConvention::corrected;
  if (s == "literal") return protocol::AbConvention::literal;
  throw CliUsageError("unknown ab-convention: " + s);
}

resources::MboxConvention parse_mbox(const std::string& s) {
  if (s == "corrected") return resources::MboxConvention::corrected;
  if (s == "literal") return resources::MboxConvention::literal;
  throw CliUsageError("unknown mbox-convention: " + s);
}

protocol::ProtocolConfig make_protocol_config(const RawOptions& opt) {
  protocol::ProtocolConfig cfg;
  cfg.gamma = opt.gamma;
  cfg.mode = parse_mode(opt);
  cfg.ab_convention = parse_ab(opt.ab_convention);
  cfg.mbox_convention = parse_mbox(opt.mbox_convention);
  cfg.resample_count = opt.resample_n;
  cfg.master_seed = opt.seed;
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw CliUsageError(e.what());
  }
  return cfg;
}

std::vector<stats::SettingPair> resolve_settings(const RawOptions& opt,
                                                 std::string& source_echo) {
  if (!opt.settings_file.empty() && opt.random_settings > 0)
    throw CliUsageError("--settings and --random-settings are mutually exclusive");
  if (!opt.settings_file.empty()) {
    std::vector<std::string> warnings;
    auto settings = io::load_settings(opt.settings_file, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    source_echo = "file:" + opt.settings_file;
    return settings;
  }
  if (opt.random_settings > 0) {
    source_echo = "random:" + std::to_string(opt.random_settings);
    return stats::random_settings(opt.random_settings, opt.seed);
  }
  throw CliUsageError("need --settings FILE or --random-settings K");
}

io::ConfigEcho make_echo(const std::string& subcommand, const RawOptions& opt,
                         const std::string& settings_source) {
  io::ConfigEcho echo;
  echo.subcommand = subcommand;
  echo.gamma = opt.gamma;
  echo.mode = opt.mode;
  echo.resample_count = opt.resample_n;
  echo.ab_convention = opt.ab_convention;
  echo.mbox_convention = opt.mbox_convention;
  echo.settings_source = settings_source;
  echo.trials = opt.trials;
  echo.master_seed = opt.seed;
  echo.workers = opt.workers;
  echo.chunk_size = stats::SweepOptions{}.chunk_size;
  return echo;
}

void emit_report(const RawOptions& opt, const io::ConfigEcho& echo,
                 const stats::SweepReport& report) {
  std::string payload;
  if (opt.format == "json") {
    payload = io::report_json(echo, report).dump(2);
    payload.push_back('\n');
  } else if (opt.format == "csv") {
    payload = io::report_csv(report);
  } else {
    throw CliUsageError("unknown format: " + opt.format);
  }
  if (opt.out.empty()) {
    std::cout << payload;
  } else {
    try {
      io::write_file_atomic(opt.out, payload);
    } catch (const std::exception& e) {
      throw CliUsageError(e.what());
    }
  }
}

stats::SweepOptions make_sweep_options(const RawOptions& opt) {
  stats::SweepOptions sweep;
  sweep.trials = opt.trials;
  sweep.master_seed = opt.seed;
  sweep.workers = opt.workers;
  return sweep;
}

int run_sweep_command(const RawOptions& opt) {
  const auto cfg = make_protocol_config(opt);
  std::string source;
  const auto settings = resolve_settings(opt, source);
  const auto report = stats::run_sweep(cfg, settings, make_sweep_options(opt));
  emit_report(opt, make_echo("sweep", opt, source), report);
  return report.pass_all() ? kExitPass : kExitFail;
}

int run_simulate_command(const RawOptions& opt) {
  const auto cfg = make_protocol_config(opt);
  std::vector<stats::SettingPair> settings;
  std::string source;
  if (!opt.a_vec.empty() || !opt.b_vec.empty()) {
    if (opt.a_vec.size() != 3 || opt.b_vec.size() != 3)
      throw CliUsageError("--a and --b each need three components");
    settings.push_back({geom::normalized_direction(opt.a_vec[0], opt.a_vec[1], opt.a_vec[2]),
                        geom::normalized_direction(opt.b_vec[0], opt.b_vec[1], opt.b_vec[2])});
    source = "explicit";
  } else if (!opt.settings_file.empty()) {
    std::vector<std::string> warnings;
    auto all = io::load_settings(opt.settings_file, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    settings.push_back(all.front());
    source = "file:" + opt.settings_file + "[0]";
  } else {
    settings.push_back({geom::Direction(0, 0, 1), geom::Direction(0, 0, 1)});
    source = "default:z,z";
  }
  const auto report = stats::run_sweep(cfg, settings, make_sweep_options(opt));
  emit_report(opt, make_echo("simulate", opt, source), report);
  return report.pass_all() ? kExitPass : kExitFail;
}

int run_baseline_command(const RawOptions& opt) {
  std::string source;
  const auto settings = resolve_settings(opt, source);
  const auto report = stats::run_singlet_sweep(settings, make_sweep_options(opt));
  emit_report(opt, make_echo("baseline", opt, source), report);
  return report.pass_all() ? kExitPass : kExitFail;
}

// ---------------------------------------------------------------------------
// verify-components: exact and analytic checks, one line per check.

struct CheckRunner {
  bool all_pass = true;

  void check(const std::string& name, bool pass, const std::string& detail = "") {
    std::printf("[%s] %s%s%s\n", pass ? " ok " : "FAIL", name.c_str(),
                detail.empty() ? "" : ": ", detail.c_str());
    all_pass = all_pass && pass;
  }
};

bool verify_pr_box_table() {
  for (int x : {0, 1})
    for (int y : {0, 1})
      for (int coin : {0, 1}) {
        const auto out = resources::pr_box(x, y, coin);
        if (out.a != coin || (out.a ^ out.b) != (x & y)) return false;
      }
  return true;
}

bool verify_m_box_table() {
  const double xs[] = {0.0, 0.3, 0.5, 0.5, 0.7, 1.0};
  const double ys[] = {0.0, 0.5, 0.5, 0.2, 0.7, 1.0};
  for (int i = 0; i < 6; ++i)
    for (int coin : {0, 1}) {
      const auto cor = resources::m_box(xs[i], ys[i], coin, resources::MboxConvention::corrected);
      if ((cor.a ^ cor.b) != (xs[i] > ys[i] ? 1 : 0)) return false;
      const auto lit = resources::m_box(xs[i], ys[i], coin, resources::MboxConvention::literal);
      if ((lit.a ^ lit.b) != (xs[i] <= ys[i] ? 1 : 0)) return false;
      if (cor.a != coin || lit.a != coin) return false;
    }
  return true;
}

bool verify_box_bias(std::uint64_t seed, std::string& detail) {
  RngStream rng = RngStream(seed).substream(100);
  const int n = 1'000'000;
  const double bound = 4.0 / std::sqrt(static_cast<double>(n));
  double worst = 0.0;
  for (int x : {0, 1})
    for (int y : {0, 1}) {
      double sa = 0.0, sb = 0.0;
      for (int i = 0; i < n; ++i) {
        const auto out = resources::pr_box(x, y, rng.coin_bit());
        sa += out.a == 0 ? 1.0 : -1.0;
        sb += out.b == 0 ? 1.0 : -1.0;
      }
      worst = std::max({worst, std::abs(sa / n), std::abs(sb / n)});
    }
  const double pairs[3][2] = {{0.3, 0.5}, {0.7, 0.2}, {0.5, 0.5}};
  for (const auto& p : pairs) {
    double sm = 0.0, sn = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto out = resources::m_box(p[0], p[1], rng.coin_bit());
      sm += out.a == 0 ? 1.0 : -1.0;
      sn += out.b == 0 ? 1.0 : -1.0;
    }
    worst = std::max({worst, std::abs(sm / n), std::abs(sn / n)});
  }
  detail = "max |bias| " + io::double_repr(worst) + " bound " + io::double_repr(bound);
  return worst <= bound;
}

bool verify_aux_norms(std::uint64_t seed, protocol::AbConvention conv, std::string& detail) {
  RngStream rng = RngStream(seed).substream(101);
  double worst = 0.0;
  for (int i = 0; i < 100'000; ++i) {
    const auto sp = quantum::state_params(1e-3 + (std::numbers::pi / 4.0 - 1e-3) * rng.uniform01());
    const auto n = geom::sample_uniform_direction(rng);
    const auto aux = protocol::aux_direction(n, sp, conv);
    worst = std::max(worst, std::abs(std::sqrt(geom::dot(aux, aux)) - 1.0));
  }
  detail = "max |norm-1| " + io::double_repr(worst);
  return worst <= 1e-12;
}

bool verify_flip_identity(std::uint64_t seed, protocol::AbConvention conv, std::string& detail) {
  RngStream rng = RngStream(seed).substream(102);
  double worst = 0.0;
  for (int i = 0; i < 100'000; ++i) {
    const auto sp = quantum::state_params(1e-3 + (std::numbers::pi / 4.0 - 1e-3) * rng.uniform01());
    const auto canon = protocol::canonicalize(geom::sample_uniform_direction(rng),
                                              geom::sample_uniform_direction(rng));
    worst = std::max(worst, protocol::flip_identity_deviation(canon.a, canon.b, sp, conv));
  }
  detail = "max deviation " + io::double_repr(worst);
  return worst <= stats::kFlipIdentityTol;
}

bool verify_branch_pairing(resources::MboxConvention conv) {
  // The box sign product must select the branch whose flip identity applies:
  // agreement (pq = +1) exactly when a_z <= b_z.
  const double vals[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (double az : vals)
    for (double bz : vals) {
      const int pq = protocol::mbox_sign_product(az, bz, conv);
      if ((pq == +1) != (az <= bz)) return false;
    }
  return true;
}

bool verify_flip_algebra(std::uint64_t seed, std::string& detail) {
  RngStream rng = RngStream(seed).substream(103);
  const int n = 1'000'000;
  const double fs[] = {0.0, 0.35, 0.7};
  const double cs[] = {-1.0, 0.0, 0.5};
  double worst_sigma = 0.0;
  for (double f_a : fs)
    for (double f_b : fs)
      for (double c0 : cs) {
        const auto closed = protocol::flip_closed_form(c0, f_a, f_b);
        double sa = 0.0, sb = 0.0, sab = 0.0;
        for (int i = 0; i < n; ++i) {
          const bool equal = rng.uniform01() < 0.5 * (1.0 + c0);
          const int s = rng.coin_bit() ? +1 : -1;
          const auto out =
              protocol::correlated_flip(s, equal ? s : -s, f_a, f_b, rng.uniform01());
          sa += out.alpha;
          sb += out.beta;
          sab += out.alpha * out.beta;
        }
        const auto sigmas = [&](double got, double want) {
          const double se = std::sqrt(std::max(1e-30, (1.0 - want * want) / n));
          return std::abs(got - want) / se;
        };
        if (std::abs(closed.corr) < 1.0)
          worst_sigma = std::max(worst_sigma, sigmas(sab / n, closed.corr));
        else if (std::abs(sab / n - closed.corr) > 0)
          return false;  // exact cases must hold exactly
        worst_sigma = std::max({worst_sigma, sigmas(sa / n, closed.marg_a),
                                sigmas(sb / n, closed.marg_b)});
      }
  detail = "worst deviation " + io::double_repr(worst_sigma) + " sigma";
  return worst_sigma <= 4.0;
}

bool verify_sign_moments(std::uint64_t seed, std::string& detail) {
  RngStream rng = RngStream(seed).substream(104);
  const auto c_hat = protocol::default_c_hat();
  const int n = 1'000'000;
  double cross[5][5] = {};
  double single[5] = {};
  for (int it = 0; it < n; ++it) {
    const auto bundle = resources::draw_bundle(rng, c_hat);
    int s[5];
    for (int i = 0; i < 5; ++i)
      s[i] = geom::sgn(geom::inner(c_hat, bundle.mu[static_cast<std::size_t>(i)]));
    for (int i = 0; i < 5; ++i) {
      single[i] += s[i];
      for (int j = i; j < 5; ++j) cross[i][j] += s[i] * s[j];
    }
  }
  const double bound = 4.0 / std::sqrt(static_cast<double>(n));
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    worst = std::max(worst, std::abs(single[i] / n));
    for (int j = i; j < 5; ++j) {
      const double expected = (i == j) ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(cross[i][j] / n - expected));
    }
  }
  detail = "max |moment error| " + io::double_repr(worst) + " bound " + io::double_repr(bound);
  return worst <= bound;
}

bool verify_sign_step_identity(std::uint64_t seed, std::string& detail) {
  RngStream rng = RngStream(seed).substream(105);
  protocol::ProtocolConfig cfg;
  cfg.mode = resources::RunMode::strict;
  const auto sp = quantum::state_params(std::numbers::pi / 6.0);
  const int n = 100'000;
  double sum_a0 = 0.0, sum_b0 = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto bundle = resources::draw_bundle(rng, cfg.c_hat);
    const auto canon = protocol::canonicalize(geom::sample_uniform_direction(rng),
                                              geom::sample_uniform_direction(rng));
    const auto aux = protocol::aux_vectors(canon.a, canon.b, sp, protocol::AbConvention::corrected);
    const int p = rng.coin_bit() ? +1 : -1;
    const int q = rng.coin_bit() ? +1 : -1;
    const auto uv = protocol::select_uv(p, q, bundle, canon.a, aux.A_hat, canon.b, aux.B_hat);
    resources::RunTranscript t(resources::RunMode::strict);
    const auto pre = protocol::distributed_sign_step(uv.u, uv.v, bundle, cfg, t, rng);
    const double w0 = std::abs(geom::inner(uv.u, bundle.lambda0));
    const double w1 = std::abs(geom::inner(uv.u, bundle.lambda1));
    const auto& kept = (w1 > w0) ? bundle.lambda1 : bundle.lambda0;
    if (pre.alpha0 * pre.beta0 !=
        geom::sgn(geom::inner(uv.u, kept)) * geom::sgn(geom::inner(uv.v, kept)))
      return false;
    sum_a0 += pre.alpha0;
    sum_b0 += pre.beta0;
  }
  const double bound = 4.0 / std::sqrt(static_cast<double>(n));
  detail = "pre-flip marginals " + io::double_repr(sum_a0 / n) + ", " +
           io::double_repr(sum_b0 / n);
  return std::abs(sum_a0 / n) <= bound && std::abs(sum_b0 / n) <= bound;
}

bool verify_quantum_oracle(std::uint64_t seed, std::string& detail) {
  RngStream rng = RngStream(seed).substream(106);
  double worst = 0.0;
  for (int i = 0; i < 10'000; ++i) {
    const auto a = geom::sample_uniform_direction(rng);
    const auto b = geom::sample_uniform_direction(rng);
    const auto sp = quantum::state_params(1e-3 + (std::numbers::pi / 4.0 - 1e-3) * rng.uniform01());
    const auto closed = quantum::joint_pmf_qm(a, b, sp);
    const auto brute = quantum::joint_pmf_oracle(a, b, sp);
    for (int c = 0; c < 4; ++c)
      worst = std::max(worst, std::abs(closed.cells()[static_cast<std::size_t>(c)] -
                                       brute.cells()[static_cast<std::size_t>(c)]));
  }
  detail = "max |closed - brute| " + io::double_repr(worst);
  return worst <= 1e-10;
}

bool verify_singlet_anchor(std::uint64_t seed, std::string& detail) {
  const auto settings = stats::random_settings(5, seed + 7);
  stats::SweepOptions opt;
  opt.trials = 100'000;
  opt.master_seed = seed;
  const auto report = stats::run_singlet_sweep(settings, opt);
  detail = "max |z| " + io::double_repr(report.summary.max_abs_z);
  return report.summary.pass();
}

int run_verify_command(const RawOptions& opt) {
  const auto ab = parse_ab(opt.ab_convention);
  const auto mbox = parse_mbox(opt.mbox_convention);
  CheckRunner r;
  std::string detail;

  r.check("pr-box truth table", verify_pr_box_table());
  r.check("m-box truth table and ties", verify_m_box_table());
  detail.clear();
  r.check("box output bias", verify_box_bias(opt.seed, detail), detail);
  detail.clear();
  r.check("auxiliary vector unit norms", verify_aux_norms(opt.seed, ab, detail), detail);
  detail.clear();
  r.check("flip-matching identity", verify_flip_identity(opt.seed, ab, detail), detail);
  r.check("comparison branch pairing", verify_branch_pairing(mbox));
  detail.clear();
  r.check("flip algebra closed form", verify_flip_algebra(opt.seed, detail), detail);
  detail.clear();
  r.check("shared sign moments", verify_sign_moments(opt.seed, detail), detail);
  detail.clear();
  r.check("distributed sign identity", verify_sign_step_identity(opt.seed, detail), detail);
  detail.clear();
  r.check("quantum oracle equivalence", verify_quantum_oracle(opt.seed, detail), detail);
  detail.clear();
  r.check("singlet baseline anchor", verify_singlet_anchor(opt.seed, detail), detail);

  return r.all_pass ? kExitPass : kExitFail;
}

void add_common_options(CLI::App* sub, RawOptions& opt, bool with_protocol_flags) {
  sub->add_option("--config", opt.config_file, "JSON config file (flags override it)");
  sub->add_option("--seed", opt.seed, "master seed (default: NONLOCAL_SIM_SEED or 0)");
  if (with_protocol_flags) {
    sub->add_option("--gamma", opt.gamma, "state parameter in (0, pi/4]");
    sub->add_option("--mode", opt.mode, "strict | ideal | resample-n");
    sub->add_option("--n", opt.resample_n, "candidate count for resample-n");
    sub->add_option("--ab-convention", opt.ab_convention, "corrected | literal");
    sub->add_option("--mbox-convention", opt.mbox_convention, "corrected | literal");
  }
  sub->add_option("--trials", opt.trials, "trials per setting");
  sub->add_option("--out", opt.out, "output path (stdout when omitted)");
  sub->add_option("--format", opt.format, "json | csv");
  sub->add_option("--workers", opt.workers, "worker threads");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulation and verification harness for two-qubit correlations "
               "from shared randomness, one PR box, and one M box"};
  app.require_subcommand(1);

  RawOptions opt;

  CLI::App* simulate = app.add_subcommand("simulate", "run one setting");
  add_common_options(simulate, opt, true);
  simulate->add_option("--a", opt.a_vec, "Alice direction x,y,z")->delimiter(',')->expected(3);
  simulate->add_option("--b", opt.b_vec, "Bob direction x,y,z")->delimiter(',')->expected(3);
  simulate->add_option("--settings", opt.settings_file, "settings file (first entry)");

  CLI::App* sweep = app.add_subcommand("sweep", "run many settings with calibration");
  add_common_options(sweep, opt, true);
  sweep->add_option("--settings", opt.settings_file, "JSON settings file");
  sweep->add_option("--random-settings", opt.random_settings, "number of random settings");

  CLI::App* baseline = app.add_subcommand("baseline", "exactly solvable anchor suite");
  add_common_options(baseline, opt, false);
  baseline->add_option("--settings", opt.settings_file, "JSON settings file");
  baseline->add_option("--random-settings", opt.random_settings, "number of random settings");

  CLI::App* verify = app.add_subcommand("verify-components", "component-level checks");
  verify->add_option("--config", opt.config_file, "JSON config file");
  verify->add_option("--seed", opt.seed, "master seed");
  verify->add_option("--ab-convention", opt.ab_convention, "corrected | literal");
  verify->add_option("--mbox-convention", opt.mbox_convention, "corrected | literal");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const CLI::App* active = app.get_subcommands().front();
    resolve_options(active, opt);
    if (simulate->parsed()) return run_simulate_command(opt);
    if (sweep->parsed()) return run_sweep_command(opt);
    if (baseline->parsed()) return run_baseline_command(opt);
    if (verify->parsed()) return run_verify_command(opt);
    return kExitUsage;
  } catch (const CliUsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return kExitFail;
  }
}
