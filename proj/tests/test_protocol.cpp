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

#include "nlsim/protocol.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numbers>

#include "oracle_utils.hpp"

using namespace nlsim;
using namespace nlsim::protocol;
using geom::Carrier4;
using geom::Direction;
using nlsim::testing::pm_one_se;

namespace {

constexpr double kPi = std::numbers::pi;
const Direction kX(1, 0, 0);
const Direction kY(0, 1, 0);
const Direction kZ(0, 0, 1);

Direction random_direction(RngStream& rng) { return geom::sample_uniform_direction(rng); }

double random_gamma(RngStream& rng) {
  return 1e-3 + (kPi / 4.0 - 1e-3) * rng.uniform01();
}

resources::SharedBundle signed_bundle(const Carrier4& c_hat, int s1, int s2, int s3,
                                      int s4, int s5) {
  const auto signed_mu = [&](int s) {
    return Carrier4(s * c_hat.v1, s * c_hat.v2, s * c_hat.v3, s * c_hat.v0);
  };
  return resources::SharedBundle{
      {signed_mu(s1), signed_mu(s2), signed_mu(s3), signed_mu(s4), signed_mu(s5)},
      Carrier4(1, 0, 0, 0),
      Carrier4(0, 1, 0, 0),
      c_hat,
      0.5,
      0,
      0};
}

}  // namespace

TEST_CASE("canonicalize flips negative z components and records the relabel") {
  const auto c1 = canonicalize(Direction(0, 0, -1), kZ);
  REQUIRE(c1.a.z == 1.0);
  REQUIRE(c1.eta_a == -1);
  REQUIRE(c1.eta_b == +1);

  const auto c2 = canonicalize(kX, kZ);
  REQUIRE(c2.a.x == 1.0);
  REQUIRE(c2.eta_a == +1);  // z == 0 keeps the direction
}

TEST_CASE("canonicalization leaves the target distribution invariant") {
  RngStream rng(17);
  for (int i = 0; i < 10'000; ++i) {
    const Direction a = random_direction(rng);
    const Direction b = random_direction(rng);
    const auto sp = quantum::state_params(random_gamma(rng));
    const auto canon = canonicalize(a, b);
    const auto original = quantum::joint_pmf_qm(a, b, sp);
    const auto reduced = quantum::joint_pmf_qm(canon.a, canon.b, sp);
    // relabeled cell (alpha, beta) of the original is cell
    // (eta_a*alpha, eta_b*beta) of the reduced problem
    const auto cell_index = [](int alpha, int beta) {
      return (alpha == +1 ? 0 : 2) + (beta == +1 ? 0 : 1);
    };
    for (int alpha : {+1, -1}) {
      for (int beta : {+1, -1}) {
        const double p_orig = original.cells()[static_cast<std::size_t>(cell_index(alpha, beta))];
        const double p_canon = reduced.cells()[static_cast<std::size_t>(
            cell_index(canon.eta_a * alpha, canon.eta_b * beta))];
        REQUIRE(p_orig == p_canon);
      }
    }
  }
}

TEST_CASE("auxiliary vectors at anchor settings") {
  const auto sp = quantum::state_params(kPi / 6.0);
  const auto aux_z = aux_vectors(kZ, kZ, sp, AbConvention::corrected);
  REQUIRE(aux_z.B_hat.x == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(aux_z.B_hat.z == Catch::Approx(1.0).margin(1e-15));

  const auto aux_x = aux_vectors(kZ, kX, sp, AbConvention::corrected);
  REQUIRE(aux_x.B_hat.x == Catch::Approx(0.8660254037844386).margin(1e-12));
  REQUIRE(aux_x.B_hat.y == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(aux_x.B_hat.z == Catch::Approx(-0.5).margin(1e-12));
  REQUIRE(aux_x.f_a == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(aux_x.f_b == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("auxiliary vectors are unit for random inputs") {
  RngStream rng(23);
  double max_dev = 0.0;
  for (int i = 0; i < 100'000; ++i) {
    const auto sp = quantum::state_params(random_gamma(rng));
    const Direction n = random_direction(rng);
    const Direction aux = aux_direction(n, sp, AbConvention::corrected);
    max_dev = std::max(max_dev, std::abs(std::sqrt(geom::dot(aux, aux)) - 1.0));
  }
  REQUIRE(max_dev <= 1e-12);
}

TEST_CASE("aux_vectors demands canonical inputs and nondegenerate denominators") {
  const auto sp = quantum::state_params(kPi / 6.0);
  REQUIRE_THROWS_AS(aux_vectors(Direction(0, 0, -1), kZ, sp, AbConvention::corrected),
                    std::invalid_argument);
  // gamma ~ 0 makes 1 - c*n_z vanish at the pole
  const auto sp_tiny = quantum::state_params(1e-5);
  REQUIRE_THROWS_AS(aux_direction(kZ, sp_tiny, AbConvention::corrected),
                    std::domain_error);
}

TEST_CASE("flip-matching identity holds exactly under the corrected convention") {
  RngStream rng(29);
  double max_dev = 0.0;
  for (int i = 0; i < 10'000; ++i) {
    const auto sp = quantum::state_params(random_gamma(rng));
    const auto canon = canonicalize(random_direction(rng), random_direction(rng));
    max_dev = std::max(max_dev, flip_identity_deviation(canon.a, canon.b, sp,
                                                        AbConvention::corrected));
  }
  REQUIRE(max_dev <= 1e-12);
}

TEST_CASE("flip-matching identity fails under the literal convention when a_y*b_y != 0") {
  const auto sp = quantum::state_params(kPi / 6.0);
  const Direction a = geom::normalized_direction(0.5, 0.6, 0.4);
  const Direction b = geom::normalized_direction(-0.3, 0.7, 0.5);
  REQUIRE(flip_identity_deviation(a, b, sp, AbConvention::corrected) <= 1e-12);
  REQUIRE(flip_identity_deviation(a, b, sp, AbConvention::literal) > 1e-3);

  // with a_y = 0 the two conventions coincide
  const Direction a0 = geom::normalized_direction(0.5, 0.0, 0.4);
  REQUIRE(flip_identity_deviation(a0, b, sp, AbConvention::literal) <= 1e-12);
}

TEST_CASE("mbox_step maps comparison outputs to signs") {
  resources::SharedBundle bundle = signed_bundle(Carrier4(0, 0, 0, 1), 1, 1, 1, 1, 1);
  for (int coin : {0, 1}) {
    bundle.coin_m = coin;
    resources::RunTranscript t1(resources::RunMode::strict);
    const auto pq_lt = mbox_step(0.2, 0.7, bundle, resources::MboxConvention::corrected, t1);
    REQUIRE(pq_lt.p == pq_lt.q);
    REQUIRE(t1.m_box_uses() == 1);
    REQUIRE(t1.uses(resources::ResourceLabel::box_coin) == 1);

    resources::RunTranscript t2(resources::RunMode::strict);
    const auto pq_gt = mbox_step(0.7, 0.2, bundle, resources::MboxConvention::corrected, t2);
    REQUIRE(pq_gt.p == -pq_gt.q);
  }
  REQUIRE(mbox_sign_product(0.2, 0.7, resources::MboxConvention::corrected) == +1);
  REQUIRE(mbox_sign_product(0.7, 0.2, resources::MboxConvention::corrected) == -1);
  REQUIRE(mbox_sign_product(0.5, 0.5, resources::MboxConvention::corrected) == +1);
  REQUIRE(mbox_sign_product(0.2, 0.7, resources::MboxConvention::literal) == -1);
}

TEST_CASE("p and q are individually uniform") {
  RngStream rng(31);
  const Carrier4 c_hat(0, 0, 0, 1);
  const int n = 100'000;
  double sum_p = 0.0, sum_q = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto bundle = resources::draw_bundle(rng, c_hat);
    resources::RunTranscript t(resources::RunMode::strict);
    const auto pq = mbox_step(0.3, 0.6, bundle, resources::MboxConvention::corrected, t);
    sum_p += pq.p;
    sum_q += pq.q;
  }
  REQUIRE(std::abs(sum_p / n) <= 4.0 / std::sqrt(static_cast<double>(n)));
  REQUIRE(std::abs(sum_q / n) <= 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("build_carrier reproduces the pseudo inner product") {
  RngStream rng(37);
  for (int i = 0; i < 1000; ++i) {
    const Direction base_a = random_direction(rng);
    const Direction aux_a = random_direction(rng);
    const Direction base_b = random_direction(rng);
    const Direction aux_b = random_direction(rng);
    const Carrier4 u = build_carrier(base_a, aux_a, +1, +1, +1, Side::alice);
    const Carrier4 v = build_carrier(base_b, aux_b, +1, +1, +1, Side::bob);
    const double sx = base_a.x + aux_a.x, sy = base_a.y + aux_a.y, sz = base_a.z + aux_a.z;
    const double tx = base_b.x + aux_b.x, ty = base_b.y + aux_b.y, tz = base_b.z + aux_b.z;
    const double u0 = std::sqrt(std::abs(sx * sx + sy * sy + sz * sz - 1.0));
    const double v0 = std::sqrt(std::abs(tx * tx + ty * ty + tz * tz - 1.0));
    const double expected = sx * tx + sy * ty + sz * tz - u0 * v0;
    REQUIRE(geom::inner(u, v) == Catch::Approx(expected).margin(1e-12));
  }
}

TEST_CASE("build_carrier handles the orthogonal and antipodal corners") {
  const Carrier4 perp = build_carrier(kX, kY, +1, +1, +1, Side::bob);
  REQUIRE(perp.v0 == Catch::Approx(1.0).margin(1e-12));

  const Carrier4 degenerate = build_carrier(kZ, kZ.negated(), +1, +1, +1, Side::alice);
  REQUIRE(degenerate.v1 == 0.0);
  REQUIRE(degenerate.v2 == 0.0);
  REQUIRE(degenerate.v3 == 0.0);
  REQUIRE(degenerate.v0 == -1.0);
  REQUIRE(degenerate.euclidean_norm == Catch::Approx(1.0).margin(1e-15));

  REQUIRE_THROWS_AS(build_carrier(kX, kY, +1, +1, -1, Side::bob), std::invalid_argument);
  REQUIRE_THROWS_AS(build_carrier(kX, kY, 0, +1, +1, Side::alice), std::invalid_argument);
}

TEST_CASE("select_uv wires the shared sign bits to the right slots") {
  const Carrier4 c_hat(0, 0, 0, 1);
  const Direction a = kX;
  const Direction A = kY;
  const Direction b = kZ;
  const Direction B = geom::normalized_direction(1, 1, 1);
  for (int mask = 0; mask < 32; ++mask) {
    const int s1 = (mask & 1) ? -1 : 1;
    const int s2 = (mask & 2) ? -1 : 1;
    const int s3 = (mask & 4) ? -1 : 1;
    const int s4 = (mask & 8) ? -1 : 1;
    const int s5 = (mask & 16) ? -1 : 1;
    const auto bundle = signed_bundle(c_hat, s1, s2, s3, s4, s5);
    for (int p : {+1, -1}) {
      for (int q : {+1, -1}) {
        const auto uv = select_uv(p, q, bundle, a, A, b, B);
        const int ua = (p == +1) ? s1 : s4;
        const int uA = (p == +1) ? s2 : s3;
        const int vb = (q == +1) ? s3 : s2;
        const int vB = (q == +1) ? s1 : s4;
        const double wx = ua * a.x + uA * A.x;
        const double wy = ua * a.y + uA * A.y;
        const double wz = ua * a.z + uA * A.z;
        const double w0 = std::sqrt(std::abs(wx * wx + wy * wy + wz * wz - 1.0));
        REQUIRE(uv.u.v1 == wx);
        REQUIRE(uv.u.v2 == wy);
        REQUIRE(uv.u.v3 == wz);
        REQUIRE(uv.u.v0 == -s5 * w0);
        const double rx = vb * b.x + vB * B.x;
        const double ry = vb * b.y + vB * B.y;
        const double rz = vb * b.z + vB * B.z;
        const double r0 = std::sqrt(std::abs(rx * rx + ry * ry + rz * rz - 1.0));
        REQUIRE(uv.v.v1 == rx);
        REQUIRE(uv.v.v2 == ry);
        REQUIRE(uv.v.v3 == rz);
        REQUIRE(uv.v.v0 == r0);
      }
    }
  }
}

TEST_CASE("strict sign step satisfies its product identity on every run") {
  RngStream rng(41);
  ProtocolConfig cfg;
  cfg.mode = resources::RunMode::strict;
  const Carrier4 c_hat = default_c_hat();
  const auto sp = quantum::state_params(kPi / 6.0);
  double sum_a0 = 0.0, sum_b0 = 0.0;
  const int n = 20'000;
  for (int i = 0; i < n; ++i) {
    const auto bundle = resources::draw_bundle(rng, c_hat);
    const auto canon = canonicalize(random_direction(rng), random_direction(rng));
    const auto aux = aux_vectors(canon.a, canon.b, sp, AbConvention::corrected);
    const int p = rng.coin_bit() ? +1 : -1;
    const int q = rng.coin_bit() ? +1 : -1;
    const auto uv = select_uv(p, q, bundle, canon.a, aux.A_hat, canon.b, aux.B_hat);
    resources::RunTranscript t(resources::RunMode::strict);
    const auto pre = distributed_sign_step(uv.u, uv.v, bundle, cfg, t, rng);

    const double w0 = std::abs(geom::inner(uv.u, bundle.lambda0));
    const double w1 = std::abs(geom::inner(uv.u, bundle.lambda1));
    const Carrier4& kept = (w1 > w0) ? bundle.lambda1 : bundle.lambda0;
    const int expected =
        geom::sgn(geom::inner(uv.u, kept)) * geom::sgn(geom::inner(uv.v, kept));
    REQUIRE(pre.alpha0 * pre.beta0 == expected);
    REQUIRE(t.pr_box_uses() == 1);
    REQUIRE(t.uses(resources::ResourceLabel::lambda_shared) == 2);
    sum_a0 += pre.alpha0;
    sum_b0 += pre.beta0;
  }
  REQUIRE(std::abs(sum_a0 / n) <= 4.0 / std::sqrt(static_cast<double>(n)));
  REQUIRE(std::abs(sum_b0 / n) <= 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("strict sign step with equal carriers always agrees") {
  RngStream rng(43);
  ProtocolConfig cfg;
  cfg.mode = resources::RunMode::strict;
  const Carrier4 c_hat = default_c_hat();
  for (int i = 0; i < 10'000; ++i) {
    const auto bundle = resources::draw_bundle(rng, c_hat);
    const Carrier4 u = geom::sample_uniform_carrier(rng);
    resources::RunTranscript t(resources::RunMode::strict);
    const auto pre = distributed_sign_step(u, u, bundle, cfg, t, rng);
    REQUIRE(pre.alpha0 * pre.beta0 == +1);
  }
}

TEST_CASE("ideal sign step reproduces the normalized inner product") {
  RngStream rng(47);
  ProtocolConfig cfg;
  cfg.mode = resources::RunMode::ideal;
  const Carrier4 c_hat = default_c_hat();
  const int n = 100'000;
  for (int pair = 0; pair < 3; ++pair) {
    const Carrier4 cu = geom::sample_uniform_carrier(rng);
    const Carrier4 cv = geom::sample_uniform_carrier(rng);
    const Carrier4 u(2.0 * cu.v1, 2.0 * cu.v2, 2.0 * cu.v3, 2.0 * cu.v0);
    const Carrier4& v = cv;
    const double expected = geom::inner(u, v) / (u.euclidean_norm * v.euclidean_norm);
    double acc = 0.0, sum_a0 = 0.0, sum_b0 = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto bundle = resources::draw_bundle(rng, c_hat);
      resources::RunTranscript t(resources::RunMode::ideal);
      const auto pre = distributed_sign_step(u, v, bundle, cfg, t, rng);
      acc += pre.alpha0 * pre.beta0;
      sum_a0 += pre.alpha0;
      sum_b0 += pre.beta0;
      if (i == 0) REQUIRE(t.has_note(resources::TranscriptNote::shared_bias_sample));
    }
    REQUIRE(std::abs(acc / n - expected) < 4.0 * pm_one_se(expected, n));
    REQUIRE(std::abs(sum_a0 / n) < 4.0 / std::sqrt(static_cast<double>(n)));
    REQUIRE(std::abs(sum_b0 / n) < 4.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("resample sign step is unbiased and converges toward the ideal value") {
  RngStream rng(53);
  ProtocolConfig cfg;
  cfg.mode = resources::RunMode::resample;
  cfg.resample_count = 512;
  const Carrier4 c_hat = default_c_hat();
  const Carrier4 u = geom::sample_uniform_carrier(rng);
  const Carrier4 v = geom::sample_uniform_carrier(rng);
  const double ideal = geom::inner(u, v) / (u.euclidean_norm * v.euclidean_norm);
  const int n = 40'000;
  double acc = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto bundle = resources::draw_bundle(rng, c_hat);
    resources::RunTranscript t(resources::RunMode::resample);
    const auto pre = distributed_sign_step(u, v, bundle, cfg, t, rng);
    acc += pre.alpha0 * pre.beta0;
    sum_a += pre.alpha0;
    sum_b += pre.beta0;
    if (i == 0) {
      REQUIRE(t.uses(resources::ResourceLabel::lambda_shared) == 512);
      REQUIRE(t.cbits() == 9);
      REQUIRE(t.has_note(resources::TranscriptNote::index_broadcast));
    }
  }
  REQUIRE(std::abs(sum_a / n) <= 4.0 / std::sqrt(static_cast<double>(n)));
  REQUIRE(std::abs(sum_b / n) <= 4.0 / std::sqrt(static_cast<double>(n)));
  REQUIRE(std::abs(acc / n - ideal) < 4.0 * pm_one_se(ideal, n) + 0.01);
}

TEST_CASE("correlated flips reproduce the closed-form moments") {
  const auto moments = flip_closed_form(0.5, 0.2, 0.4);
  REQUIRE(moments.marg_a == 0.2);
  REQUIRE(moments.marg_b == 0.4);
  REQUIRE(moments.corr == Catch::Approx(0.5).margin(1e-15));

  RngStream rng(59);
  const int n = 1'000'000;
  const double C0 = 0.5, f_a = 0.2, f_b = 0.4;
  double sum_a = 0.0, sum_b = 0.0, sum_ab = 0.0;
  for (int i = 0; i < n; ++i) {
    const bool equal = rng.uniform01() < 0.5 * (1.0 + C0);
    const int s = rng.coin_bit() ? +1 : -1;
    const int a0 = s;
    const int b0 = equal ? s : -s;
    const auto out = correlated_flip(a0, b0, f_a, f_b, rng.uniform01());
    sum_a += out.alpha;
    sum_b += out.beta;
    sum_ab += out.alpha * out.beta;
  }
  REQUIRE(std::abs(sum_a / n - moments.marg_a) < 4.0 * pm_one_se(moments.marg_a, n));
  REQUIRE(std::abs(sum_b / n - moments.marg_b) < 4.0 * pm_one_se(moments.marg_b, n));
  REQUIRE(std::abs(sum_ab / n - moments.corr) < 4.0 * pm_one_se(moments.corr, n));
}

TEST_CASE("flip with zero probabilities is the identity") {
  REQUIRE(correlated_flip(-1, +1, 0.0, 0.0, 0.73).alpha == -1);
  REQUIRE(correlated_flip(-1, +1, 0.0, 0.0, 0.73).beta == +1);
  REQUIRE_THROWS_AS(correlated_flip(-1, +1, 1.0, 0.0, 0.5), std::domain_error);
  REQUIRE_THROWS_AS(correlated_flip(-1, +1, 0.2, 0.1, 1.0), std::domain_error);
  REQUIRE_THROWS_AS(correlated_flip(0, +1, 0.2, 0.1, 0.5), std::invalid_argument);
}

TEST_CASE("flip closed form covers both probability orderings and rejects infeasible input") {
  const auto swapped = flip_closed_form(0.5, 0.4, 0.2);
  REQUIRE(swapped.corr == Catch::Approx(0.2 + 0.6 * 0.5).margin(1e-15));
  REQUIRE(flip_closed_form(1.0, 0.3, 0.3).corr == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(flip_closed_form(-1.0, 0.0, 0.0).corr == Catch::Approx(-1.0).margin(1e-15));
  REQUIRE_THROWS_AS(flip_closed_form(1.5, 0.0, 0.0), std::domain_error);
  REQUIRE_THROWS_AS(flip_closed_form(0.5, -0.1, 0.0), std::domain_error);
}

TEST_CASE("independent flips transform the correlation differently") {
  RngStream rng(61);
  const int n = 1'000'000;
  const double C0 = 0.5, f_a = 0.2, f_b = 0.4;
  const double correlated = flip_closed_form(C0, f_a, f_b).corr;
  const double independent = f_a * f_b + (1.0 - f_a) * (1.0 - f_b) * C0;
  double sum_ab = 0.0;
  for (int i = 0; i < n; ++i) {
    const bool equal = rng.uniform01() < 0.5 * (1.0 + C0);
    const int s = rng.coin_bit() ? +1 : -1;
    const int a0 = s;
    const int b0 = equal ? s : -s;
    // deliberately wrong: separate thresholds per side
    const int alpha = rng.uniform01() < f_a ? +1 : a0;
    const int beta = rng.uniform01() < f_b ? +1 : b0;
    sum_ab += alpha * beta;
  }
  const double got = sum_ab / n;
  REQUIRE(std::abs(got - independent) < 4.0 * pm_one_se(independent, n));
  REQUIRE(std::abs(got - correlated) > 10.0 * pm_one_se(correlated, n));
}

TEST_CASE("run_protocol closes a strict transcript with the exact resource counts") {
  RngStream rng(67);
  ProtocolConfig cfg;
  cfg.gamma = kPi / 6.0;
  const auto bundle = resources::draw_bundle(rng, cfg.c_hat);
  const auto result = run_protocol(kZ, kX, cfg, bundle, rng);
  const auto& t = result.transcript;
  REQUIRE(t.closed());
  REQUIRE(t.pr_box_uses() == 1);
  REQUIRE(t.m_box_uses() == 1);
  REQUIRE(t.uses(resources::ResourceLabel::mu_vector) == 5);
  REQUIRE(t.uses(resources::ResourceLabel::lambda_shared) == 2);
  REQUIRE(t.uses(resources::ResourceLabel::flip_coordinate) == 1);
  REQUIRE(t.uses(resources::ResourceLabel::box_coin) == 2);
  REQUIRE((result.outcome.alpha == 1 || result.outcome.alpha == -1));
  REQUIRE((result.outcome.beta == 1 || result.outcome.beta == -1));
}

TEST_CASE("run_protocol is deterministic given the stream") {
  ProtocolConfig cfg;
  cfg.gamma = kPi / 8.0;
  RngStream r1(71), r2(71);
  for (int i = 0; i < 200; ++i) {
    const auto b1 = resources::draw_bundle(r1, cfg.c_hat);
    const auto b2 = resources::draw_bundle(r2, cfg.c_hat);
    const auto o1 = run_protocol(kZ, kX, cfg, b1, r1).outcome;
    const auto o2 = run_protocol(kZ, kX, cfg, b2, r2).outcome;
    REQUIRE(o1.alpha == o2.alpha);
    REQUIRE(o1.beta == o2.beta);
  }
}

TEST_CASE("run_protocol transcripts reflect the configured mode") {
  RngStream rng(73);
  ProtocolConfig ideal;
  ideal.mode = resources::RunMode::ideal;
  const auto b1 = resources::draw_bundle(rng, ideal.c_hat);
  const auto r1 = run_protocol(kZ, kX, ideal, b1, rng);
  REQUIRE(r1.transcript.pr_box_uses() == 0);
  REQUIRE(r1.transcript.m_box_uses() == 1);
  REQUIRE(r1.transcript.has_note(resources::TranscriptNote::shared_bias_sample));

  ProtocolConfig resample;
  resample.mode = resources::RunMode::resample;
  resample.resample_count = 16;
  const auto b2 = resources::draw_bundle(rng, resample.c_hat);
  const auto r2 = run_protocol(kZ, kX, resample, b2, rng);
  REQUIRE(r2.transcript.cbits() == 4);
  REQUIRE(r2.transcript.uses(resources::ResourceLabel::lambda_shared) == 16);

  ProtocolConfig bad;
  bad.mode = resources::RunMode::resample;
  bad.resample_count = 1;
  const auto b3 = resources::draw_bundle(rng, bad.c_hat);
  REQUIRE_THROWS_AS(run_protocol(kZ, kX, bad, b3, rng), std::invalid_argument);

  ProtocolConfig baseline_mode;
  baseline_mode.mode = resources::RunMode::baseline;
  REQUIRE_THROWS_AS(run_protocol(kZ, kX, baseline_mode, b3, rng), std::invalid_argument);
}

TEST_CASE("run_protocol marginals match the flip probabilities") {
  RngStream rng(79);
  ProtocolConfig cfg;
  cfg.gamma = kPi / 6.0;
  const int n = 200'000;
  double sum_a = 0.0, sum_b = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto bundle = resources::draw_bundle(rng, cfg.c_hat);
    const auto out = run_protocol(kZ, kZ, cfg, bundle, rng).outcome;
    sum_a += out.alpha;
    sum_b += out.beta;
  }
  // marginals are exact by construction: c * a_z = 0.5 at this setting
  REQUIRE(std::abs(sum_a / n - 0.5) < 4.0 * pm_one_se(0.5, n));
  REQUIRE(std::abs(sum_b / n - 0.5) < 4.0 * pm_one_se(0.5, n));
}

TEST_CASE("preflip enumeration reduces to the unit-norm closed form without normalization") {
  RngStream rng(83);
  for (int i = 0; i < 100; ++i) {
    const Direction a = random_direction(rng);
    const Direction b = random_direction(rng);
    const auto sp = quantum::state_params(random_gamma(rng));
    for (int pq : {+1, -1}) {
      const auto oracle = preflip_correlation_oracle(a, b, sp, pq, AbConvention::corrected);
      const double raw = detail::preflip_enumeration_average(a, b, sp, pq,
                                                             AbConvention::corrected, false);
      REQUIRE(std::abs(raw - oracle.unit_norm_prediction) <= 1e-12);
      const Direction B = aux_direction(b, sp, AbConvention::corrected);
      const Direction A = aux_direction(a, sp, AbConvention::corrected);
      const double expected_pred = (pq == +1) ? geom::dot(a, B) : geom::dot(A, b);
      REQUIRE(oracle.unit_norm_prediction == Catch::Approx(expected_pred).margin(1e-15));
      REQUIRE(oracle.delta == Catch::Approx(oracle.exact - oracle.unit_norm_prediction)
                                  .margin(1e-15));
    }
  }
}

TEST_CASE("ideal-mode sampling matches the enumeration oracle") {
  RngStream rng(89);
  ProtocolConfig cfg;
  cfg.mode = resources::RunMode::ideal;
  const int n = 100'000;
  for (int rep = 0; rep < 3; ++rep) {
    const auto canon = canonicalize(random_direction(rng), random_direction(rng));
    const auto sp = quantum::state_params(random_gamma(rng));
    const int pq = (rep % 2 == 0) ? +1 : -1;
    const auto oracle =
        preflip_correlation_oracle(canon.a, canon.b, sp, pq, AbConvention::corrected);
    const auto aux = aux_vectors(canon.a, canon.b, sp, AbConvention::corrected);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto bundle = resources::draw_bundle(rng, cfg.c_hat);
      const int p = rng.coin_bit() ? +1 : -1;
      const int q = p * pq;
      const auto uv = select_uv(p, q, bundle, canon.a, aux.A_hat, canon.b, aux.B_hat);
      resources::RunTranscript t(resources::RunMode::ideal);
      const auto pre = distributed_sign_step(uv.u, uv.v, bundle, cfg, t, rng);
      acc += pre.alpha0 * pre.beta0;
    }
    REQUIRE(std::abs(acc / n - oracle.exact) < 4.0 * pm_one_se(oracle.exact, n));
  }
}

TEST_CASE("singlet baseline is exactly anticorrelated at equal settings") {
  RngStream rng(97);
  const Direction a = random_direction(rng);
  for (int i = 0; i < 10'000; ++i) {
    const auto result = run_singlet_baseline(a, a, rng);
    REQUIRE(result.outcome.alpha * result.outcome.beta == -1);
  }
}

TEST_CASE("singlet baseline transcript uses one PR box and nothing else") {
  RngStream rng(101);
  const auto result = run_singlet_baseline(kX, kZ, rng);
  const auto& t = result.transcript;
  REQUIRE(t.closed());
  REQUIRE(t.mode() == resources::RunMode::baseline);
  REQUIRE(t.pr_box_uses() == 1);
  REQUIRE(t.m_box_uses() == 0);
  REQUIRE(t.uses(resources::ResourceLabel::lambda_shared) == 2);
  REQUIRE(t.uses(resources::ResourceLabel::box_coin) == 1);
}

TEST_CASE("singlet baseline reproduces -a.b with unbiased marginals") {
  RngStream rng(103);
  const int n = 100'000;
  for (int rep = 0; rep < 3; ++rep) {
    const Direction a = random_direction(rng);
    const Direction b = (rep == 0) ? kY : random_direction(rng);
    const Direction a_used = (rep == 0) ? kX : a;  // include an orthogonal pair
    const double expected = -geom::dot(a_used, b);
    double sum_ab = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto out = run_singlet_baseline(a_used, b, rng).outcome;
      sum_ab += out.alpha * out.beta;
      sum_a += out.alpha;
      sum_b += out.beta;
    }
    REQUIRE(std::abs(sum_ab / n - expected) < 4.0 * pm_one_se(expected, n));
    REQUIRE(std::abs(sum_a / n) < 4.0 / std::sqrt(static_cast<double>(n)));
    REQUIRE(std::abs(sum_b / n) < 4.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("two-candidate selection on the 2-sphere has the linear bias density") {
  // Kept-candidate check: the CDF of |a . lambda_kept| must be t^2, the
  // square of the uniform cap law.
  RngStream rng(107);
  const Direction a = kZ;
  const std::size_t n = 100'000;
  std::vector<double> kept;
  kept.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Direction l0 = geom::sample_uniform_direction(rng);
    const Direction l1 = geom::sample_uniform_direction(rng);
    const double w0 = std::abs(geom::dot(a, l0));
    const double w1 = std::abs(geom::dot(a, l1));
    kept.push_back(std::max(w0, w1));
  }
  const double d = nlsim::testing::ks_one_sample(
      kept, [](double t) { return std::clamp(t * t, 0.0, 1.0); });
  REQUIRE(d < nlsim::testing::ks_one_sample_critical(0.001, n));
}
