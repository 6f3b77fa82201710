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

#ifndef NLSIM_QUANTUM_HPP
#define NLSIM_QUANTUM_HPP

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "nlsim/geom.hpp"
#include "nlsim/rng.hpp"

namespace nlsim {

/// A pair of +/-1 outputs, Alice's first.
struct OutcomePair {
  int alpha;
  int beta;
};

}  // namespace nlsim

namespace nlsim::quantum {

inline constexpr double kPmfTol = 1e-12;

/// Entanglement parameter gamma in (0, pi/4] with the derived constants
/// c = cos(2*gamma), s = sin(2*gamma).
struct StateParam {
  double gamma;
  double c;
  double s;
};

inline StateParam state_params(double gamma) {
  constexpr double quarter_pi = std::numbers::pi / 4.0;
  if (!std::isfinite(gamma) || gamma <= 0.0 || gamma > quarter_pi + 1e-12)
    throw std::domain_error("state_params: gamma must lie in (0, pi/4]");
  return {gamma, std::cos(2.0 * gamma), std::sin(2.0 * gamma)};
}

/// Joint distribution over the four outcome cells in the fixed order
/// (+,+), (+,-), (-,+), (-,-). Entries within kPmfTol below 0 or above 1
/// are clamped; anything worse is an internal consistency failure.
class JointPMF {
 public:
  JointPMF(double pp, double pm, double mp, double mm) : cells_{pp, pm, mp, mm} {
    double sum = 0.0;
    for (double& p : cells_) {
      if (!std::isfinite(p) || p < -kPmfTol || p > 1.0 + kPmfTol)
        throw std::logic_error("JointPMF: cell probability outside [0, 1]");
      p = std::min(std::max(p, 0.0), 1.0);
      sum += p;
    }
    if (std::abs(sum - 1.0) > 4.0 * kPmfTol)
      throw std::logic_error("JointPMF: cells must sum to 1");
  }

  double p_pp() const { return cells_[0]; }
  double p_pm() const { return cells_[1]; }
  double p_mp() const { return cells_[2]; }
  double p_mm() const { return cells_[3]; }

  const std::array<double, 4>& cells() const { return cells_; }

  double mean_alpha() const { return cells_[0] + cells_[1] - cells_[2] - cells_[3]; }
  double mean_beta() const { return cells_[0] - cells_[1] + cells_[2] - cells_[3]; }
  double correlation() const { return cells_[0] - cells_[1] - cells_[2] + cells_[3]; }

 private:
  std::array<double, 4> cells_;
};

inline const std::array<const char*, 4>& cell_labels() {
  static const std::array<const char*, 4> labels = {"pp", "pm", "mp", "mm"};
  return labels;
}

/// Correlation of the two +/-1 outputs: a_z b_z + s (a_x b_x - a_y b_y).
inline double correlation(const geom::Direction& a, const geom::Direction& b,
                          const StateParam& sp) {
  return a.z * b.z + sp.s * (a.x * b.x - a.y * b.y);
}

/// Closed-form joint distribution with marginals c*a_z, c*b_z and the
/// correlation above.
inline JointPMF joint_pmf_qm(const geom::Direction& a, const geom::Direction& b,
                             const StateParam& sp) {
  const double ma = sp.c * a.z;
  const double mb = sp.c * b.z;
  const double cc = correlation(a, b, sp);
  const auto cell = [&](int alpha, int beta) {
    return 0.25 * (1.0 + alpha * ma + beta * mb + alpha * beta * cc);
  };
  return JointPMF(cell(+1, +1), cell(+1, -1), cell(-1, +1), cell(-1, -1));
}

/// Same distribution computed by brute force from the state's density
/// matrix and explicit projector matrices: an independent cross-check of
/// joint_pmf_qm. Basis order |00>, |01>, |10>, |11>; sigma_y carries the
/// imaginary entries, which is what fixes the sign of the a_y b_y term.
inline JointPMF joint_pmf_oracle(const geom::Direction& a, const geom::Direction& b,
                                 const StateParam& sp) {
  using cd = std::complex<double>;

  // 2x2 projector (I + sign * n.sigma) / 2, stored row major.
  const auto projector = [](const geom::Direction& n, int sign) {
    std::array<cd, 4> m;
    m[0] = cd(0.5 * (1.0 + sign * n.z), 0.0);
    m[1] = cd(0.5 * sign * n.x, -0.5 * sign * n.y);
    m[2] = cd(0.5 * sign * n.x, 0.5 * sign * n.y);
    m[3] = cd(0.5 * (1.0 - sign * n.z), 0.0);
    return m;
  };

  const std::array<cd, 4> psi = {cd(std::cos(sp.gamma), 0.0), cd(0.0, 0.0),
                                 cd(0.0, 0.0), cd(std::sin(sp.gamma), 0.0)};
  std::array<std::array<cd, 4>, 4> rho;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) rho[i][j] = psi[i] * std::conj(psi[j]);

  const auto cell = [&](int alpha, int beta) {
    const auto pa = projector(a, alpha);
    const auto pb = projector(b, beta);
    cd trace(0.0, 0.0);
    for (int i = 0; i < 4; ++i) {
      for (int k = 0; k < 4; ++k) {
        // M = kron(pa, pb); M[k][i] indexes Alice by the high bit, Bob low.
        const cd m_ki = pa[(k >> 1) * 2 + (i >> 1)] * pb[(k & 1) * 2 + (i & 1)];
        trace += rho[i][k] * m_ki;
      }
    }
    return trace.real();
  };

  return JointPMF(cell(+1, +1), cell(+1, -1), cell(-1, +1), cell(-1, -1));
}

/// Inverse-CDF draw over the fixed cell order.
inline OutcomePair sample_qm(const JointPMF& pmf, RngStream& rng) {
  const double u = rng.uniform01();
  const auto& p = pmf.cells();
  double acc = p[0];
  if (u < acc) return {+1, +1};
  acc += p[1];
  if (u < acc) return {+1, -1};
  acc += p[2];
  if (u < acc) return {-1, +1};
  return {-1, -1};
}

}  // namespace nlsim::quantum

#endif  // NLSIM_QUANTUM_HPP
