#pragma once

// Closed forms for the bang-bang game with a 2x2 correlation device.
//
// The device draws (i, j) with probability p_ij. Row i selects the recommended
// constant control (u+ = b for i = 1, u- = a for i = 2); column j selects the
// flow mu^j = a_j mu+ + (1 - a_j) mu-, where mu+/- is the law of t*b + W_t or
// t*a + W_t. Optimality reduces to h*m + k >= 0 for every m in [a, b].

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfcce::example {

struct DeviceProbs {
  double p11 = 0.0, p12 = 0.0, p21 = 0.0, p22 = 0.0;

  void validate() const {
    for (double p : {p11, p12, p21, p22})
      if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("DeviceProbs: probabilities must be >= 0");
    if (std::abs(p11 + p12 + p21 + p22 - 1.0) > 1e-12)
      throw std::invalid_argument("DeviceProbs: probabilities must sum to 1");
  }

  double column_mass(int j) const noexcept { return j == 1 ? p11 + p21 : p12 + p22; }
  double plus_mass() const noexcept { return p11 + p12; }
  double minus_mass() const noexcept { return p21 + p22; }

  /// (p11,p12,p21,p22) -> (p22,p21,p12,p11): relabels u+ <-> u- and mu^1 <-> mu^2.
  DeviceProbs swapped() const noexcept { return {p22, p21, p12, p11}; }

  friend bool operator==(const DeviceProbs&, const DeviceProbs&) = default;
};

struct AffineCoeffs {
  double h = 0.0;
  double k = 0.0;

  double operator()(double m) const noexcept { return h * m + k; }
};

struct ConsistencyWeights {
  std::optional<double> a1;
  std::optional<double> a2;
};

/// a_j = P(u+ | column j); undefined for a column that never occurs.
inline ConsistencyWeights consistency_weights(const DeviceProbs& p) {
  p.validate();
  ConsistencyWeights w;
  if (const double c1 = p.p11 + p.p21; c1 > 0.0) w.a1 = p.p11 / c1;
  if (const double c2 = p.p12 + p.p22; c2 > 0.0) w.a2 = p.p12 / c2;
  return w;
}

namespace detail {
// num / den, with the continuity convention 0 for an empty column.
inline double ratio(double num, double den) noexcept { return den > 0.0 ? num / den : 0.0; }

inline void require_interval(double a, double b) {
  if (!(a < 0.0 && 0.0 < b)) throw std::invalid_argument("requires a < 0 < b");
}
}  // namespace detail

/// h and k after imposing consistency, evaluated term by term from the raw
/// fractions. Empty-column fractions contribute 0.
inline AffineCoeffs hk_coefficients(const DeviceProbs& p, double a, double b) {
  p.validate();
  detail::require_interval(a, b);
  using detail::ratio;
  const double c1 = p.p11 + p.p21;
  const double c2 = p.p12 + p.p22;
  AffineCoeffs r;
  r.h = -b * (ratio(p.p11 * p.p11 + p.p21 * p.p11, c1) + ratio(p.p12 * p.p12 + p.p12 * p.p22, c2)) -
        a * (ratio(p.p21 * p.p21 + p.p21 * p.p11, c1) + ratio(p.p22 * p.p22 + p.p12 * p.p22, c2));
  r.k = b * b * (ratio(p.p11 * p.p11, c1) + ratio(p.p12 * p.p12, c2)) +
        a * a * (ratio(p.p21 * p.p21, c1) + ratio(p.p22 * p.p22, c2)) +
        2.0 * a * b * (ratio(p.p11 * p.p21, c1) + ratio(p.p12 * p.p22, c2));
  return r;
}

/// Diagonal devices (p12 = p21 = 0, p22 = 1 - p11).
inline AffineCoeffs diagonal_hk(double p11, double a, double b) {
  if (!(p11 >= 0.0 && p11 <= 1.0)) throw std::invalid_argument("diagonal_hk: p11 must lie in [0,1]");
  detail::require_interval(a, b);
  return {-b * p11 - a * (1.0 - p11), b * b * p11 + a * a * (1.0 - p11)};
}

/// min over m in [a, b] of h m + k; nonnegative iff the device is a mean field CCE.
inline double cce_margin(const DeviceProbs& p, double a, double b) {
  const AffineCoeffs hk = hk_coefficients(p, a, b);
  return std::min(hk.h * a + hk.k, hk.h * b + hk.k);
}

/// Endpoint of [a, b] minimizing h m + k; ties (h == 0) resolve to a.
inline double worst_case_deviation(const AffineCoeffs& coeffs, double a, double b) {
  if (!(a < b)) throw std::invalid_argument("worst_case_deviation: requires a < b");
  return coeffs.h < 0.0 ? b : a;
}

struct MeanFieldPayoffs {
  double j_rec = 0.0;
  double j_dev = 0.0;
};

/// Payoff of following the device and of a deviation with time-averaged
/// control m_beta, both against the device flows.
inline MeanFieldPayoffs mean_field_payoffs(const DeviceProbs& p, double a, double b, double c, double T,
                                           double m_beta) {
  p.validate();
  detail::require_interval(a, b);
  if (!(m_beta >= a && m_beta <= b)) throw std::invalid_argument("mean_field_payoffs: m_beta must lie in [a,b]");
  const auto w = consistency_weights(p);
  const double scale = c * T * T;
  const std::array<double, 2> u{b, a};
  const std::array<std::array<double, 2>, 2> pij{{{p.p11, p.p12}, {p.p21, p.p22}}};
  std::array<double, 2> mbar{0.0, 0.0};
  if (w.a1) mbar[0] = *w.a1 * b + (1.0 - *w.a1) * a;
  if (w.a2) mbar[1] = *w.a2 * b + (1.0 - *w.a2) * a;
  MeanFieldPayoffs r;
  double flow_mean = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      r.j_rec += pij[i][j] * u[i] * mbar[j];
      flow_mean += pij[i][j] * mbar[j];
    }
  r.j_rec *= scale;
  r.j_dev = scale * m_beta * flow_mean;
  return r;
}

/// Exact N-player gap of the device over constant deviations.
///
/// Players' recommendations are conditionally i.i.d. given the drawn column.
/// With X^i_T = T u_i + W^i_T, player 1's expected payoff is
/// c [E (X^1_T)^2 / N + (N-1)/N E X^1_T X^2_T].
inline double finite_n_gap_oracle(const DeviceProbs& p, double a, double b, double c, double T, long long N) {
  p.validate();
  detail::require_interval(a, b);
  if (N < 2) throw std::invalid_argument("finite_n_gap_oracle: N must be >= 2");
  const double n = static_cast<double>(N);
  const auto w = consistency_weights(p);
  const double ubar = p.plus_mass() * b + p.minus_mass() * a;
  const double u2 = p.plus_mass() * b * b + p.minus_mass() * a * a;
  double cond2 = 0.0;  // E[(E[u | column])^2]
  if (w.a1) {
    const double m1 = *w.a1 * b + (1.0 - *w.a1) * a;
    cond2 += p.column_mass(1) * m1 * m1;
  }
  if (w.a2) {
    const double m2 = *w.a2 * b + (1.0 - *w.a2) * a;
    cond2 += p.column_mass(2) * m2 * m2;
  }
  const double T2 = T * T;
  const double j_rec = c * ((T2 * u2 + T) / n + ((n - 1.0) / n) * T2 * cond2);
  auto j_dev = [&](double m) { return c * ((T2 * m * m + T) / n + ((n - 1.0) / n) * T2 * m * ubar); };
  double best = std::max(j_dev(a), j_dev(b));
  // Stationary point of the quadratic; a maximum only if the leading term were negative.
  const double vertex = -((n - 1.0) * ubar) / 2.0;
  if (vertex > a && vertex < b) best = std::max(best, j_dev(vertex));
  return std::max(0.0, best - j_rec);
}

struct RegionCell {
  double p11 = 0.0, p22 = 0.0, p12 = 0.0, p21 = 0.0;
  double h = 0.0, k = 0.0;
  double margin = 0.0;
  bool is_cce = false;
  bool present = true;

  DeviceProbs probs() const noexcept { return {p11, p12, p21, p22}; }
};

inline constexpr double kMarginTolerance = 1e-12;

/// Sweep of the (p11, p22) square at fixed alpha.
///
/// Row r = 0 is the top of the picture; x = col/(R-1) runs left to right and
/// y = 1 - r/(R-1) bottom to top. On and above the main diagonal (y >= x):
/// p11 = x, p22 = 1 - y, p12 = alpha s, p21 = (1 - alpha) s with
/// s = 1 - p11 - p22. Below it the directions and the off-diagonal split are
/// mirrored: p11 = 1 - x, p22 = y, p12 = (1 - alpha) s, p21 = alpha s.
/// Every cell is a probability vector; the main diagonal carries the devices
/// with p12 = p21 = 0.
struct RegionGrid {
  int resolution = 0;
  double alpha = 0.0;
  double a = -1.0, b = 1.0;
  std::vector<RegionCell> cells;  // row-major

  const RegionCell& at(int row, int col) const { return cells.at(static_cast<std::size_t>(row * resolution + col)); }
  std::size_t cce_count() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.present && c.is_cce; }));
  }
};

inline RegionCell evaluate_cell(const DeviceProbs& p, double a, double b) {
  RegionCell cell;
  cell.p11 = p.p11;
  cell.p12 = p.p12;
  cell.p21 = p.p21;
  cell.p22 = p.p22;
  const auto hk = hk_coefficients(p, a, b);
  cell.h = hk.h;
  cell.k = hk.k;
  cell.margin = std::min(hk.h * a + hk.k, hk.h * b + hk.k);
  cell.is_cce = cell.margin >= -kMarginTolerance;
  return cell;
}

inline RegionGrid region_sweep(int resolution, double alpha, double a, double b) {
  if (resolution < 2) throw std::invalid_argument("region_sweep: resolution must be >= 2");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("region_sweep: alpha must lie in [0,1]");
  detail::require_interval(a, b);
  RegionGrid g;
  g.resolution = resolution;
  g.alpha = alpha;
  g.a = a;
  g.b = b;
  g.cells.reserve(static_cast<std::size_t>(resolution) * resolution);
  const double last = resolution - 1;
  for (int r = 0; r < resolution; ++r) {
    for (int col = 0; col < resolution; ++col) {
      // Integer comparison decides the side so the diagonal is exact.
      const int y_index = resolution - 1 - r;
      DeviceProbs p;
      if (y_index == col) {
        p.p11 = col / last;
        p.p22 = 1.0 - p.p11;
      } else if (y_index > col) {
        p.p11 = col / last;
        p.p22 = (resolution - 1 - y_index) / last;
        const double s = std::max(0.0, 1.0 - p.p11 - p.p22);
        p.p12 = alpha * s;
        p.p21 = (1.0 - alpha) * s;
      } else {
        p.p11 = (resolution - 1 - col) / last;
        p.p22 = y_index / last;
        const double s = std::max(0.0, 1.0 - p.p11 - p.p22);
        p.p12 = (1.0 - alpha) * s;
        p.p21 = alpha * s;
      }
      RegionCell cell;
      if (p.p11 + p.p22 > 1.0 + 1e-12) {
        cell.p11 = p.p11;
        cell.p22 = p.p22;
        cell.present = false;
      } else {
        cell = evaluate_cell(p, a, b);
      }
      g.cells.push_back(cell);
    }
  }
  return g;
}

/// Default alpha values used when none are given.
inline std::vector<double> default_alphas() { return {0.0, 0.25, 0.5, 0.75, 1.0}; }

}  // namespace mfcce::example
