#pragma once

// One-dimensional Wasserstein-2 distances and moment statistics.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "mfcce/rng.hpp"

namespace mfcce {

/// Sorted, finite sample in R.
class Empirical1D {
 public:
  Empirical1D() = default;
  explicit Empirical1D(std::vector<double> samples) : values_(std::move(samples)) {
    for (double x : values_)
      if (!std::isfinite(x)) throw std::invalid_argument("Empirical1D: non-finite sample");
    std::sort(values_.begin(), values_.end());
  }

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

 private:
  std::vector<double> values_;
};

struct Moments {
  double mean = 0.0;
  double second_moment = 0.0;
  double variance = 0.0;
};

inline Moments moments(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("moments: empty sample");
  const double n = static_cast<double>(x.size());
  Moments m;
  for (double v : x) {
    m.mean += v;
    m.second_moment += v * v;
  }
  m.mean /= n;
  m.second_moment /= n;
  for (double v : x) m.variance += (v - m.mean) * (v - m.mean);
  m.variance /= n;
  return m;
}

inline Moments moments(const Empirical1D& x) { return moments(x.values()); }

struct W2Result {
  double distance = 0.0;
  // Counts differed; the exact quantile coupling over merged breakpoints was used.
  bool unequal_counts = false;
  // Upper bound on |computed W2^2 - exact W2^2| from quantile root finding.
  double error_bound = 0.0;
};

/// Squared W2 between two sorted samples of equal size (order-statistic coupling).
inline double w2_squared_sorted(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return s / static_cast<double>(x.size());
}

/// W2 between empirical measures on R.
///
/// Equal sizes use the sorted coupling, which is optimal in 1D. Unequal sizes
/// integrate (Qx - Qy)^2 exactly over the merged quantile breakpoints.
inline W2Result w2_empirical_1d(const Empirical1D& x, const Empirical1D& y) {
  if (x.empty() || y.empty()) throw std::invalid_argument("w2_empirical_1d: empty sample");
  W2Result r;
  if (x.size() == y.size()) {
    r.distance = std::sqrt(w2_squared_sorted(x.values(), y.values()));
    return r;
  }
  r.unequal_counts = true;
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double u = 0.0, s = 0.0;
  while (i < x.size() && j < y.size()) {
    const double ux = static_cast<double>(i + 1) / nx;
    const double uy = static_cast<double>(j + 1) / ny;
    const double next = std::min(ux, uy);
    const double d = x[i] - y[j];
    s += d * d * (next - u);
    u = next;
    if (ux <= uy) ++i;
    if (uy <= ux) ++j;
  }
  r.distance = std::sqrt(std::max(0.0, s));
  return r;
}

/// Finite mixture of normal laws on R. Zero-variance components are point masses.
class GaussianMixture1D {
 public:
  struct Component {
    double weight = 1.0;
    double mean = 0.0;
    double variance = 0.0;
  };

  GaussianMixture1D() = default;
  explicit GaussianMixture1D(std::vector<Component> components) : components_(std::move(components)) {
    if (components_.empty()) throw std::invalid_argument("GaussianMixture1D: no components");
    double total = 0.0;
    for (const auto& c : components_) {
      if (!(c.weight >= 0.0) || !(c.variance >= 0.0) || !std::isfinite(c.mean) || !std::isfinite(c.variance))
        throw std::invalid_argument("GaussianMixture1D: invalid component");
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("GaussianMixture1D: weights must sum to 1");
    std::erase_if(components_, [](const Component& c) { return c.weight == 0.0; });
  }

  static GaussianMixture1D normal(double mean, double variance) {
    return GaussianMixture1D({{1.0, mean, variance}});
  }

  std::span<const Component> components() const noexcept { return components_; }

  double mean() const noexcept {
    double m = 0.0;
    for (const auto& c : components_) m += c.weight * c.mean;
    return m;
  }
  double second_moment() const noexcept {
    double m = 0.0;
    for (const auto& c : components_) m += c.weight * (c.variance + c.mean * c.mean);
    return m;
  }
  double variance() const noexcept {
    double mu = mean(), v = 0.0;
    for (const auto& c : components_) v += c.weight * (c.variance + (c.mean - mu) * (c.mean - mu));
    return v;
  }

  /// Right-continuous CDF.
  double cdf(double x) const noexcept {
    double F = 0.0;
    for (const auto& c : components_) F += c.weight * component_cdf(c, x);
    return F;
  }

  double max_density() const noexcept {
    double f = 0.0;
    for (const auto& c : components_)
      if (c.variance > 0.0) f += c.weight / std::sqrt(2.0 * std::numbers::pi * c.variance);
    return f;
  }

  /// inf{x : F(x) >= u} located by bisection to `tol`; returns the upper bracket.
  double quantile(double u, double tol = 1e-10) const {
    if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("GaussianMixture1D::quantile: u must lie in (0,1)");
    return bisect(u, support_lower(), support_upper(), tol);
  }

  // Brackets with F(lower) == 0 and F(upper) == 1 in double precision.
  double support_lower() const noexcept {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& c : components_) lo = std::min(lo, c.mean - 40.0 * std::sqrt(c.variance) - 1.0);
    return lo;
  }
  double support_upper() const noexcept {
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& c : components_) hi = std::max(hi, c.mean + 40.0 * std::sqrt(c.variance) + 1.0);
    return hi;
  }

  double bisect(double u, double lo, double hi, double tol) const {
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (cdf(mid) >= u)
        hi = mid;
      else
        lo = mid;
    }
    return hi;
  }

  /// Integrals of x^0, x^1, x^2 against the mixture over (lo, hi].
  struct PartialMoments {
    double mass = 0.0, first = 0.0, second = 0.0;
  };
  PartialMoments partial_moments(double lo, double hi) const noexcept {
    PartialMoments pm;
    for (const auto& c : components_) {
      PartialMoments q = component_partial(c, lo, hi);
      pm.mass += c.weight * q.mass;
      pm.first += c.weight * q.first;
      pm.second += c.weight * q.second;
    }
    return pm;
  }

  double sample(CounterStream& stream) const {
    double u = stream.next_uniform();
    const double z = stream.next_normal();
    for (const auto& c : components_) {
      if (u < c.weight || &c == &components_.back()) return c.mean + std::sqrt(c.variance) * z;
      u -= c.weight;
    }
    return 0.0;
  }

 private:
  static double std_normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
  static double std_normal_pdf(double z) noexcept {
    return std::isfinite(z) ? std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi) : 0.0;
  }

  static double component_cdf(const Component& c, double x) noexcept {
    if (c.variance == 0.0) return x >= c.mean ? 1.0 : 0.0;
    return std_normal_cdf((x - c.mean) / std::sqrt(c.variance));
  }

  static PartialMoments component_partial(const Component& c, double lo, double hi) noexcept {
    PartialMoments pm;
    if (!(hi > lo)) return pm;
    if (c.variance == 0.0) {
      if (c.mean > lo && c.mean <= hi) pm = {1.0, c.mean, c.mean * c.mean};
      return pm;
    }
    const double s = std::sqrt(c.variance);
    const double z0 = (lo - c.mean) / s, z1 = (hi - c.mean) / s;
    const double mass = std_normal_cdf(z1) - std_normal_cdf(z0);
    const double phi0 = std_normal_pdf(z0), phi1 = std_normal_pdf(z1);
    const double zphi0 = std::isfinite(z0) ? z0 * phi0 : 0.0;
    const double zphi1 = std::isfinite(z1) ? z1 * phi1 : 0.0;
    const double ez = phi0 - phi1;            // integral of z phi(z)
    const double ez2 = mass - (zphi1 - zphi0);  // integral of z^2 phi(z)
    pm.mass = mass;
    pm.first = c.mean * mass + s * ez;
    pm.second = c.mean * c.mean * mass + 2.0 * c.mean * s * ez + c.variance * ez2;
    return pm;
  }

  std::vector<Component> components_;
};

/// Quantile-cell integrals of a mixture for samples of a fixed size n.
///
/// Cell i is [i/n, (i+1)/n] in probability; stores the integrals of Q and Q^2
/// over it. Then W2^2(sample, mixture) = sum_i x_(i)^2/n - 2 x_(i) I1_i + I2_i,
/// which is the exact 1D optimal coupling cost (monotone rearrangement).
class MixtureCoupling {
 public:
  MixtureCoupling(const GaussianMixture1D& mix, std::size_t n, double tol = 1e-10) : n_(n) {
    if (n == 0) throw std::invalid_argument("MixtureCoupling: n must be positive");
    first_.resize(n);
    second_.resize(n);
    const double inf = std::numeric_limits<double>::infinity();
    double q_prev = -inf, F_prev = 0.0, u_prev = 0.0;
    double max_abs_q = 0.0;
    double hint = -inf;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = static_cast<double>(i + 1) / static_cast<double>(n);
      double q, F;
      if (i + 1 == n) {
        q = inf;
        F = 1.0;
      } else {
        if (hint == -inf) {
          q = mix.quantile(u, tol);
        } else {
          // Quantiles are nondecreasing in u; F(hint - tol) < u.
          q = mix.bisect(u, hint - tol, mix.support_upper(), tol);
        }
        F = mix.cdf(q);
        hint = q;
        max_abs_q = std::max(max_abs_q, std::abs(q));
      }
      // Integral of Q over [u_prev, u], including atom corrections at the ends.
      const auto pm = mix.partial_moments(q_prev, q);
      double i1 = pm.first, i2 = pm.second;
      if (std::isfinite(q)) {
        i1 -= q * (F - u);
        i2 -= q * q * (F - u);
      }
      if (std::isfinite(q_prev)) {
        i1 += q_prev * (F_prev - u_prev);
        i2 += q_prev * q_prev * (F_prev - u_prev);
      }
      first_[i] = i1;
      second_[i] = i2;
      q_prev = q;
      F_prev = F;
      u_prev = u;
    }
    error_bound_ = 2.0 * static_cast<double>(n) * mix.max_density() * tol * tol * (1.0 + 2.0 * max_abs_q);
  }

  std::size_t size() const noexcept { return n_; }
  double error_bound() const noexcept { return error_bound_; }

  /// Squared W2 between the sorted sample (size n) and the mixture.
  double w2_squared(std::span<const double> sorted) const {
    if (sorted.size() != n_) throw std::invalid_argument("MixtureCoupling: sample size mismatch");
    const double inv_n = 1.0 / static_cast<double>(n_);
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double x = sorted[i];
      s += x * x * inv_n - 2.0 * x * first_[i] + second_[i];
    }
    return std::max(0.0, s);
  }

 private:
  std::size_t n_;
  std::vector<double> first_;
  std::vector<double> second_;
  double error_bound_ = 0.0;
};

/// W2 between an empirical sample and a Gaussian mixture.
inline W2Result w2_vs_gaussian_mixture_1d(const Empirical1D& x, const GaussianMixture1D& mix, double tol = 1e-10) {
  if (x.empty()) throw std::invalid_argument("w2_vs_gaussian_mixture_1d: empty sample");
  const MixtureCoupling coupling(mix, x.size(), tol);
  W2Result r;
  r.distance = std::sqrt(coupling.w2_squared(x.values()));
  r.error_bound = coupling.error_bound();
  return r;
}

}  // namespace mfcce
