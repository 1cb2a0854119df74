#pragma once

// Game primitives: drift, costs, action set, initial law, horizon.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfcce/rng.hpp"

namespace mfcce {

enum class Sense { minimize, maximize };

/// +1 when larger functional values are preferred, -1 otherwise.
constexpr double preference_sign(Sense s) noexcept { return s == Sense::maximize ? 1.0 : -1.0; }

/// Compact box A = [lo, hi] in action space.
class ActionBox {
 public:
  ActionBox(std::vector<double> lo, std::vector<double> hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.empty() || lo_.size() != hi_.size())
      throw std::invalid_argument("ActionBox: lo and hi must be nonempty and of equal size");
    for (std::size_t i = 0; i < lo_.size(); ++i) {
      if (!std::isfinite(lo_[i]) || !std::isfinite(hi_[i]))
        throw std::invalid_argument("ActionBox: bounds must be finite");
      if (lo_[i] > hi_[i]) throw std::invalid_argument("ActionBox: lo must not exceed hi");
    }
  }

  std::size_t dim() const noexcept { return lo_.size(); }
  std::span<const double> lo() const noexcept { return lo_; }
  std::span<const double> hi() const noexcept { return hi_; }

  bool contains(std::span<const double> a, double tol = 1e-12) const noexcept {
    if (a.size() != lo_.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!(a[i] >= lo_[i] - tol && a[i] <= hi_[i] + tol)) return false;
    return true;
  }

 private:
  std::vector<double> lo_;
  std::vector<double> hi_;
};

/// Summary of a measure on R^d as seen by drift and cost rules.
///
/// `second_moment` is E|X|^2 (summed over coordinates). `particles` is a
/// flat, point-major (count x dim) view and is empty when the measure is
/// not particle-backed.
struct MeasureView {
  std::vector<double> mean;
  double second_moment = 0.0;
  std::span<const double> particles;

  std::size_t dim() const noexcept { return mean.size(); }
  bool has_particles() const noexcept { return !particles.empty(); }
  std::size_t particle_count() const noexcept { return mean.empty() ? 0 : particles.size() / mean.size(); }

  /// Uniform empirical measure over `points` (count x dim, point-major).
  static MeasureView from_particles(std::span<const double> points, std::size_t dim, bool keep_points = true) {
    MeasureView v;
    v.mean.assign(dim, 0.0);
    const std::size_t n = points.size() / dim;
    double sq = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t c = 0; c < dim; ++c) {
        const double x = points[j * dim + c];
        v.mean[c] += x;
        sq += x * x;
      }
    for (auto& m : v.mean) m /= static_cast<double>(n);
    v.second_moment = sq / static_cast<double>(n);
    if (keep_points) v.particles = points;
    return v;
  }

  /// Jensen bound |mean|^2 <= second_moment, and particle summaries when present.
  bool consistent(double tol = 1e-12) const {
    double m2 = 0.0;
    for (double m : mean) m2 += m * m;
    if (second_moment < 0.0 || m2 > second_moment * (1.0 + tol) + tol) return false;
    if (has_particles()) {
      const MeasureView again = from_particles(particles, dim(), false);
      for (std::size_t c = 0; c < dim(); ++c)
        if (std::abs(again.mean[c] - mean[c]) > tol * (1.0 + std::abs(mean[c]))) return false;
      if (std::abs(again.second_moment - second_moment) > tol * (1.0 + second_moment)) return false;
    }
    return true;
  }
};

/// b(t, x, m, a) written into `out` (size dim).
using DriftRule = std::function<void(double t, std::span<const double> x, const MeasureView& m,
                                     std::span<const double> a, std::span<double> out)>;
/// f(t, x, m, a).
using RunningCostRule =
    std::function<double(double t, std::span<const double> x, const MeasureView& m, std::span<const double> a)>;
/// g(x, m).
using TerminalCostRule = std::function<double(std::span<const double> x, const MeasureView& m)>;

/// Initial law: a point mass or a sampler driven by a counter stream.
class InitialLaw {
 public:
  using Sampler = std::function<void(CounterStream&, std::span<double>)>;

  static InitialLaw point_mass(std::vector<double> point) {
    InitialLaw law;
    law.point_ = std::move(point);
    return law;
  }
  static InitialLaw from_sampler(std::size_t dim, Sampler sampler) {
    InitialLaw law;
    law.point_.assign(dim, 0.0);
    law.sampler_ = std::move(sampler);
    return law;
  }

  std::size_t dim() const noexcept { return point_.size(); }
  bool is_point_mass() const noexcept { return !sampler_; }
  std::span<const double> point() const noexcept { return point_; }

  void draw(CounterStream& stream, std::span<double> out) const {
    if (sampler_)
      sampler_(stream, out);
    else
      std::copy(point_.begin(), point_.end(), out.begin());
  }

 private:
  std::vector<double> point_;
  Sampler sampler_;
};

/// Immutable description of the symmetric game. Rules must be pure.
struct ModelSpec {
  std::size_t dim = 1;
  double horizon = 1.0;
  ActionBox actions{{0.0}, {0.0}};
  InitialLaw initial_law = InitialLaw::point_mass({0.0});
  DriftRule drift;
  RunningCostRule running_cost;
  TerminalCostRule terminal_cost;
  Sense sense = Sense::minimize;
  // Drift ignores its measure argument. Enables the single-deviator fast path.
  bool drift_measure_free = false;
  // Rules read MeasureView::particles; the engine only fills them when set.
  bool needs_particles = false;
  std::string name;

  void validate() const {
    if (dim == 0) throw std::invalid_argument("ModelSpec: dim must be positive");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("ModelSpec: horizon must be > 0");
    if (initial_law.dim() != dim) throw std::invalid_argument("ModelSpec: initial law dimension mismatch");
    if (!drift || !running_cost || !terminal_cost) throw std::invalid_argument("ModelSpec: missing rule");
  }

  std::size_t action_dim() const noexcept { return actions.dim(); }
};

/// Bang-bang game: d = 1, drift = a, no running cost, terminal payoff c x mean(m),
/// actions [a_lo, b_hi], start at 0, payoff maximized.
inline ModelSpec build_bang_bang_model(double a_lo, double b_hi, double c, double T) {
  if (!(a_lo < 0.0)) throw std::invalid_argument("bang-bang model requires a_lo < 0");
  if (!(b_hi > 0.0)) throw std::invalid_argument("bang-bang model requires b_hi > 0");
  if (!(c > 0.0)) throw std::invalid_argument("bang-bang model requires c > 0");
  if (!(T > 0.0)) throw std::invalid_argument("bang-bang model requires T > 0");
  ModelSpec m;
  m.name = "bang_bang";
  m.dim = 1;
  m.horizon = T;
  m.actions = ActionBox({a_lo}, {b_hi});
  m.initial_law = InitialLaw::point_mass({0.0});
  m.drift = [](double, std::span<const double>, const MeasureView&, std::span<const double> a,
               std::span<double> out) { out[0] = a[0]; };
  m.running_cost = [](double, std::span<const double>, const MeasureView&, std::span<const double>) { return 0.0; };
  m.terminal_cost = [c](std::span<const double> x, const MeasureView& mv) { return c * x[0] * mv.mean[0]; };
  m.sense = Sense::maximize;
  m.drift_measure_free = true;
  return m;
}

struct LipschitzReport {
  std::vector<double> scales;
  // Max observed quotient per probe scale, for each argument of the drift.
  std::vector<double> quotient_x;
  std::vector<double> quotient_a;
  std::vector<double> quotient_mean;
  double max_x = 0.0;
  double max_a = 0.0;
  double max_mean = 0.0;
  // A quotient at the largest scale exceeds twice the one at the smallest scale.
  bool growth_flag = false;
};

/// Empirical Lipschitz quotients of the drift in x, a and the measure mean.
///
/// At each scale s in {1, 10, 100}, probe pairs are drawn with x and the mean
/// uniform in [-s, s]^d and actions uniform in the box; one argument is varied
/// at a time. Purely diagnostic.
inline LipschitzReport validate_lipschitz(const ModelSpec& model, int probe_count, std::uint64_t seed) {
  if (probe_count < 2) throw std::invalid_argument("validate_lipschitz: probe_count must be >= 2");
  model.validate();
  const std::size_t d = model.dim;
  const std::size_t k = model.action_dim();
  LipschitzReport rep;
  rep.scales = {1.0, 10.0, 100.0};

  auto norm_diff = [](std::span<const double> u, std::span<const double> v) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - v[i]) * (u[i] - v[i]);
    return std::sqrt(s);
  };

  std::vector<double> x1(d), x2(d), a1(k), a2(k), m1(d), m2(d), out1(d), out2(d);
  for (std::size_t si = 0; si < rep.scales.size(); ++si) {
    const double s = rep.scales[si];
    CounterStream rng(seed, si, 0, StreamPurpose::probe);
    double qx = 0.0, qa = 0.0, qm = 0.0;
    auto unif = [&](double lo, double hi) { return lo + (hi - lo) * rng.next_uniform(); };
    auto view_of = [&](const std::vector<double>& mean) {
      MeasureView v;
      v.mean = mean;
      double m2sum = 0.0;
      for (double x : mean) m2sum += x * x;
      v.second_moment = m2sum + 1.0;
      return v;
    };
    for (int p = 0; p < probe_count; ++p) {
      const double t = model.horizon * rng.next_uniform();
      for (std::size_t i = 0; i < d; ++i) {
        x1[i] = unif(-s, s);
        x2[i] = unif(-s, s);
        m1[i] = unif(-s, s);
        m2[i] = unif(-s, s);
      }
      for (std::size_t i = 0; i < k; ++i) {
        a1[i] = unif(model.actions.lo()[i], model.actions.hi()[i]);
        a2[i] = unif(model.actions.lo()[i], model.actions.hi()[i]);
      }
      const MeasureView v1 = view_of(m1);
      const MeasureView v2 = view_of(m2);

      model.drift(t, x1, v1, a1, out1);
      model.drift(t, x2, v1, a1, out2);
      if (double den = norm_diff(x1, x2); den > 0) qx = std::max(qx, norm_diff(out1, out2) / den);
      model.drift(t, x1, v1, a2, out2);
      if (double den = norm_diff(a1, a2); den > 0) qa = std::max(qa, norm_diff(out1, out2) / den);
      model.drift(t, x1, v2, a1, out2);
      if (double den = norm_diff(m1, m2); den > 0) qm = std::max(qm, norm_diff(out1, out2) / den);
    }
    rep.quotient_x.push_back(qx);
    rep.quotient_a.push_back(qa);
    rep.quotient_mean.push_back(qm);
  }
  auto grows = [](const std::vector<double>& q) { return q.back() > 2.0 * q.front() + 1e-12; };
  rep.max_x = *std::max_element(rep.quotient_x.begin(), rep.quotient_x.end());
  rep.max_a = *std::max_element(rep.quotient_a.begin(), rep.quotient_a.end());
  rep.max_mean = *std::max_element(rep.quotient_mean.begin(), rep.quotient_mean.end());
  rep.growth_flag = grows(rep.quotient_x) || grows(rep.quotient_a) || grows(rep.quotient_mean);
  return rep;
}

}  // namespace mfcce
