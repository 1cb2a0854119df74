#pragma once

// Euler-Maruyama simulation of the N-player system and the representative
// player, measure flows, and the McKean-Vlasov particle fixed point.
//
// Noise: each (replication, player) pair owns a counter stream; its Brownian
// path on the grid is produced by BrownianBridgeSampler (terminal value first).
// Actions and measures are evaluated at the left endpoint of each step, and
// all players advance against the frozen time-t empirical measure.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mfcce/metrics.hpp"
#include "mfcce/model.hpp"
#include "mfcce/parallel.hpp"
#include "mfcce/rng.hpp"

namespace mfcce {

/// Non-finite state or out-of-box action during a simulation.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, std::size_t step, std::size_t player)
      : std::runtime_error(what + " (step " + std::to_string(step) + ", player " + std::to_string(player) + ")"),
        step_(step),
        player_(player) {}
  std::size_t step() const noexcept { return step_; }
  std::size_t player() const noexcept { return player_; }

 private:
  std::size_t step_;
  std::size_t player_;
};

/// Uniform grid on [0, T]. time(steps) == T exactly.
class TimeGrid {
 public:
  TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("TimeGrid: horizon must be > 0");
    if (steps == 0) throw std::invalid_argument("TimeGrid: steps must be positive");
    times_.resize(steps + 1);
    for (std::size_t k = 0; k < steps; ++k) times_[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
    times_[steps] = horizon;
  }

  double horizon() const noexcept { return horizon_; }
  std::size_t steps() const noexcept { return steps_; }
  double dt() const noexcept { return horizon_ / static_cast<double>(steps_); }
  double time(std::size_t k) const noexcept { return times_[k]; }
  /// Width of step k, t_{k+1} - t_k. Left Riemann sums over these telescope exactly.
  double step_width(std::size_t k) const noexcept { return times_[k + 1] - times_[k]; }
  std::span<const double> times() const noexcept { return times_; }

 private:
  double horizon_;
  std::size_t steps_;
  std::vector<double> times_;
};

class MeasureFlow;

/// Information available to an open-loop action rule at time t.
struct ActionContext {
  double t = 0.0;
  std::size_t step = 0;
  std::size_t player = 0;
  int scenario = -1;
  std::span<const double> initial_state;
  std::span<const double> noise;  // own Brownian value W_t
  const MeasureFlow* flow = nullptr;
};

using ActionRule = std::function<void(const ActionContext&, std::span<double> action)>;

inline ActionRule constant_action(std::vector<double> value) {
  return [value = std::move(value)](const ActionContext&, std::span<double> a) {
    std::copy(value.begin(), value.end(), a.begin());
  };
}
inline ActionRule constant_action(double value) {
  return [value](const ActionContext&, std::span<double> a) { a[0] = value; };
}

/// Component of a Gaussian flow: weight w and law Normal(mean(t), variance(t)).
struct GaussianFlowComponent {
  double weight = 1.0;
  std::function<double(double)> mean;
  std::function<double(double)> variance;
};

/// Time-indexed family of measures on R^d.
///
/// Gaussian-mixture flows are 1D and defined for every t. Particle flows hold
/// P points per grid step (step-major, P x d per step) and are tied to a grid.
class MeasureFlow {
 public:
  static MeasureFlow gaussian_mixture(std::vector<GaussianFlowComponent> components, std::string label = {}) {
    if (components.empty()) throw std::invalid_argument("MeasureFlow: no components");
    double total = 0.0;
    for (const auto& c : components) {
      if (!(c.weight >= 0.0) || !c.mean || !c.variance) throw std::invalid_argument("MeasureFlow: invalid component");
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("MeasureFlow: weights must sum to 1");
    MeasureFlow f;
    f.label_ = std::move(label);
    f.rep_ = std::move(components);
    return f;
  }

  static MeasureFlow particles(const TimeGrid& grid, std::size_t dim, std::size_t count, std::vector<double> data,
                               std::string label = {}) {
    if (dim == 0 || count == 0) throw std::invalid_argument("MeasureFlow: empty particle flow");
    if (data.size() != (grid.steps() + 1) * count * dim)
      throw std::invalid_argument("MeasureFlow: particle array has the wrong size");
    MeasureFlow f;
    f.label_ = std::move(label);
    ParticleData pd{grid.steps(), dim, count, std::move(data), {}};
    pd.views.reserve(grid.steps() + 1);
    for (std::size_t k = 0; k <= grid.steps(); ++k)
      pd.views.push_back(MeasureView::from_particles(
          std::span<const double>(pd.data).subspan(k * count * dim, count * dim), dim, false));
    f.rep_ = std::move(pd);
    return f;
  }

  bool is_gaussian() const noexcept { return std::holds_alternative<std::vector<GaussianFlowComponent>>(rep_); }
  bool is_particle() const noexcept { return !is_gaussian(); }
  const std::string& label() const noexcept { return label_; }

  std::size_t dim() const noexcept { return is_gaussian() ? 1 : std::get<ParticleData>(rep_).dim; }

  /// Marginal at time t (Gaussian flows only).
  GaussianMixture1D mixture_at(double t) const {
    const auto& comps = std::get<std::vector<GaussianFlowComponent>>(rep_);
    std::vector<GaussianMixture1D::Component> out;
    out.reserve(comps.size());
    for (const auto& c : comps) {
      const double var = c.variance(t);
      if (!(var >= 0.0)) throw std::domain_error("MeasureFlow: negative variance");
      out.push_back({c.weight, c.mean(t), var});
    }
    return GaussianMixture1D(std::move(out));
  }

  /// Particle positions at grid step k (count x dim).
  std::span<const double> particles_at(std::size_t k) const {
    const auto& pd = std::get<ParticleData>(rep_);
    return std::span<const double>(pd.data).subspan(k * pd.count * pd.dim, pd.count * pd.dim);
  }
  std::size_t particle_count() const { return std::get<ParticleData>(rep_).count; }

  /// Summary at grid step k. Particle views carry their points.
  MeasureView view(const TimeGrid& grid, std::size_t k) const {
    if (is_gaussian()) {
      const GaussianMixture1D m = mixture_at(grid.time(k));
      MeasureView v;
      v.mean = {m.mean()};
      v.second_moment = m.second_moment();
      return v;
    }
    const auto& pd = std::get<ParticleData>(rep_);
    if (pd.steps != grid.steps()) throw std::invalid_argument("MeasureFlow: grid mismatch");
    MeasureView v = pd.views[k];
    v.particles = particles_at(k);
    return v;
  }

  std::vector<MeasureView> views(const TimeGrid& grid) const {
    std::vector<MeasureView> out;
    out.reserve(grid.steps() + 1);
    for (std::size_t k = 0; k <= grid.steps(); ++k) out.push_back(view(grid, k));
    return out;
  }

  /// 1D marginal at step k as a sorted sample (particle flows only).
  Empirical1D marginal(std::size_t k) const {
    if (dim() != 1) throw std::invalid_argument("MeasureFlow::marginal: 1D only");
    auto pts = particles_at(k);
    return Empirical1D(std::vector<double>(pts.begin(), pts.end()));
  }

 private:
  struct ParticleData {
    std::size_t steps = 0, dim = 0, count = 0;
    std::vector<double> data;
    std::vector<MeasureView> views;
  };
  std::string label_;
  std::variant<std::vector<GaussianFlowComponent>, ParticleData> rep_;
};

/// Normal(m0 + rate t, t): the law of m0 + rate t + W_t.
inline GaussianFlowComponent drifting_brownian_component(double weight, double rate, double m0 = 0.0) {
  return {weight, [rate, m0](double t) { return m0 + rate * t; }, [](double t) { return t; }};
}

/// Result of an N-player run: paths are player-major, N x (steps+1) x d.
struct SimulationBatch {
  std::size_t players = 0, steps = 0, dim = 0, action_dim = 0;
  std::vector<double> paths;
  std::vector<double> actions;  // N x steps x action_dim (empty if not recorded)
  std::uint64_t noise_seed = 0;
  std::uint64_t replication = 0;
  int scenario_index = -1;

  std::span<const double> state(std::size_t player, std::size_t step) const {
    return std::span<const double>(paths).subspan((player * (steps + 1) + step) * dim, dim);
  }
  std::span<const double> action(std::size_t player, std::size_t step) const {
    return std::span<const double>(actions).subspan((player * steps + step) * action_dim, action_dim);
  }
  /// All players' states at a step, point-major.
  std::vector<double> snapshot(std::size_t step) const {
    std::vector<double> out(players * dim);
    for (std::size_t j = 0; j < players; ++j) {
      auto s = state(j, step);
      std::copy(s.begin(), s.end(), out.begin() + static_cast<std::ptrdiff_t>(j * dim));
    }
    return out;
  }
};

struct NPlayerOptions {
  std::uint64_t replication = 0;
  // Realized device outcome for the whole population (recorded only).
  int scenario_index = -1;
  // Per-player scenario passed to rules; empty means -1 for everyone.
  std::vector<int> player_scenarios;
  bool record_actions = true;
  // Flow handed to rules through ActionContext::flow (for flow-conditioned strategies).
  const MeasureFlow* flow = nullptr;
};

namespace detail {

inline void check_action(const ModelSpec& model, std::span<const double> a, std::size_t step, std::size_t player) {
  if (!model.actions.contains(a)) throw SimulationError("action outside the action box", step, player);
}

inline void check_state(std::span<const double> x, std::size_t step, std::size_t player) {
  for (double v : x)
    if (!std::isfinite(v)) throw SimulationError("non-finite state", step, player);
}

/// Brownian path of one (replication, player) on the grid, step-major (steps+1) x d.
inline std::vector<double> brownian_path(const ModelSpec& model, const TimeGrid& grid, std::uint64_t seed,
                                         std::uint64_t replication, std::uint64_t player) {
  std::vector<double> w((grid.steps() + 1) * model.dim);
  BrownianBridgeSampler(CounterStream(seed, replication, player, StreamPurpose::noise), model.dim, grid.horizon())
      .fill(grid.times(), w);
  return w;
}

inline void draw_initial(const ModelSpec& model, std::uint64_t seed, std::uint64_t replication, std::uint64_t player,
                         std::span<double> out) {
  CounterStream s(seed, replication, player, StreamPurpose::initial_state);
  model.initial_law.draw(s, out);
}

}  // namespace detail

/// N interacting players, N = strategies.size(). Deterministic in (seed, replication).
inline SimulationBatch simulate_n_player(const ModelSpec& model, const TimeGrid& grid,
                                         std::span<const ActionRule> strategies, std::uint64_t seed,
                                         const NPlayerOptions& opts = {}) {
  model.validate();
  const std::size_t N = strategies.size();
  if (N == 0) throw std::invalid_argument("simulate_n_player: N must be >= 1");
  if (!opts.player_scenarios.empty() && opts.player_scenarios.size() != N)
    throw std::invalid_argument("simulate_n_player: player_scenarios size mismatch");
  const std::size_t d = model.dim, ka = model.action_dim(), S = grid.steps();

  SimulationBatch batch;
  batch.players = N;
  batch.steps = S;
  batch.dim = d;
  batch.action_dim = ka;
  batch.noise_seed = seed;
  batch.replication = opts.replication;
  batch.scenario_index = opts.scenario_index;
  batch.paths.resize(N * (S + 1) * d);
  if (opts.record_actions) batch.actions.resize(N * S * ka);

  std::vector<double> noise(N * (S + 1) * d);  // player-major
  std::vector<double> initial(N * d);
  for (std::size_t j = 0; j < N; ++j) {
    auto w = detail::brownian_path(model, grid, seed, opts.replication, j);
    std::copy(w.begin(), w.end(), noise.begin() + static_cast<std::ptrdiff_t>(j * (S + 1) * d));
    detail::draw_initial(model, seed, opts.replication, j, std::span<double>(initial).subspan(j * d, d));
  }

  std::vector<double> current(initial), next(N * d), action(ka), drift(d);
  for (std::size_t j = 0; j < N; ++j) detail::check_state(std::span<const double>(current).subspan(j * d, d), 0, j);
  auto store = [&](std::size_t k) {
    for (std::size_t j = 0; j < N; ++j)
      std::copy_n(current.begin() + static_cast<std::ptrdiff_t>(j * d), d,
                  batch.paths.begin() + static_cast<std::ptrdiff_t>((j * (S + 1) + k) * d));
  };
  store(0);

  for (std::size_t k = 0; k < S; ++k) {
    const double t = grid.time(k), h = grid.step_width(k);
    const MeasureView view = MeasureView::from_particles(current, d, model.needs_particles);
    for (std::size_t j = 0; j < N; ++j) {
      const double* wj = noise.data() + j * (S + 1) * d;
      ActionContext ctx;
      ctx.t = t;
      ctx.step = k;
      ctx.player = j;
      ctx.scenario = opts.player_scenarios.empty() ? -1 : opts.player_scenarios[j];
      ctx.initial_state = std::span<const double>(initial).subspan(j * d, d);
      ctx.noise = std::span<const double>(wj + k * d, d);
      ctx.flow = opts.flow;
      strategies[j](ctx, action);
      detail::check_action(model, action, k, j);
      if (opts.record_actions)
        std::copy(action.begin(), action.end(), batch.actions.begin() + static_cast<std::ptrdiff_t>((j * S + k) * ka));
      auto xj = std::span<const double>(current).subspan(j * d, d);
      model.drift(t, xj, view, action, drift);
      for (std::size_t c = 0; c < d; ++c)
        next[j * d + c] = xj[c] + drift[c] * h + (wj[(k + 1) * d + c] - wj[k * d + c]);
      detail::check_state(std::span<const double>(next).subspan(j * d, d), k + 1, j);
    }
    std::swap(current, next);
    store(k + 1);
  }
  return batch;
}

/// Convenience overload: one rule shared by all N players.
inline SimulationBatch simulate_n_player(const ModelSpec& model, const TimeGrid& grid, const ActionRule& strategy,
                                         std::size_t N, std::uint64_t seed, const NPlayerOptions& opts = {}) {
  std::vector<ActionRule> rules(N, strategy);
  return simulate_n_player(model, grid, rules, seed, opts);
}

/// Independent replications of the representative player against an exogenous flow.
struct RepresentativePaths {
  std::size_t reps = 0, steps = 0, dim = 0, action_dim = 0;
  std::vector<double> paths;    // reps x (steps+1) x d
  std::vector<double> actions;  // reps x steps x action_dim

  std::span<const double> state(std::size_t r, std::size_t k) const {
    return std::span<const double>(paths).subspan((r * (steps + 1) + k) * dim, dim);
  }
  std::span<const double> action(std::size_t r, std::size_t k) const {
    return std::span<const double>(actions).subspan((r * steps + k) * action_dim, action_dim);
  }
  /// Values of coordinate 0 across replications at step k.
  std::vector<double> marginal(std::size_t k) const {
    std::vector<double> out(reps);
    for (std::size_t r = 0; r < reps; ++r) out[r] = paths[(r * (steps + 1) + k) * dim];
    return out;
  }
};

namespace detail {

/// One representative path: writes (steps+1) x d states and steps x ka actions.
inline void run_representative(const ModelSpec& model, const TimeGrid& grid, const MeasureFlow& flow,
                               std::span<const MeasureView> views, const ActionRule& strategy, int scenario,
                               std::span<const double> initial, std::span<const double> w, std::span<double> path,
                               std::span<double> actions, std::size_t player_tag = 0) {
  const std::size_t d = model.dim, ka = model.action_dim(), S = grid.steps();
  std::vector<double> action(ka), drift(d);
  std::copy(initial.begin(), initial.end(), path.begin());
  check_state(initial, 0, player_tag);
  for (std::size_t k = 0; k < S; ++k) {
    const double t = grid.time(k), h = grid.step_width(k);
    ActionContext ctx;
    ctx.t = t;
    ctx.step = k;
    ctx.player = player_tag;
    ctx.scenario = scenario;
    ctx.initial_state = initial;
    ctx.noise = w.subspan(k * d, d);
    ctx.flow = &flow;
    strategy(ctx, action);
    check_action(model, action, k, player_tag);
    if (!actions.empty()) std::copy(action.begin(), action.end(), actions.begin() + static_cast<std::ptrdiff_t>(k * ka));
    auto x = path.subspan(k * d, d);
    model.drift(t, x, views[k], action, drift);
    for (std::size_t c = 0; c < d; ++c) path[(k + 1) * d + c] = x[c] + drift[c] * h + (w[(k + 1) * d + c] - w[k * d + c]);
    check_state(path.subspan((k + 1) * d, d), k + 1, player_tag);
  }
}

}  // namespace detail

struct RepresentativeOptions {
  std::uint64_t replication_offset = 0;
  int scenario = -1;
  std::size_t workers = 1;
};

inline RepresentativePaths simulate_representative(const ModelSpec& model, const TimeGrid& grid,
                                                   const MeasureFlow& flow, const ActionRule& strategy,
                                                   std::size_t reps, std::uint64_t seed,
                                                   const RepresentativeOptions& opts = {}) {
  model.validate();
  if (flow.dim() != model.dim) throw std::invalid_argument("simulate_representative: flow dimension mismatch");
  const std::size_t d = model.dim, ka = model.action_dim(), S = grid.steps();
  const std::vector<MeasureView> views = flow.views(grid);
  RepresentativePaths out;
  out.reps = reps;
  out.steps = S;
  out.dim = d;
  out.action_dim = ka;
  out.paths.resize(reps * (S + 1) * d);
  out.actions.resize(reps * S * ka);
  parallel_for(reps, opts.workers, [&](std::size_t r) {
    const std::uint64_t rep = opts.replication_offset + r;
    std::vector<double> initial(d);
    detail::draw_initial(model, seed, rep, 0, initial);
    const auto w = detail::brownian_path(model, grid, seed, rep, 0);
    detail::run_representative(model, grid, flow, views, strategy, opts.scenario, initial, w,
                               std::span<double>(out.paths).subspan(r * (S + 1) * d, (S + 1) * d),
                               std::span<double>(out.actions).subspan(r * S * ka, S * ka));
  });
  return out;
}

/// Picard iteration for the McKean-Vlasov equation on particle flows.
struct McKeanVlasovResult {
  MeasureFlow flow;
  std::vector<double> trace;  // sup_t W2(flow_k, flow_{k+1}) per iteration
  std::size_t iterations = 0;
  bool converged = false;
};

/// Starts from the flow frozen at the initial particles and repeatedly
/// simulates the particles against the current flow, reusing the same noise
/// each sweep. Stops when sup_t W2 between consecutive flows drops below tol
/// or after max_iters sweeps; non-convergence is reported, not thrown.
/// The W2 trace needs d = 1.
inline McKeanVlasovResult mckean_vlasov_fixed_point(const ModelSpec& model, const TimeGrid& grid,
                                                    const ActionRule& strategy, std::size_t particles,
                                                    std::size_t max_iters, double tol, std::uint64_t seed,
                                                    std::size_t workers = 1) {
  model.validate();
  if (particles < 100) throw std::invalid_argument("mckean_vlasov_fixed_point: particles must be >= 100");
  if (!(tol > 0.0)) throw std::invalid_argument("mckean_vlasov_fixed_point: tol must be > 0");
  if (max_iters == 0) throw std::invalid_argument("mckean_vlasov_fixed_point: max_iters must be >= 1");
  if (model.dim != 1) throw std::invalid_argument("mckean_vlasov_fixed_point: d = 1 only");
  const std::size_t S = grid.steps(), P = particles, ka = model.action_dim();

  std::vector<std::vector<double>> noise(P), initial(P);
  for (std::size_t i = 0; i < P; ++i) {
    noise[i] = detail::brownian_path(model, grid, seed, i, 0);
    initial[i].resize(1);
    detail::draw_initial(model, seed, i, 0, initial[i]);
  }
  std::vector<double> data((S + 1) * P);
  for (std::size_t k = 0; k <= S; ++k)
    for (std::size_t i = 0; i < P; ++i) data[k * P + i] = initial[i][0];
  MeasureFlow flow = MeasureFlow::particles(grid, 1, P, data, "picard_0");

  McKeanVlasovResult result{flow, {}, 0, false};
  std::vector<double> path_buf(P * (S + 1));
  for (std::size_t it = 1; it <= max_iters; ++it) {
    const std::vector<MeasureView> views = flow.views(grid);
    parallel_for(P, workers, [&](std::size_t i) {
      std::vector<double> acts(S * ka);
      detail::run_representative(model, grid, flow, views, strategy, -1, initial[i], noise[i],
                                 std::span<double>(path_buf).subspan(i * (S + 1), S + 1), acts, i);
    });
    std::vector<double> next((S + 1) * P);
    for (std::size_t i = 0; i < P; ++i)
      for (std::size_t k = 0; k <= S; ++k) next[k * P + i] = path_buf[i * (S + 1) + k];
    MeasureFlow next_flow = MeasureFlow::particles(grid, 1, P, next, "picard_" + std::to_string(it));
    double sup = 0.0;
    for (std::size_t k = 0; k <= S; ++k)
      sup = std::max(sup, w2_empirical_1d(flow.marginal(k), next_flow.marginal(k)).distance);
    result.trace.push_back(sup);
    result.iterations = it;
    flow = std::move(next_flow);
    if (sup < tol) {
      result.converged = true;
      break;
    }
  }
  result.flow = std::move(flow);
  return result;
}

}  // namespace mfcce
