#pragma once

// Payoff estimation, epsilon-CCE gaps for the N-player game and the mean
// field game, and propagation-of-chaos curves.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "mfcce/correlation.hpp"
#include "mfcce/metrics.hpp"
#include "mfcce/model.hpp"
#include "mfcce/parallel.hpp"
#include "mfcce/sde_engine.hpp"

namespace mfcce {

struct CostEstimate {
  double mean = 0.0;
  std::optional<double> std_error;  // absent when reps < 2
  std::size_t reps = 0;

  bool flagged() const noexcept { return !std_error.has_value(); }
};

/// Mean and standard error of the mean.
inline CostEstimate summarize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: no values");
  CostEstimate e;
  e.reps = values.size();
  const double n = static_cast<double>(values.size());
  for (double v : values) e.mean += v;
  e.mean /= n;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - e.mean) * (v - e.mean);
    e.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return e;
}

/// Left Riemann sum of f plus g at T for one player of an N-player batch.
inline double path_functional(const ModelSpec& model, const TimeGrid& grid, const SimulationBatch& batch,
                              std::size_t player) {
  if (player >= batch.players) throw std::out_of_range("path_functional: player index");
  if (batch.actions.empty()) throw std::invalid_argument("path_functional: batch has no recorded actions");
  const std::size_t d = batch.dim, S = batch.steps;
  double total = 0.0;
  for (std::size_t k = 0; k < S; ++k) {
    const auto snap = batch.snapshot(k);
    const MeasureView view = MeasureView::from_particles(snap, d, model.needs_particles);
    total += model.running_cost(grid.time(k), batch.state(player, k), view, batch.action(player, k)) *
             grid.step_width(k);
  }
  const auto snap = batch.snapshot(S);
  const MeasureView view = MeasureView::from_particles(snap, d, model.needs_particles);
  return total + model.terminal_cost(batch.state(player, S), view);
}

/// Same functional for a representative path against a flow.
inline double path_functional(const ModelSpec& model, const TimeGrid& grid, std::span<const MeasureView> views,
                              std::span<const double> path, std::span<const double> actions) {
  const std::size_t d = model.dim, ka = model.action_dim(), S = grid.steps();
  double total = 0.0;
  for (std::size_t k = 0; k < S; ++k)
    total += model.running_cost(grid.time(k), path.subspan(k * d, d), views[k], actions.subspan(k * ka, ka)) *
             grid.step_width(k);
  return total + model.terminal_cost(path.subspan(S * d, d), views[S]);
}

/// Monte Carlo estimate from already simulated replications.
inline CostEstimate estimate_cost(const ModelSpec& model, const TimeGrid& grid,
                                  std::span<const SimulationBatch> batches, std::size_t player) {
  std::vector<double> v;
  v.reserve(batches.size());
  for (const auto& b : batches) v.push_back(path_functional(model, grid, b, player));
  return summarize(v);
}

inline CostEstimate estimate_cost(const ModelSpec& model, const TimeGrid& grid, const MeasureFlow& flow,
                                  const RepresentativePaths& paths) {
  const auto views = flow.views(grid);
  std::vector<double> v(paths.reps);
  const std::size_t S = paths.steps, d = paths.dim, ka = paths.action_dim;
  for (std::size_t r = 0; r < paths.reps; ++r)
    v[r] = path_functional(model, grid, views, std::span<const double>(paths.paths).subspan(r * (S + 1) * d, (S + 1) * d),
                           std::span<const double>(paths.actions).subspan(r * S * ka, S * ka));
  return summarize(v);
}

/// Simulates `reps` replications of the N-player game under fixed strategies
/// and estimates the functional of `player`.
inline CostEstimate estimate_cost(const ModelSpec& model, const TimeGrid& grid, std::span<const ActionRule> strategies,
                                  std::size_t player, std::size_t reps, std::uint64_t seed, std::size_t workers = 1) {
  if (reps == 0) throw std::invalid_argument("estimate_cost: reps must be >= 1");
  std::vector<double> v(reps);
  parallel_for(reps, workers, [&](std::size_t r) {
    NPlayerOptions o;
    o.replication = r;
    v[r] = path_functional(model, grid, simulate_n_player(model, grid, strategies, seed, o), player);
  });
  return summarize(v);
}

/// Uniform grid of G constant actions on [a, b]; the last point is b exactly.
inline std::vector<double> uniform_action_grid(double a, double b, std::size_t G) {
  if (G < 2) throw std::invalid_argument("uniform_action_grid: G must be >= 2");
  if (!(a <= b)) throw std::invalid_argument("uniform_action_grid: requires a <= b");
  std::vector<double> g(G);
  for (std::size_t i = 0; i < G; ++i) g[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(G - 1);
  g.back() = b;
  return g;
}

struct DeviationCandidate {
  std::vector<double> action;
  CostEstimate payoff;      // functional of the deviator
  CostEstimate difference;  // sense-adjusted deviation minus recommendation, per replication
};

struct GapReport {
  CostEstimate j_rec;
  CostEstimate j_dev_best;
  std::vector<double> best_deviation;
  std::size_t best_index = 0;
  double raw_gap = 0.0;  // sense-adjusted j_dev_best - j_rec
  double std_error = 0.0;
  double epsilon_hat = 0.0;  // max(0, raw_gap)
  double ci_lo = 0.0, ci_hi = 0.0;
  std::vector<DeviationCandidate> candidates;
  // False when constant deviations do not exhaust the deviation class; the
  // estimate is then a lower bound on the true gap.
  bool deviation_family_complete = false;
  std::size_t N = 0;  // 0 for the mean field game
};

struct GapOptions {
  std::size_t workers = 1;
  bool deviation_family_complete = false;
  // Evaluate through full N-player simulations even when the fast path applies.
  bool force_generic = false;
};

namespace detail {

/// Per-replication functionals: [0] is the recommendation, [1 + g] candidate g.
inline GapReport assemble_gap(const ModelSpec& model, const std::vector<std::vector<double>>& values,
                              const std::vector<std::vector<double>>& candidates, std::size_t N, bool complete) {
  const std::size_t reps = values.size(), G = candidates.size();
  const double sign = preference_sign(model.sense);
  GapReport rep;
  rep.N = N;
  rep.deviation_family_complete = complete;
  std::vector<double> col(reps), diff(reps);
  for (std::size_t r = 0; r < reps; ++r) col[r] = values[r][0];
  rep.j_rec = summarize(col);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t r = 0; r < reps; ++r) {
      col[r] = values[r][1 + g];
      diff[r] = sign * (values[r][1 + g] - values[r][0]);
    }
    DeviationCandidate c{candidates[g], summarize(col), summarize(diff)};
    if (c.difference.mean > best) {
      best = c.difference.mean;
      rep.best_index = g;
    }
    rep.candidates.push_back(std::move(c));
  }
  const auto& b = rep.candidates[rep.best_index];
  rep.best_deviation = b.action;
  rep.j_dev_best = b.payoff;
  rep.raw_gap = b.difference.mean;
  rep.std_error = b.difference.std_error.value_or(0.0);
  rep.epsilon_hat = std::max(0.0, rep.raw_gap);
  rep.ci_lo = std::max(0.0, rep.raw_gap - 2.0 * rep.std_error);
  rep.ci_hi = std::max(0.0, rep.raw_gap + 2.0 * rep.std_error);
  return rep;
}

inline void check_candidates(const ModelSpec& model, const std::vector<std::vector<double>>& candidates) {
  if (candidates.size() < 3) throw std::invalid_argument("gap: at least 3 deviation candidates required");
  for (const auto& c : candidates)
    if (!model.actions.contains(c)) throw std::invalid_argument("gap: deviation candidate outside the action box");
}

/// Player 0 alone against stored sums of the other players, when the drift
/// ignores the measure and the others' paths therefore do not depend on player 0.
class SingleDeviatorRun {
 public:
  SingleDeviatorRun(const ModelSpec& model, const TimeGrid& grid, std::size_t N, std::span<const double> others_sum,
                    std::span<const double> others_sq, std::span<const double> initial, std::span<const double> noise)
      : model_(model), grid_(grid), N_(N), sum_(others_sum), sq_(others_sq), initial_(initial), noise_(noise) {}

  double run(const ActionRule& rule, int scenario, const MeasureFlow* flow) const {
    const std::size_t d = model_.dim, ka = model_.action_dim(), S = grid_.steps();
    std::vector<double> x(initial_.begin(), initial_.end()), nx(d), action(ka), drift(d);
    double total = 0.0;
    check_state(x, 0, 0);
    for (std::size_t k = 0; k < S; ++k) {
      const double t = grid_.time(k), h = grid_.step_width(k);
      ActionContext ctx;
      ctx.t = t;
      ctx.step = k;
      ctx.player = 0;
      ctx.scenario = scenario;
      ctx.initial_state = initial_;
      ctx.noise = noise_.subspan(k * d, d);
      ctx.flow = flow;
      rule(ctx, action);
      check_action(model_, action, k, 0);
      const MeasureView view = view_at(k, x);
      total += model_.running_cost(t, x, view, action) * h;
      model_.drift(t, x, view, action, drift);
      for (std::size_t c = 0; c < d; ++c) nx[c] = x[c] + drift[c] * h + (noise_[(k + 1) * d + c] - noise_[k * d + c]);
      check_state(nx, k + 1, 0);
      std::swap(x, nx);
    }
    return total + model_.terminal_cost(x, view_at(S, x));
  }

 private:
  MeasureView view_at(std::size_t k, std::span<const double> x) const {
    const std::size_t d = model_.dim;
    MeasureView v;
    v.mean.resize(d);
    double sq = sq_[k];
    for (std::size_t c = 0; c < d; ++c) {
      v.mean[c] = (sum_[k * d + c] + x[c]) / static_cast<double>(N_);
      sq += x[c] * x[c];
    }
    v.second_moment = sq / static_cast<double>(N_);
    return v;
  }

  const ModelSpec& model_;
  const TimeGrid& grid_;
  std::size_t N_;
  std::span<const double> sum_, sq_, initial_, noise_;
};

}  // namespace detail

/// Epsilon-CCE gap of the device in the N-player game over constant deviations
/// of player 0. Each replication draws one population outcome and reuses its
/// noise for the recommendation and every candidate.
inline GapReport cce_gap_nplayer(const ModelSpec& model, const TimeGrid& grid, const CorrelationDevice& device,
                                 std::size_t N, const std::vector<std::vector<double>>& candidates, std::size_t reps,
                                 std::uint64_t seed, const GapOptions& opts = {}) {
  model.validate();
  if (N < 2) throw std::invalid_argument("cce_gap_nplayer: N must be >= 2");
  if (reps == 0) throw std::invalid_argument("cce_gap_nplayer: reps must be >= 1");
  detail::check_candidates(model, candidates);
  const std::size_t G = candidates.size(), d = model.dim, S = grid.steps();
  std::vector<ActionRule> deviations;
  for (const auto& c : candidates) deviations.push_back(constant_action(c));
  const bool fast = model.drift_measure_free && !model.needs_particles && !opts.force_generic;

  std::vector<std::vector<double>> values(reps, std::vector<double>(G + 1));
  parallel_for(reps, opts.workers, [&](std::size_t r) {
    const PopulationDraw draw = device.draw_population(seed, r, N);
    std::vector<ActionRule> rules = device.strategies_for(draw);
    const MeasureFlow* flow = &device.flow(draw.flow_class);
    NPlayerOptions o;
    o.replication = r;
    o.player_scenarios = draw.player_scenarios;
    o.scenario_index = draw.player_scenarios[0];
    o.flow = flow;
    if (!fast) {
      values[r][0] = path_functional(model, grid, simulate_n_player(model, grid, rules, seed, o), 0);
      for (std::size_t g = 0; g < G; ++g) {
        rules[0] = deviations[g];
        values[r][1 + g] = path_functional(model, grid, simulate_n_player(model, grid, rules, seed, o), 0);
      }
      return;
    }
    // Players 1..N-1 once; their sums at each step stand in for their states.
    std::vector<double> sum((S + 1) * d, 0.0), sq(S + 1, 0.0), x(d), nx(d), action(model.action_dim()), drift(d);
    const MeasureView unused;
    for (std::size_t j = 1; j < N; ++j) {
      const auto w = detail::brownian_path(model, grid, seed, r, j);
      std::vector<double> init(d);
      detail::draw_initial(model, seed, r, j, init);
      x = init;
      detail::check_state(x, 0, j);
      for (std::size_t k = 0;; ++k) {
        for (std::size_t c = 0; c < d; ++c) {
          sum[k * d + c] += x[c];
          sq[k] += x[c] * x[c];
        }
        if (k == S) break;
        ActionContext ctx;
        ctx.t = grid.time(k);
        ctx.step = k;
        ctx.player = j;
        ctx.scenario = draw.player_scenarios[j];
        ctx.initial_state = init;
        ctx.noise = std::span<const double>(w).subspan(k * d, d);
        ctx.flow = flow;
        rules[j](ctx, action);
        detail::check_action(model, action, k, j);
        model.drift(grid.time(k), x, unused, action, drift);
        const double h = grid.step_width(k);
        for (std::size_t c = 0; c < d; ++c) nx[c] = x[c] + drift[c] * h + (w[(k + 1) * d + c] - w[k * d + c]);
        detail::check_state(nx, k + 1, j);
        std::swap(x, nx);
      }
    }
    const auto w0 = detail::brownian_path(model, grid, seed, r, 0);
    std::vector<double> init0(d);
    detail::draw_initial(model, seed, r, 0, init0);
    const detail::SingleDeviatorRun solo(model, grid, N, sum, sq, init0, w0);
    values[r][0] = solo.run(rules[0], draw.player_scenarios[0], flow);
    for (std::size_t g = 0; g < G; ++g) values[r][1 + g] = solo.run(deviations[g], draw.player_scenarios[0], flow);
  });
  return detail::assemble_gap(model, values, candidates, N, opts.deviation_family_complete);
}

/// Gap of the device in the mean field game: the representative player faces
/// the device's exogenous flows, recommended or deviating under shared noise.
inline GapReport mean_field_gap_mc(const ModelSpec& model, const TimeGrid& grid, const CorrelationDevice& device,
                                   const std::vector<std::vector<double>>& candidates, std::size_t reps,
                                   std::uint64_t seed, const GapOptions& opts = {}) {
  model.validate();
  if (reps == 0) throw std::invalid_argument("mean_field_gap_mc: reps must be >= 1");
  detail::check_candidates(model, candidates);
  const std::size_t G = candidates.size(), d = model.dim, ka = model.action_dim(), S = grid.steps();
  std::vector<std::vector<MeasureView>> views;
  for (std::size_t c = 0; c < device.flow_count(); ++c) views.push_back(device.flow(c).views(grid));
  const auto draws = sample_scenario(device, seed, reps);
  std::vector<ActionRule> deviations;
  for (const auto& c : candidates) deviations.push_back(constant_action(c));

  std::vector<std::vector<double>> values(reps, std::vector<double>(G + 1));
  parallel_for(reps, opts.workers, [&](std::size_t r) {
    const std::size_t s = draws[r];
    const Scenario& sc = device.scenario(s);
    const MeasureFlow& flow = device.flow(sc.flow_class);
    const auto& v = views[sc.flow_class];
    std::vector<double> init(d), path((S + 1) * d), acts(S * ka);
    detail::draw_initial(model, seed, r, 0, init);
    const auto w = detail::brownian_path(model, grid, seed, r, 0);
    auto eval = [&](const ActionRule& rule) {
      detail::run_representative(model, grid, flow, v, rule, static_cast<int>(s), init, w, path, acts);
      return path_functional(model, grid, v, path, acts);
    };
    values[r][0] = eval(sc.strategy);
    for (std::size_t g = 0; g < G; ++g) values[r][1 + g] = eval(deviations[g]);
  });
  return detail::assemble_gap(model, values, candidates, 0, opts.deviation_family_complete);
}

/// Scalar convenience: candidates from a 1D action list.
inline std::vector<std::vector<double>> as_candidates(std::span<const double> actions) {
  std::vector<std::vector<double>> out;
  for (double a : actions) out.push_back({a});
  return out;
}

struct PocPoint {
  std::size_t N = 0;
  double value = 0.0;  // sup_t of the mean over replications of W2^2
  double std_error = 0.0;  // of that mean, at the maximizing time
  std::vector<double> per_class;  // same, restricted to replications of each class (NaN if none)
  std::vector<std::size_t> class_counts;
};

struct PocCurve {
  std::vector<PocPoint> points;
  std::vector<double> values() const {
    std::vector<double> v;
    for (const auto& p : points) v.push_back(p.value);
    return v;
  }
};

/// For each N, all players follow their recommendations; averages
/// W2^2(empirical measure at t, declared flow at t) over replications and takes
/// the sup over grid times. Requires d = 1 and Gaussian flows.
inline PocCurve poc_curve(const ModelSpec& model, const TimeGrid& grid, const CorrelationDevice& device,
                          const std::vector<std::size_t>& Ns, std::size_t reps, std::uint64_t seed,
                          std::size_t workers = 1) {
  model.validate();
  if (model.dim != 1) throw std::invalid_argument("poc_curve: d = 1 only");
  if (Ns.empty() || reps == 0) throw std::invalid_argument("poc_curve: Ns and reps must be nonempty");
  for (std::size_t i = 0; i < Ns.size(); ++i)
    if (Ns[i] == 0 || (i > 0 && Ns[i] <= Ns[i - 1])) throw std::invalid_argument("poc_curve: Ns must be increasing");
  const std::size_t S = grid.steps(), C = device.flow_count();
  PocCurve curve;
  for (std::size_t N : Ns) {
    // Coupling tables per (class, step) for samples of size N.
    std::vector<std::vector<std::optional<MixtureCoupling>>> tables(C, std::vector<std::optional<MixtureCoupling>>(S + 1));
    std::vector<PopulationDraw> draws(reps);
    for (std::size_t r = 0; r < reps; ++r) draws[r] = device.draw_population(seed, r, N);
    for (std::size_t c = 0; c < C; ++c) {
      const bool used = std::any_of(draws.begin(), draws.end(), [c](const auto& d) { return d.flow_class == c; });
      if (!used) continue;
      for (std::size_t k = 0; k <= S; ++k) tables[c][k].emplace(device.flow(c).mixture_at(grid.time(k)), N);
    }
    std::vector<std::vector<double>> w2sq(reps, std::vector<double>(S + 1));
    parallel_for(reps, workers, [&](std::size_t r) {
      const auto& draw = draws[r];
      NPlayerOptions o;
      o.replication = r;
      o.player_scenarios = draw.player_scenarios;
      o.flow = &device.flow(draw.flow_class);
      o.record_actions = false;
      const SimulationBatch batch = simulate_n_player(model, grid, device.strategies_for(draw), seed, o);
      for (std::size_t k = 0; k <= S; ++k) {
        auto snap = batch.snapshot(k);
        std::sort(snap.begin(), snap.end());
        w2sq[r][k] = tables[draw.flow_class][k]->w2_squared(snap);
      }
    });
    PocPoint pt;
    pt.N = N;
    pt.per_class.assign(C, std::numeric_limits<double>::quiet_NaN());
    pt.class_counts.assign(C, 0);
    for (const auto& d : draws) ++pt.class_counts[d.flow_class];
    std::vector<double> all(S + 1, 0.0);
    std::vector<std::vector<double>> by_class(C, std::vector<double>(S + 1, 0.0));
    for (std::size_t r = 0; r < reps; ++r)
      for (std::size_t k = 0; k <= S; ++k) {
        all[k] += w2sq[r][k];
        by_class[draws[r].flow_class][k] += w2sq[r][k];
      }
    std::size_t k_star = 0;
    for (std::size_t k = 0; k <= S; ++k)
      if (all[k] > all[k_star]) k_star = k;
    std::vector<double> at_star(reps);
    for (std::size_t r = 0; r < reps; ++r) at_star[r] = w2sq[r][k_star];
    const CostEstimate est = summarize(at_star);
    pt.value = est.mean;
    pt.std_error = est.std_error.value_or(0.0);
    for (std::size_t c = 0; c < C; ++c) {
      if (pt.class_counts[c] == 0) continue;
      double sup = 0.0;
      for (std::size_t k = 0; k <= S; ++k) sup = std::max(sup, by_class[c][k] / static_cast<double>(pt.class_counts[c]));
      pt.per_class[c] = sup;
    }
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

}  // namespace mfcce
