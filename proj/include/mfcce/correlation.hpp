#pragma once

// Finite correlation devices: a lottery over (recommended strategy, flow)
// pairs, population sampling for the N-player game, and the consistency check
// of declared flows against simulated conditional laws.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfcce/analytic_example.hpp"
#include "mfcce/metrics.hpp"
#include "mfcce/model.hpp"
#include "mfcce/parallel.hpp"
#include "mfcce/rng.hpp"
#include "mfcce/sde_engine.hpp"

namespace mfcce {

struct Scenario {
  double probability = 0.0;
  std::string strategy_label;
  ActionRule strategy;
  std::size_t flow_class = 0;
};

/// Realized outcome for a whole population: one flow, per-player scenarios.
struct PopulationDraw {
  std::size_t flow_class = 0;
  std::vector<int> player_scenarios;
};

class CorrelationDevice {
 public:
  CorrelationDevice(std::vector<Scenario> scenarios, std::vector<MeasureFlow> flows)
      : scenarios_(std::move(scenarios)), flows_(std::move(flows)) {
    if (scenarios_.empty()) throw std::invalid_argument("CorrelationDevice: at least one scenario required");
    double total = 0.0;
    for (const auto& s : scenarios_) {
      if (!(s.probability >= 0.0) || !std::isfinite(s.probability))
        throw std::invalid_argument("CorrelationDevice: probabilities must be >= 0");
      if (!s.strategy) throw std::invalid_argument("CorrelationDevice: scenario without strategy");
      if (s.flow_class >= flows_.size()) throw std::invalid_argument("CorrelationDevice: unknown flow class");
      total += s.probability;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("CorrelationDevice: probabilities must sum to 1");
    cumulative_.reserve(scenarios_.size());
    double acc = 0.0;
    for (const auto& s : scenarios_) cumulative_.push_back(acc += s.probability);
    class_mass_.assign(flows_.size(), 0.0);
    for (const auto& s : scenarios_) class_mass_[s.flow_class] += s.probability;
  }

  std::size_t size() const noexcept { return scenarios_.size(); }
  const Scenario& scenario(std::size_t i) const { return scenarios_.at(i); }
  std::span<const Scenario> scenarios() const noexcept { return scenarios_; }
  std::size_t flow_count() const noexcept { return flows_.size(); }
  const MeasureFlow& flow(std::size_t cls) const { return flows_.at(cls); }

  /// P(flow class = c) for each class.
  const std::vector<double>& flow_marginal() const noexcept { return class_mass_; }

  /// (label, probability) pairs in first-appearance order.
  std::vector<std::pair<std::string, double>> strategy_marginal() const {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& s : scenarios_) {
      auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.first == s.strategy_label; });
      if (it == out.end())
        out.emplace_back(s.strategy_label, s.probability);
      else
        it->second += s.probability;
    }
    return out;
  }

  /// Scenario index for a uniform u in (0,1) by inversion.
  std::size_t scenario_for(double u) const noexcept {
    const double total = cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u * total);
    std::size_t i = static_cast<std::size_t>(it - cumulative_.begin());
    i = std::min(i, scenarios_.size() - 1);
    while (scenarios_[i].probability == 0.0 && i > 0) --i;
    return i;
  }

  /// Flow class by inversion of the flow marginal, skipping empty classes.
  std::size_t class_for(double u) const noexcept {
    double acc = 0.0;
    const double total = cumulative_.back();
    std::size_t last = 0;
    for (std::size_t c = 0; c < class_mass_.size(); ++c) {
      if (class_mass_[c] <= 0.0) continue;
      last = c;
      acc += class_mass_[c];
      if (u * total < acc) return c;
    }
    return last;
  }

  /// Scenario with the given flow class for a uniform u, drawn from P(scenario | class).
  std::size_t scenario_given_class(std::size_t cls, double u) const {
    const double mass = class_mass_.at(cls);
    if (!(mass > 0.0)) throw std::invalid_argument("CorrelationDevice: class has zero mass");
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < scenarios_.size(); ++i) {
      if (scenarios_[i].flow_class != cls || scenarios_[i].probability <= 0.0) continue;
      last = i;
      acc += scenarios_[i].probability;
      if (u * mass < acc) return i;
    }
    return last;
  }

  /// Draws the flow from its marginal, then each player's scenario
  /// independently from the conditional law given that flow.
  PopulationDraw draw_population(std::uint64_t seed, std::uint64_t replication, std::size_t N) const {
    PopulationDraw d;
    d.flow_class = class_for(CounterStream(seed, replication, 0, StreamPurpose::scenario).uniform_at(0));
    d.player_scenarios.resize(N);
    for (std::size_t j = 0; j < N; ++j)
      d.player_scenarios[j] = static_cast<int>(scenario_given_class(
          d.flow_class, CounterStream(seed, replication, j, StreamPurpose::recommendation).uniform_at(0)));
    return d;
  }

  std::vector<ActionRule> strategies_for(const PopulationDraw& d) const {
    std::vector<ActionRule> out;
    out.reserve(d.player_scenarios.size());
    for (int s : d.player_scenarios) out.push_back(scenarios_[static_cast<std::size_t>(s)].strategy);
    return out;
  }

 private:
  std::vector<Scenario> scenarios_;
  std::vector<MeasureFlow> flows_;
  std::vector<double> cumulative_;
  std::vector<double> class_mass_;
};

/// Law of t*rate + W_t.
inline MeasureFlow constant_drift_flow(double rate, std::string label = {}) {
  return MeasureFlow::gaussian_mixture({drifting_brownian_component(1.0, rate)}, std::move(label));
}

/// w * law(t b + W_t) + (1 - w) * law(t a + W_t).
inline MeasureFlow bang_bang_mixture_flow(double w, double a, double b, std::string label = {}) {
  if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("bang_bang_mixture_flow: weight must lie in [0,1]");
  return MeasureFlow::gaussian_mixture({drifting_brownian_component(w, b), drifting_brownian_component(1.0 - w, a)},
                                       std::move(label));
}

/// 2x2 device of the bang-bang example: row i recommends the constant b (i = 1)
/// or a (i = 2); column j selects the flow a_j mu+ + (1 - a_j) mu-.
/// Zero-probability cells and empty columns are dropped.
inline CorrelationDevice build_example_device(const example::DeviceProbs& p, double a, double b) {
  p.validate();
  if (!(a < 0.0 && 0.0 < b)) throw std::invalid_argument("build_example_device: requires a < 0 < b");
  const auto w = example::consistency_weights(p);
  const double probs[2][2] = {{p.p11, p.p12}, {p.p21, p.p22}};
  const std::optional<double> weights[2] = {w.a1, w.a2};
  std::vector<MeasureFlow> flows;
  std::size_t class_of[2] = {0, 0};
  for (int j = 0; j < 2; ++j) {
    if (!weights[j]) continue;
    class_of[j] = flows.size();
    flows.push_back(bang_bang_mixture_flow(*weights[j], a, b, "mu" + std::to_string(j + 1)));
  }
  std::vector<Scenario> scenarios;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      if (probs[i][j] <= 0.0) continue;
      const double u = i == 0 ? b : a;
      scenarios.push_back({probs[i][j], i == 0 ? "u+" : "u-", constant_action(u), class_of[j]});
    }
  return CorrelationDevice(std::move(scenarios), std::move(flows));
}

/// i.i.d. scenario indices; draw i uses uniform i of the (seed, scenario) stream.
inline std::vector<std::size_t> sample_scenario(const CorrelationDevice& device, std::uint64_t seed,
                                                std::size_t count) {
  if (count == 0) throw std::invalid_argument("sample_scenario: count must be >= 1");
  const CounterStream s(seed, 0, 0, StreamPurpose::scenario);
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = device.scenario_for(s.uniform_at(i));
  return out;
}

struct ConsistencyClass {
  std::size_t flow_class = 0;
  std::string label;
  double probability = 0.0;
  std::size_t count = 0;
  bool low_count = false;  // fewer than the minimum sample count
  std::vector<double> w2;  // per grid time
  double sup_w2 = 0.0;
  // Twice the largest sup_t W2 over pilot samples drawn from the declared flow itself.
  double null_band = 0.0;
};

struct ConsistencyReport {
  std::size_t reps = 0;
  std::vector<double> times;
  std::vector<ConsistencyClass> classes;

  bool within_null_band() const {
    return std::all_of(classes.begin(), classes.end(), [](const auto& c) { return c.sup_w2 <= c.null_band; });
  }
};

struct ConsistencyOptions {
  std::size_t workers = 1;
  std::size_t min_count = 100;
  std::size_t pilot_runs = 3;
  double quantile_tol = 1e-10;
};

namespace detail {

/// Representative path of replication r following scenario s, against its flow.
inline std::vector<double> follow_scenario(const ModelSpec& model, const TimeGrid& grid,
                                           const CorrelationDevice& device, std::span<const MeasureView> views,
                                           std::size_t s, std::uint64_t seed, std::uint64_t r) {
  const std::size_t d = model.dim, S = grid.steps();
  const Scenario& sc = device.scenario(s);
  std::vector<double> initial(d), path((S + 1) * d), acts(S * model.action_dim());
  draw_initial(model, seed, r, 0, initial);
  const auto w = brownian_path(model, grid, seed, r, 0);
  run_representative(model, grid, device.flow(sc.flow_class), views, sc.strategy, static_cast<int>(s), initial, w,
                     path, acts);
  return path;
}

}  // namespace detail

/// Simulates reps independent (scenario, representative path) pairs, groups
/// them by flow class and compares each class's pooled law of X_t with the
/// declared flow in W2 at every grid time. Requires d = 1 and Gaussian flows.
inline ConsistencyReport verify_consistency(const ModelSpec& model, const CorrelationDevice& device,
                                            const TimeGrid& grid, std::size_t reps, std::uint64_t seed,
                                            const ConsistencyOptions& opts = {}) {
  model.validate();
  if (model.dim != 1) throw std::invalid_argument("verify_consistency: d = 1 only");
  if (reps == 0) throw std::invalid_argument("verify_consistency: reps must be >= 1");
  const std::size_t S = grid.steps(), C = device.flow_count();
  for (std::size_t c = 0; c < C; ++c)
    if (!device.flow(c).is_gaussian()) throw std::invalid_argument("verify_consistency: Gaussian flows required");

  const auto draws = sample_scenario(device, seed, reps);
  std::vector<std::vector<MeasureView>> views(C);
  for (std::size_t c = 0; c < C; ++c) views[c] = device.flow(c).views(grid);

  std::vector<std::vector<double>> paths(reps);
  parallel_for(reps, opts.workers, [&](std::size_t r) {
    const std::size_t cls = device.scenario(draws[r]).flow_class;
    paths[r] = detail::follow_scenario(model, grid, device, views[cls], draws[r], seed, r);
  });

  ConsistencyReport report;
  report.reps = reps;
  report.times.assign(grid.times().begin(), grid.times().end());
  for (std::size_t c = 0; c < C; ++c) {
    ConsistencyClass cc;
    cc.flow_class = c;
    cc.label = device.flow(c).label();
    cc.probability = device.flow_marginal()[c];
    std::vector<std::size_t> members;
    for (std::size_t r = 0; r < reps; ++r)
      if (device.scenario(draws[r]).flow_class == c) members.push_back(r);
    cc.count = members.size();
    cc.low_count = cc.count < opts.min_count;
    if (cc.count == 0) {
      if (cc.probability > 0.0)
        throw std::runtime_error("verify_consistency: flow class '" + cc.label +
                                 "' received no samples; increase reps");
      report.classes.push_back(std::move(cc));
      continue;
    }
    const MeasureFlow& flow = device.flow(c);
    const std::size_t n = cc.count;
    cc.w2.assign(S + 1, 0.0);
    std::vector<double> pilot_sup(opts.pilot_runs, 0.0);

    // Pilot samples X_t = m(t) + sqrt(v(t)) Z with a component drawn by weight:
    // marginals follow the declared flow exactly.
    const GaussianMixture1D end_mix = flow.mixture_at(grid.horizon());
    std::vector<std::vector<std::pair<std::size_t, double>>> pilots(opts.pilot_runs);
    for (std::size_t p = 0; p < opts.pilot_runs; ++p) {
      CounterStream s(seed, p, c, StreamPurpose::pilot);
      pilots[p].resize(n);
      for (auto& [comp, z] : pilots[p]) {
        double u = s.next_uniform();
        comp = 0;
        for (const auto& e : end_mix.components()) {
          if (u < e.weight || &e == &end_mix.components().back()) break;
          u -= e.weight;
          ++comp;
        }
        z = s.next_normal();
      }
    }

    std::vector<double> sample(n);
    for (std::size_t k = 0; k <= S; ++k) {
      const GaussianMixture1D mix = flow.mixture_at(grid.time(k));
      const MixtureCoupling coupling(mix, n, opts.quantile_tol);
      for (std::size_t i = 0; i < n; ++i) sample[i] = paths[members[i]][k];
      std::sort(sample.begin(), sample.end());
      cc.w2[k] = std::sqrt(coupling.w2_squared(sample));
      // Components are indexed against the horizon mixture, whose nonzero
      // weights are the same as at any other time.
      const auto comps = mix.components();
      for (std::size_t p = 0; p < opts.pilot_runs; ++p) {
        for (std::size_t i = 0; i < n; ++i) {
          const auto& [comp, z] = pilots[p][i];
          const auto& e = comps[std::min(comp, comps.size() - 1)];
          sample[i] = e.mean + std::sqrt(e.variance) * z;
        }
        std::sort(sample.begin(), sample.end());
        pilot_sup[p] = std::max(pilot_sup[p], std::sqrt(coupling.w2_squared(sample)));
      }
    }
    cc.sup_w2 = *std::max_element(cc.w2.begin(), cc.w2.end());
    cc.null_band = opts.pilot_runs ? 2.0 * *std::max_element(pilot_sup.begin(), pilot_sup.end()) : 0.0;
    report.classes.push_back(std::move(cc));
  }
  return report;
}

/// Columns: class, prob, count, t, w2.
inline void write_csv(std::ostream& os, const ConsistencyReport& report) {
  os << "class,prob,count,t,w2\n";
  os.precision(17);
  for (const auto& c : report.classes)
    for (std::size_t k = 0; k < c.w2.size(); ++k)
      os << c.label << ',' << c.probability << ',' << c.count << ',' << report.times[k] << ',' << c.w2[k] << '\n';
}

}  // namespace mfcce
