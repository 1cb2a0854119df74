// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "mfcce/mfcce.hpp"
#include "oracles.hpp"

using namespace mfcce;
using example::DeviceProbs;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < budget_s;
  const bool ok = o.pass && in_time;
  if (!ok) ++failures;
  std::printf("%s criterion %d (%s): %s [%.2fs of %.0fs]\n", ok ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
              budget_s);
  std::fflush(stdout);
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::vector<double>> grid21(double a, double b) { return as_candidates(uniform_action_grid(a, b, 21)); }

}  // namespace

int main() {
  criterion(1, "corner equilibria", 1, [] {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.01, 5.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double a = -u(rng), b = u(rng);
      worst = std::max({worst, std::abs(example::cce_margin({1, 0, 0, 0}, a, b)),
                        std::abs(example::cce_margin({0, 0, 0, 1}, a, b))});
    }
    return Outcome{worst <= 1e-12, fmt("max |margin| = %.3g", worst)};
  });

  criterion(2, "diagonal whiteness", 1, [] {
    double worst = 0.0, lowest = INFINITY;
    for (int i = 0; i <= 1000; ++i) {
      const double p11 = i / 1000.0;
      const double m = example::cce_margin({p11, 0, 0, 1 - p11}, -1, 1);
      worst = std::max(worst, std::abs(m - (1 - std::abs(1 - 2 * p11))));
      lowest = std::min(lowest, m);
    }
    return Outcome{worst <= 1e-12 && lowest >= -1e-12, fmt("max deviation %.3g, min margin %.3g", worst, lowest)};
  });

  criterion(3, "non-CCE witness", 1, [] {
    const double m = example::cce_margin({0.5, 0.3, 0.2, 0.0}, -1, 1);
    using oracle::Q;
    const Q exact = oracle::margin({Q(1, 2), Q(3, 10), Q(1, 5), Q(0)}, Q(-1), Q(1));
    const bool ok = exact == Q(-6, 35) && std::abs(m + 6.0 / 35.0) <= 1e-12;
    return Outcome{ok, fmt("margin %.15f, rational %lld/%lld", m, exact.numerator(), exact.denominator())};
  });

  criterion(4, "region reproduction", 5, [] {
    bool ok = true;
    std::ostringstream d;
    for (double alpha : {0.0, 0.5, 1.0}) {
      const auto g = example::region_sweep(101, alpha, -1, 1);
      const int R = g.resolution;
      std::size_t white = 0, black = 0;
      bool diag = true, swap = true;
      for (int r = 0; r < R; ++r)
        for (int col = 0; col < R; ++col) {
          const auto& c = g.at(r, col);
          if (!c.present) continue;
          (c.is_cce ? white : black) += 1;
          if (R - 1 - r == col) diag = diag && c.is_cce;
          const auto& mirror = g.at(R - 1 - col, R - 1 - r);
          swap = swap && example::cce_margin(c.probs().swapped(), -1, 1) == c.margin && mirror.is_cce == c.is_cce;
        }
      ok = ok && white > 0 && black > 0 && diag && swap;
      d << "alpha=" << alpha << ": " << white << " white/" << black << " black" << (diag ? "" : " diag-fail")
        << (swap ? "" : " swap-fail") << "; ";
    }
    return Outcome{ok, d.str()};
  });

  criterion(5, "finite-N gap vs oracle", 300, [] {
    const ModelSpec model = build_bang_bang_model(-1, 1, 1, 2);
    const TimeGrid grid(2.0, 200);
    bool ok = true;
    std::ostringstream d;
    d.precision(4);
    for (const DeviceProbs& p : {DeviceProbs{1, 0, 0, 0}, DeviceProbs{0.5, 0.3, 0.2, 0.0}}) {
      const auto device = build_example_device(p, -1, 1);
      for (std::size_t N : {50u, 200u, 500u}) {
        const auto r = cce_gap_nplayer(model, grid, device, N, grid21(-1, 1), 2000, 2024);
        const double o = example::finite_n_gap_oracle(p, -1, 1, 1, 2, static_cast<long long>(N));
        const bool hit = std::abs(r.epsilon_hat - o) <= 2.0 * r.std_error + 1e-9;
        ok = ok && hit;
        d << "p11=" << p.p11 << " N=" << N << " eps=" << r.epsilon_hat << " oracle=" << o << " se=" << r.std_error
          << (hit ? "" : " MISS") << "; ";
      }
    }
    return Outcome{ok, d.str()};
  });

  criterion(6, "mean field optimality", 120, [] {
    const ModelSpec model = build_bang_bang_model(-1, 1, 1, 2);
    const TimeGrid grid(2.0, 100);
    bool ok = true;
    std::ostringstream d;
    d.precision(4);
    for (const DeviceProbs& p : {DeviceProbs{1, 0, 0, 0}, DeviceProbs{0, 0, 0, 1}, DeviceProbs{0.5, 0, 0, 0.5},
                                 DeviceProbs{0.25, 0.25, 0.25, 0.25}, DeviceProbs{0.5, 0.3, 0.2, 0.0}}) {
      const auto r = mean_field_gap_mc(model, grid, build_example_device(p, -1, 1), grid21(-1, 1), 2000, 6);
      const double margin = example::cce_margin(p, -1, 1);
      const double tol = 2.0 * r.std_error + 1e-9;
      const bool clipped = std::abs(r.epsilon_hat - 4.0 * std::max(0.0, -margin)) <= tol;
      const bool raw = std::abs(r.raw_gap + 4.0 * margin) <= tol;
      ok = ok && clipped && raw;
      d << "eps=" << r.epsilon_hat << "/" << 4.0 * std::max(0.0, -margin) << " raw=" << r.raw_gap << "/"
        << -4.0 * margin << (clipped && raw ? "" : " MISS") << "; ";
    }
    return Outcome{ok, d.str()};
  });

  criterion(7, "propagation of chaos", 120, [] {
    const ModelSpec model = build_bang_bang_model(-1, 1, 1, 2);
    const TimeGrid grid(2.0, 100);
    const auto device = build_example_device({1, 0, 0, 0}, -1, 1);
    const std::vector<std::size_t> Ns{50, 100, 200, 400};
    std::vector<std::vector<double>> per_n(Ns.size());
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto c = poc_curve(model, grid, device, Ns, 200, seed);
      for (std::size_t i = 0; i < Ns.size(); ++i) per_n[i].push_back(c.points[i].value);
    }
    std::vector<double> med;
    for (const auto& v : per_n) med.push_back(median(v));
    bool dec = true;
    for (std::size_t i = 1; i < med.size(); ++i) dec = dec && med[i] < med[i - 1];
    const bool ratio = med.back() < 0.5 * med.front();
    return Outcome{dec && ratio, fmt("medians %.4g %.4g %.4g %.4g", med[0], med[1], med[2], med[3])};
  });

  criterion(8, "consistency", 60, [] {
    const ModelSpec model = build_bang_bang_model(-1, 1, 1, 2);
    const TimeGrid grid(2.0, 100);
    const auto good = verify_consistency(model, build_example_device({0.5, 0, 0, 0.5}, -1, 1), grid, 10000, 8);
    double worst = 0.0;
    for (const auto& c : good.classes) worst = std::max(worst, c.sup_w2);
    std::vector<Scenario> sc{{1.0, "u+", constant_action(1.0), 0}};
    std::vector<MeasureFlow> flows;
    flows.push_back(constant_drift_flow(-1.0, "mu-"));
    const CorrelationDevice bad(std::move(sc), std::move(flows));
    const auto r = verify_consistency(model, bad, grid, 10000, 8);
    const double bad_w2 = r.classes[0].sup_w2;
    return Outcome{worst <= 0.15 && bad_w2 >= 2.0,
                   fmt("consistent device sup W2 %.4f, inconsistent %.4f", worst, bad_w2)};
  });

  criterion(9, "McKean-Vlasov fixed point", 60, [] {
    const ModelSpec model = build_bang_bang_model(-1, 1, 1, 2);
    const TimeGrid grid(2.0, 100);
    const auto r = mckean_vlasov_fixed_point(model, grid, constant_action(1.0), 10000, 10, 1e-9, 9);
    const auto m = moments(r.flow.marginal(grid.steps()));
    const bool ok = r.converged && r.iterations <= 10 && std::abs(m.mean - 2.0) < 0.05 &&
                    std::abs(m.variance - 2.0) / 2.0 < 0.1;
    return Outcome{ok, fmt("iterations %zu, mean_T %.4f, var_T %.4f", r.iterations, m.mean, m.variance)};
  });

  criterion(10, "metric oracle", 10, [] {
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> size(1, 6);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const int n = size(rng);
      std::vector<double> x(n), y(n);
      for (auto& v : x) v = u(rng);
      for (auto& v : y) v = u(rng);
      const double w = w2_empirical_1d(Empirical1D(x), Empirical1D(y)).distance;
      worst = std::max(worst, std::abs(w * w - oracle::w2_squared_bruteforce(x, y)));
    }
    return Outcome{worst <= 1e-12, fmt("max |W2^2 - brute force| = %.3g", worst)};
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
