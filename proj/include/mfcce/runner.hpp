#pragma once

// Experiment orchestration behind the command-line tool. Every file written
// starts with a `#` line holding the full configuration as JSON.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mfcce/analytic_example.hpp"
#include "mfcce/config.hpp"
#include "mfcce/correlation.hpp"
#include "mfcce/equilibrium.hpp"
#include "mfcce/model.hpp"
#include "mfcce/sde_engine.hpp"

namespace mfcce {

/// "0.25" style label; shortest decimal that round-trips.
inline std::string number_label(double x) {
  std::ostringstream os;
  for (int prec = 1; prec <= 17; ++prec) {
    os.str("");
    os << std::setprecision(prec) << x;
    if (std::stod(os.str()) == x) break;
  }
  return os.str();
}

/// Sibling of `out` with `suffix` appended to the stem and a new extension.
inline std::filesystem::path sibling_path(const std::string& out, const std::string& suffix, const std::string& ext) {
  std::filesystem::path p(out);
  return p.parent_path() / (p.stem().string() + suffix + ext);
}

inline void write_region_csv(std::ostream& os, const std::vector<example::RegionGrid>& grids) {
  os << "p11,p22,p12,p21,alpha,h,k,margin,is_cce\n";
  for (const auto& g : grids)
    for (const auto& c : g.cells) {
      if (!c.present) continue;
      os << c.p11 << ',' << c.p22 << ',' << c.p12 << ',' << c.p21 << ',' << g.alpha << ',' << c.h << ',' << c.k << ','
         << c.margin << ',' << (c.is_cce ? 1 : 0) << '\n';
    }
}

/// Plain PGM: 255 for CCE cells, 0 otherwise, 128 outside the simplex.
inline void write_region_pgm(std::ostream& os, const example::RegionGrid& g, const std::string& header) {
  os << "P2\n# " << header << '\n' << g.resolution << ' ' << g.resolution << "\n255\n";
  for (int r = 0; r < g.resolution; ++r) {
    for (int col = 0; col < g.resolution; ++col) {
      const auto& c = g.at(r, col);
      os << (col ? " " : "") << (!c.present ? 128 : c.is_cce ? 255 : 0);
    }
    os << '\n';
  }
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path, const std::string& header) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open output file " + path.string());
  os << std::setprecision(17);
  if (!header.empty()) os << "# " << header << '\n';
  return os;
}

}  // namespace detail

/// Runs the configured command and writes its files. Returns the exit status.
inline int run(const RunConfig& cfg, std::size_t workers, std::ostream& log) {
  cfg.validate();
  const std::string header = header_json(cfg);
  const auto p = cfg.device();
  log << std::setprecision(6);

  if (cfg.command == "region") {
    std::vector<example::RegionGrid> grids;
    for (double alpha : cfg.alphas) grids.push_back(example::region_sweep(cfg.resolution, alpha, cfg.a, cfg.b));
    auto csv = detail::open_output(cfg.out, header);
    write_region_csv(csv, grids);
    for (const auto& g : grids) {
      const auto path = sibling_path(cfg.out, "_alpha" + number_label(g.alpha), ".pgm");
      auto pgm = detail::open_output(path, "");
      write_region_pgm(pgm, g, header);
      log << "alpha=" << g.alpha << ": " << g.cce_count() << " of " << g.cells.size() << " cells are CCE -> "
          << path.string() << '\n';
    }
    return 0;
  }

  const ModelSpec model = build_bang_bang_model(cfg.a, cfg.b, cfg.c, cfg.T);
  const TimeGrid grid(cfg.T, cfg.steps);
  const double scale = cfg.c * cfg.T * cfg.T;

  if (cfg.command == "gap" || cfg.command == "mfgap") {
    const CorrelationDevice device = build_example_device(p, cfg.a, cfg.b);
    const auto candidates = as_candidates(uniform_action_grid(cfg.a, cfg.b, cfg.G));
    GapOptions opts;
    opts.workers = workers;
    opts.deviation_family_complete = true;
    auto csv = detail::open_output(cfg.out, header);
    if (cfg.command == "gap") {
      csv << "N,estimate,raw,se,ci_lo,ci_hi,best_deviation,oracle\n";
      for (std::size_t N : cfg.Ns) {
        const GapReport r = cce_gap_nplayer(model, grid, device, N, candidates, cfg.reps, cfg.seed, opts);
        const double oracle = example::finite_n_gap_oracle(p, cfg.a, cfg.b, cfg.c, cfg.T, static_cast<long long>(N));
        csv << N << ',' << r.epsilon_hat << ',' << r.raw_gap << ',' << r.std_error << ',' << r.ci_lo << ',' << r.ci_hi
            << ',' << r.best_deviation[0] << ',' << oracle << '\n';
        log << "N=" << N << ": eps=" << r.epsilon_hat << " (raw " << r.raw_gap << ", se " << r.std_error
            << "), oracle " << oracle << '\n';
      }
    } else {
      const GapReport r = mean_field_gap_mc(model, grid, device, candidates, cfg.reps, cfg.seed, opts);
      const double margin = example::cce_margin(p, cfg.a, cfg.b);
      csv << "estimate,raw,se,ci_lo,ci_hi,best_deviation,closed_form,closed_form_raw\n";
      csv << r.epsilon_hat << ',' << r.raw_gap << ',' << r.std_error << ',' << r.ci_lo << ',' << r.ci_hi << ','
          << r.best_deviation[0] << ',' << scale * std::max(0.0, -margin) << ',' << -scale * margin << '\n';
      log << "mean field: eps=" << r.epsilon_hat << " (raw " << r.raw_gap << ", se " << r.std_error
          << "), closed form " << scale * std::max(0.0, -margin) << '\n';
    }
    return 0;
  }

  if (cfg.command == "poc") {
    const CorrelationDevice device = build_example_device(p, cfg.a, cfg.b);
    const PocCurve curve = poc_curve(model, grid, device, cfg.Ns, cfg.reps, cfg.seed, workers);
    auto csv = detail::open_output(cfg.out, header);
    csv << "N,estimate,se";
    for (std::size_t c = 0; c < device.flow_count(); ++c) csv << ",class_" << device.flow(c).label();
    csv << '\n';
    for (const auto& pt : curve.points) {
      csv << pt.N << ',' << pt.value << ',' << pt.std_error;
      for (double v : pt.per_class) csv << ',' << v;
      csv << '\n';
      log << "N=" << pt.N << ": sup_t E W2^2 = " << pt.value << '\n';
    }
    return 0;
  }

  if (cfg.command == "consistency") {
    const CorrelationDevice device = build_example_device(p, cfg.a, cfg.b);
    ConsistencyOptions opts;
    opts.workers = workers;
    const ConsistencyReport rep = verify_consistency(model, device, grid, cfg.reps, cfg.seed, opts);
    auto csv = detail::open_output(cfg.out, header);
    write_csv(csv, rep);
    for (const auto& c : rep.classes)
      log << c.label << ": count " << c.count << (c.low_count ? " (low)" : "") << ", sup W2 " << c.sup_w2
          << ", null band " << c.null_band << " -> " << (c.sup_w2 <= c.null_band ? "consistent" : "INCONSISTENT")
          << '\n';
    return 0;
  }

  // mkv
  const double u = cfg.action.value_or(cfg.b);
  const auto res = mckean_vlasov_fixed_point(model, grid, constant_action(u), cfg.particles, cfg.max_iters, cfg.tol,
                                             cfg.seed, workers);
  auto csv = detail::open_output(cfg.out, header);
  csv << "t,mean,var\n";
  for (std::size_t k = 0; k <= grid.steps(); ++k) {
    const auto m = moments(res.flow.particles_at(k));
    csv << grid.time(k) << ',' << m.mean << ',' << m.variance << '\n';
  }
  const auto trace_path = sibling_path(cfg.out, "_trace", ".csv");
  auto trace = detail::open_output(trace_path, header);
  trace << "iteration,sup_w2\n";
  for (std::size_t i = 0; i < res.trace.size(); ++i) trace << i + 1 << ',' << res.trace[i] << '\n';
  log << "mkv: " << res.iterations << " iterations, " << (res.converged ? "converged" : "NOT converged") << '\n';
  return 0;
}

}  // namespace mfcce
