#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfcce/config.hpp"
#include "mfcce/parallel.hpp"
#include "mfcce/runner.hpp"
#include "mfcce/sde_engine.hpp"

namespace {

struct Overrides {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t workers = 0;
  std::vector<std::size_t> Ns;
  std::size_t reps = 0, steps = 0, G = 0, particles = 0, max_iters = 0;
  int resolution = 0;
  std::vector<double> alphas, p;
  double a = 0, b = 0, c = 0, T = 0, tol = 0, action = 0;
};

void add_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON config, or an output file with a config header")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--out", o.out, "output CSV path");
  cmd->add_option("--workers", o.workers, "worker threads (default: MFCCE_WORKERS or hardware)")->check(CLI::PositiveNumber);
  cmd->add_option("--N", o.Ns, "population sizes, e.g. 50,200,500")->delimiter(',');
  cmd->add_option("--reps", o.reps, "replications");
  cmd->add_option("--steps", o.steps, "time steps");
  cmd->add_option("--resolution", o.resolution, "region grid resolution");
  cmd->add_option("--alpha", o.alphas, "region alpha values")->delimiter(',');
  cmd->add_option("--p", o.p, "device p11,p12,p21,p22")->delimiter(',')->expected(4);
  cmd->add_option("--G", o.G, "deviation grid size");
  cmd->add_option("--a", o.a, "lower action bound");
  cmd->add_option("--b", o.b, "upper action bound");
  cmd->add_option("--c", o.c, "payoff scale");
  cmd->add_option("--T", o.T, "horizon");
  cmd->add_option("--particles", o.particles, "McKean-Vlasov particles");
  cmd->add_option("--max-iters", o.max_iters, "Picard iteration cap");
  cmd->add_option("--tol", o.tol, "Picard tolerance in sup_t W2");
  cmd->add_option("--action", o.action, "constant action for mkv (default b)");
}

mfcce::RunConfig resolve(const CLI::App* cmd, const Overrides& o) {
  mfcce::RunConfig cfg;
  if (!o.config.empty()) {
    std::ifstream is(o.config);
    std::stringstream ss;
    ss << is.rdbuf();
    cfg = mfcce::parse_config_text(ss.str());
  }
  cfg.command = cmd->get_name();
  auto given = [&](const char* name) { return cmd->count(name) > 0; };
  if (given("--seed")) cfg.seed = o.seed;
  if (given("--out")) cfg.out = o.out;
  if (given("--N")) cfg.Ns = o.Ns;
  if (given("--reps")) cfg.reps = o.reps;
  if (given("--steps")) cfg.steps = o.steps;
  if (given("--resolution")) cfg.resolution = o.resolution;
  if (given("--alpha")) cfg.alphas = o.alphas;
  if (given("--p")) std::copy(o.p.begin(), o.p.end(), cfg.p.begin());
  if (given("--G")) cfg.G = o.G;
  if (given("--a")) cfg.a = o.a;
  if (given("--b")) cfg.b = o.b;
  if (given("--c")) cfg.c = o.c;
  if (given("--T")) cfg.T = o.T;
  if (given("--particles")) cfg.particles = o.particles;
  if (given("--max-iters")) cfg.max_iters = o.max_iters;
  if (given("--tol")) cfg.tol = o.tol;
  if (given("--action")) cfg.action = o.action;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coarse correlated equilibria for the bang-bang mean field game"};
  app.require_subcommand(1);
  Overrides o;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"region", "equilibrium region sweep over (p11, p22) (CSV + PGM)"},
      {"gap", "N-player epsilon-CCE gap against the exact oracle"},
      {"mfgap", "mean field deviation gap against the closed form"},
      {"poc", "propagation-of-chaos decay curve"},
      {"consistency", "consistency of the device flows with simulated conditional laws"},
      {"mkv", "McKean-Vlasov particle fixed point for a constant action"},
  };
  for (const auto& [name, help] : commands) add_options(app.add_subcommand(name, help), o);
  CLI11_PARSE(app, argc, argv);

  const CLI::App* cmd = app.get_subcommands().front();
  try {
    const mfcce::RunConfig cfg = resolve(cmd, o);
    const std::size_t workers = cmd->count("--workers") ? o.workers : mfcce::default_workers();
    return mfcce::run(cfg, workers, std::cerr);
  } catch (const mfcce::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const mfcce::SimulationError& e) {
    std::cerr << "simulation failed: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
