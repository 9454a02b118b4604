#include <CLI11.hpp>
#include <fmt/core.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "mfgelec/mfgelec.hpp"

namespace fs = std::filesystem;
using namespace mfgelec;

namespace {

struct RunOutput {
  LoadedConfig config;
  std::unique_ptr<Problem> problem;
  EquilibriumReport report;
};

RunOutput solve(const std::string& path, bool progress, std::size_t max_iter) {
  RunOutput out;
  out.config = load_validate(path);
  for (const auto& w : out.config.warnings) fmt::print(stderr, "warning: {}\n", w);
  out.problem = std::make_unique<Problem>(out.config.scenario);
  auto settings = out.config.config.solver;
  settings.progress = progress;
  if (max_iter > 0) settings.max_iter = max_iter;
  out.report = run(*out.problem, settings);
  return out;
}

void summarize(const RunOutput& r) {
  const auto& rep = r.report;
  fmt::print("{} after {} iterations (backend {})\n", rep.converged ? "converged" : "NOT converged", rep.iterations,
             rep.backend);
  if (!rep.history.empty()) {
    const auto& d = rep.history.back();
    fmt::print("last price_delta {:.3e}, max exploitability {:.3e}\n", d.price_delta, d.max_exploitability());
  }
  if (rep.uniqueness)
    fmt::print("restart price gap {:.3e} ({})\n", rep.uniqueness->gap, rep.uniqueness->agreed ? "agreed" : "DISAGREED");
}

std::size_t find_tech(const Scenario& s, const std::string& id) {
  for (std::size_t i = 0; i < s.technologies.size(); ++i)
    if (s.technologies[i].name == id) return i;
  try {
    const auto i = std::stoul(id);
    if (i < s.technologies.size()) return i;
  } catch (const std::exception&) {
  }
  throw InputError("unknown technology '" + id + "'");
}

std::string comparison_csv(const RunOutput& a, const RunOutput& b) {
  const auto& sa = a.problem->scenario();
  const auto& sb = b.problem->scenario();
  if (sa.time_steps != sb.time_steps || sa.horizon != sb.horizon)
    throw InputError("compared configurations must share the time grid");
  std::vector<std::pair<std::size_t, std::size_t>> common;
  for (std::size_t i = 0; i < sa.technologies.size(); ++i)
    for (std::size_t j = 0; j < sb.technologies.size(); ++j)
      if (sa.technologies[i].name == sb.technologies[j].name) common.emplace_back(i, j);

  std::string s = "t,year,P_peak_a,P_peak_b,P_offpeak_a,P_offpeak_b";
  for (const auto& [i, j] : common) s += fmt::format(",installed_{0}_a,installed_{0}_b", sa.technologies[i].name);
  s += "\n";
  std::vector<CapacitySeries> ca, cb;
  for (const auto& [i, j] : common) {
    ca.push_back(capacity_series(*a.problem, a.report.flows, i));
    cb.push_back(capacity_series(*b.problem, b.report.flows, j));
  }
  for (std::size_t t = 0; t <= sa.time_steps; ++t) {
    s += fmt::format("{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g}", t, sa.start_year + sa.time(t),
                     a.report.prices[t].peak, b.report.prices[t].peak, a.report.prices[t].offpeak,
                     b.report.prices[t].offpeak);
    for (std::size_t k = 0; k < common.size(); ++k)
      s += fmt::format(",{:.10g},{:.10g}", ca[k].installed[t], cb[k].installed[t]);
    s += "\n";
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entry/exit equilibrium solver for electricity markets"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MFGELEC_VERSION);

  std::string config, config_b, out_dir, prices_path, tech_id;
  std::size_t step = 0, max_iter = 0;
  bool progress = false;

  auto* run_cmd = app.add_subcommand("run", "Run fictitious play and write the result bundle");
  run_cmd->add_option("config", config, "Scenario configuration (YAML)")->required();
  run_cmd->add_option("--out", out_dir, "Output directory")->required();
  run_cmd->add_flag("--progress", progress, "Print one line per iteration to stderr");
  run_cmd->add_option("--max-iter", max_iter, "Override solver.max_iter");

  auto* validate_cmd = app.add_subcommand("validate", "Check a configuration");
  validate_cmd->add_option("config", config, "Scenario configuration (YAML)")->required();

  auto* clear_cmd = app.add_subcommand("clear-once", "Clear prices once from the initial measures");
  clear_cmd->add_option("config", config, "Scenario configuration (YAML)")->required();
  clear_cmd->add_option("--t", step, "Time step")->required();

  auto* br_cmd = app.add_subcommand("best-response", "Solve one best-response LP against given prices");
  br_cmd->add_option("config", config, "Scenario configuration (YAML)")->required();
  br_cmd->add_option("--prices", prices_path, "prices.csv from a previous run")->required();
  br_cmd->add_option("--tech", tech_id, "Technology name or index")->required();

  auto* cmp_cmd = app.add_subcommand("compare", "Run two configurations and join their series");
  cmp_cmd->add_option("config_a", config, "First configuration")->required();
  cmp_cmd->add_option("config_b", config_b, "Second configuration")->required();
  cmp_cmd->add_option("--out", out_dir, "Output directory")->required();
  cmp_cmd->add_flag("--progress", progress, "Print one line per iteration to stderr");
  cmp_cmd->add_option("--max-iter", max_iter, "Override solver.max_iter");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*validate_cmd) {
      const auto c = load_validate(config);
      for (const auto& w : c.warnings) fmt::print(stderr, "warning: {}\n", w);
      fmt::print("{}: valid ({} technologies, {} fuels, {} steps), sha256 {}\n", config,
                 c.scenario.technologies.size(), c.scenario.fuels.size(), c.scenario.time_steps, c.hash);
      return 0;
    }
    if (*run_cmd) {
      const auto r = solve(config, progress, max_iter);
      write_bundle(make_bundle(*r.problem, r.report, r.config.hash, r.config.config.name), out_dir);
      summarize(r);
      return r.report.converged ? 0 : 2;
    }
    if (*clear_cmd) {
      const auto c = load_validate(config);
      const Problem p(c.scenario);
      if (step > p.steps()) throw InputError(fmt::format("--t must lie in [0, {}]", p.steps()));
      const auto flows = initial_flows(p, InitialFlows::wait);
      const auto r = clear_detailed(p.market(), clearing_input(p, flows, step), c.config.solver.clearing);
      fmt::print("t={} P_peak={:.10g} P_offpeak={:.10g}", step, r.prices.peak, r.prices.offpeak);
      for (std::size_t k = 0; k < r.prices.fuel.size(); ++k)
        fmt::print(" P_{}={:.10g}", p.scenario().fuels[k].name, r.prices.fuel[k]);
      fmt::print(" loss_of_load_peak={} loss_of_load_offpeak={} newton_iterations={} kkt={:.3e}\n",
                 r.prices.loss_of_load_peak, r.prices.loss_of_load_offpeak, r.iterations, r.kkt);
      return 0;
    }
    if (*br_cmd) {
      const auto c = load_validate(config);
      const Problem p(c.scenario);
      const auto i = find_tech(p.scenario(), tech_id);
      const auto prices = read_prices_csv(prices_path, p.scenario().fuels.size());
      const auto reward = assemble_reward(p.technology(i), prices, p.scenario());
      const auto backend = make_backend(c.config.solver.backend);
      const auto br = solve_best_response(p.constraints(i), reward, *backend);
      fmt::print("{} objective {:.12g}\n", p.scenario().technologies[i].name, br.objective);
      return 0;
    }
    if (*cmp_cmd) {
      const auto a = solve(config, progress, max_iter);
      const auto b = solve(config_b, progress, max_iter);
      write_bundle(make_bundle(*a.problem, a.report, a.config.hash, a.config.config.name), fs::path(out_dir) / "a");
      write_bundle(make_bundle(*b.problem, b.report, b.config.hash, b.config.config.name), fs::path(out_dir) / "b");
      write_atomic(fs::path(out_dir) / "comparison.csv", comparison_csv(a, b));
      summarize(a);
      summarize(b);
      return a.report.converged && b.report.converged ? 0 : 2;
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 1;
}
