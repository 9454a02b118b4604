// Prints one PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

#include <fmt/core.h>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mfgelec/mfgelec.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace mfgelec;

namespace {

// Tolerances and budgets.
constexpr double kResidualTol = 1e-9;
constexpr double kMassTol = 1e-9;
constexpr double kVerifySeconds = 1.0;
constexpr double kPriceTol = 1e-4;
constexpr double kClearSeconds = 30.0;
constexpr double kLpRelTol = 1e-7;
constexpr double kLpSeconds = 60.0;
constexpr int kLpInstances = 25;
constexpr double kGradRelTol = 1e-5;
constexpr double kGainRelTol = 1e-6;
constexpr double kGradSeconds = 5.0;
constexpr double kUniqueGap = 0.01;
constexpr double kCoalShare = 0.1;
constexpr double kFlatTol = 1e-6;
constexpr double kEarlyYears = 5.0;
constexpr double kMidYear = 12.0;

int failures = 0;

void report(const std::string& id, bool ok, const std::string& detail) {
  fmt::print("{} {}: {}\n", ok ? "PASS" : "FAIL", id, detail);
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cli(const std::string& args) {
  const int status = std::system((std::string(MFGELEC_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::string> head;
  std::vector<std::map<std::string, std::string>> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (std::getline(in, line)) head = split(line);
  while (std::getline(in, line)) {
    const auto cells = split(line);
    std::map<std::string, std::string> row;
    for (std::size_t k = 0; k < head.size() && k < cells.size(); ++k) row[head[k]] = cells[k];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::size_t tech_index(const Problem& p, const std::string& name) {
  for (std::size_t i = 0; i < p.technologies(); ++i)
    if (p.scenario().technologies[i].name == name) return i;
  throw InputError("illustration has no technology '" + name + "'");
}

void ac1(const Problem& p, const std::vector<const EquilibriumReport*>& runs) {
  const auto t0 = std::chrono::steady_clock::now();
  double residual = 0.0, mass = 0.0;
  bool converged = true;
  for (const auto* rep : runs) {
    converged = converged && rep->converged;
    for (std::size_t i = 0; i < p.technologies(); ++i) {
      residual = std::max(residual, p.constraints(i).residual_norm(rep->flows[i]));
      const auto mb = mass_balance(rep->flows[i], p.initial(i));
      mass = std::max({mass, mb.potential_gap, mb.installed_gap});
    }
  }
  const double secs = since(t0);
  report("AC1", converged && residual < kResidualTol && mass < kMassTol && secs < kVerifySeconds,
         fmt::format("converged {}, max residual {:.2e}, max mass gap {:.2e}, verified in {:.3f}s", converged, residual,
                     mass, secs));
}

void ac2() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(11);
  double worst = 0.0, worst_excess = 0.0;
  bool disjunction = true;
  int loss = 0;
  for (int c = 0; c < 50; ++c) {
    const auto cs = support::random_clearing_case(rng, support::pick(rng, 1, 3), support::pick(rng, 1, 4), c % 5 == 0);
    const auto r = clear_detailed(cs.market, cs.input);
    const auto want = oracles::clearing(cs.market, cs.input);
    const auto got = r.prices.coordinates();
    for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
    const oracles::Excess ex{cs.market, cs.input};
    const double tol = 1e-6 * std::max(1.0, cs.input.demand_peak);
    for (std::size_t i = 0; i < 2; ++i) {
      const double e = ex(got, i);
      const bool flag = i == 0 ? r.prices.loss_of_load_peak : r.prices.loss_of_load_offpeak;
      if (got[i] >= cs.market.price_cap) {
        disjunction = disjunction && e <= tol && flag == (e < 0.0);
      } else if (got[i] <= 0.0) {
        disjunction = disjunction && e >= -tol && !flag;
      } else {
        disjunction = disjunction && std::abs(e) <= tol && !flag;
        worst_excess = std::max(worst_excess, std::abs(e));
      }
      loss += flag ? 1 : 0;
    }
  }
  const double secs = since(t0);
  report("AC2", worst < kPriceTol && disjunction && loss > 0 && secs < kClearSeconds,
         fmt::format("max price error {:.2e} EUR/MWh, interior excess {:.2e} GW, disjunction {}, {} loss-of-load "
                     "blocks, {:.1f}s",
                     worst, worst_excess, disjunction, loss, secs));
}

void ac3() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(21);
  const DenseSimplexBackend simplex;
  const StagedBackend staged;
  double worst = 0.0;
  bool sizes = true;
  for (int c = 0; c < kLpInstances; ++c) {
    const auto in = oracles::random_lp_instance(rng);
    const auto s = in.tech.shape();
    sizes = sizes && s.steps <= 12 && s.states <= 8 && s.ages <= 4;
    const ConstraintSystem cs(in.tech, in.initial);
    const double dp = dp_oracle(in.tech, in.reward, in.initial).value;
    for (const LpBackend* b : {static_cast<const LpBackend*>(&simplex), static_cast<const LpBackend*>(&staged)})
      worst = std::max(worst, std::abs(solve_best_response(cs, in.reward, *b).objective - dp) / (1.0 + std::abs(dp)));
  }
  const double secs = since(t0);
  report("AC3", worst < kLpRelTol && sizes && secs < kLpSeconds,
         fmt::format("{} instances, both backends, max |V_lp - V_dp| / (1 + |V_dp|) = {:.2e}, {:.1f}s", kLpInstances,
                     worst, secs));
}

void ac4() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(5);
  double grad = 0.0;
  for (int c = 0; c < 100; ++c) {
    const auto cs = support::random_clearing_case(rng, support::pick(rng, 1, 3), support::pick(rng, 1, 4), false);
    std::vector<double> z{support::uniform(rng, 1.0, 150.0), support::uniform(rng, 1.0, 150.0)};
    for (std::size_t k = 0; k < cs.market.fuels.size(); ++k) z.push_back(support::uniform(rng, 1.0, 60.0));
    const auto g = potential(cs.market, cs.input, z).gradient;
    double err = 0.0, size = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double h = 1e-5 * std::max(1.0, z[i]);
      auto a = z, b = z;
      a[i] += h;
      b[i] -= h;
      const double fd = (potential(cs.market, cs.input, a).value - potential(cs.market, cs.input, b).value) / (2 * h);
      err = std::max(err, std::abs(fd - g[i]));
      size = std::max(size, std::abs(fd));
    }
    grad = std::max(grad, err / std::max(size, 1e-12));
  }
  TechnologySpec t;
  t.offer_scale = 7.5;
  double gain_err = 0.0;
  for (int k = 0; k < 200; ++k) {
    const double x = support::uniform(rng, -5.0, 12.5);
    if (std::abs(x) < 1e-2 || std::abs(x - t.offer_scale) < 1e-2) continue;
    const double h = 1e-5;
    const double fd = (gain(t, x + h) - gain(t, x - h)) / (2 * h);
    const double f = offer_fraction(t, x);
    gain_err = std::max(gain_err, f == 0.0 ? std::abs(fd) : std::abs(fd - f) / f);
  }
  const double secs = since(t0);
  report("AC4", grad < kGradRelTol && gain_err < kGainRelTol && secs < kGradSeconds,
         fmt::format("potential gradient rel. error {:.2e} over 100 points, gain' rel. error {:.2e}, {:.2f}s", grad,
                     gain_err, secs));
}

void ac5(const EquilibriumReport& wait, const EquilibriumReport& enter) {
  const double gap = sup_distance(wait.prices, enter.prices);
  report("AC5", wait.converged && enter.converged && gap < kUniqueGap,
         fmt::format("all-wait converged {} ({} it), all-enter converged {} ({} it), price gap {:.2e} EUR/MWh",
                     wait.converged, wait.iterations, enter.converged, enter.iterations, gap));
}

void ac6(const Problem& p, const EquilibriumReport& rep) {
  const std::size_t T = p.steps();
  const auto coal = capacity_series(p, rep.flows, tech_index(p, "coal")).installed;
  const auto gas = capacity_series(p, rep.flows, tech_index(p, "gas")).installed;
  const auto wind = capacity_series(p, rep.flows, tech_index(p, "wind")).installed;

  // (a) non-increasing from its peak on, and below 10% of the start strictly before T.
  const auto peak = static_cast<std::size_t>(std::max_element(coal.begin(), coal.end()) - coal.begin());
  bool falling = true;
  for (std::size_t t = peak; t < T; ++t) falling = falling && coal[t + 1] <= coal[t] + kFlatTol;
  std::size_t low = T + 1;
  for (std::size_t t = 0; t < T && low > T; ++t)
    if (coal[t] < kCoalShare * coal[0]) low = t;
  report("AC6a", falling && low < T,
         fmt::format("coal {:.1f} -> {:.1f} GW, non-increasing from t={}, below 10% from t={} (year {:.2f})", coal[0],
                     coal[T], peak, low, low <= T ? p.scenario().time(low) : -1.0));

  // (b) first maximum of gas strictly before the first step with wind above gas.
  const auto gas_peak = static_cast<std::size_t>(std::max_element(gas.begin(), gas.end()) - gas.begin());
  std::size_t cross = T + 1;
  for (std::size_t t = 0; t <= T && cross > T; ++t)
    if (wind[t] > gas[t]) cross = t;
  report("AC6b", cross <= T && gas_peak < cross,
         fmt::format("gas peaks at t={} ({:.1f} GW), wind first exceeds gas at t={}", gas_peak, gas[gas_peak], cross));

  report("AC6c", wind[T] > coal[T] && wind[T] > gas[T],
         fmt::format("at T: wind {:.1f}, coal {:.1f}, gas {:.1f} GW", wind[T], coal[T], gas[T]));
}

void ac7(const fs::path& work) {
  const auto out = work / "compare";
  const int code = cli("compare " + support::source_path("scenarios/illustration_no_build_time.yaml") + " " +
                       support::source_path("scenarios/illustration.yaml") + " --out " + out.string());
  if (code != 0) {
    report("AC7a", false, fmt::format("compare exited with {}", code));
    report("AC7b", false, fmt::format("compare exited with {}", code));
    return;
  }
  const auto rows = read_csv(out / "comparison.csv");
  const double start = std::stod(rows.front().at("year"));
  double zero = 0.0, built = 0.0;
  int n = 0;
  const std::map<std::string, std::string>* mid = nullptr;
  for (const auto& r : rows) {
    const double offset = std::stod(r.at("year")) - start;
    if (offset < kEarlyYears - 1e-9) {
      zero += std::stod(r.at("P_peak_a"));
      built += std::stod(r.at("P_peak_b"));
      ++n;
    }
    if (!mid && std::abs(offset - kMidYear) < 1e-9) mid = &r;
  }
  zero /= n;
  built /= n;
  report("AC7a", built >= zero,
         fmt::format("mean peak price over the first {} years: {:.2f} with build times, {:.2f} without", kEarlyYears,
                     built, zero));
  if (!mid) {
    report("AC7b", false, "no grid point at year 12");
    return;
  }
  const double wa = std::stod(mid->at("installed_wind_a")), wb = std::stod(mid->at("installed_wind_b"));
  report("AC7b", wb <= wa,
         fmt::format("wind at year {}: {:.1f} GW with build times, {:.1f} without", kMidYear, wb, wa));
}

std::string without_timestamp(const std::string& manifest) {
  std::stringstream in(manifest);
  std::string line, out;
  while (std::getline(in, line))
    if (line.find("\"timestamp\"") == std::string::npos) out += line + "\n";
  return out;
}

void ac8(const fs::path& work) {
  const auto cfg = support::source_path("scenarios/illustration.yaml");
  const auto a = work / "run_a", b = work / "run_b";
  const int ca = cli("run " + cfg + " --out " + a.string());
  const int cb = cli("run " + cfg + " --out " + b.string());
  bool same = ca == 0 && cb == 0;
  std::string differing;
  for (const char* f : {"prices.csv", "capacity.csv", "supply.csv", "flows.csv", "diagnostics.csv"})
    if (slurp(a / f) != slurp(b / f) || slurp(a / f).empty()) {
      same = false;
      differing += std::string(" ") + f;
    }
  if (without_timestamp(slurp(a / "manifest.json")) != without_timestamp(slurp(b / "manifest.json"))) {
    same = false;
    differing += " manifest.json";
  }
  report("AC8", same,
         same ? "two runs gave byte-identical bundles apart from the manifest timestamp"
              : fmt::format("exit codes {} and {}, differing:{}", ca, cb, differing));
}

}  // namespace

int main() {
  const fs::path work = fs::path(MFGELEC_WORK_DIR) / "acceptance";
  fs::remove_all(work);
  fs::create_directories(work);
  try {
    const auto cfg = load_validate(support::source_path("scenarios/illustration.yaml"));
    const Problem p(cfg.scenario);
    auto settings = cfg.config.solver;
    settings.uniqueness_check = false;
    settings.initial_flows = InitialFlows::wait;
    const auto wait = run(p, settings);
    settings.initial_flows = InitialFlows::enter;
    const auto enter = run(p, settings);

    ac1(p, {&wait, &enter});
    ac2();
    ac3();
    ac4();
    ac5(wait, enter);
    ac6(p, wait);
    ac7(work);
    ac8(work);
  } catch (const std::exception& e) {
    fmt::print("FAIL acceptance aborted: {}\n", e.what());
    return 1;
  }
  fmt::print("{} criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
