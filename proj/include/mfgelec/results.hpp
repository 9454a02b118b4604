#pragma once

#include <Eigen/Core>
#include <fmt/core.h>
#include <nlohmann/json.hpp>
#include <openssl/opensslv.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mfgelec/clearing.hpp"
#include "mfgelec/equilibrium.hpp"
#include "mfgelec/errors.hpp"

#ifndef MFGELEC_VERSION
#define MFGELEC_VERSION "0.0.0"
#endif

namespace mfgelec {

/// Per-technology capacity series on the time grid (GW).
struct CapacitySeries {
  std::vector<double> installed;           ///< sum over ages and states of lambda * occupation
  std::vector<double> under_construction;  ///< occupation of slots before the capacity profile is reached
  std::vector<double> potential;           ///< undecided projects
  std::vector<double> plants;              ///< total occupation, any age
};

inline CapacitySeries capacity_series(const Problem& p, const FlowProfile& flows, std::size_t i) {
  const auto& tech = p.technology(i);
  const auto& f = flows[i];
  const std::size_t T = p.steps();
  CapacitySeries c;
  c.installed.assign(T + 1, 0.0);
  c.under_construction.assign(T + 1, 0.0);
  c.potential.assign(T + 1, 0.0);
  c.plants.assign(T + 1, 0.0);
  for (std::size_t t = 0; t <= T; ++t) {
    for (std::size_t x = 0; x < tech.grid.size(); ++x) c.potential[t] += f.potential(t, x);
    for (std::size_t a = 0; a < tech.ages.size(); ++a) {
      const double lam = tech.capacity[a];
      const bool building = tech.ages.age(a) + 1e-9 < tech.spec.build_time + tech.spec.ramp_width &&
                            !(tech.ages.has_mature_bucket() && a + 1 == tech.ages.size());
      for (double m : f.standing_row(t, a)) {
        c.installed[t] += lam * m;
        c.plants[t] += m;
        if (building) c.under_construction[t] += (1.0 - lam) * m;
      }
    }
  }
  return c;
}

/// Terms of the capacity identity installed[t+1] = aged[t] + completed[t] - exited[t]
/// for t < steps. `aged` is the capacity standing at t carried to t+1 at its old
/// capacity factor, `completed` the capacity added by aging through the
/// construction profile and by entries at t+1, `exited` the capacity leaving at t+1.
struct CapacityBalance {
  std::vector<double> aged, completed, exited;
  double max_gap = 0.0;
};

inline CapacityBalance capacity_balance(const Problem& p, const FlowProfile& flows, std::size_t i) {
  const auto& tech = p.technology(i);
  const auto& f = flows[i];
  const std::size_t T = p.steps(), A = tech.ages.size(), X = tech.grid.size();
  const auto installed = capacity_series(p, flows, i).installed;
  CapacityBalance b;
  b.aged.assign(T, 0.0);
  b.completed.assign(T, 0.0);
  b.exited.assign(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t a = 0; a < A; ++a) {
      if (!tech.ages.holds_mass(a)) continue;
      double m = 0.0;
      for (std::size_t x = 0; x < X; ++x) m += f.installed(t, a, x);
      b.aged[t] += tech.capacity[a] * m;
      b.completed[t] += (tech.capacity[tech.ages.next(a)] - tech.capacity[a]) * m;
    }
    if (t + 1 < T) {
      for (std::size_t x = 0; x < X; ++x) b.completed[t] += tech.capacity[0] * f.entry(t + 1, x);
      for (std::size_t a = 0; a < A; ++a)
        for (std::size_t x = 0; x < X; ++x) b.exited[t] += tech.capacity[a] * f.exit(t + 1, a, x);
    }
    b.max_gap = std::max(b.max_gap, std::abs(installed[t + 1] - (b.aged[t] + b.completed[t] - b.exited[t])));
  }
  return b;
}

/// Output (GW) of technology i at the cleared prices of time t.
inline std::pair<double, double> technology_supply(const Problem& p, const FlowProfile& flows, const PriceSystem& prices,
                                                   std::size_t i, std::size_t t) {
  const auto& tech = p.technology(i);
  if (tech.spec.renewable()) {
    const double r = renewable_output(p, flows, i, t);
    return {r, r};
  }
  const auto in = clearing_input(p, flows, t);
  std::size_t slot = 0;
  for (std::size_t j = 0; j < i; ++j) slot += p.technology(j).spec.conventional() ? 1 : 0;
  const auto& pt = prices[t];
  return {conventional_supply(p.market(), in, slot, pt.peak, pt.fuel),
          conventional_supply(p.market(), in, slot, pt.offpeak, pt.fuel)};
}

struct ResultBundle {
  std::string prices, capacity, supply, flows, diagnostics;
  nlohmann::json manifest;
};

namespace detail {
inline std::string num(double v) { return fmt::format("{:.10g}", v); }
}  // namespace detail

inline ResultBundle make_bundle(const Problem& p, const EquilibriumReport& rep, const std::string& config_hash,
                                const std::string& config_name) {
  using detail::num;
  const auto& sc = p.scenario();
  const std::size_t T = p.steps(), I = p.technologies(), K = sc.fuels.size();
  ResultBundle b;

  std::string s = "t,P_peak,P_offpeak";
  for (std::size_t k = 0; k < K; ++k) s += fmt::format(",P_fuel_{}", k + 1);
  s += ",loss_of_load_peak,loss_of_load_offpeak\n";
  for (std::size_t t = 0; t <= T; ++t) {
    const auto& pt = rep.prices[t];
    s += fmt::format("{},{},{}", t, num(pt.peak), num(pt.offpeak));
    for (double f : pt.fuel) s += "," + num(f);
    s += fmt::format(",{},{}\n", pt.loss_of_load_peak ? 1 : 0, pt.loss_of_load_offpeak ? 1 : 0);
  }
  b.prices = std::move(s);

  std::vector<CapacitySeries> cap;
  for (std::size_t i = 0; i < I; ++i) cap.push_back(capacity_series(p, rep.flows, i));
  s = "t,tech,installed_gw,under_construction_gw,potential_gw\n";
  for (std::size_t t = 0; t <= T; ++t)
    for (std::size_t i = 0; i < I; ++i)
      s += fmt::format("{},{},{},{},{}\n", t, sc.technologies[i].name, num(cap[i].installed[t]),
                       num(cap[i].under_construction[t]), num(cap[i].potential[t]));
  b.capacity = std::move(s);

  s = "t,tech,peak_gw,offpeak_gw\n";
  for (std::size_t t = 0; t <= T; ++t)
    for (std::size_t i = 0; i < I; ++i) {
      const auto [pk, op] = technology_supply(p, rep.flows, rep.prices, i, t);
      s += fmt::format("{},{},{},{}\n", t, sc.technologies[i].name, num(pk), num(op));
    }
  b.supply = std::move(s);

  s = "t,tech,entry_gw,exit_gw\n";
  for (std::size_t t = 0; t <= T; ++t)
    for (std::size_t i = 0; i < I; ++i) {
      const auto& f = rep.flows[i];
      double in = 0.0, out = 0.0;
      for (std::size_t x = 0; x < f.shape().states; ++x) {
        if (t < T) in += f.entry(t, x);
        for (std::size_t a = 0; a < f.shape().ages; ++a) out += f.exit(t, a, x);
      }
      s += fmt::format("{},{},{},{}\n", t, sc.technologies[i].name, num(in), num(out));
    }
  b.flows = std::move(s);

  s = "iter,price_delta";
  for (const auto& tech : sc.technologies) s += ",exploitability_" + tech.name;
  s += ",weight,fractional_share\n";
  for (const auto& d : rep.history) {
    s += fmt::format("{},{}", d.iteration, num(d.price_delta));
    for (double e : d.exploitability) s += "," + num(e);
    s += fmt::format(",{},{}\n", num(d.weight), num(d.fractional_share));
  }
  b.diagnostics = std::move(s);

  auto& m = b.manifest;
  m["config_name"] = config_name;
  m["config_sha256"] = config_hash;
  m["converged"] = rep.converged;
  m["iterations"] = rep.iterations;
  m["backend"] = rep.backend;
  m["time_steps"] = T;
  m["time_step_years"] = sc.dt();
  m["start_year"] = sc.start_year;
  if (rep.uniqueness)
    m["uniqueness"] = {{"price_gap", rep.uniqueness->gap},
                       {"agreed", rep.uniqueness->agreed},
                       {"other_converged", rep.uniqueness->other_converged}};
  m["versions"] = {{"mfgelec", MFGELEC_VERSION},
                   {"compiler", __VERSION__},
                   {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
                   {"fmt", FMT_VERSION},
                   {"openssl", OPENSSL_VERSION_TEXT}};
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  m["timestamp"] = stamp;
  return b;
}

/// Writes through a temporary file in the same directory, then renames.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline void write_bundle(const ResultBundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_atomic(dir / "prices.csv", b.prices);
  write_atomic(dir / "capacity.csv", b.capacity);
  write_atomic(dir / "supply.csv", b.supply);
  write_atomic(dir / "flows.csv", b.flows);
  write_atomic(dir / "diagnostics.csv", b.diagnostics);
  write_atomic(dir / "manifest.json", b.manifest.dump(2) + "\n");
}

/// Reads a prices.csv written by write_bundle.
inline PriceSystem read_prices_csv(const std::filesystem::path& path, std::size_t fuels) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open price file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError("price file '" + path.string() + "' is empty");
  PriceSystem ps;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() != 5 + fuels)
      throw InputError(fmt::format("{}: row {} has {} columns, expected {}", path.string(), row, cells.size(), 5 + fuels));
    try {
      PricePoint pt;
      pt.peak = std::stod(cells[1]);
      pt.offpeak = std::stod(cells[2]);
      for (std::size_t k = 0; k < fuels; ++k) pt.fuel.push_back(std::stod(cells[3 + k]));
      pt.loss_of_load_peak = cells[3 + fuels] == "1";
      pt.loss_of_load_offpeak = cells[4 + fuels] == "1";
      if (std::stoul(cells[0]) != ps.size()) throw InputError("rows out of order");
      ps.points.push_back(std::move(pt));
    } catch (const std::exception& e) {
      throw InputError(fmt::format("{}: row {}: {}", path.string(), row, e.what()));
    }
  }
  return ps;
}

}  // namespace mfgelec
