#pragma once

#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mfgelec/diffusion.hpp"
#include "mfgelec/equilibrium.hpp"
#include "mfgelec/errors.hpp"
#include "mfgelec/initial_measures.hpp"
#include "mfgelec/model.hpp"

namespace mfgelec {

using Breakpoints = std::vector<std::pair<double, double>>;

struct TechnologyConfig {
  TechnologySpec spec;
  std::string fuel_name;             ///< conventional only
  std::optional<std::size_t> state_nodes;
  std::vector<double> state_grid;    ///< explicit nodes; overrides state_nodes
  InitialMeasureSpec initial;

  friend bool operator==(const TechnologyConfig&, const TechnologyConfig&) = default;
};

/// The parsed configuration document, before discretization.
struct ScenarioConfig {
  std::string name;
  double horizon = 25.0;
  std::size_t time_steps = 100;
  double start_year = 0.0;
  double discount_rate = 0.05;
  double peak_fraction = kDefaultPeakFraction;
  double hours_per_year = 8760.0;
  double price_cap = 3000.0;
  std::size_t state_nodes = 60;
  Breakpoints demand_peak, demand_offpeak, carbon_price;  ///< (year offset, value)
  Breakpoints baseline_supply;                            ///< (EUR/MWh, GW)
  std::vector<FuelSpec> fuels;
  std::vector<TechnologyConfig> technologies;
  SolverSettings solver;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

namespace detail {

inline std::string mark(const YAML::Node& n) {
  const auto m = n.Mark();
  if (m.line < 0) return "";
  return " (line " + std::to_string(m.line + 1) + ")";
}

// Typed access to a YAML map with field paths in every error message.
class Fields {
 public:
  Fields(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (!node_.IsMap()) throw ConfigError(path_ + ": expected a mapping" + mark(node_));
  }

  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const {
    seen_.insert(key);
    const YAML::Node& self = node_;
    return static_cast<bool>(self[key]);
  }
  YAML::Node raw(const std::string& key) const {
    seen_.insert(key);
    const YAML::Node& self = node_;
    const YAML::Node n = self[key];
    if (!n) throw ConfigError(at(key) + ": required field missing" + mark(node_));
    return n;
  }

  double number(const std::string& key) const { return to_number(raw(key), at(key)); }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }
  std::size_t count(const std::string& key) const {
    const auto n = raw(key);
    try {
      const long long v = n.as<long long>();
      if (v < 0) throw ConfigError(at(key) + ": must be a nonnegative integer" + mark(n));
      return static_cast<std::size_t>(v);
    } catch (const YAML::Exception&) {
      throw ConfigError(at(key) + ": expected an integer" + mark(n));
    }
  }
  std::size_t count(const std::string& key, std::size_t fallback) const { return has(key) ? count(key) : fallback; }
  std::string text(const std::string& key) const {
    const auto n = raw(key);
    if (!n.IsScalar()) throw ConfigError(at(key) + ": expected a string" + mark(n));
    return n.as<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
  }
  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto n = raw(key);
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      throw ConfigError(at(key) + ": expected true or false" + mark(n));
    }
  }
  std::vector<double> numbers(const std::string& key) const {
    const auto n = raw(key);
    if (!n.IsSequence()) throw ConfigError(at(key) + ": expected a list of numbers" + mark(n));
    std::vector<double> v;
    for (std::size_t i = 0; i < n.size(); ++i) v.push_back(to_number(n[i], at(key) + "[" + std::to_string(i) + "]"));
    return v;
  }
  Breakpoints pairs(const std::string& key) const {
    const auto n = raw(key);
    Breakpoints out;
    if (n.IsScalar()) {
      out.emplace_back(0.0, to_number(n, at(key)));
      out.emplace_back(std::numeric_limits<double>::infinity(), out.front().second);
      return out;
    }
    if (!n.IsSequence()) throw ConfigError(at(key) + ": expected a list of [x, y] pairs" + mark(n));
    for (std::size_t i = 0; i < n.size(); ++i) {
      const std::string p = at(key) + "[" + std::to_string(i) + "]";
      if (!n[i].IsSequence() || n[i].size() != 2) throw ConfigError(p + ": expected an [x, y] pair" + mark(n[i]));
      out.emplace_back(to_number(n[i][0], p), to_number(n[i][1], p));
    }
    return out;
  }
  Fields child(const std::string& key) const { return Fields(raw(key), at(key)); }

  /// Rejects keys that were never asked for, which catches misspelled fields.
  void finish() const {
    for (const auto& kv : node_) {
      const auto k = kv.first.as<std::string>();
      if (!seen_.count(k)) throw ConfigError(at(k) + ": unknown field" + mark(kv.first));
    }
  }

  static double to_number(const YAML::Node& n, const std::string& path) {
    if (!n.IsScalar()) throw ConfigError(path + ": expected a number" + mark(n));
    const auto s = n.as<std::string>();
    if (s == "inf" || s == ".inf" || s == "infinite" || s == "+inf") return std::numeric_limits<double>::infinity();
    try {
      return n.as<double>();
    } catch (const YAML::Exception&) {
      throw ConfigError(path + ": expected a number, got '" + s + "'" + mark(n));
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  mutable std::set<std::string> seen_;
};

inline DensitySpec parse_density(const Fields& f) {
  DensitySpec d;
  const auto type = f.text("type");
  if (type == "point") {
    d.kind = DensitySpec::Kind::point;
    d.at = f.number("at");
  } else if (type == "truncated_gamma") {
    d.kind = DensitySpec::Kind::truncated_gamma;
    d.shape = f.number("shape");
    d.scale = f.number("scale");
  } else if (type == "beta") {
    d.kind = DensitySpec::Kind::beta;
    d.alpha = f.number("alpha");
    d.beta = f.number("beta");
    if (f.has("support")) {
      const auto s = f.numbers("support");
      if (s.size() != 2) throw ConfigError(f.at("support") + ": expected [lo, hi]");
      d.support_lo = s[0];
      d.support_hi = s[1];
    }
  } else if (type == "table") {
    d.kind = DensitySpec::Kind::table;
    d.weights = f.numbers("weights");
  } else if (type == "masses") {
    d.kind = DensitySpec::Kind::masses;
    d.weights = f.numbers("values");
  } else {
    throw ConfigError(f.at("type") + ": unknown density '" + type +
                      "' (expected point, truncated_gamma, beta, table or masses)");
  }
  f.finish();
  return d;
}

inline AgeProfileSpec parse_ages(const Fields& f) {
  AgeProfileSpec a;
  const auto type = f.text("type");
  if (type == "point") {
    a.kind = AgeProfileSpec::Kind::point;
    a.years = f.number("years");
  } else if (type == "uniform") {
    a.kind = AgeProfileSpec::Kind::uniform;
    a.from = f.number("from");
    a.to = f.number("to");
  } else {
    throw ConfigError(f.at("type") + ": unknown age profile '" + type + "' (expected point or uniform)");
  }
  f.finish();
  return a;
}

inline TechnologyConfig parse_technology(const Fields& f) {
  TechnologyConfig c;
  auto& s = c.spec;
  s.name = f.text("name");
  const auto kind = f.text("kind");
  if (kind == "conventional")
    s.kind = TechKind::conventional;
  else if (kind == "renewable")
    s.kind = TechKind::renewable;
  else
    throw ConfigError(f.at("kind") + ": expected conventional or renewable, got '" + kind + "'");
  if (s.conventional()) {
    c.fuel_name = f.text("fuel");
    s.fuel = FuelLink{0, f.number("fuel_units_per_mwh")};
    s.offer_scale = f.number("offer_scale_eur_per_mwh", 10.0);
  } else if (f.has("fuel") || f.has("fuel_units_per_mwh") || f.has("offer_scale_eur_per_mwh")) {
    throw ConfigError(f.path() + ": renewable technologies carry no fuel or offer fields");
  }
  s.fixed_cost = f.number("fixed_cost_eur_per_mw_year", 0.0);
  s.capital_cost = f.number("capital_cost_eur_per_mw", 0.0);
  s.scrap_value = f.number("scrap_value_eur_per_mw", 0.0);
  s.capital_decay = f.number("capital_decay_per_year", 0.0);
  s.build_time = f.number("build_time_years", 0.0);
  s.lifetime = f.number("lifetime_years", kInfiniteLifetime);
  s.ramp_width = f.number("ramp_width_years", 0.0);
  s.mean_reversion = f.number("mean_reversion_per_year");
  s.level = f.number("level");
  s.volatility = f.number("volatility");
  if (f.has("state_nodes")) c.state_nodes = f.count("state_nodes");
  if (f.has("state_grid")) c.state_grid = f.numbers("state_grid");

  auto& init = c.initial;
  if (f.has("potential")) {
    const auto p = f.child("potential");
    init.potential_mass = p.number("mass_gw", 0.0);
    if (p.has("density")) init.potential_density = parse_density(p.child("density"));
    p.finish();
  }
  if (f.has("installed")) {
    const auto p = f.child("installed");
    if (p.has("masses_gw")) {
      const auto rows = p.raw("masses_gw");
      if (!rows.IsSequence()) throw ConfigError(p.at("masses_gw") + ": expected a list of rows" + mark(rows));
      for (std::size_t a = 0; a < rows.size(); ++a) {
        std::vector<double> row;
        const std::string rp = p.at("masses_gw") + "[" + std::to_string(a) + "]";
        if (!rows[a].IsSequence()) throw ConfigError(rp + ": expected a list of numbers" + mark(rows[a]));
        for (std::size_t x = 0; x < rows[a].size(); ++x) row.push_back(Fields::to_number(rows[a][x], rp));
        init.installed_table.push_back(std::move(row));
      }
    } else {
      init.installed_mass = p.number("mass_gw", 0.0);
      if (p.has("age")) init.installed_ages = parse_ages(p.child("age"));
      if (p.has("density")) init.installed_density = parse_density(p.child("density"));
    }
    p.finish();
  }
  f.finish();
  return c;
}

inline Schedule parse_schedule(const std::string& s, const std::string& path) {
  if (s == "harmonic") return Schedule::harmonic;
  if (s == "constant") return Schedule::constant;
  if (s == "power") return Schedule::power;
  if (s == "line_search") return Schedule::line_search;
  if (s == "simplicial") return Schedule::simplicial;
  throw ConfigError(path + ": unknown schedule '" + s + "' (expected harmonic, constant, power, line_search or simplicial)");
}

inline const char* schedule_name(Schedule s) {
  switch (s) {
    case Schedule::harmonic: return "harmonic";
    case Schedule::constant: return "constant";
    case Schedule::power: return "power";
    case Schedule::line_search: return "line_search";
    case Schedule::simplicial: return "simplicial";
  }
  return "harmonic";
}

inline SolverSettings parse_solver(const Fields& f) {
  SolverSettings s;
  s.max_iter = f.count("max_iter", s.max_iter);
  s.price_tol = f.number("price_tol_eur_per_mwh", s.price_tol);
  if (f.has("exploitability_tol")) s.exploitability_tol = f.number("exploitability_tol");
  if (f.has("schedule")) s.schedule = parse_schedule(f.text("schedule"), f.at("schedule"));
  s.schedule_value = f.number("schedule_value", s.schedule_value);
  s.schedule_exponent = f.number("schedule_exponent", s.schedule_exponent);
  s.backend = f.text("backend", s.backend);
  const auto init = f.text("initial_flows", "wait");
  if (init == "wait")
    s.initial_flows = InitialFlows::wait;
  else if (init == "enter")
    s.initial_flows = InitialFlows::enter;
  else
    throw ConfigError(f.at("initial_flows") + ": expected wait or enter");
  s.uniqueness_check = f.flag("uniqueness_check", false);
  s.clearing.max_iter = f.count("clearing_max_iter", s.clearing.max_iter);
  s.clearing.kkt_tolerance = f.number("clearing_kkt_tol", s.clearing.kkt_tolerance);
  f.finish();
  if (s.max_iter == 0) throw ConfigError(f.at("max_iter") + ": must be positive");
  if (!(s.price_tol > 0.0)) throw ConfigError(f.at("price_tol_eur_per_mwh") + ": must be positive");
  if (s.schedule == Schedule::constant && !(s.schedule_value > 0.0 && s.schedule_value <= 1.0))
    throw ConfigError(f.at("schedule_value") + ": constant weight must lie in (0, 1]");
  if (s.schedule == Schedule::power && !(s.schedule_value > 0.0 && s.schedule_exponent > 0.0))
    throw ConfigError(f.at("schedule_exponent") + ": power schedule needs positive value and exponent");
  if (s.backend != "staged" && s.backend != "simplex")
    throw ConfigError(f.at("backend") + ": expected staged or simplex");
  return s;
}

inline SupplyCurve curve_from(const Breakpoints& b, const std::string& path) {
  std::vector<double> p, q;
  for (const auto& [x, y] : b) p.push_back(x), q.push_back(y);
  try {
    return SupplyCurve(std::move(p), std::move(q));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Piecewise-linear interpolation of (year, value) breakpoints.
inline double interpolate(const Breakpoints& b, double x) {
  if (x <= b.front().first) return b.front().second;
  for (std::size_t i = 1; i < b.size(); ++i) {
    if (x == b[i].first) return b[i].second;
    if (x < b[i].first) {
      if (std::isinf(b[i].first)) return b[i - 1].second;
      const double w = (x - b[i - 1].first) / (b[i].first - b[i - 1].first);
      return b[i - 1].second + w * (b[i].second - b[i - 1].second);
    }
  }
  return b.back().second;
}

inline std::vector<double> sample_path(const Breakpoints& b, const ScenarioConfig& c, const std::string& path) {
  if (b.empty()) throw ConfigError(path + ": trajectory needs at least one breakpoint");
  for (std::size_t i = 1; i < b.size(); ++i)
    if (!(b[i].first > b[i - 1].first)) throw ConfigError(path + ": breakpoint years must be strictly increasing");
  const double eps = 1e-9 * std::max(1.0, c.horizon);
  if (b.front().first > eps || b.back().first < c.horizon - eps)
    throw ConfigError(path + ": trajectory must cover years 0 to " + std::to_string(c.horizon));
  std::vector<double> v(c.time_steps + 1);
  const double dt = c.horizon / static_cast<double>(c.time_steps);
  for (std::size_t t = 0; t <= c.time_steps; ++t) {
    v[t] = interpolate(b, dt * static_cast<double>(t));
    if (!(v[t] >= 0.0) || !std::isfinite(v[t])) throw ConfigError(path + ": values must be finite and nonnegative");
  }
  return v;
}

inline nlohmann::json pairs_json(const Breakpoints& b) {
  auto j = nlohmann::json::array();
  for (const auto& [x, y] : b) j.push_back({std::isinf(x) ? nlohmann::json("inf") : nlohmann::json(x), y});
  return j;
}

inline nlohmann::json density_json(const DensitySpec& d) {
  switch (d.kind) {
    case DensitySpec::Kind::point: return {{"type", "point"}, {"at", d.at}};
    case DensitySpec::Kind::truncated_gamma: return {{"type", "truncated_gamma"}, {"shape", d.shape}, {"scale", d.scale}};
    case DensitySpec::Kind::beta:
      return {{"type", "beta"}, {"alpha", d.alpha}, {"beta", d.beta}, {"support", {d.support_lo, d.support_hi}}};
    case DensitySpec::Kind::table: return {{"type", "table"}, {"weights", d.weights}};
    case DensitySpec::Kind::masses: return {{"type", "masses"}, {"values", d.weights}};
  }
  return {};
}

inline nlohmann::json number_json(double v) { return std::isinf(v) ? nlohmann::json("inf") : nlohmann::json(v); }

}  // namespace detail

/// Canonical JSON form of a configuration; every field, defaults included.
inline nlohmann::json to_json(const ScenarioConfig& c) {
  using nlohmann::json;
  using detail::number_json;
  json j;
  j["name"] = c.name;
  j["horizon_years"] = c.horizon;
  j["time_steps"] = c.time_steps;
  j["start_year"] = c.start_year;
  j["discount_rate_per_year"] = c.discount_rate;
  j["peak_fraction"] = c.peak_fraction;
  j["hours_per_year"] = c.hours_per_year;
  j["price_cap_eur_per_mwh"] = c.price_cap;
  j["state_nodes"] = c.state_nodes;
  j["demand_gw"] = {{"peak", detail::pairs_json(c.demand_peak)}, {"offpeak", detail::pairs_json(c.demand_offpeak)}};
  j["carbon_eur_per_t"] = detail::pairs_json(c.carbon_price);
  j["baseline_supply_gw"] = detail::pairs_json(c.baseline_supply);
  j["fuels"] = json::array();
  for (const auto& f : c.fuels) {
    Breakpoints b;
    for (std::size_t i = 0; i < f.supply.prices().size(); ++i) b.emplace_back(f.supply.prices()[i], f.supply.quantities()[i]);
    j["fuels"].push_back({{"name", f.name}, {"emission_t_per_unit", f.emission_intensity}, {"supply", detail::pairs_json(b)}});
  }
  j["technologies"] = json::array();
  for (const auto& t : c.technologies) {
    const auto& s = t.spec;
    json o;
    o["name"] = s.name;
    o["kind"] = s.conventional() ? "conventional" : "renewable";
    if (s.conventional()) {
      o["fuel"] = t.fuel_name;
      o["fuel_units_per_mwh"] = s.fuel->units_per_mwh;
      o["offer_scale_eur_per_mwh"] = s.offer_scale;
    }
    o["fixed_cost_eur_per_mw_year"] = s.fixed_cost;
    o["capital_cost_eur_per_mw"] = s.capital_cost;
    o["scrap_value_eur_per_mw"] = s.scrap_value;
    o["capital_decay_per_year"] = s.capital_decay;
    o["build_time_years"] = s.build_time;
    o["lifetime_years"] = number_json(s.lifetime);
    o["ramp_width_years"] = s.ramp_width;
    o["mean_reversion_per_year"] = s.mean_reversion;
    o["level"] = s.level;
    o["volatility"] = s.volatility;
    if (t.state_nodes) o["state_nodes"] = *t.state_nodes;
    if (!t.state_grid.empty()) o["state_grid"] = t.state_grid;
    const auto& init = t.initial;
    o["potential"] = {{"mass_gw", init.potential_mass}, {"density", detail::density_json(init.potential_density)}};
    if (!init.installed_table.empty()) {
      o["installed"] = {{"masses_gw", init.installed_table}};
    } else {
      json age = init.installed_ages.kind == AgeProfileSpec::Kind::point
                     ? json{{"type", "point"}, {"years", init.installed_ages.years}}
                     : json{{"type", "uniform"}, {"from", init.installed_ages.from}, {"to", init.installed_ages.to}};
      o["installed"] = {{"mass_gw", init.installed_mass},
                        {"age", age},
                        {"density", detail::density_json(init.installed_density)}};
    }
    j["technologies"].push_back(o);
  }
  const auto& s = c.solver;
  json so;
  so["max_iter"] = s.max_iter;
  so["price_tol_eur_per_mwh"] = s.price_tol;
  if (s.exploitability_tol) so["exploitability_tol"] = *s.exploitability_tol;
  so["schedule"] = detail::schedule_name(s.schedule);
  so["schedule_value"] = s.schedule_value;
  so["schedule_exponent"] = s.schedule_exponent;
  so["backend"] = s.backend;
  so["initial_flows"] = s.initial_flows == InitialFlows::wait ? "wait" : "enter";
  so["uniqueness_check"] = s.uniqueness_check;
  so["clearing_max_iter"] = s.clearing.max_iter;
  so["clearing_kkt_tol"] = s.clearing.kkt_tolerance;
  j["solver"] = so;
  return j;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw InternalError("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

/// Hash of the canonical form: formatting and comments do not matter, every field value does.
inline std::string config_hash(const ScenarioConfig& c) { return sha256_hex(to_json(c).dump()); }

inline ScenarioConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ": parse error at line " + std::to_string(e.mark.line + 1) + ", column " +
                      std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  if (!root || root.IsNull()) throw ConfigError(source + ": empty configuration");
  const detail::Fields f(root, "");

  ScenarioConfig c;
  c.name = f.text("name", "");
  c.horizon = f.number("horizon_years");
  c.time_steps = f.count("time_steps");
  c.start_year = f.number("start_year", 0.0);
  c.discount_rate = f.number("discount_rate_per_year");
  c.peak_fraction = f.number("peak_fraction", kDefaultPeakFraction);
  c.hours_per_year = f.number("hours_per_year", 8760.0);
  c.price_cap = f.number("price_cap_eur_per_mwh");
  c.state_nodes = f.count("state_nodes", 60);
  {
    const auto d = f.child("demand_gw");
    c.demand_peak = d.pairs("peak");
    c.demand_offpeak = d.pairs("offpeak");
    d.finish();
  }
  c.carbon_price = f.pairs("carbon_eur_per_t");
  c.baseline_supply = f.pairs("baseline_supply_gw");

  if (f.has("fuels")) {
    const auto fuels = f.raw("fuels");
    if (!fuels.IsSequence()) throw ConfigError("fuels: expected a list" + detail::mark(fuels));
    for (std::size_t k = 0; k < fuels.size(); ++k) {
      const detail::Fields ff(fuels[k], "fuels[" + std::to_string(k) + "]");
      FuelSpec fs;
      fs.name = ff.text("name");
      fs.emission_intensity = ff.number("emission_t_per_unit", 0.0);
      fs.supply = detail::curve_from(ff.pairs("supply"), ff.at("supply"));
      ff.finish();
      c.fuels.push_back(std::move(fs));
    }
  }
  const auto techs = f.raw("technologies");
  if (!techs.IsSequence()) throw ConfigError("technologies: expected a list" + detail::mark(techs));
  for (std::size_t i = 0; i < techs.size(); ++i)
    c.technologies.push_back(detail::parse_technology(detail::Fields(techs[i], "technologies[" + std::to_string(i) + "]")));
  if (f.has("solver")) c.solver = detail::parse_solver(f.child("solver"));
  f.finish();

  for (auto& t : c.technologies) {
    if (!t.spec.conventional()) continue;
    std::size_t k = 0;
    while (k < c.fuels.size() && c.fuels[k].name != t.fuel_name) ++k;
    if (k == c.fuels.size())
      throw ConfigError("technology '" + t.spec.name + "': fuel '" + t.fuel_name + "' is not defined under fuels");
    t.spec.fuel->fuel = k;
  }
  return c;
}

/// Discretizes a configuration into a Scenario and checks every model invariant.
inline Scenario build_scenario(const ScenarioConfig& c) {
  if (!(c.horizon > 0.0)) throw ConfigError("horizon_years: must be positive");
  if (c.time_steps == 0) throw ConfigError("time_steps: must be positive");
  if (!(c.price_cap > 0.0)) throw ConfigError("price_cap_eur_per_mwh: must be positive");
  if (!(c.peak_fraction > 0.0 && c.peak_fraction < 1.0)) throw ConfigError("peak_fraction: must lie in (0, 1)");
  if (!(c.hours_per_year > 0.0)) throw ConfigError("hours_per_year: must be positive");
  if (c.technologies.empty()) throw ConfigError("technologies: at least one technology is required");

  Scenario s;
  s.horizon = c.horizon;
  s.time_steps = c.time_steps;
  s.start_year = c.start_year;
  s.discount_rate = c.discount_rate;
  s.peak_fraction = c.peak_fraction;
  s.hours_per_year = c.hours_per_year;
  s.price_cap = c.price_cap;
  s.demand_peak = detail::sample_path(c.demand_peak, c, "demand_gw.peak");
  s.demand_offpeak = detail::sample_path(c.demand_offpeak, c, "demand_gw.offpeak");
  s.carbon_price = detail::sample_path(c.carbon_price, c, "carbon_eur_per_t");
  s.baseline_supply = detail::curve_from(c.baseline_supply, "baseline_supply_gw");
  s.fuels = c.fuels;
  for (std::size_t i = 0; i < c.technologies.size(); ++i) {
    const auto& t = c.technologies[i];
    const std::string who = "technologies[" + std::to_string(i) + "] ('" + t.spec.name + "')";
    try {
      t.spec.validate();
      StateGrid grid = t.state_grid.empty() ? default_state_grid(t.spec, t.state_nodes.value_or(c.state_nodes))
                                            : StateGrid{t.state_grid};
      grid.validate();
      if (t.spec.renewable() && (grid.lo() < 0.0 || grid.hi() > 1.0))
        throw ConfigError("renewable state grid must lie within [0, 1]");
      const auto ages = AgeGrid::for_plant(t.spec.build_time, t.spec.lifetime, t.spec.ramp_width, s.dt());
      const auto init = discretize_initials(t.initial, grid, ages);
      s.technologies.push_back(t.spec);
      s.state_grids.push_back(std::move(grid));
      s.init_potential.push_back(init.potential);
      s.init_installed.push_back(init.installed);
    } catch (const ConfigError& e) {
      throw ConfigError(who + ": " + e.what());
    }
  }
  // Constructing the problem runs the remaining checks (supply slopes, capacity profiles, generators).
  try {
    Problem check(s);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return s;
}

/// Non-fatal observations about a configuration.
inline std::vector<std::string> config_warnings(const ScenarioConfig& c) {
  std::vector<std::string> w;
  for (const auto& t : c.technologies) {
    const auto& s = t.spec;
    const double feller = 2.0 * s.mean_reversion * s.level;
    const double v2 = s.volatility * s.volatility;
    if (s.conventional() && feller < v2)
      w.push_back("technology '" + s.name +
                  "': 2*k*theta < vol^2, the cost process can touch 0; the grid keeps mass there and the drift pushes it back");
    if (s.renewable() && (feller < v2 || 2.0 * s.mean_reversion * (1.0 - s.level) < v2))
      w.push_back("technology '" + s.name + "': capacity factor can reach the boundary of [0, 1]");
    if (s.conventional() && !s.fuel) w.push_back("technology '" + s.name + "' has no fuel");
  }
  const double dt = c.horizon / static_cast<double>(std::max<std::size_t>(c.time_steps, 1));
  for (const auto& t : c.technologies) {
    const double steps = t.spec.build_time / dt;
    if (std::abs(steps - std::round(steps)) > 1e-9)
      w.push_back("technology '" + t.spec.name + "': build time is not a multiple of the time step and is rounded up");
  }
  return w;
}

struct LoadedConfig {
  ScenarioConfig config;
  Scenario scenario;
  std::vector<std::string> warnings;
  std::string hash;
};

inline LoadedConfig load_text(const std::string& text, const std::string& source = "<config>") {
  LoadedConfig out;
  out.config = parse_config(text, source);
  try {
    out.scenario = build_scenario(out.config);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  out.warnings = config_warnings(out.config);
  out.hash = config_hash(out.config);
  return out;
}

inline LoadedConfig load_validate(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_text(ss.str(), path);
}

/// YAML text of a configuration; reading it back gives an equal ScenarioConfig.
inline std::string write_config(const ScenarioConfig& c) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  auto num = [&](double v) {
    if (std::isinf(v))
      e << ".inf";
    else
      e << v;
  };
  auto pairs = [&](const Breakpoints& b) {
    e << YAML::BeginSeq;
    for (const auto& [x, y] : b) {
      e << YAML::Flow << YAML::BeginSeq;
      num(x);
      num(y);
      e << YAML::EndSeq;
    }
    e << YAML::EndSeq;
  };
  auto list = [&](const std::vector<double>& v) {
    e << YAML::Flow << YAML::BeginSeq;
    for (double x : v) num(x);
    e << YAML::EndSeq;
  };
  auto density = [&](const DensitySpec& d) {
    e << YAML::BeginMap;
    switch (d.kind) {
      case DensitySpec::Kind::point: e << YAML::Key << "type" << YAML::Value << "point" << YAML::Key << "at" << YAML::Value; num(d.at); break;
      case DensitySpec::Kind::truncated_gamma:
        e << YAML::Key << "type" << YAML::Value << "truncated_gamma" << YAML::Key << "shape" << YAML::Value;
        num(d.shape);
        e << YAML::Key << "scale" << YAML::Value;
        num(d.scale);
        break;
      case DensitySpec::Kind::beta:
        e << YAML::Key << "type" << YAML::Value << "beta" << YAML::Key << "alpha" << YAML::Value;
        num(d.alpha);
        e << YAML::Key << "beta" << YAML::Value;
        num(d.beta);
        e << YAML::Key << "support" << YAML::Value;
        list({d.support_lo, d.support_hi});
        break;
      case DensitySpec::Kind::table: e << YAML::Key << "type" << YAML::Value << "table" << YAML::Key << "weights" << YAML::Value; list(d.weights); break;
      case DensitySpec::Kind::masses: e << YAML::Key << "type" << YAML::Value << "masses" << YAML::Key << "values" << YAML::Value; list(d.weights); break;
    }
    e << YAML::EndMap;
  };
  auto kv = [&](const char* k, double v) {
    e << YAML::Key << k << YAML::Value;
    num(v);
  };

  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << c.name;
  kv("horizon_years", c.horizon);
  e << YAML::Key << "time_steps" << YAML::Value << c.time_steps;
  kv("start_year", c.start_year);
  kv("discount_rate_per_year", c.discount_rate);
  kv("peak_fraction", c.peak_fraction);
  kv("hours_per_year", c.hours_per_year);
  kv("price_cap_eur_per_mwh", c.price_cap);
  e << YAML::Key << "state_nodes" << YAML::Value << c.state_nodes;
  e << YAML::Key << "demand_gw" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "peak" << YAML::Value;
  pairs(c.demand_peak);
  e << YAML::Key << "offpeak" << YAML::Value;
  pairs(c.demand_offpeak);
  e << YAML::EndMap;
  e << YAML::Key << "carbon_eur_per_t" << YAML::Value;
  pairs(c.carbon_price);
  e << YAML::Key << "baseline_supply_gw" << YAML::Value;
  pairs(c.baseline_supply);

  e << YAML::Key << "fuels" << YAML::Value << YAML::BeginSeq;
  for (const auto& f : c.fuels) {
    e << YAML::BeginMap << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << f.name;
    kv("emission_t_per_unit", f.emission_intensity);
    Breakpoints b;
    for (std::size_t i = 0; i < f.supply.prices().size(); ++i) b.emplace_back(f.supply.prices()[i], f.supply.quantities()[i]);
    e << YAML::Key << "supply" << YAML::Value;
    pairs(b);
    e << YAML::EndMap;
  }
  e << YAML::EndSeq;

  e << YAML::Key << "technologies" << YAML::Value << YAML::BeginSeq;
  for (const auto& t : c.technologies) {
    const auto& s = t.spec;
    e << YAML::BeginMap << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << s.name;
    e << YAML::Key << "kind" << YAML::Value << (s.conventional() ? "conventional" : "renewable");
    if (s.conventional()) {
      e << YAML::Key << "fuel" << YAML::Value << YAML::DoubleQuoted << t.fuel_name;
      kv("fuel_units_per_mwh", s.fuel->units_per_mwh);
      kv("offer_scale_eur_per_mwh", s.offer_scale);
    }
    kv("fixed_cost_eur_per_mw_year", s.fixed_cost);
    kv("capital_cost_eur_per_mw", s.capital_cost);
    kv("scrap_value_eur_per_mw", s.scrap_value);
    kv("capital_decay_per_year", s.capital_decay);
    kv("build_time_years", s.build_time);
    kv("lifetime_years", s.lifetime);
    kv("ramp_width_years", s.ramp_width);
    kv("mean_reversion_per_year", s.mean_reversion);
    kv("level", s.level);
    kv("volatility", s.volatility);
    if (t.state_nodes) e << YAML::Key << "state_nodes" << YAML::Value << *t.state_nodes;
    if (!t.state_grid.empty()) {
      e << YAML::Key << "state_grid" << YAML::Value;
      list(t.state_grid);
    }
    const auto& init = t.initial;
    e << YAML::Key << "potential" << YAML::Value << YAML::BeginMap;
    kv("mass_gw", init.potential_mass);
    e << YAML::Key << "density" << YAML::Value;
    density(init.potential_density);
    e << YAML::EndMap;
    e << YAML::Key << "installed" << YAML::Value << YAML::BeginMap;
    if (!init.installed_table.empty()) {
      e << YAML::Key << "masses_gw" << YAML::Value << YAML::BeginSeq;
      for (const auto& row : init.installed_table) list(row);
      e << YAML::EndSeq;
    } else {
      kv("mass_gw", init.installed_mass);
      e << YAML::Key << "age" << YAML::Value << YAML::BeginMap;
      if (init.installed_ages.kind == AgeProfileSpec::Kind::point) {
        e << YAML::Key << "type" << YAML::Value << "point";
        kv("years", init.installed_ages.years);
      } else {
        e << YAML::Key << "type" << YAML::Value << "uniform";
        kv("from", init.installed_ages.from);
        kv("to", init.installed_ages.to);
      }
      e << YAML::EndMap;
      e << YAML::Key << "density" << YAML::Value;
      density(init.installed_density);
    }
    e << YAML::EndMap;
    e << YAML::EndMap;
  }
  e << YAML::EndSeq;

  const auto& s = c.solver;
  e << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "max_iter" << YAML::Value << s.max_iter;
  kv("price_tol_eur_per_mwh", s.price_tol);
  if (s.exploitability_tol) kv("exploitability_tol", *s.exploitability_tol);
  e << YAML::Key << "schedule" << YAML::Value << detail::schedule_name(s.schedule);
  kv("schedule_value", s.schedule_value);
  kv("schedule_exponent", s.schedule_exponent);
  e << YAML::Key << "backend" << YAML::Value << s.backend;
  e << YAML::Key << "initial_flows" << YAML::Value << (s.initial_flows == InitialFlows::wait ? "wait" : "enter");
  e << YAML::Key << "uniqueness_check" << YAML::Value << s.uniqueness_check;
  e << YAML::Key << "clearing_max_iter" << YAML::Value << s.clearing.max_iter;
  kv("clearing_kkt_tol", s.clearing.kkt_tolerance);
  e << YAML::EndMap;
  e << YAML::EndMap;
  if (!e.good()) throw InternalError(std::string("YAML emitter: ") + e.GetLastError());
  return std::string(e.c_str()) + "\n";
}

/// A fully explicit configuration reproducing a Scenario: trajectories sampled
/// at every time node, explicit state grids and node masses.
inline ScenarioConfig config_from_scenario(const Scenario& s, const SolverSettings& solver = {}) {
  ScenarioConfig c;
  c.name = "explicit";
  c.horizon = s.horizon;
  c.time_steps = s.time_steps;
  c.start_year = s.start_year;
  c.discount_rate = s.discount_rate;
  c.peak_fraction = s.peak_fraction;
  c.hours_per_year = s.hours_per_year;
  c.price_cap = s.price_cap;
  for (std::size_t t = 0; t <= s.time_steps; ++t) {
    const double y = s.time(t);
    c.demand_peak.emplace_back(y, s.demand_peak[t]);
    c.demand_offpeak.emplace_back(y, s.demand_offpeak[t]);
    c.carbon_price.emplace_back(y, s.carbon_price[t]);
  }
  // The last sample sits at dt * n_t, which may differ from the horizon by rounding.
  for (auto* b : {&c.demand_peak, &c.demand_offpeak, &c.carbon_price})
    if (b->back().first < s.horizon) b->emplace_back(s.horizon, b->back().second);
  for (std::size_t i = 0; i < s.baseline_supply.prices().size(); ++i)
    c.baseline_supply.emplace_back(s.baseline_supply.prices()[i], s.baseline_supply.quantities()[i]);
  c.fuels = s.fuels;
  for (std::size_t i = 0; i < s.technologies.size(); ++i) {
    TechnologyConfig t;
    t.spec = s.technologies[i];
    if (t.spec.conventional()) t.fuel_name = s.fuels.at(t.spec.fuel->fuel).name;
    t.state_grid = s.state_grids[i].nodes;
    t.initial.potential_density.kind = DensitySpec::Kind::masses;
    t.initial.potential_density.weights = s.init_potential[i];
    const std::size_t X = s.state_grids[i].size();
    for (std::size_t a = 0; a * X < s.init_installed[i].size(); ++a)
      t.initial.installed_table.emplace_back(s.init_installed[i].begin() + static_cast<std::ptrdiff_t>(a * X),
                                             s.init_installed[i].begin() + static_cast<std::ptrdiff_t>((a + 1) * X));
    c.technologies.push_back(std::move(t));
  }
  c.solver = solver;
  return c;
}

}  // namespace mfgelec
