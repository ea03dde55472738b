#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/uuid/detail/sha1.hpp>
#include <json.hpp>

#include "capgrav/dynamics.hpp"
#include "capgrav/io.hpp"
#include "capgrav/normalform.hpp"
#include "capgrav/resonance.hpp"
#include "capgrav/suites.hpp"

namespace capgrav::cli {

using json = io::json;

enum ExitCode { kPass = 0, kCheckFailure = 1, kUsage = 2 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"dno-test", "resonance-scan", "evolve", "nf-lifetime", "symbol-check"};
  return names;
}

inline const std::vector<std::string>& dno_check_names() {
  static const std::vector<std::string> names{"grid_convergence", "flat_exactness", "constant_elevation",
                                              "zero_mean",        "self_adjoint",   "linearity",
                                              "parity",           "contraction",    "principal_decay"};
  return names;
}

// Every default lives here. params.kappa has none on purpose.
inline json default_config(const std::string& sub) {
  json grid = sub == "evolve" ? json{{"M", 32}, {"J", 16}, {"zgrid", "chebyshev"}}
                              : json{{"M", 128}, {"J", 32}, {"zgrid", "chebyshev"}};
  return {
      {"params", {{"g", 1.0}}},
      {"grid", grid},
      {"data",
       {{"eta", {{"profile", "single_mode"}, {"n", 1}, {"eps", 0.01}}}, {"psi", {{"profile", "zero"}}}}},
      {"integrator", {{"T", 0.25}, {"dt", 1e-3}, {"cadence", 10}, {"s", 1.0}, {"safety", 0.5}, {"reversibility", true}}},
      {"dno",
       {{"tol", 1e-12},
        {"max_iter", 200},
        {"c_values", {-0.2, -0.1, 0.1, 0.2}},
        {"seed", 7},
        {"eta_amp", 0.03},
        {"contraction_h4", 0.05},
        {"principal_modes", {4, 8, 16, 32}},
        {"checks", json::array()}}},
      {"resonance",
       {{"p_max", 1},
        {"n_sum_max", 50},
        {"kappa_grid", {{"min", 0.1}, {"max", 10.0}, {"count", 20}, {"spacing", "log"}}},
        {"wilton", {{1, 1}}}}},
      {"nf",
       {{"p", 2},
        {"ell", 2},
        {"a", 1.0},
        {"Nc", 8},
        {"s", 1.0},
        {"eps", {0.1, 0.05, 0.025}},
        {"order_bump_eps", {1e-2, 5e-3, 2.5e-3}},
        {"T_max", 1000.0},
        {"dt", nullptr},
        {"u1", {{"profile", "two_mode"}, {"n1", 1}, {"n2", 2}, {"eps", 1.0}, {"ratio", {0.5, 0.3}}}}}},
      {"symbols", {{"M", 64}, {"pairs", 100}, {"seed", 13}, {"rho", {2, 3}}, {"slope_M", 128}, {"n_lo", 8}, {"n_step", 4}}},
  };
}

inline std::vector<std::string> sections_for(const std::string& sub) {
  if (sub == "dno-test") return {"params", "grid", "dno"};
  if (sub == "resonance-scan") return {"params", "resonance"};
  if (sub == "evolve") return {"params", "grid", "data", "integrator", "dno"};
  if (sub == "nf-lifetime") return {"params", "nf"};
  return {"params", "symbols"};
}

namespace detail {

inline bool is_profile_path(const std::string& path) { return path == "data.eta" || path == "data.psi" || path == "nf.u1"; }

// Objects merge key by key; a profile object naming a new profile replaces the old one whole.
inline void merge_into(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw UsageError("config: '" + (path.empty() ? std::string("<root>") : path) + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = it.key();
    const std::string sub = path.empty() ? key : path + "." + key;
    const bool open_key = sub == "params.kappa" || is_profile_path(path);
    if (!base.contains(key) && !open_key) throw UsageError("config: unknown key '" + sub + "'");
    if (is_profile_path(sub)) {
      if (!it.value().is_object()) throw UsageError("config: '" + sub + "' must be an object");
      if (it.value().contains("profile")) base[key] = it.value();
      else merge_into(base[key], it.value(), sub);
    } else if (base.contains(key) && base[key].is_object() && it.value().is_object() && !open_key) {
      merge_into(base[key], it.value(), sub);
    } else {
      base[key] = it.value();
    }
  }
}

inline json override_patch(const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("--override expects key=value, got '" + spec + "'");
  std::string key = spec.substr(0, eq), text = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  std::vector<std::string> parts;
  std::stringstream ks(key);
  for (std::string p; std::getline(ks, p, '.');) {
    if (p.empty()) throw UsageError("--override: empty path component in '" + key + "'");
    parts.push_back(p);
  }
  json patch = value;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  return patch;
}

inline const json& at(const json& cfg, const std::string& path) {
  const json* cur = &cfg;
  std::stringstream ps(path);
  for (std::string p; std::getline(ps, p, '.');) {
    if (!cur->is_object() || !cur->contains(p)) throw UsageError("config: missing required key '" + path + "'");
    cur = &(*cur)[p];
  }
  return *cur;
}

inline double get_num(const json& cfg, const std::string& path) {
  const json& v = at(cfg, path);
  if (!v.is_number()) throw UsageError("config: '" + path + "' must be a number");
  return v.get<double>();
}

inline int get_int(const json& cfg, const std::string& path) {
  const json& v = at(cfg, path);
  if (!v.is_number_integer()) throw UsageError("config: '" + path + "' must be an integer");
  return v.get<int>();
}

inline bool get_bool(const json& cfg, const std::string& path) {
  const json& v = at(cfg, path);
  if (!v.is_boolean()) throw UsageError("config: '" + path + "' must be true or false");
  return v.get<bool>();
}

inline std::string get_str(const json& cfg, const std::string& path) {
  const json& v = at(cfg, path);
  if (!v.is_string()) throw UsageError("config: '" + path + "' must be a string");
  return v.get<std::string>();
}

inline std::vector<double> get_nums(const json& cfg, const std::string& path) {
  const json& v = at(cfg, path);
  if (!v.is_array()) throw UsageError("config: '" + path + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw UsageError("config: '" + path + "' must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

inline std::vector<int> get_ints(const json& cfg, const std::string& path) {
  const json& v = at(cfg, path);
  if (!v.is_array()) throw UsageError("config: '" + path + "' must be an array of integers");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) throw UsageError("config: '" + path + "' must be an array of integers");
    out.push_back(e.get<int>());
  }
  return out;
}

inline cplx get_cplx(const json& cfg, const std::string& path) {
  const json& v = at(cfg, path);
  if (v.is_number()) return v.get<double>();
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) return {v[0].get<double>(), v[1].get<double>()};
  throw UsageError("config: '" + path + "' must be a number or [re, im]");
}

// Cosine coefficients (n >= 1) of a named even profile. Amplitudes may be
// complex, written [re, im].
inline std::map<int, cplx> profile_modes(const json& cfg, const std::string& path) {
  const std::string kind = get_str(cfg, path + ".profile");
  std::map<int, cplx> out;
  auto mode = [&](const std::string& key) {
    int n = get_int(cfg, path + "." + key);
    if (n < 1) throw UsageError("config: '" + path + "." + key + "' must be >= 1");
    return n;
  };
  if (kind == "zero") return out;
  if (kind == "single_mode") {
    out[mode("n")] += get_cplx(cfg, path + ".eps");
  } else if (kind == "two_mode") {
    const cplx eps = get_cplx(cfg, path + ".eps");
    out[mode("n1")] += eps;
    out[mode("n2")] += eps * get_cplx(cfg, path + ".ratio");
  } else if (kind == "random_even") {
    const double eps = get_num(cfg, path + ".eps"), decay = get_num(cfg, path + ".decay");
    const int nmax = get_int(cfg, path + ".nmax");
    std::mt19937 rng(static_cast<unsigned>(get_int(cfg, path + ".seed")));
    std::normal_distribution<double> N(0.0, 1.0);
    for (int n = 1; n <= nmax; ++n) out[n] = eps * N(rng) * std::exp(-decay * n);
  } else {
    throw UsageError("config: unknown profile '" + kind + "' at '" + path + "'");
  }
  return out;
}

inline PeriodicField profile_field(const json& cfg, const std::string& path, const SpectralGrid& g, bool real) {
  std::map<int, cplx> modes;
  for (auto [n, c] : profile_modes(cfg, path)) {
    if (n > g.nmax()) throw UsageError("config: profile '" + path + "' uses mode " + std::to_string(n) + " beyond the grid");
    if (real && c.imag() != 0.0) throw UsageError("config: profile '" + path + "' must have real amplitudes");
    modes[n] = modes[-n] = 0.5 * c;
  }
  return make_field_from_modes(modes, g, {real, true, MeanConvention::zero_mean});
}

inline std::vector<double> kappa_grid(const json& cfg) {
  const json& v = at(cfg, "resonance.kappa_grid");
  if (v.is_array()) {
    auto k = get_nums(cfg, "resonance.kappa_grid");
    if (k.empty()) throw UsageError("config: resonance.kappa_grid is empty");
    return k;
  }
  if (!v.is_object()) throw UsageError("config: resonance.kappa_grid must be an array or {min, max, count, spacing}");
  const int count = get_int(cfg, "resonance.kappa_grid.count");
  if (count < 1) throw UsageError("config: resonance.kappa_grid is empty");
  const double lo = get_num(cfg, "resonance.kappa_grid.min"), hi = get_num(cfg, "resonance.kappa_grid.max");
  const std::string spacing = get_str(cfg, "resonance.kappa_grid.spacing");
  if (!(lo > 0.0) || !(hi >= lo)) throw UsageError("config: resonance.kappa_grid needs 0 < min <= max");
  if (spacing != "log" && spacing != "linear") throw UsageError("config: resonance.kappa_grid.spacing must be log or linear");
  std::vector<double> out;
  for (int i = 0; i < count; ++i) {
    double t = count == 1 ? 0.0 : double(i) / (count - 1);
    out.push_back(spacing == "log" ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t);
  }
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline std::string checks_csv(const CheckSuite& suite) {
  std::ostringstream os;
  os << "check,passed,value,threshold,detail\n";
  for (const auto& c : suite.checks)
    os << c.name << ',' << (c.passed ? 1 : 0) << ',' << io::num(c.value) << ',' << io::num(c.threshold) << ','
       << csv_field(c.detail) << '\n';
  return os.str();
}

inline json checks_json(const CheckSuite& suite) {
  json out = json::array();
  for (const auto& c : suite.checks)
    out.push_back({{"name", c.name}, {"passed", c.passed}, {"value", io::jnum(c.value)}, {"threshold", io::jnum(c.threshold)}, {"detail", c.detail}});
  return out;
}

// Git blob id of the serialized config.
inline std::string config_hash(const std::string& text) {
  std::string blob = "blob " + std::to_string(text.size()) + std::string(1, '\0') + text;
  boost::uuids::detail::sha1 h;
  h.process_bytes(blob.data(), blob.size());
  boost::uuids::detail::sha1::digest_type d;
  h.get_digest(d);
  char buf[41];
  for (int i = 0; i < 5; ++i) std::snprintf(buf + 8 * i, 9, "%08x", d[i]);
  return buf;
}

inline std::string utc_timestamp() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

// Defaults, then the config file, then overrides in order.
inline json resolve_config(const std::string& sub, const json& file_cfg, const std::vector<std::string>& overrides) {
  json cfg = default_config(sub);
  if (!file_cfg.is_null()) detail::merge_into(cfg, file_cfg, "");
  for (const auto& o : overrides) detail::merge_into(cfg, detail::override_patch(o), "");
  json out;
  for (const auto& s : sections_for(sub)) out[s] = cfg[s];
  if (sub != "resonance-scan") {
    if (!out["params"].contains("kappa")) throw UsageError("config: params.kappa is required for " + sub);
    if (!(detail::get_num(out, "params.kappa") > 0.0)) throw UsageError("config: params.kappa must be > 0");
  }
  if (!(detail::get_num(out, "params.g") > 0.0)) throw UsageError("config: params.g must be > 0");
  return out;
}

struct RunResult {
  int code = kPass;
  std::string message;
  json summary = json::object();
  std::vector<std::string> outputs;
};

class Runner {
 public:
  Runner(json cfg, std::filesystem::path out, std::ostream& log, bool quiet)
      : cfg_(std::move(cfg)), out_(std::move(out)), log_(log), quiet_(quiet) {}

  RunResult dno_test() {
    DnoSuiteConfig c;
    c.M = detail::get_int(cfg_, "grid.M");
    c.dno = dno_config();
    c.c_values = detail::get_nums(cfg_, "dno.c_values");
    c.seed = static_cast<unsigned>(detail::get_int(cfg_, "dno.seed"));
    c.eta_amp = detail::get_num(cfg_, "dno.eta_amp");
    c.contraction_h4 = detail::get_num(cfg_, "dno.contraction_h4");
    c.principal_modes = detail::get_ints(cfg_, "dno.principal_modes");
    for (const auto& e : detail::at(cfg_, "dno.checks")) {
      if (!e.is_string()) throw UsageError("config: dno.checks must list check names");
      const auto& names = dno_check_names();
      if (std::find(names.begin(), names.end(), e.get<std::string>()) == names.end())
        throw UsageError("config: unknown dno check '" + e.get<std::string>() + "'");
      c.only.push_back(e.get<std::string>());
    }
    info("dno-test: M=" + std::to_string(c.M) + " J=" + std::to_string(c.dno.J));
    auto rep = dno_suite(c);
    json solves = json::array();
    for (const auto& [tag, d] : rep.solves) {
      json j = io::strip_diagnostics_json(d);
      j["tag"] = tag;
      solves.push_back(j);
    }
    write("dno_checks.csv", detail::checks_csv(rep.suite));
    write("dno_diagnostics.json", json{{"schema", io::kSchemaVersion}, {"checks", detail::checks_json(rep.suite)}, {"solves", solves}}.dump(2) + "\n");
    return suite_result("dno-test", rep.suite);
  }

  RunResult resonance_scan() {
    const PhysParams base{detail::get_num(cfg_, "params.g"), 1.0};
    const auto grid = detail::kappa_grid(cfg_);
    const int p_max = detail::get_int(cfg_, "resonance.p_max"), n_sum_max = detail::get_int(cfg_, "resonance.n_sum_max");
    const json& pairs = detail::at(cfg_, "resonance.wilton");
    if (!pairs.is_array()) throw UsageError("config: resonance.wilton must be a list of [a, b] pairs");
    std::vector<std::pair<int, int>> wilton;
    for (const auto& pr : pairs) {
      if (!pr.is_array() || pr.size() != 2 || !pr[0].is_number_integer() || !pr[1].is_number_integer())
        throw UsageError("config: resonance.wilton entries must be [a, b] integer pairs");
      wilton.emplace_back(pr[0].get<int>(), pr[1].get<int>());
    }
    info("resonance-scan: " + std::to_string(grid.size()) + " kappa values");
    auto rep = scan_nonresonance(base, p_max, n_sum_max, grid);
    std::ostringstream ws;
    ws << "a,b,kappa,residual\n";
    json roots = json::array();
    for (auto [a, b] : wilton) {
      auto k = find_wilton_kappa(a, b, base);
      ws << a << ',' << b << ',';
      if (!k) {
        ws << ",\n";
        roots.push_back({{"pair", {a, b}}, {"kappa", nullptr}, {"residual", nullptr}});
        continue;
      }
      rep.wilton_roots.push_back(*k);
      double res = std::abs(small_divisor(DivisorTuple(1, 1, {a, b, a + b}), PhysParams{base.g, *k}));
      ws << io::num(*k) << ',' << io::num(res) << '\n';
      roots.push_back({{"pair", {a, b}}, {"kappa", *k}, {"residual", res}});
      info("  wilton (" + std::to_string(a) + "," + std::to_string(b) + "): kappa = " + io::num(*k) + ", |D| = " + io::num(res));
    }
    std::ostringstream rs;
    io::write_resonance(rs, rep, base);
    write("resonance.csv", rs.str());
    write("wilton.csv", ws.str());
    json summary = io::resonance_summary_json(rep);
    summary["wilton"] = roots;
    write("resonance_summary.json", summary.dump(2) + "\n");
    RunResult r;
    r.summary = {{"rows", rep.rows.size()}, {"wilton_roots", rep.wilton_roots.size()}};
    r.message = "resonance-scan: " + std::to_string(rep.rows.size()) + " rows";
    return r;
  }

  RunResult evolve() {
    SpectralGrid g(detail::get_int(cfg_, "grid.M"));
    const PhysParams params{detail::get_num(cfg_, "params.g"), detail::get_num(cfg_, "params.kappa")};
    auto state = make_wave_state(detail::profile_field(cfg_, "data.eta", g, true), detail::profile_field(cfg_, "data.psi", g, true), params);
    IntegratorConfig ic;
    ic.dt = detail::get_num(cfg_, "integrator.dt");
    ic.cadence = detail::get_int(cfg_, "integrator.cadence");
    ic.s = detail::get_num(cfg_, "integrator.s");
    ic.safety = detail::get_num(cfg_, "integrator.safety");
    const double T = detail::get_num(cfg_, "integrator.T");
    if (!(T > 0.0)) throw UsageError("config: integrator.T must be > 0");
    const DNOConfig dc = dno_config();
    info("evolve: M=" + std::to_string(g.M()) + " T=" + io::num(T) + " dt=" + io::num(ic.dt));
    Trajectory tr = capgrav::evolve(state, T, ic, dc);
    std::ostringstream ts, es, ps;
    io::write_trajectory(ts, tr);
    io::write_field_modes(es, tr.final_state().eta);
    io::write_field_modes(ps, tr.final_state().psi);
    write("trajectory.csv", ts.str());
    write("eta_final.csv", es.str());
    write("psi_final.csv", ps.str());
    RunResult r;
    r.summary = {{"steps", tr.steps}, {"truncated", tr.truncated}, {"max_mass_rate", io::jnum(tr.max_mass_rate)}};
    if (tr.truncated) {
      r.code = kCheckFailure;
      r.message = "evolve: run truncated: " + tr.diagnostic;
      return r;
    }
    if (detail::get_bool(cfg_, "integrator.reversibility")) {
      auto rv = reversibility_check(state, T, ic, dc, ic.s);
      std::ostringstream vs;
      vs << "T,dt,defect,self_error,ratio,passed\n"
         << io::num(T) << ',' << io::num(ic.dt) << ',' << io::num(rv.defect) << ',' << io::num(rv.self_error) << ','
         << io::num(rv.ratio) << ',' << (rv.passed ? 1 : 0) << '\n';
      write("reversibility.csv", vs.str());
      r.summary["reversibility"] = {{"defect", rv.defect}, {"self_error", rv.self_error}, {"passed", rv.passed}};
      if (!rv.passed) {
        r.code = kCheckFailure;
        r.message = "evolve: check 'reversibility' failed: defect " + io::num(rv.defect) + " > 10 x self error " + io::num(rv.self_error);
        return r;
      }
    }
    r.message = "evolve: " + std::to_string(tr.steps) + " steps";
    return r;
  }

  RunResult nf_lifetime() {
    if (detail::get_num(cfg_, "params.g") != 1.0) throw UsageError("config: nf-lifetime works in g = 1 units; rescale kappa instead");
    ModelSpec spec;
    spec.kappa = detail::get_num(cfg_, "params.kappa");
    spec.p = detail::get_int(cfg_, "nf.p");
    spec.ell = detail::get_int(cfg_, "nf.ell");
    spec.a = detail::get_cplx(cfg_, "nf.a");
    spec.Nc = detail::get_int(cfg_, "nf.Nc");
    spec.validate();
    const double s = detail::get_num(cfg_, "nf.s"), T_max = detail::get_num(cfg_, "nf.T_max");
    const json& dtj = detail::at(cfg_, "nf.dt");
    const double dt = dtj.is_null() ? model_cfl(spec) : detail::get_num(cfg_, "nf.dt");
    const auto g = model_grid(spec);
    auto u1 = capgrav::detail::cutoff_project(detail::profile_field(cfg_, "nf.u1", g, false), spec.Nc);
    info("nf-lifetime: p=" + std::to_string(spec.p) + " ell=" + std::to_string(spec.ell) + " Nc=" + std::to_string(spec.Nc));
    auto map = build_nf_map(spec);
    std::ostringstream ms, bs, ls;
    io::write_nf_map(ms, map);
    write("nf_map.csv", ms.str());
    auto bump = order_bump(map, u1, detail::get_nums(cfg_, "nf.order_bump_eps"), s);
    bs << "eps,raw,transformed\n";
    for (const auto& pt : bump.points) bs << io::num(pt.eps) << ',' << io::num(pt.raw) << ',' << io::num(pt.transformed) << '\n';
    write("nf_order_bump.csv", bs.str());
    auto tab = nf_lifetime_compare(spec, u1, detail::get_nums(cfg_, "nf.eps"), s, dt, T_max);
    io::write_nf_lifetime(ls, tab);
    write("nf_lifetime.csv", ls.str());
    int censored = 0;
    for (const auto& row : tab.rows) censored += row.censored_raw && row.censored_transformed;
    RunResult r;
    r.summary = {{"entries", map.entries.size()},
                 {"divided", map.divided_count()},
                 {"min_divisor", io::jnum(map.min_divisor)},
                 {"raw_exponent", io::jnum(bump.raw_exponent)},
                 {"transformed_exponent", io::jnum(bump.transformed_exponent)},
                 {"raw_slope", io::jnum(tab.raw_slope)},
                 {"transformed_slope", io::jnum(tab.transformed_slope)},
                 {"slope_gap", io::jnum(tab.slope_gap)},
                 {"rows_censored_both", censored}};
    write("nf_summary.json", json{{"schema", io::kSchemaVersion}, {"summary", r.summary}}.dump(2) + "\n");
    r.message = "nf-lifetime: exponents " + io::num(bump.raw_exponent) + " -> " + io::num(bump.transformed_exponent) + ", " +
                std::to_string(censored) + "/" + std::to_string(tab.rows.size()) + " rows censored in both runs";
    return r;
  }

  RunResult symbol_check() {
    SymbolSuiteConfig c;
    c.M = detail::get_int(cfg_, "symbols.M");
    c.pairs = detail::get_int(cfg_, "symbols.pairs");
    c.seed = static_cast<unsigned>(detail::get_int(cfg_, "symbols.seed"));
    c.rho = detail::get_ints(cfg_, "symbols.rho");
    c.slope_M = detail::get_int(cfg_, "symbols.slope_M");
    c.n_lo = detail::get_int(cfg_, "symbols.n_lo");
    c.n_step = detail::get_int(cfg_, "symbols.n_step");
    c.kappa = detail::get_num(cfg_, "params.kappa");
    if (c.pairs < 1) throw UsageError("config: symbols.pairs must be >= 1");
    info("symbol-check: M=" + std::to_string(c.M) + " pairs=" + std::to_string(c.pairs));
    auto rep = symbol_suite(c);
    std::ostringstream rs;
    rs << "rho,n,residual\n";
    for (const auto& [rho, pts] : rep.remainders)
      for (auto [n, v] : pts) rs << rho << ',' << n << ',' << io::num(v) << '\n';
    write("symbol_checks.csv", detail::checks_csv(rep.suite));
    write("symbol_remainders.csv", rs.str());
    SpectralGrid g(c.M);
    auto example = SymbolObject::separable(cos_mode(g, 1), XiFunction::m_kappa(c.kappa));
    write("symbol_example.json", io::symbol_json(example).dump(2) + "\n");
    return suite_result("symbol-check", rep.suite);
  }

  const std::vector<std::string>& outputs() const { return outputs_; }

 private:
  DNOConfig dno_config() const {
    DNOConfig d;
    d.J = detail::get_int(cfg_, "grid.J");
    const std::string z = detail::get_str(cfg_, "grid.zgrid");
    if (z != "chebyshev" && z != "uniform") throw UsageError("config: grid.zgrid must be chebyshev or uniform");
    d.zgrid = zgrid_kind_from_string(z);
    d.tol = detail::get_num(cfg_, "dno.tol");
    d.max_iter = detail::get_int(cfg_, "dno.max_iter");
    return d;
  }

  RunResult suite_result(const std::string& name, const CheckSuite& suite) {
    RunResult r;
    int passed = 0;
    for (const auto& c : suite.checks) {
      passed += c.passed;
      info("  " + std::string(c.passed ? "ok   " : "FAIL ") + c.name + "  value " + io::num(c.value) + "  threshold " +
           io::num(c.threshold) + "  (" + std::to_string(c.seconds) + " s)");
    }
    r.summary = {{"checks", suite.checks.size()}, {"passed", passed}};
    if (const CheckResult* f = suite.first_failure()) {
      r.code = kCheckFailure;
      r.summary["first_failure"] = f->name;
      r.message = name + ": check '" + f->name + "' failed: value " + io::num(f->value) + ", threshold " + io::num(f->threshold) +
                  (f->detail.empty() ? "" : " (" + f->detail + ")");
    } else {
      r.message = name + ": " + std::to_string(passed) + " checks passed";
    }
    return r;
  }

  void write(const std::string& name, const std::string& text) {
    io::write_text((out_ / name).string(), text);
    outputs_.push_back(name);
  }

  void info(const std::string& s) {
    if (!quiet_) log_ << s << '\n';
  }

  json cfg_;
  std::filesystem::path out_;
  std::ostream& log_;
  bool quiet_;
  std::vector<std::string> outputs_;
};

inline json load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot read config '" + path + "'");
  try {
    return json::parse(f, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw UsageError("config '" + path + "': " + e.what());
  }
}

inline int execute(const std::string& sub, const std::string& config_path, const std::string& out_dir,
                   const std::vector<std::string>& overrides, bool quiet, std::ostream& out, std::ostream& err) {
  json resolved;
  std::filesystem::path dir;
  try {
    json file_cfg = config_path.empty() ? json() : load_config_file(config_path);
    resolved = resolve_config(sub, file_cfg, overrides);
    dir = out_dir.empty() ? std::filesystem::path("capgrav_out") / sub : std::filesystem::path(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw UsageError("cannot create output directory '" + dir.string() + "'");
  } catch (const UsageError& e) {
    err << "capgrav " << sub << ": " << e.what() << '\n';
    return kUsage;
  }

  Runner runner(resolved, dir, out, quiet);
  RunResult res;
  try {
    if (sub == "dno-test") res = runner.dno_test();
    else if (sub == "resonance-scan") res = runner.resonance_scan();
    else if (sub == "evolve") res = runner.evolve();
    else if (sub == "nf-lifetime") res = runner.nf_lifetime();
    else res = runner.symbol_check();
  } catch (const UsageError& e) {
    res.code = kUsage;
    res.message = std::string("capgrav ") + sub + ": " + e.what();
  } catch (const ContractError& e) {
    res.code = kUsage;
    res.message = std::string("capgrav ") + sub + ": invalid configuration: " + e.what();
  } catch (const std::exception& e) {
    res.code = kCheckFailure;
    res.message = std::string("capgrav ") + sub + ": " + e.what();
  }

  const std::string dumped = resolved.dump();
  json manifest{{"schema", io::kSchemaVersion},
                {"tool", "capgrav"},
                {"subcommand", sub},
                {"timestamp", detail::utc_timestamp()},
                {"config_hash", detail::config_hash(dumped)},
                {"config", resolved},
                {"outputs", runner.outputs()},
                {"exit_code", res.code},
                {"summary", res.summary}};
  try {
    io::write_text((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    err << "capgrav " << sub << ": " << e.what() << '\n';
    return kUsage;
  }
  if (res.code == kPass) {
    if (!quiet) out << res.message << '\n';
  } else {
    err << res.message << '\n';
  }
  return res.code;
}

inline std::string describe(const std::string& sub) {
  if (sub == "dno-test") return "Dirichlet-Neumann solver check suite";
  if (sub == "resonance-scan") return "small-divisor scan over a kappa grid and Wilton roots";
  if (sub == "evolve") return "time integration with observables and a reversibility check";
  if (sub == "nf-lifetime") return "normal-form map, order bump and paired doubling times";
  return "paradifferential quantization identities";
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"capillarity-gravity water waves experiments", "capgrav"};
  app.require_subcommand(1);
  std::string config, out_dir;
  std::vector<std::string> overrides;
  bool quiet = false;
  for (const auto& name : subcommands()) {
    auto* sc = app.add_subcommand(name, describe(name));
    sc->add_option("--config", config, "JSON config file");
    sc->add_option("--out", out_dir, "output directory (default capgrav_out/<subcommand>)");
    sc->add_option("--override", overrides, "key=value on a dotted path; value parsed as JSON, else taken as a string")->allow_extra_args(false);
    sc->add_flag("--quiet", quiet, "only report errors");
  }
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kPass : kUsage;
  }
  std::string sub = app.get_subcommands().front()->get_name();
  return execute(sub, config, out_dir, overrides, quiet, out, err);
}

}  // namespace capgrav::cli
