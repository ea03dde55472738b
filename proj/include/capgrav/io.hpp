#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "capgrav/dno.hpp"
#include "capgrav/dynamics.hpp"
#include "capgrav/errors.hpp"
#include "capgrav/grid.hpp"
#include "capgrav/normalform.hpp"
#include "capgrav/resonance.hpp"
#include "capgrav/symbols.hpp"

namespace capgrav::io {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// Shortest round-trip decimal; independent of the global locale.
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// JSON has no NaN; non-finite values are written as null.
inline json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline std::string flags_header(const PeriodicField& u) {
  std::ostringstream os;
  os << "# schema=" << kSchemaVersion << " M=" << u.M() << " real=" << (u.flags().is_real ? 1 : 0)
     << " even=" << (u.flags().is_even ? 1 : 0) << " mean=" << to_string(u.flags().mean);
  return os.str();
}

inline void write_field_modes(std::ostream& os, const PeriodicField& u) {
  os << flags_header(u) << "\nn,re,im\n";
  const auto& g = u.grid();
  for (int n = -g.M() / 2; n < g.M() / 2; ++n) {
    cplx c = u.coeff(n);
    os << n << ',' << num(c.real()) << ',' << num(c.imag()) << '\n';
  }
}

inline void write_field_samples(std::ostream& os, const PeriodicField& u) {
  os << flags_header(u) << (u.flags().is_real ? "\nx,value\n" : "\nx,re,im\n");
  auto s = u.samples();
  for (int j = 0; j < u.M(); ++j) {
    os << num(u.grid().x(j)) << ',' << num(s[j].real());
    if (!u.flags().is_real) os << ',' << num(s[j].imag());
    os << '\n';
  }
}

inline PeriodicField read_field_modes(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw ContractError("field csv: missing flags header");
  int M = 0, real = 0, even = 0;
  std::string mean = "free";
  std::istringstream hs(line.substr(2));
  for (std::string kv; hs >> kv;) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
    if (k == "M") M = std::stoi(v);
    else if (k == "real") real = std::stoi(v);
    else if (k == "even") even = std::stoi(v);
    else if (k == "mean") mean = v;
  }
  if (M < 2) throw ContractError("field csv: bad grid size in header");
  if (!std::getline(is, line) || line != "n,re,im") throw ContractError("field csv: expected columns n,re,im");
  SpectralGrid g(M);
  std::vector<cplx> c(M);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    int n;
    double re, im;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf", &n, &re, &im) != 3) throw ContractError("field csv: bad row '" + line + "'");
    if (!g.contains(n)) throw ContractError("field csv: mode outside grid");
    c[g.index(n)] = cplx(re, im);
  }
  return PeriodicField(g, std::move(c), {real != 0, even != 0, mean_convention_from_string(mean)});
}

inline json field_modes_json(const PeriodicField& f) {
  json modes = json::array();
  const auto& g = f.grid();
  for (int n = -g.M() / 2; n < g.M() / 2; ++n) {
    cplx c = f.coeff(n);
    if (c != 0.0) modes.push_back({n, c.real(), c.imag()});
  }
  return modes;
}

inline json symbol_json(const SymbolObject& a) {
  json out;
  out["schema"] = kSchemaVersion;
  out["order"] = a.order();
  out["tags"] = {{"even_in_x_xi", a.even_in_x_xi()}, {"reality", to_string(a.reality_tag())}};
  json terms = json::array();
  if (a.is_sampled()) {
    out["sampled"] = true;
  } else {
    for (const auto& t : a.terms()) {
      json groups = json::array();
      for (const auto& gr : t.g.groups()) {
        json factors = json::array();
        for (const auto& fc : gr.factors) factors.push_back({{"family", to_string(fc.family)}, {"param", fc.param}});
        groups.push_back({{"factors", factors}, {"derivative", gr.deriv}});
      }
      terms.push_back({{"f", field_modes_json(t.f)},
                       {"g", {{"coef", {t.g.coef().real(), t.g.coef().imag()}}, {"groups", groups}}},
                       {"shift", t.shift}});
    }
  }
  out["terms"] = terms;
  return out;
}

inline json strip_diagnostics_json(const StripDiagnostics& d) {
  return {{"iterations", d.iterations},
          {"contraction_ratio", jnum(d.contraction_ratio)},
          {"residual", jnum(d.residual)},
          {"pde_residual", jnum(d.pde_residual)},
          {"trace_errors", {{"top", jnum(d.trace_top)}, {"bottom", jnum(d.trace_bottom)}}}};
}

inline void write_trajectory(std::ostream& os, const Trajectory& tr) {
  os << "t,mass,energy,Hs_norm,Linf_eta\n";
  for (const auto& o : tr.obs)
    os << num(o.t) << ',' << num(o.mass) << ',' << num(o.energy) << ',' << num(o.hs_norm) << ',' << num(o.linf_eta) << '\n';
}

inline void write_lifetime(std::ostream& os, const LifetimeTable& tab) {
  os << "kappa,eps,T_double,censored,note\n";
  for (const auto& r : tab.rows)
    os << num(r.kappa) << ',' << num(r.eps) << ',' << num(r.T_double) << ',' << (r.censored ? 1 : 0) << ',' << r.note << '\n';
}

inline std::string tuple_string(const NFEntry& e) {
  std::ostringstream os;
  for (size_t j = 0; j < e.k.size(); ++j) os << (j ? " " : "") << e.k[j];
  os << " ; " << e.n;
  return os.str();
}

inline void write_nf_map(std::ostream& os, const NFMap& map) {
  os << "# schema=" << kSchemaVersion << " p=" << map.spec.p << " ell=" << map.spec.ell << " kappa=" << num(map.spec.kappa)
     << " Nc=" << map.spec.Nc << "\n# convention: " << map.convention << "\nn_tuple,re,im,flag\n";
  for (const auto& e : map.entries)
    os << tuple_string(e) << ',' << num(e.value.real()) << ',' << num(e.value.imag()) << ',' << to_string(e.flag) << '\n';
}

inline void write_nf_lifetime(std::ostream& os, const NFLifetimeTable& tab) {
  os << "eps,T_raw,T_transformed,censored\n";
  for (const auto& r : tab.rows) {
    std::string c = r.censored_raw && r.censored_transformed ? "both" : r.censored_raw ? "raw" : r.censored_transformed ? "transformed" : "none";
    os << num(r.eps) << ',' << num(r.T_raw) << ',' << num(r.T_transformed) << ',' << c << '\n';
  }
}

inline void write_resonance(std::ostream& os, const ResonanceReport& rep, const PhysParams& base) {
  os << "kappa,p,ell,n_tuple,divisor\n";
  for (const auto& r : rep.rows) {
    if (r.worst.n.empty()) {
      os << num(r.kappa) << ",,,,\n";
      continue;
    }
    os << num(r.kappa) << ',' << r.worst.p << ',' << r.worst.ell << ',' << r.worst.to_string() << ','
       << num(small_divisor(r.worst, PhysParams{base.g, r.kappa})) << '\n';
  }
}

inline json resonance_summary_json(const ResonanceReport& rep) {
  json rows = json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"kappa", r.kappa}, {"min_abs_D", jnum(r.min_abs_D)}, {"fitted_N0", jnum(r.fitted_N0)}, {"candidate_resonance", r.candidate_resonance}});
  json roots = json::array();
  for (double k : rep.wilton_roots) roots.push_back(k);
  return {{"schema", kSchemaVersion}, {"rows", rows}, {"wilton_roots", roots}, {"tuples_scanned", rep.tuples_scanned}};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ContractError("cannot write '" + path + "'");
  f << text;
}

}  // namespace capgrav::io
