#pragma once

// Files: coefficient CSV blocks with '# key=value' metadata lines, plot-ready
// node tables, and JSON manifests.

#include <filesystem>
#include <fstream>
#include <map>
#include <openssl/evp.h>

#include "json.hpp"
#include "kamtori/equilibria.hpp"

namespace kamtori {

using json = nlohmann::ordered_json;

namespace detail {

inline void coeff_rows(std::ostream& os, const std::string& prefix, const TorusScalar& f) {
  const GridSize g = f.grid();
  const Spectrum c = f.coeffs();
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i)
      os << prefix << wavenumber(i, g.n1) << ',' << wavenumber(j, g.n2) << ',' << fmt(c(i, j).real()) << ','
         << fmt(c(i, j).imag()) << '\n';
}

inline std::string vec_text(const Eigen::VectorXd& v) {
  std::string s;
  for (int i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string x;
  while (std::getline(ss, x, ',')) {
    try {
      v.push_back(std::stod(x));
    } catch (const std::logic_error&) {
      throw IoError("bad number '" + x + "'");
    }
  }
  return v;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw IoError("cannot write " + p.string());
  return os;
}

}  // namespace detail

// ---- embeddings ------------------------------------------------------------

struct EmbeddingFile {
  TorusVec3 K;
  std::optional<Eigen::Vector2d> omega;
  std::map<std::string, std::string> meta;
};

inline void write_embedding_csv(std::ostream& os, const TorusVec3& K, const std::optional<Frequency2>& w = {},
                                const std::map<std::string, std::string>& meta = {}) {
  os << "# grid=" << to_string(K.grid()) << "\n";
  if (w) {
    os << "# omega=" << detail::vec_text(w->omega) << "\n";
    os << "# gamma=" << detail::fmt(w->gamma) << "\n# tau=" << detail::fmt(w->tau) << "\n";
  }
  for (const auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
  os << "comp,k1,k2,re,im\n";
  for (int k = 0; k < 3; ++k) detail::coeff_rows(os, std::to_string(k) + ",", K[k]);
}

inline EmbeddingFile read_embedding_csv(std::istream& is) {
  EmbeddingFile out;
  std::string line;
  std::optional<GridSize> g;
  std::array<Spectrum, 3> c;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      const std::string val = line.substr(eq + 1);
      if (key == "grid") {
        g = parse_grid(val);
        for (auto& s : c) s = Spectrum::Zero(g->n1, g->n2);
      } else if (key == "omega") {
        const auto v = detail::parse_list(val);
        if (v.size() != 2) throw IoError("omega needs two components");
        out.omega = Eigen::Vector2d(v[0], v[1]);
      } else {
        out.meta[key] = val;
      }
      continue;
    }
    if (line.rfind("comp", 0) == 0) continue;
    if (!g) throw IoError("embedding file lacks '# grid=' header");
    const auto v = detail::parse_list(line);
    if (v.size() != 5) throw IoError("bad embedding line: " + line);
    const int comp = int(v[0]), k1 = int(v[1]), k2 = int(v[2]);
    if (comp < 0 || comp > 2 || std::abs(k1) > g->n1 / 2 || std::abs(k2) > g->n2 / 2)
      throw IoError("entry outside grid: " + line);
    c[comp](fft_index(k1, g->n1) % g->n1, fft_index(k2, g->n2) % g->n2) = cplx(v[3], v[4]);
  }
  if (!g) throw IoError("embedding file lacks '# grid=' header");
  out.K = TorusVec3(*g);
  for (int k = 0; k < 3; ++k) out.K[k] = TorusScalar::from_coeffs(c[k]);
  return out;
}

inline void save_embedding(const std::filesystem::path& p, const TorusVec3& K, const std::optional<Frequency2>& w = {},
                           const std::map<std::string, std::string>& meta = {}) {
  auto os = detail::open_out(p);
  write_embedding_csv(os, K, w, meta);
}

inline EmbeddingFile load_embedding(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw IoError("cannot read " + p.string());
  return read_embedding_csv(is);
}

// Node values: i,j,phi1,phi2 then the columns of each vector field.
inline void write_nodes_csv(std::ostream& os, const std::vector<std::pair<std::string, const TorusVec3*>>& cols) {
  if (cols.empty()) return;
  const GridSize g = cols.front().second->grid();
  os << "i,j,phi1,phi2";
  for (const auto& [name, v] : cols) os << ',' << name << "_x," << name << "_y," << name << "_z";
  os << '\n';
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const int p = i + g.n1 * j;
      os << i << ',' << j << ',' << detail::fmt(node_angle(i, g.n1)) << ',' << detail::fmt(node_angle(j, g.n2));
      for (const auto& [name, v] : cols)
        for (int k = 0; k < 3; ++k) os << ',' << detail::fmt((*v)[k][p]);
      os << '\n';
    }
}

// ---- logs, jets, HJ ----------------------------------------------------------

inline void write_convergence_csv(std::ostream& os, const std::vector<KamLogEntry>& h) {
  os << "iter,err,Lambda,T,min_divisor\n";
  for (const auto& e : h)
    os << e.iter << ',' << detail::fmt(e.err) << ',' << detail::fmt(e.Lambda) << ',' << detail::fmt(e.T) << ','
       << detail::fmt(e.min_divisor) << '\n';
}

inline void write_jet_csv(std::ostream& os, const JetField& F) {
  os << "# lambda=" << detail::fmt(F.lambda()) << "\n# order=" << F.order() << "\n# t_range="
     << detail::fmt(F.t_min()) << ',' << detail::fmt(F.t_max()) << "\n# focal_bound=" << detail::fmt(F.focal_bound())
     << "\n# grid=" << to_string(F.grid()) << "\n";
  os << "j,comp,k1,k2,re,im\n";
  for (int j = 0; j <= F.order(); ++j)
    for (int k = 0; k < 3; ++k) detail::coeff_rows(os, std::to_string(j) + "," + std::to_string(k) + ",", F.coeffs()[j][k]);
}

inline void write_hj_csv(std::ostream& os, const HjSolution& s) {
  const HjState& st = s.state;
  os << "# c=" << detail::fmt(st.c) << "\n# b=" << detail::fmt(st.b) << "\n# a=" << detail::vec_text(st.a)
     << "\n# kappa=" << detail::fmt(s.kappa) << "\n# beta=" << detail::fmt(st.ledger.beta)
     << "\n# beta0=" << detail::fmt(st.ledger.beta0) << "\n# beta1=" << detail::vec_text(st.ledger.beta1)
     << "\n# beta2=" << detail::vec_text(st.ledger.beta2) << "\n# beta3=" << detail::vec_text(st.ledger.beta3)
     << "\n# alpha=" << detail::vec_text(st.ledger.alpha) << "\n# grid=" << to_string(st.H.grid()) << "\n";
  os << "field,k1,k2,re,im\n";
  detail::coeff_rows(os, "H,", st.H);
  detail::coeff_rows(os, "v1,", st.v[0]);
  detail::coeff_rows(os, "v2,", st.v[1]);
}

// ---- manifests -----------------------------------------------------------------

inline std::string sha256_hex(const std::string& s) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int n = 0;
  if (!EVP_Digest(s.data(), s.size(), md, &n, EVP_sha256(), nullptr)) throw IoError("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < n; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline json to_json(const Frequency2& w) {
  return {{"omega", {w.omega[0], w.omega[1]}}, {"ratio", w.ratio()},   {"gamma", w.gamma},
          {"tau", w.tau},                      {"k_max", w.k_max},     {"min_divisor", w.min_divisor},
          {"worst_k", {w.worst_k[0], w.worst_k[1]}}};
}

inline json to_json(const KamState& s) {
  json h = json::array();
  for (const auto& e : s.history)
    h.push_back({{"iter", e.iter}, {"err", e.err}, {"Lambda", e.Lambda}, {"T", e.T}, {"min_divisor", e.min_divisor}});
  return {{"iterations", s.iter}, {"invariance_error", s.err}, {"Lambda", s.Lambda}, {"twist", s.T},
          {"grid", to_string(s.K.grid())}, {"history", h}};
}

inline json to_json(const HjSolution& s) {
  const HjState& st = s.state;
  return {{"c", st.c},
          {"b", st.b},
          {"a", {st.a[0], st.a[1]}},
          {"kappa", s.kappa},
          {"iterations", st.iter},
          {"type_I_det", s.type_I_det},
          {"norm_residual", s.norm_residual},
          {"conjugacy_residual", s.conjugacy_residual},
          {"closedness_residual", s.closedness_residual},
          {"frequency", {s.frequency[0], s.frequency[1]}},
          {"beta", {{"beta", st.ledger.beta}, {"reassembled", st.ledger.reassembled()}}}};
}

inline json to_json(const SheetReport& s) { return {{"max", s.max}, {"normal", s.normal}, {"divergence", s.divergence}}; }

inline json to_json(const Equilibrium& eq) {
  json layers = json::array();
  for (const auto& L : eq.layers) {
    json l = {{"index", L.index},
              {"lambda", L.lambda},
              {"c", L.c},
              {"b", L.b},
              {"scale", L.scale},
              {"omega_outer", to_json(L.omega_outer)},
              {"twist_inner", L.twist_inner},
              {"twist_outer", L.twist_outer},
              {"type_I_det", L.type_I_det}};
    if (L.inner) {
      l["omega_inner"] = to_json(L.omega_inner);
      l["forbidden_lambda"] = L.forbidden_lambda;
      l["lambda_gap"] = L.lambda_gap;
      l["hj"] = {{"norm", L.hj_norm}, {"conjugacy", L.hj_conj}, {"closedness", L.hj_closed}, {"iterations", L.hj_iter}};
      l["constraint"] = L.constraint;
      l["projected"] = L.projected;
      l["kam_error"] = L.kam_err;
      l["kam_runs"] = L.kam_steps;
      l["separation"] = L.separation;
      l["max_t"] = L.max_t;
    }
    if (L.jet) l["jet"] = {{"order", L.jet->order()}, {"t_max", L.jet->t_max()}, {"focal_bound", L.jet->focal_bound()}};
    l["grid"] = to_string(L.outer.grid());
    layers.push_back(l);
  }
  json ifaces = json::array();
  for (const auto& r : eq.interfaces)
    ifaces.push_back({{"k", r.k}, {"jump", r.jump}, {"continuity", r.continuity}, {"sheet", to_json(r.sheet)}});
  json j = {{"mode", eq.mode},
            {"layers", layers},
            {"lambda", eq.factor()},
            {"c", eq.c},
            {"b", eq.b},
            {"p", eq.p},
            {"T", eq.T},
            {"pressures_distinct", eq.pressures_distinct},
            {"interfaces", ifaces}};
  if (eq.boundary_sheet) {
    j["boundary_sheet"] = to_json(*eq.boundary_sheet);
    j["h_jump"] = eq.h_jump;
    j["type_II"] = eq.type_II;
  }
  j["failures"] = eq.failures;
  j["passed"] = eq.passed();
  return j;
}

inline void save_json(const std::filesystem::path& p, const json& j) {
  auto os = detail::open_out(p);
  os << j.dump(2) << '\n';
}

// ---- equilibrium bundle -------------------------------------------------------------

inline std::string equilibrium_summary(const Equilibrium& eq) {
  std::ostringstream os;
  os << "mode " << eq.mode << ", " << eq.layers.size() << " layers, " << (eq.passed() ? "all checks pass" : "FAILED")
     << "\n\n";
  os << "layer  lambda         c              b              p              T_out          sep\n";
  for (size_t k = 0; k < eq.layers.size(); ++k) {
    const Layer& L = eq.layers[k];
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-6d %-14.6g %-14.6g %-14.6g %-14.6g %-14.6g %.4g\n", L.index, L.lambda, L.c, L.b,
                  eq.p[k], L.twist_outer, L.separation);
    os << buf;
  }
  os << "\ninterface  jump           continuity     sheet max      sheet div\n";
  for (const auto& r : eq.interfaces) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-10d %-14.3e %-14.3e %-14.3e %.3e\n", r.k, r.jump, r.continuity, r.sheet.max,
                  r.sheet.divergence);
    os << buf;
  }
  if (eq.boundary_sheet) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "\nboundary sheet max %.3e, |J.N| %.3e, div %.3e; |h|^2-|B|^2 %.3e; type II %.6g\n",
                  eq.boundary_sheet->max, eq.boundary_sheet->normal, eq.boundary_sheet->divergence, eq.h_jump,
                  eq.type_II);
    os << buf;
  }
  for (const auto& f : eq.failures) os << "FAIL " << f << "\n";
  return os.str();
}

// layer_k_jet.csv, interface_k.csv (torus), sheet_k.csv (nodes), summary.txt.
// Returns the manifest so callers can add config data before saving.
inline json write_equilibrium_bundle(const std::filesystem::path& dir, const Equilibrium& eq) {
  std::filesystem::create_directories(dir);
  json files = json::array();
  auto add = [&](const std::string& name) { files.push_back(name); return dir / name; };
  for (const auto& L : eq.layers) {
    if (!L.jet) continue;
    auto os = detail::open_out(add("layer_" + std::to_string(L.index) + "_jet.csv"));
    write_jet_csv(os, *L.jet);
  }
  for (size_t k = 0; k < eq.layers.size(); ++k) {
    const Layer& L = eq.layers[k];
    const std::string tag = std::to_string(L.index);
    save_embedding(add("torus_" + tag + ".csv"), L.outer.K(), L.omega_outer, {{"layer", tag}});
  }
  for (const auto& r : eq.interfaces) {
    auto os = detail::open_out(add("sheet_" + std::to_string(r.k) + ".csv"));
    write_nodes_csv(os, {{"x", &eq.layers[r.k - 1].outer.K()}, {"J", &r.sheet.J}});
  }
  if (eq.boundary_sheet) {
    auto os = detail::open_out(add("boundary_sheet.csv"));
    write_nodes_csv(os, {{"x", &eq.layers.back().outer.K()}, {"J", &eq.boundary_sheet->J}});
  }
  {
    auto os = detail::open_out(add("summary.txt"));
    os << equilibrium_summary(eq);
  }
  json m = to_json(eq);
  m["files"] = files;
  return m;
}

}  // namespace kamtori
