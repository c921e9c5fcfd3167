// kamtori: invariant tori, interface data and layered equilibria from the command line.
//
//   kamtori <subcommand> [--config run.ini] [--out DIR] [--grid N1xN2] [--tol X] [--seed N] [--max-iter N] ...
//
// Config files are INI with one section per subcommand; keys are the long
// option names. Exit codes: 0 ok, 1 I/O or config, 2 certification,
// 3 degeneracy, 4 divergence or a residual above tolerance.

#include <CLI11.hpp>
#include <iostream>
#include <random>

#include "kamtori/io.hpp"

using namespace kamtori;
namespace fs = std::filesystem;

namespace {

const double golden = 0.6180339887498949;

struct Common {
  std::string config;
  std::string out = "out";
  std::string grid;
  double tol = 0;
  unsigned long long seed = 1;
  int max_iter = 0;
};

// Raised for residuals above tolerance.
struct ResidualFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Run {
  const Common& c;
  fs::path out;
  json manifest;

  GridSize grid(GridSize dflt) const { return c.grid.empty() ? dflt : parse_grid(c.grid); }
  double tol(double dflt) const { return c.tol > 0 ? c.tol : dflt; }
  int max_iter(int dflt) const { return c.max_iter > 0 ? c.max_iter : dflt; }
  fs::path file(const std::string& name) {
    manifest["files"].push_back(name);
    return out / name;
  }
};

Eigen::Vector2d to_omega(const std::vector<double>& v) { return {v[0], v[1]}; }

// ---- solve-cohom ---------------------------------------------------------------------

struct CohomArgs {
  std::string input;
  std::vector<double> omega{1.0, golden};
  double gamma = 0.05, tau = 1.5;
  int modes = 8;
};

TorusScalar random_zero_mean(GridSize g, int modes, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0, 1);
  Spectrum c = Spectrum::Zero(g.n1, g.n2);
  const int m1 = std::min(modes, g.n1 / 2 - 1), m2 = std::min(modes, g.n2 / 2 - 1);
  for (int k1 = 0; k1 <= m1; ++k1)
    for (int k2 = -m2; k2 <= m2; ++k2) {
      if (k1 == 0 && k2 <= 0) continue;
      const cplx z(N(rng), N(rng));
      c(k1, fft_index(k2, g.n2)) = z;
      c(fft_index(-k1, g.n1), fft_index(-k2, g.n2)) = std::conj(z);
    }
  return TorusScalar::from_coeffs(c);
}

void solve_cohom(Run& r, const CohomArgs& a) {
  TorusScalar f;
  if (!a.input.empty()) {
    std::ifstream is(a.input);
    if (!is) throw IoError("cannot read " + a.input);
    f = read_coeffs_csv(is);
  } else {
    f = random_zero_mean(r.grid({32, 32}), a.modes, r.c.seed);
    auto os = detail::open_out(r.file("input.csv"));
    write_coeffs_csv(os, f);
  }
  const Frequency2 w = certify(to_omega(a.omega), a.gamma, a.tau, l1_bandwidth(f.grid()));
  r.manifest["frequency"] = to_json(w);
  const TorusScalar u = solve_cohomological(f, w);
  const double fn = f.max_abs();
  const double res = fn > 0 ? (l_omega(u, w) - f).max_abs() / fn : (l_omega(u, w) - f).max_abs();
  {
    auto os = detail::open_out(r.file("solution.csv"));
    write_coeffs_csv(os, u);
  }
  const double tol = r.tol(1e-11);
  r.manifest["tolerances"] = {{"residual", tol}};
  r.manifest["residuals"] = {{"relative_back_substitution", res}};
  std::cout << "grid " << to_string(f.grid()) << ", min divisor " << w.min_divisor << ", residual " << res << "\n";
  if (res >= tol) throw ResidualFailure("back-substitution residual " + detail::fmt(res));
}

// ---- find-torus / continue-family -------------------------------------------------

struct TorusArgs {
  double R = 3.0, s = 0.5, ratio = golden, shear = 0.25, delta = 1e-3;
  double gamma = 0.01, tau = 1.5;
  std::string torus;
};

struct Problem {
  NestedFamily fam;
  AmbientField B;
  Embedding K0;
  Frequency2 w;
};

Problem torus_problem(Run& r, const TorusArgs& a, GridSize dflt) {
  NestedFamily fam(a.R, {{1.0}, {a.ratio - a.shear * a.s, a.shear}}, 0.1, 1.0);
  const AmbientField B = a.delta > 0 ? perturb_div_free(fam.field(), a.delta, r.c.seed) : fam.field();
  Embedding K0 = a.torus.empty() ? fam.torus(a.s, r.grid(dflt)) : Embedding(load_embedding(a.torus).K);
  const Frequency2 w = certify(fam.omega(a.s), a.gamma, a.tau, l1_bandwidth(K0.grid()));
  r.manifest["field"] = B.descriptor().to_text();
  r.manifest["frequency"] = to_json(w);
  return {std::move(fam), B, std::move(K0), w};
}

KamOptions kam_options(const Run& r) {
  KamOptions o;
  o.tol = r.tol(o.tol);
  o.max_iter = r.max_iter(o.max_iter);
  return o;
}

void find_torus(Run& r, const TorusArgs& a) {
  const Problem P = torus_problem(r, a, {128, 128});
  const KamOptions o = kam_options(r);
  r.manifest["tolerances"] = {{"invariance", o.tol}, {"twist_floor", o.twist_floor}};
  const double T0 = twist_data(P.K0, P.w, P.B).T;
  r.manifest["initial_twist"] = T0;
  if (std::abs(T0) <= o.twist_floor) throw TwistTooSmall("|T| = " + detail::fmt(std::abs(T0)) + " on the initial torus");
  const KamState s = run_newton(P.K0, P.w, P.B, o);
  save_embedding(r.file("torus.csv"), s.K.K(), scaled(P.w, s.Lambda));
  {
    auto os = detail::open_out(r.file("convergence.csv"));
    write_convergence_csv(os, s.history);
  }
  r.manifest["kam"] = to_json(s);
  const double dbl = validate_doubled(s, P.w, P.B);
  r.manifest["residuals"] = {{"invariance", s.err},
                             {"invariance_doubled_grid", dbl},
                             {"convergence_exponent", convergence_exponent(s.history, 1e-11)}};
  std::cout << "converged in " << s.iter << " steps: error " << s.err << ", Lambda - 1 = " << s.Lambda - 1
            << ", twist " << s.T << "\n";
}

struct FamilyArgs {
  TorusArgs t;
  std::vector<double> offsets{-0.004, -0.002, 0.0, 0.002, 0.004};
};

int continue_family_cmd(Run& r, const FamilyArgs& a) {
  const Problem P = torus_problem(r, a.t, {128, 128});
  const KamOptions o = kam_options(r);
  std::vector<Frequency2> targets;
  for (double d : a.offsets)
    targets.push_back(certify({P.w.omega[0], P.w.omega[0] * (P.w.ratio() + d)}, a.t.gamma, a.t.tau, P.w.k_max));
  const auto fam = continue_family(P.K0, P.w, P.B, targets, o);
  auto os = detail::open_out(r.file("family.csv"));
  os << "index,target_ratio,status,iter,err,Lambda,mean_minor_radius,predicted_side,observed_side\n";
  int code = 0;
  json members = json::array();
  for (size_t i = 0; i < fam.size(); ++i) {
    const FamilyMember& m = fam[i];
    os << i << ',' << detail::fmt(m.target_ratio) << ',';
    if (m.state) {
      const KamState& s = *m.state;
      double rad = 0;
      for (int p = 0; p < s.K.grid().size(); ++p) rad += P.fam.minor_radius(s.K.K().node(p));
      rad /= s.K.grid().size();
      os << "ok," << s.iter << ',' << detail::fmt(s.err) << ',' << detail::fmt(s.Lambda) << ',' << detail::fmt(rad);
      save_embedding(r.file("torus_" + std::to_string(i) + ".csv"), s.K.K(), m.frequency);
      members.push_back({{"target_ratio", m.target_ratio}, {"kam", to_json(s)}, {"mean_minor_radius", rad}});
    } else {
      os << "failed,,,,";
      members.push_back({{"target_ratio", m.target_ratio}, {"error", m.error}, {"exit_code", m.exit_code}});
      if (!code) code = m.exit_code;
    }
    os << ',' << m.predicted_side << ',' << m.observed_side << '\n';
  }
  r.manifest["tolerances"] = {{"invariance", o.tol}};
  r.manifest["members"] = members;
  std::cout << fam.size() << " targets, first failure code " << code << "\n";
  return code;
}

// ---- hj-solve ------------------------------------------------------------------

struct HjArgs {
  double c = 1e-3, eps = 0.05;
  std::vector<double> omega{1.0, golden};
  double gamma = 0.05, tau = 1.5;
  bool allow_large_c = false;
};

void hj_solve(Run& r, const HjArgs& a) {
  const GridSize g = r.grid({32, 32});
  const Eigen::Vector2d om = to_omega(a.omega);
  const Frequency2 w = certify(om, a.gamma, a.tau, l1_bandwidth(g));
  HjOptions o;
  o.tol = r.tol(o.tol);
  o.max_iter = r.max_iter(o.max_iter);
  o.allow_large_c = a.allow_large_c;
  const HjSolution s = solve_hj(a.c, hj_test_metric(g, om, a.eps), w, o);
  {
    auto os = detail::open_out(r.file("hj.csv"));
    write_hj_csv(os, s);
  }
  r.manifest["frequency"] = to_json(w);
  r.manifest["hj"] = to_json(s);
  r.manifest["tolerances"] = {{"newton", o.tol}, {"norm", 1e-10}, {"conjugacy", 1e-10}, {"closedness", 1e-12}};
  r.manifest["residuals"] = {{"norm", s.norm_residual},
                             {"conjugacy", s.conjugacy_residual},
                             {"closedness", s.closedness_residual}};
  std::cout << "c " << a.c << ": b " << s.state.b << ", a (" << s.state.a[0] << ", " << s.state.a[1] << "), "
            << s.state.iter << " steps, norm residual " << s.norm_residual << "\n";
  if (s.norm_residual >= 1e-10 || s.conjugacy_residual >= 1e-10 || s.closedness_residual >= 1e-12)
    throw ResidualFailure("HJ residuals above tolerance");
}

// ---- ck-extend -------------------------------------------------------------------

struct SeedArgs {
  double R = 3.0, r = 1.0, ratio = golden, lambda = 0.5;
};

struct CkArgs {
  SeedArgs seed;
  int order = 6;
};

void ck_extend(Run& r, const CkArgs& a) {
  const GridSize g = r.grid({32, 64});
  const RevolutionSeed s = revolution_seed(a.seed.R, a.seed.r, a.seed.ratio, g);
  const JetField F = extend_jet(s.K, s.X, a.seed.lambda, a.order);
  {
    auto os = detail::open_out(r.file("jet.csv"));
    write_jet_csv(os, F);
  }
  auto os = detail::open_out(r.file("residuals.csv"));
  os << "t,curl,div\n";
  for (int k = 0; k <= 16; ++k) {
    const double t = F.t_max() * std::pow(10.0, -3.0 * (16 - k) / 16);
    const auto res = F.residual(t);
    os << detail::fmt(t) << ',' << detail::fmt(res.curl) << ',' << detail::fmt(res.div) << '\n';
  }
  const TorusVec3 DKX = TorusVec3::generate(g, [&](int p) { return Eigen::Vector3d(s.K.DK().node(p) * s.X.node(p)); });
  const auto slope = F.residual_slope();
  r.manifest["jet"] = {{"lambda", F.lambda()}, {"order", F.order()}, {"t_min", F.t_min()},
                       {"t_max", F.t_max()},   {"focal_bound", F.focal_bound()}};
  r.manifest["residuals"] = {{"trace", (F.values(0.0) - DKX).max_norm()},
                             {"constraint", check_constraint(s.K, s.X)},
                             {"curl_slope", slope.curl},
                             {"div_slope", slope.div}};
  std::cout << "order " << F.order() << ", t_max " << F.t_max() << ", residual slopes " << slope.curl << " (curl) "
            << slope.div << " (div)\n";
}

// ---- equilibria -----------------------------------------------------------------

struct EqArgs {
  SeedArgs seed;
  std::string mode = "stepped";
  std::vector<double> lambdas{0.5, 1.0};
  std::vector<double> cs{0.0, 1e-3};
  double separation = 0.005;
  int jet_order = 10;
};

int build_equilibrium(Run& r, const EqArgs& a) {
  SeedSpec spec;
  spec.R = a.seed.R;
  spec.r = a.seed.r;
  spec.ratio = a.seed.ratio;
  spec.grid = r.grid(spec.grid);
  EquilibriumOptions o;
  o.jump_tol = r.tol(o.jump_tol);
  o.separation = a.separation;
  o.jet_order = a.jet_order;
  o.kam.max_iter = r.max_iter(o.kam.max_iter);
  o.hj.max_iter = r.max_iter(o.hj.max_iter);
  if (a.mode != "free-boundary" && a.lambdas.empty()) throw ConfigError("lambda list is empty");
  spec.lambda = a.mode == "free-boundary" ? a.seed.lambda : a.lambdas.front();
  const Seed seed = make_seed(spec, o);
  Equilibrium eq;
  if (a.mode == "stepped")
    eq = build_stepped(seed, a.lambdas, a.cs, o);
  else if (a.mode == "force-free")
    eq = build_force_free(seed, a.lambdas, o);
  else if (a.mode == "free-boundary")
    eq = build_free_boundary(seed, o);
  else
    throw ConfigError("mode must be stepped, force-free or free-boundary");
  json m = write_equilibrium_bundle(r.out, eq);
  for (const auto& f : m["files"]) r.manifest["files"].push_back(f);
  m.erase("files");
  r.manifest["equilibrium"] = m;
  r.manifest["tolerances"] = {{"jump", o.jump_tol},           {"continuity", o.continuity_tol},
                              {"sheet_divergence", o.sheet_div_tol}, {"h_jump", o.h_jump_tol},
                              {"kam", o.kam.tol},             {"hj", o.hj.tol}};
  std::cout << equilibrium_summary(eq);
  if (!eq.passed()) throw ResidualFailure(eq.failures.front());
  return 0;
}

// ---- diagnose ----------------------------------------------------------------------

struct DiagArgs {
  SeedArgs seed;
  double gamma = 0.01, tau = 1.5;
  int order = 10;
};

void diagnose(Run& r, const DiagArgs& a) {
  const GridSize g = r.grid({32, 64});
  const RevolutionSeed s = revolution_seed(a.seed.R, a.seed.r, a.seed.ratio, g);
  const Frequency2 w = certify(s.omega, a.gamma, a.tau, l1_bandwidth(g));
  const JetField F = extend_jet(s.K, s.X, a.seed.lambda, a.order);
  const AmbientField B = F.as_field();
  const auto tw = twist_beltrami(s.K, w.omega, B, a.seed.lambda);
  const auto t1 = nondeg_type_I(s.K, w.omega, s.X);
  const double t2 = nondeg_type_II_normalized(s.K, w.omega, B, a.seed.lambda);
  const double star = tw.alpha_term != 0 ? tw.T / tw.alpha_term + a.seed.lambda : std::numeric_limits<double>::infinity();
  r.manifest["frequency"] = to_json(w);
  r.manifest["certificates"] = {{"twist", tw.T},
                                {"alpha_term", tw.alpha_term},
                                {"type_I_det", t1.det},
                                {"type_I_residual", t1.residual},
                                {"type_II", t2},
                                {"forbidden_lambda", star},
                                {"lambda_gap", 0.05 * std::abs(tw.T / tw.alpha_term)},
                                {"invariance", sup_error(invariance_error(s.K, w.omega, B))}};
  std::cout << "ratio " << w.ratio() << " min divisor " << w.min_divisor << " at k=(" << w.worst_k[0] << ","
            << w.worst_k[1] << ")\n"
            << "twist T " << tw.T << ", alpha term " << tw.alpha_term << ", forbidden next lambda " << star << "\n"
            << "type-I det " << t1.det << ", type-II " << t2 << "\n";
}

// ---- wiring ---------------------------------------------------------------------------

void seed_options(CLI::App* s, SeedArgs& a) {
  s->add_option("--R", a.R, "major radius of the seed torus")->capture_default_str();
  s->add_option("--r", a.r, "minor radius")->capture_default_str();
  s->add_option("--ratio", a.ratio, "rotation ratio w2/w1 on the seed")->default_str(detail::fmt(a.ratio));
  s->add_option("--lambda", a.lambda, "Beltrami factor of the seed field")->capture_default_str();
}

void torus_options(CLI::App* s, TorusArgs& a) {
  s->add_option("--R", a.R, "major radius")->capture_default_str();
  s->add_option("--s", a.s, "minor radius of the starting torus")->capture_default_str();
  s->add_option("--ratio", a.ratio, "rotation ratio at s")->default_str(detail::fmt(a.ratio));
  s->add_option("--shear", a.shear, "d ratio / ds")->capture_default_str();
  s->add_option("--delta", a.delta, "size of the divergence-free perturbation")->capture_default_str();
  s->add_option("--gamma", a.gamma)->capture_default_str();
  s->add_option("--tau", a.tau)->capture_default_str();
  s->add_option("--torus", a.torus, "initial embedding file instead of the synthetic torus");
}

void eq_options(CLI::App* s, EqArgs& a, bool mode, bool cs) {
  s->add_option("--R", a.seed.R)->capture_default_str();
  s->add_option("--r", a.seed.r)->capture_default_str();
  s->add_option("--ratio", a.seed.ratio)->default_str(detail::fmt(a.seed.ratio));
  if (mode) s->add_option("--mode", a.mode, "stepped, force-free or free-boundary")->capture_default_str();
  s->add_option("--lambda", a.lambdas, "Beltrami factor per layer, seed first")->delimiter(',')->capture_default_str();
  if (cs) s->add_option("--c", a.cs, "jump constant per layer, first entry unused")->delimiter(',')->capture_default_str();
  s->add_option("--separation", a.separation, "target normal distance between interfaces")->capture_default_str();
  s->add_option("--jet-order", a.jet_order)->capture_default_str();
}

int report(const Error& e) {
  std::cerr << "error: " << e.what() << "\n";
  return exit_code(e);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Invariant tori, interface data and layered equilibria"};
  app.require_subcommand(1);
  app.allow_config_extras(CLI::config_extras_mode::error);
  Common c;
  app.set_config("--config", "", "INI file, one section per subcommand")->configurable(false);
  app.add_option("--out", c.out, "output directory")->capture_default_str();
  app.add_option("--grid", c.grid, "grid N1xN2");
  app.add_option("--tol", c.tol, "main tolerance of the subcommand");
  app.add_option("--seed", c.seed, "random seed")->capture_default_str();
  app.add_option("--max-iter", c.max_iter, "Newton iteration cap");

  CohomArgs ca;
  auto* s_cohom = app.add_subcommand("solve-cohom", "solve L_w u = f for zero-mean f");
  s_cohom->add_option("--input", ca.input, "coefficient CSV (k1,k2,re,im); random f when absent");
  s_cohom->add_option("--omega", ca.omega, "w1,w2")->expected(2)->delimiter(',')->default_str("1,0.6180339887498949");
  s_cohom->add_option("--gamma", ca.gamma)->capture_default_str();
  s_cohom->add_option("--tau", ca.tau)->capture_default_str();
  s_cohom->add_option("--modes", ca.modes, "band of the random input")->capture_default_str();

  TorusArgs ta;
  auto* s_find = app.add_subcommand("find-torus", "Newton for an invariant torus of a perturbed sheared field");
  torus_options(s_find, ta);

  FamilyArgs fa;
  auto* s_family = app.add_subcommand("continue-family", "tori at several rotation ratios");
  torus_options(s_family, fa.t);
  s_family->add_option("--offsets", fa.offsets, "ratio offsets")->delimiter(',')->capture_default_str();

  HjArgs ha;
  auto* s_hj = app.add_subcommand("hj-solve", "interface equation on the test metric");
  s_hj->add_option("--c", ha.c)->capture_default_str();
  s_hj->add_option("--eps", ha.eps, "|Y|^2 = 1 + eps cos(phi1 + phi2)")->capture_default_str();
  s_hj->add_option("--omega", ha.omega, "w1,w2")->expected(2)->delimiter(',')->default_str("1,0.6180339887498949");
  s_hj->add_option("--gamma", ha.gamma)->capture_default_str();
  s_hj->add_option("--tau", ha.tau)->capture_default_str();
  s_hj->add_flag("--allow-large-c", ha.allow_large_c);

  CkArgs ka;
  auto* s_ck = app.add_subcommand("ck-extend", "Beltrami jet off the seed torus");
  seed_options(s_ck, ka.seed);
  s_ck->add_option("--order", ka.order)->capture_default_str();

  EqArgs ea, fb, ff;
  fb.mode = "free-boundary";
  ff.mode = "force-free";
  ff.cs.clear();
  auto* s_eq = app.add_subcommand("build-equilibrium", "layered equilibrium");
  eq_options(s_eq, ea, true, true);
  auto* s_fb = app.add_subcommand("build-free-boundary", "plasma seed with a vacuum shell");
  s_fb->add_option("--R", fb.seed.R)->capture_default_str();
  s_fb->add_option("--r", fb.seed.r)->capture_default_str();
  s_fb->add_option("--ratio", fb.seed.ratio)->default_str(detail::fmt(fb.seed.ratio));
  s_fb->add_option("--lambda", fb.seed.lambda)->capture_default_str();
  s_fb->add_option("--separation", fb.separation)->capture_default_str();
  s_fb->add_option("--jet-order", fb.jet_order)->capture_default_str();
  auto* s_ff = app.add_subcommand("build-force-free", "continuous field, piecewise constant factor");
  eq_options(s_ff, ff, false, false);

  DiagArgs da;
  auto* s_diag = app.add_subcommand("diagnose", "twist and nondegeneracy certificates of the seed");
  seed_options(s_diag, da.seed);
  s_diag->add_option("--gamma", da.gamma)->capture_default_str();
  s_diag->add_option("--tau", da.tau)->capture_default_str();
  s_diag->add_option("--order", da.order)->capture_default_str();

  for (auto* s : app.get_subcommands({})) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  Run run{c, c.out, json::object()};
  const std::string cfg = app.config_to_str(true, false);
  run.manifest["subcommand"] = sub->get_name();
  run.manifest["config_hash"] = sha256_hex(cfg);
  run.manifest["config"] = cfg;
  run.manifest["files"] = json::array();

  int code = 0;
  try {
    fs::create_directories(run.out);
    if (ff.mode == "force-free" && ff.cs.empty()) ff.cs.assign(ff.lambdas.size(), 0.0);
    const std::string name = sub->get_name();
    if (name == "solve-cohom") solve_cohom(run, ca);
    else if (name == "find-torus") find_torus(run, ta);
    else if (name == "continue-family") code = continue_family_cmd(run, fa);
    else if (name == "hj-solve") hj_solve(run, ha);
    else if (name == "ck-extend") ck_extend(run, ka);
    else if (name == "build-equilibrium") code = build_equilibrium(run, ea);
    else if (name == "build-free-boundary") code = build_equilibrium(run, fb);
    else if (name == "build-force-free") code = build_equilibrium(run, ff);
    else if (name == "diagnose") diagnose(run, da);
  } catch (const NotDiophantineUpToCutoff& e) {
    std::cerr << "violating k = (" << e.k1 << ", " << e.k2 << ")\n";
    code = report(e);
    run.manifest["violating_k"] = {e.k1, e.k2};
  } catch (const Error& e) {
    code = report(e);
  } catch (const ResidualFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    code = 4;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    code = 1;
  }
  run.manifest["exit_code"] = code;
  try {
    save_json(run.out / "manifest.json", run.manifest);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (!code) code = 1;
  }
  return code;
}
