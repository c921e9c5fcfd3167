#pragma once

// Ambient vector fields on R^3: evaluation contract, synthetic nested-tori
// fields, divergence-free perturbations, field-line rotation numbers.

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>
#include <unsupported/Eigen/AutoDiff>

#include "kamtori/embedding.hpp"

namespace kamtori {

// Flat key/value description, nested fields use dotted prefixes.
struct FieldDescriptor {
  std::string kind;
  std::map<std::string, std::string> params;

  void nest(const std::string& prefix, const FieldDescriptor& d) {
    params[prefix + ".kind"] = d.kind;
    for (const auto& [k, v] : d.params) params[prefix + "." + k] = v;
  }
  std::string to_text() const {
    std::string s = "kind = " + kind + "\n";
    for (const auto& [k, v] : params) s += k + " = " + v + "\n";
    return s;
  }
};

class AmbientField {
 public:
  struct Impl {
    virtual ~Impl() = default;
    virtual Eigen::Vector3d eval(const Eigen::Vector3d& x) const = 0;
    virtual Eigen::Matrix3d jac(const Eigen::Vector3d& x) const = 0;
    virtual void eval_jac(const Eigen::Vector3d& x, Eigen::Vector3d& v, Eigen::Matrix3d& J) const {
      v = eval(x);
      J = jac(x);
    }
    virtual FieldDescriptor descriptor() const = 0;
  };

  AmbientField() = default;
  AmbientField(std::shared_ptr<const Impl> impl, bool div_free, std::optional<double> lambda)
      : impl_(std::move(impl)), div_free_(div_free), lambda_(lambda) {}

  Eigen::Vector3d eval(const Eigen::Vector3d& x) const { return impl_->eval(x); }
  Eigen::Vector3d operator()(const Eigen::Vector3d& x) const { return impl_->eval(x); }
  Eigen::Matrix3d jac(const Eigen::Vector3d& x) const { return impl_->jac(x); }
  void eval_jac(const Eigen::Vector3d& x, Eigen::Vector3d& v, Eigen::Matrix3d& J) const { impl_->eval_jac(x, v, J); }

  bool divergence_free() const { return div_free_; }
  std::optional<double> beltrami_lambda() const { return lambda_; }
  FieldDescriptor descriptor() const { return impl_->descriptor(); }
  bool valid() const { return bool(impl_); }
  const Impl* impl() const { return impl_.get(); }

 private:
  std::shared_ptr<const Impl> impl_;
  bool div_free_ = false;
  std::optional<double> lambda_;
};

inline Eigen::Vector3d curl_from_jac(const Eigen::Matrix3d& J) {
  return {J(2, 1) - J(1, 2), J(0, 2) - J(2, 0), J(1, 0) - J(0, 1)};
}

// Centered finite-difference Jacobian, used as an oracle.
inline Eigen::Matrix3d fd_jacobian(const AmbientField& B, const Eigen::Vector3d& x, double h = 1e-5) {
  Eigen::Matrix3d J;
  for (int c = 0; c < 3; ++c) {
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e[c] = h;
    J.col(c) = (B.eval(x + e) - B.eval(x - e)) / (2 * h);
  }
  return J;
}

inline AmbientField scaled(const AmbientField& B, double a) {
  struct Scaled : AmbientField::Impl {
    AmbientField b;
    double a;
    Eigen::Vector3d eval(const Eigen::Vector3d& x) const override { return a * b.eval(x); }
    Eigen::Matrix3d jac(const Eigen::Vector3d& x) const override { return a * b.jac(x); }
    void eval_jac(const Eigen::Vector3d& x, Eigen::Vector3d& v, Eigen::Matrix3d& J) const override {
      b.eval_jac(x, v, J);
      v *= a;
      J *= a;
    }
    FieldDescriptor descriptor() const override {
      FieldDescriptor d{"scaled", {{"factor", detail::fmt(a)}}};
      d.nest("base", b.descriptor());
      return d;
    }
  };
  auto s = std::make_shared<Scaled>();
  s->b = B;
  s->a = a;
  return AmbientField(s, B.divergence_free(), B.beltrami_lambda());
}

// ---- synthetic nested tori ----------------------------------------------

// omega(s) as polynomials in the minor radius s.
struct NestedProfile {
  std::vector<double> w1{1.0};
  std::vector<double> w2{0.3};

  template <class T>
  static T horner(const std::vector<double>& c, const T& s) {
    T r = T(0.0);
    for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * s + *it;
    return r;
  }
  Eigen::Vector2d omega(double s) const { return {horner(w1, s), horner(w2, s)}; }
  Eigen::Vector2d domega(double s) const {
    auto der = [](const std::vector<double>& c, double s) {
      double r = 0;
      for (size_t i = c.size(); i-- > 1;) r = r * s + double(i) * c[i];
      return r;
    };
    return {der(w1, s), der(w2, s)};
  }
};

namespace detail {

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
  return s;
}

struct NestedImpl : AmbientField::Impl {
  double R;
  NestedProfile prof;
  double s0, s1;

  template <class T>
  Eigen::Matrix<T, 3, 1> field(const Eigen::Matrix<T, 3, 1>& x) const {
    using std::sqrt;
    const T rho = sqrt(x[0] * x[0] + x[1] * x[1]);
    const T s = sqrt((rho - R) * (rho - R) + x[2] * x[2]);
    const T w1 = NestedProfile::horner(prof.w1, s);
    const T w2 = NestedProfile::horner(prof.w2, s);
    const T f = w2 * R / rho;
    Eigen::Matrix<T, 3, 1> b;
    b[0] = -w1 * x[1] - f * x[2] * x[0] / rho;
    b[1] = w1 * x[0] - f * x[2] * x[1] / rho;
    b[2] = f * (rho - R);
    return b;
  }

  Eigen::Vector3d eval(const Eigen::Vector3d& x) const override { return field<double>(x); }
  Eigen::Matrix3d jac(const Eigen::Vector3d& x) const override {
    Eigen::Vector3d v;
    Eigen::Matrix3d J;
    eval_jac(x, v, J);
    return J;
  }
  void eval_jac(const Eigen::Vector3d& x, Eigen::Vector3d& v, Eigen::Matrix3d& J) const override {
    using AD = Eigen::AutoDiffScalar<Eigen::Vector3d>;
    Eigen::Matrix<AD, 3, 1> xa;
    for (int i = 0; i < 3; ++i) xa[i] = AD(x[i], 3, i);
    const auto b = field<AD>(xa);
    for (int i = 0; i < 3; ++i) {
      v[i] = b[i].value();
      J.row(i) = b[i].derivatives().transpose();
    }
  }
  FieldDescriptor descriptor() const override {
    return {"synthetic_nested",
            {{"R", fmt(R)}, {"w1", join(prof.w1)}, {"w2", join(prof.w2)}, {"s0", fmt(s0)}, {"s1", fmt(s1)}}};
  }
};

}  // namespace detail

// Circular tori of minor radius s about a ring of radius R, angles (phi1, psi)
// with psi = theta + (s/R) sin theta, so the volume element is R s.
class NestedFamily {
 public:
  NestedFamily(double R, NestedProfile prof, double s0, double s1) : R_(R), prof_(std::move(prof)), s0_(s0), s1_(s1) {
    if (!(R > 1)) throw GeometryError("synthetic_nested_field: need R > 1");
    if (!(s0 > 0) || !(s1 > s0)) throw GeometryError("synthetic_nested_field: need 0 < s0 < s1");
    if (s1 >= R) throw GeometryError("synthetic_nested_field: tubes self-intersect (s1 >= R)");
  }

  double R() const { return R_; }
  double s_min() const { return s0_; }
  double s_max() const { return s1_; }
  const NestedProfile& profile() const { return prof_; }
  Eigen::Vector2d omega(double s) const { return prof_.omega(s); }

  // theta from psi by Newton on psi = theta + e sin theta
  double theta_of_psi(double s, double psi) const {
    const double e = s / R_;
    double th = psi;
    for (int it = 0; it < 50; ++it) {
      const double dth = (th + e * std::sin(th) - psi) / (1 + e * std::cos(th));
      th -= dth;
      if (std::abs(dth) < 1e-16) break;
    }
    return th;
  }

  Eigen::Vector3d point(double s, double phi1, double psi) const {
    const double th = theta_of_psi(s, psi);
    const double rho = R_ + s * std::cos(th);
    return {rho * std::cos(phi1), rho * std::sin(phi1), s * std::sin(th)};
  }

  Embedding torus(double s, GridSize g) const {
    if (s < s0_ || s > s1_) throw GeometryError("torus radius outside the family range");
    TorusVec3 K(g);
    for (int c = 0; c < 3; ++c)
      K[c] = TorusScalar::sample(g, [&](double a, double b) { return point(s, a, b)[c]; });
    return Embedding(std::move(K));
  }

  AmbientField field() const {
    auto impl = std::make_shared<detail::NestedImpl>();
    impl->R = R_;
    impl->prof = prof_;
    impl->s0 = s0_;
    impl->s1 = s1_;
    return AmbientField(impl, true, std::nullopt);
  }

  double minor_radius(const Eigen::Vector3d& x) const {
    const double rho = std::hypot(x[0], x[1]);
    return std::hypot(rho - R_, x[2]);
  }

 private:
  double R_;
  NestedProfile prof_;
  double s0_, s1_;
};

inline AmbientField synthetic_nested_field(double R, const NestedProfile& prof, double s0, double s1) {
  return NestedFamily(R, prof, s0, s1).field();
}

// ---- trigonometric curl fields ------------------------------------------

struct TrigCurlSpec {
  double box = 8.0;       // period of the box in every direction
  int modes = 6;
  int max_wavenumber = 2;
};

namespace detail {

// sum_m -sin(k_m.x + p_m) c_m with c_m = k_m x a_m / |k_m x a_m|; curl of sum a_m cos(.)
struct TrigCurlImpl : AmbientField::Impl {
  std::vector<Eigen::Vector3d> k, c;
  std::vector<double> phase;
  double amp = 1;
  unsigned long long seed = 0;
  TrigCurlSpec spec;

  Eigen::Vector3d eval(const Eigen::Vector3d& x) const override {
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    for (size_t m = 0; m < k.size(); ++m) v -= std::sin(k[m].dot(x) + phase[m]) * c[m];
    return amp * v;
  }
  Eigen::Matrix3d jac(const Eigen::Vector3d& x) const override {
    Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
    for (size_t m = 0; m < k.size(); ++m) J -= std::cos(k[m].dot(x) + phase[m]) * c[m] * k[m].transpose();
    return amp * J;
  }
  FieldDescriptor descriptor() const override {
    return {"trig_curl",
            {{"amplitude", fmt(amp)},
             {"seed", std::to_string(seed)},
             {"box", fmt(spec.box)},
             {"modes", std::to_string(spec.modes)},
             {"max_wavenumber", std::to_string(spec.max_wavenumber)}}};
  }
};

struct SumImpl : AmbientField::Impl {
  AmbientField a, b;
  Eigen::Vector3d eval(const Eigen::Vector3d& x) const override { return a.eval(x) + b.eval(x); }
  Eigen::Matrix3d jac(const Eigen::Vector3d& x) const override { return a.jac(x) + b.jac(x); }
  void eval_jac(const Eigen::Vector3d& x, Eigen::Vector3d& v, Eigen::Matrix3d& J) const override {
    Eigen::Vector3d v2;
    Eigen::Matrix3d J2;
    a.eval_jac(x, v, J);
    b.eval_jac(x, v2, J2);
    v += v2;
    J += J2;
  }
  FieldDescriptor descriptor() const override {
    FieldDescriptor d{"sum", {}};
    d.nest("a", a.descriptor());
    d.nest("b", b.descriptor());
    return d;
  }
};

}  // namespace detail

inline AmbientField trig_curl_field(double amplitude, unsigned long long seed, const TrigCurlSpec& spec = {}) {
  auto impl = std::make_shared<detail::TrigCurlImpl>();
  impl->amp = amplitude;
  impl->seed = seed;
  impl->spec = spec;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> wi(-spec.max_wavenumber, spec.max_wavenumber);
  std::normal_distribution<double> N(0, 1);
  std::uniform_real_distribution<double> U(0, two_pi);
  while (int(impl->k.size()) < spec.modes) {
    const Eigen::Vector3d m(wi(rng), wi(rng), wi(rng));
    const Eigen::Vector3d a(N(rng), N(rng), N(rng));
    const double p = U(rng);
    if (m.squaredNorm() == 0) continue;
    const Eigen::Vector3d kk = (two_pi / spec.box) * m;
    const Eigen::Vector3d c = kk.cross(a);
    if (c.norm() < 1e-3) continue;
    impl->k.push_back(kk);
    impl->c.push_back(c.normalized());
    impl->phase.push_back(p);
  }
  return AmbientField(impl, true, std::nullopt);
}

inline AmbientField operator+(const AmbientField& a, const AmbientField& b) {
  auto impl = std::make_shared<detail::SumImpl>();
  impl->a = a;
  impl->b = b;
  std::optional<double> lam;
  if (a.beltrami_lambda() && b.beltrami_lambda() && *a.beltrami_lambda() == *b.beltrami_lambda())
    lam = a.beltrami_lambda();
  return AmbientField(impl, a.divergence_free() && b.divergence_free(), lam);
}

// B + delta curl(A), A a trigonometric polynomial on a periodic box.
inline AmbientField perturb_div_free(const AmbientField& B, double delta, unsigned long long seed,
                                     const TrigCurlSpec& spec = {}) {
  if (delta < 0) throw std::invalid_argument("perturb_div_free: delta must be >= 0");
  if (delta == 0) return B;
  return B + trig_curl_field(delta, seed, spec);
}

// ABC flow, curl B = B.
inline AmbientField abc_field(double A, double Bc, double C) {
  struct Abc : AmbientField::Impl {
    double A, B, C;
    Eigen::Vector3d eval(const Eigen::Vector3d& x) const override {
      return {A * std::sin(x[2]) + C * std::cos(x[1]), B * std::sin(x[0]) + A * std::cos(x[2]),
              C * std::sin(x[1]) + B * std::cos(x[0])};
    }
    Eigen::Matrix3d jac(const Eigen::Vector3d& x) const override {
      Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
      J(0, 1) = -C * std::sin(x[1]);
      J(0, 2) = A * std::cos(x[2]);
      J(1, 0) = B * std::cos(x[0]);
      J(1, 2) = -A * std::sin(x[2]);
      J(2, 0) = -B * std::sin(x[0]);
      J(2, 1) = C * std::cos(x[1]);
      return J;
    }
    FieldDescriptor descriptor() const override {
      return {"abc", {{"A", detail::fmt(A)}, {"B", detail::fmt(B)}, {"C", detail::fmt(C)}}};
    }
  };
  auto impl = std::make_shared<Abc>();
  impl->A = A;
  impl->B = Bc;
  impl->C = C;
  return AmbientField(impl, true, 1.0);
}

// ---- field-line rotation number -----------------------------------------

struct RotationNumber {
  double value = 0;
  double error = 0;   // Richardson estimate
  double max_drift = 0;
};

struct FieldlineOptions {
  double dt = 0.02;
  double sample_every = 0.1;   // time between projections onto the torus
  double drift_tol = 1e-4;     // relative to the torus diameter
};

namespace detail {

// Returns (unwrapped angle increment ratio, max drift) along one integration.
inline std::pair<double, double> wind(const AmbientField& B, const Embedding& K, double t_max, double dt,
                                      const FieldlineOptions& o, double diam) {
  namespace ode = boost::numeric::odeint;
  using State = std::array<double, 3>;
  ode::runge_kutta4<State> rk;
  auto rhs = [&](const State& x, State& dx, double) {
    const Eigen::Vector3d v = B.eval(Eigen::Vector3d(x[0], x[1], x[2]));
    dx = {v[0], v[1], v[2]};
  };
  Eigen::Vector2d phi(0, 0);
  const Eigen::Vector3d x0 = K(phi);
  State x{x0[0], x0[1], x0[2]};
  const int per = std::max(1, int(std::lround(o.sample_every / dt)));
  const long steps = std::lround(t_max / dt);
  double drift = 0;
  Eigen::Vector2d prev = phi, rate = Eigen::Vector2d::Zero();
  double t = 0;
  for (long s = 0; s < steps; ++s) {
    rk.do_step(rhs, x, t, dt);
    t += dt;
    if ((s + 1) % per == 0 || s + 1 == steps) {
      const Eigen::Vector3d xe(x[0], x[1], x[2]);
      const double tau = (s + 1) % per == 0 ? per * dt : dt * ((s + 1) % per);
      Eigen::Vector2d guess = phi + rate * tau;
      phi = K.project(xe, guess);
      rate = (phi - prev) / tau;
      prev = phi;
      const double d = (K(phi) - xe).norm();
      drift = std::max(drift, d);
      if (d > o.drift_tol * diam)
        throw LeftNeighborhood("field line left the torus neighborhood (distance " + fmt(d) + " at t=" + fmt(t) + ")");
    }
  }
  if (std::abs(phi[0]) < 1e-300) throw LeftNeighborhood("no toroidal winding");
  return {phi[1] / phi[0], drift};
}

}  // namespace detail

// Winding ratio dphi2/dphi1 of the field line through K(0,0).
inline RotationNumber fieldline_rotation_number(const AmbientField& B, const Embedding& K, double t_max,
                                                const FieldlineOptions& o = {}) {
  double diam = 0;
  for (int p = 0; p < K.grid().size(); ++p) diam = std::max(diam, K.K().node(p).norm());
  diam *= 2;
  const auto [r1, d1] = detail::wind(B, K, t_max, o.dt, o, diam);
  const auto [r2, d2] = detail::wind(B, K, t_max, o.dt / 2, o, diam);
  RotationNumber out;
  out.value = r2 + (r2 - r1) / 15.0;
  out.error = std::abs(r2 - r1) / 15.0;
  out.max_drift = std::max(d1, d2);
  return out;
}

}  // namespace kamtori
