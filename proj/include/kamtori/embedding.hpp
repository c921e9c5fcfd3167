#pragma once

// Embedded tori K: T^2 -> R^3 with cached frame data.

#include <memory>

#include "kamtori/spectral.hpp"

namespace kamtori {

class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(TorusVec3 K) : K_(std::move(K)) {
    const GridSize g = K_.grid();
    DK_ = jacobian(K_);
    n_ = TorusVec3(g);
    n_sq_ = TorusScalar(g);
    G_ = TorusMat2(g);
    G_inv_ = TorusMat2(g);
    double nmin = 1e300, scale = 0;
    for (int p = 0; p < g.size(); ++p) {
      const Eigen::Matrix<double, 3, 2> D = DK_.node(p);
      const Eigen::Vector3d n = D.col(0).cross(D.col(1));
      n_.set_node(p, n);
      n_sq_[p] = n.squaredNorm();
      const Eigen::Matrix2d G = D.transpose() * D;
      G_.set_node(p, G);
      G_inv_.set_node(p, G.inverse());
      nmin = std::min(nmin, n.norm());
      scale = std::max(scale, D.norm());
    }
    if (!(nmin > 1e-12 * scale * scale)) throw GeometryError("embedding is not an immersion (min |n| = " + detail::fmt(nmin) + ")");
    ev_ = std::make_shared<const FourierEvaluator>(flatten(K_));
  }

  GridSize grid() const { return K_.grid(); }
  const TorusVec3& K() const { return K_; }
  const TorusMat32& DK() const { return DK_; }
  const TorusVec3& n() const { return n_; }
  const TorusScalar& n_sq() const { return n_sq_; }
  const TorusMat2& G() const { return G_; }
  const TorusMat2& G_inv() const { return G_inv_; }

  TorusVec3 unit_normal() const {
    return TorusVec3::generate(grid(), [&](int p) { return Eigen::Vector3d(n_.node(p).normalized()); });
  }

  double min_normal() const { return std::sqrt(n_sq_.min()); }

  // Signed enclosed volume (1/3) int K.n dphi.
  double volume() const {
    TorusScalar kn(grid());
    for (int p = 0; p < grid().size(); ++p) kn[p] = K_.node(p).dot(n_.node(p));
    return kn.mean() * two_pi * two_pi / 3.0;
  }

  // Off-grid values: K and DK at phi.
  void eval(const Eigen::Vector2d& phi, Eigen::Vector3d& K, Eigen::Matrix<double, 3, 2>& DK) const {
    const auto& ev = evaluator();
    const Eigen::ArrayXXd r = ev.eval(phi[0], phi[1], 1);
    for (int c = 0; c < 3; ++c) {
      K[c] = r(c, 0);
      DK(c, 0) = r(c, 1);
      DK(c, 1) = r(c, 2);
    }
  }
  Eigen::Vector3d operator()(const Eigen::Vector2d& phi) const {
    const Eigen::ArrayXXd r = evaluator().eval(phi[0], phi[1], 0);
    return {r(0, 0), r(1, 0), r(2, 0)};
  }

  // Closest point parameters by Gauss-Newton from a starting guess.
  Eigen::Vector2d project(const Eigen::Vector3d& x, Eigen::Vector2d phi, int iters = 8) const {
    for (int it = 0; it < iters; ++it) {
      Eigen::Vector3d K;
      Eigen::Matrix<double, 3, 2> D;
      eval(phi, K, D);
      const Eigen::Vector2d step = (D.transpose() * D).ldlt().solve(D.transpose() * (x - K));
      phi += step;
      if (step.norm() < 1e-14) break;
    }
    return phi;
  }

  // Grid node nearest to x.
  Eigen::Vector2d nearest_node(const Eigen::Vector3d& x) const {
    const GridSize g = grid();
    int best = 0;
    double d = 1e300;
    for (int p = 0; p < g.size(); ++p) {
      const double e = (K_.node(p) - x).squaredNorm();
      if (e < d) { d = e; best = p; }
    }
    return {node_angle(best % g.n1, g.n1), node_angle(best / g.n1, g.n2)};
  }

  Embedding resampled(GridSize g) const { return Embedding(resample(K_, g)); }

 private:
  const FourierEvaluator& evaluator() const { return *ev_; }

  TorusVec3 K_;
  TorusMat32 DK_;
  TorusVec3 n_;
  TorusScalar n_sq_;
  TorusMat2 G_, G_inv_;
  std::shared_ptr<const FourierEvaluator> ev_;
};

// Minimum distance between grid points of two tori.
inline double grid_distance(const Embedding& a, const Embedding& b) {
  double d = 1e300;
  for (int p = 0; p < a.grid().size(); ++p) {
    const Eigen::Vector3d x = a.K().node(p);
    for (int q = 0; q < b.grid().size(); ++q) d = std::min(d, (x - b.K().node(q)).squaredNorm());
  }
  return std::sqrt(d);
}

}  // namespace kamtori
