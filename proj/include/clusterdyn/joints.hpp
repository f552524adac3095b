// Tree-joint kinematics (jcalc) and loop-constraint evaluation: implicit
// constraint stacks phi/K/k per cluster and the numerical extraction of
// explicit (G, g) data from them.
#pragma once

#include "clusterdyn/errors.hpp"
#include "clusterdyn/model.hpp"
#include "clusterdyn/spatial.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <limits>
#include <sstream>
#include <vector>

namespace clusterdyn {

template <typename Scalar>
struct JointKinematics {
  SpatialTransform<Scalar> X_J;
  Vec6<Scalar> S;      // motion subspace column
  Vec6<Scalar> Sring;  // apparent derivative of S; identically zero for revolute/prismatic
};

template <typename S>
JointKinematics<S> jcalc(TreeJointSpec::Type type, const Vec3<S>& axis, const S& q) {
  JointKinematics<S> jk;
  jk.Sring.setZero();
  if (type == TreeJointSpec::Type::Revolute) {
    jk.X_J = SpatialTransform<S>::RotationAbout(axis, q);
    jk.S << axis, Vec3<S>::Zero();
  } else {
    jk.X_J = SpatialTransform<S>::Translation(axis * q);
    jk.S << Vec3<S>::Zero(), axis;
  }
  return jk;
}

template <typename S>
JointKinematics<S> jcalc(const TreeJointSpec& spec, const S& q, const S& /*qd*/) {
  return jcalc<S>(spec.type, spec.axis.cast<S>().eval(), q);
}

template <typename S>
struct ImplicitConstraintEval {
  VecX<S> phi;
  MatX<S> K;
  VecX<S> k;
};

template <typename S>
struct ExplicitConstraintEval {
  MatX<S> G;
  VecX<S> g;
};

/// Writes the constraint rows of a constant-Jacobian spec over the local
/// coordinates of its cluster.
template <typename S, typename Derived>
void constantConstraintRows(const LoopConstraintSpec& spec, const ClusterTree& ct,
                            Eigen::MatrixBase<Derived> const& K_rows_in) {
  auto& K = const_cast<Eigen::MatrixBase<Derived>&>(K_rows_in);
  auto local = [&](int body) { return ct.body_local_index[static_cast<std::size_t>(body)]; };
  K.setZero();
  if (spec.kind == LoopConstraintSpec::Kind::LinearTransmission) {
    int r = 0;
    for (std::size_t bi = 0; bi < spec.bodies.size(); ++bi) {
      const int b = spec.bodies[bi];
      if (std::find(spec.independent.begin(), spec.independent.end(), b) != spec.independent.end()) continue;
      K(r, local(b)) = S(1);
      for (std::size_t c = 0; c < spec.independent.size(); ++c) {
        K(r, local(spec.independent[c])) -= S(spec.G(static_cast<Eigen::Index>(bi), static_cast<Eigen::Index>(c)));
      }
      ++r;
    }
  } else if (spec.kind == LoopConstraintSpec::Kind::ChainedTransmission) {
    for (int b : spec.branch1) K(0, local(b)) += S(1);
    for (int b : spec.branch2) K(0, local(b)) -= S(spec.eta);
  }
}

/// Reusable scratch for the planar four-bar sweep; sized once per cluster.
template <typename S>
struct FourBarScratch {
  std::vector<SpatialTransform<S>> X;  // body pose from the output frame
  std::vector<Eigen::Matrix<S, 2, 1>> org, ov, ob;
  std::vector<S> w;

  void resize(int nb) {
    X.resize(static_cast<std::size_t>(nb));
    org.resize(static_cast<std::size_t>(nb));
    ov.resize(static_cast<std::size_t>(nb));
    ob.resize(static_cast<std::size_t>(nb));
    w.resize(static_cast<std::size_t>(nb));
  }
};

namespace detail {

template <typename S>
Eigen::Matrix<S, 2, 1> perp(const Eigen::Matrix<S, 2, 1>& v) {
  // z x v in the plane
  return {-v.y(), v.x()};
}

/// Planar pin kinematics of the four-bar closure in the output body's x-y
/// plane: positions, the analytic closure Jacobian, and (optionally) pin
/// velocities and the qdd = 0 acceleration bias, from one outward sweep.
template <typename S, typename KBlock>
void evalFourBarInto(const Model& model, const Cluster& cluster, const LoopConstraintSpec& spec,
                     const VecX<S>& q, const VecX<S>& qd, bool with_velocity, FourBarScratch<S>& ws,
                     KBlock const& K_in, Eigen::Ref<VecX<S>> phi, Eigen::Ref<VecX<S>> kbias) {
  auto& K = const_cast<KBlock&>(K_in);
  const int nb = static_cast<int>(cluster.bodies.size());
  ws.resize(nb);

  for (int j = 0; j < nb; ++j) {
    const Body& body = model.body(cluster.bodies[static_cast<std::size_t>(j)]);
    const auto jk = jcalc<S>(body.joint.type, body.joint.axis.template cast<S>().eval(), q(j));
    const SpatialTransform<S> X_up =
        jk.X_J * SpatialTransform<S>(body.X_T.rotation().template cast<S>().eval(),
                                     body.X_T.translation().template cast<S>().eval());
    const int lp = cluster.local_parent[static_cast<std::size_t>(j)];
    ws.X[static_cast<std::size_t>(j)] = lp >= 0 ? X_up * ws.X[static_cast<std::size_t>(lp)] : X_up;
    ws.org[static_cast<std::size_t>(j)] = ws.X[static_cast<std::size_t>(j)].translation().template head<2>();
    if (with_velocity) {
      if (lp >= 0) {
        ws.w[static_cast<std::size_t>(j)] = ws.w[static_cast<std::size_t>(lp)] + qd(j);
        ws.ov[static_cast<std::size_t>(j)] =
            ws.ov[static_cast<std::size_t>(lp)] +
            perp<S>(ws.org[static_cast<std::size_t>(j)] - ws.org[static_cast<std::size_t>(lp)]) *
                ws.w[static_cast<std::size_t>(lp)];
        ws.ob[static_cast<std::size_t>(j)] =
            ws.ob[static_cast<std::size_t>(lp)] +
            perp<S>(ws.ov[static_cast<std::size_t>(j)] - ws.ov[static_cast<std::size_t>(lp)]) *
                ws.w[static_cast<std::size_t>(lp)];
      } else {
        ws.w[static_cast<std::size_t>(j)] = qd(j);
        ws.ov[static_cast<std::size_t>(j)].setZero();
        ws.ob[static_cast<std::size_t>(j)].setZero();
      }
    }
  }

  const auto& ct = model.clusterTree();
  const int lrod = ct.body_local_index[static_cast<std::size_t>(spec.rod_body)];
  const int lanc = ct.body_local_index[static_cast<std::size_t>(spec.anchor_body)];

  auto pinPoint = [&](int l, const Eigen::Vector3d& pin) -> Eigen::Matrix<S, 2, 1> {
    const auto& Xl = ws.X[static_cast<std::size_t>(l)];
    const Vec3<S> p = Xl.translation() + Xl.rotation().transpose() * pin.template cast<S>();
    return p.template head<2>();
  };
  const Eigen::Matrix<S, 2, 1> p_rod = pinPoint(lrod, spec.rod_pin);
  const Eigen::Matrix<S, 2, 1> p_anc = pinPoint(lanc, spec.anchor_pin);

  K.setZero();
  for (int l = lrod; l >= 0; l = cluster.local_parent[static_cast<std::size_t>(l)]) {
    K.col(l) += perp<S>(p_rod - ws.org[static_cast<std::size_t>(l)]);
  }
  for (int l = lanc; l >= 0; l = cluster.local_parent[static_cast<std::size_t>(l)]) {
    K.col(l) -= perp<S>(p_anc - ws.org[static_cast<std::size_t>(l)]);
  }
  phi = p_rod - p_anc;

  if (with_velocity) {
    const Eigen::Matrix<S, 2, 1> v_rod =
        ws.ov[static_cast<std::size_t>(lrod)] + perp<S>(p_rod - ws.org[static_cast<std::size_t>(lrod)]) * ws.w[static_cast<std::size_t>(lrod)];
    const Eigen::Matrix<S, 2, 1> v_anc =
        ws.ov[static_cast<std::size_t>(lanc)] + perp<S>(p_anc - ws.org[static_cast<std::size_t>(lanc)]) * ws.w[static_cast<std::size_t>(lanc)];
    const Eigen::Matrix<S, 2, 1> b_rod =
        ws.ob[static_cast<std::size_t>(lrod)] + perp<S>(v_rod - ws.ov[static_cast<std::size_t>(lrod)]) * ws.w[static_cast<std::size_t>(lrod)];
    const Eigen::Matrix<S, 2, 1> b_anc =
        ws.ob[static_cast<std::size_t>(lanc)] + perp<S>(v_anc - ws.ov[static_cast<std::size_t>(lanc)]) * ws.w[static_cast<std::size_t>(lanc)];
    kbias = -(b_rod - b_anc);
  } else {
    kbias.setZero();
  }
}

}  // namespace detail

/// Evaluates one loop constraint over its cluster's spanning coordinates.
/// For transmission kinds K is constant and k = 0; for the four-bar, phi is
/// the planar closure mismatch, K its analytic Jacobian, and k = -Kdot*qd
/// assembled from the body Jacobian time derivative.
template <typename S>
ImplicitConstraintEval<S> evalConstraint(const Model& model, int cluster_idx, const LoopConstraintSpec& spec,
                                         const VecX<S>& q, const VecX<S>& qd) {
  const Cluster& cluster = model.cluster(cluster_idx);
  ImplicitConstraintEval<S> out;
  const int rows = spec.rows();
  out.K.resize(rows, cluster.nf);
  out.phi.resize(rows);
  out.k = VecX<S>::Zero(rows);
  if (spec.kind != LoopConstraintSpec::Kind::FourBar) {
    constantConstraintRows<S>(spec, model.clusterTree(), out.K);
    out.phi = out.K * q;
    return out;
  }
  FourBarScratch<S> ws;
  detail::evalFourBarInto<S>(model, cluster, spec, q, qd, true, ws, out.K, out.phi, out.k);
  return out;
}

/// Stacks every constraint attached to a cluster.
template <typename S>
ImplicitConstraintEval<S> evalClusterConstraints(const Model& model, int cluster_idx, const VecX<S>& q,
                                                 const VecX<S>& qd) {
  const Cluster& cluster = model.cluster(cluster_idx);
  ImplicitConstraintEval<S> out;
  out.K = MatX<S>::Zero(cluster.nl, cluster.nf);
  out.phi = VecX<S>::Zero(cluster.nl);
  out.k = VecX<S>::Zero(cluster.nl);
  int row = 0;
  for (int li : cluster.constraints) {
    const auto& spec = model.loops()[static_cast<std::size_t>(li)];
    auto one = evalConstraint<S>(model, cluster_idx, spec, q, qd);
    out.K.middleRows(row, spec.rows()) = one.K;
    out.phi.segment(row, spec.rows()) = one.phi;
    out.k.segment(row, spec.rows()) = one.k;
    row += spec.rows();
  }
  return out;
}

/// Extracts the explicit constraint (G, g) from an implicit one for a given
/// independent-coordinate selection.  The dependent-column block K_d is
/// inverted by LU with partial pivoting; a condition estimate above
/// `cond_limit` reports an invalid selection.
template <typename S>
ExplicitConstraintEval<S> extractExplicit(const MatX<S>& K, const VecX<S>& k,
                                          const std::vector<int>& independent, double cond_limit = 1e12) {
  const int nl = static_cast<int>(K.rows());
  const int nf = static_cast<int>(K.cols());
  const int m = static_cast<int>(independent.size());

  std::vector<int> dependent;
  {
    std::vector<bool> is_ind(static_cast<std::size_t>(nf), false);
    for (int i : independent) is_ind[static_cast<std::size_t>(i)] = true;
    for (int i = 0; i < nf; ++i) {
      if (!is_ind[static_cast<std::size_t>(i)]) dependent.push_back(i);
    }
  }
  if (static_cast<int>(dependent.size()) != nl) {
    throw NumericalError("invalid independent-coordinate selection: dependent block is not square");
  }

  ExplicitConstraintEval<S> out;
  out.G = MatX<S>::Zero(nf, m);
  out.g = VecX<S>::Zero(nf);
  for (int c = 0; c < m; ++c) out.G(independent[static_cast<std::size_t>(c)], c) = S(1);
  if (nl == 0) return out;

  MatX<S> Kd(nl, nl), Ki(nl, m);
  for (int c = 0; c < nl; ++c) Kd.col(c) = K.col(dependent[static_cast<std::size_t>(c)]);
  for (int c = 0; c < m; ++c) Ki.col(c) = K.col(independent[static_cast<std::size_t>(c)]);

  Eigen::PartialPivLU<MatX<S>> lu(Kd);
  double umax = 0.0, umin = 0.0;
  for (int i = 0; i < nl; ++i) {
    const double d = std::abs(toDouble(lu.matrixLU()(i, i)));
    umax = i == 0 ? d : std::max(umax, d);
    umin = i == 0 ? d : std::min(umin, d);
  }
  if (umin == 0.0 || umax / umin > cond_limit) {
    std::ostringstream os;
    os << "invalid independent-coordinate selection: dependent block is singular "
       << "(condition estimate " << (umin == 0.0 ? std::numeric_limits<double>::infinity() : umax / umin) << ")";
    throw NumericalError(os.str());
  }

  const MatX<S> Gd = -lu.solve(Ki);
  const VecX<S> gd = lu.solve(k);
  for (int r = 0; r < nl; ++r) {
    out.G.row(dependent[static_cast<std::size_t>(r)]) = Gd.row(r);
    out.g(dependent[static_cast<std::size_t>(r)]) = gd(r);
  }
  return out;
}

/// Solves the position-level closure phi(q) = 0 of a cluster for its
/// dependent coordinates by damped Newton iteration, holding the independent
/// coordinates fixed.  `q` is the cluster-local coordinate vector, updated in
/// place.
template <typename S>
void solveClosure(const Model& model, int cluster_idx, VecX<S>& q, double tol = 1e-12, int max_iters = 50) {
  const Cluster& cluster = model.cluster(cluster_idx);
  if (cluster.constant_jacobian) {
    if (cluster.nl > 0) {
      VecX<S> y(cluster.ndof);
      for (int c = 0; c < cluster.ndof; ++c) y(c) = q(cluster.independent_local[static_cast<std::size_t>(c)]);
      q = cluster.G_const.template cast<S>() * y;
    }
    return;
  }
  const VecX<S> qd_zero = VecX<S>::Zero(cluster.nf);
  auto residual = [&](const VecX<S>& qq) { return evalClusterConstraints<S>(model, cluster_idx, qq, qd_zero); };
  auto maxAbs = [&](const VecX<S>& phi) {
    double err = 0.0;
    for (int r = 0; r < phi.size(); ++r) err = std::max(err, std::abs(toDouble(phi(r))));
    return err;
  };

  auto eval = residual(q);
  for (int it = 0; it < max_iters; ++it) {
    const double err = maxAbs(eval.phi);
    if (err <= tol) return;

    MatX<S> Kd(cluster.nl, cluster.nl);
    for (int c = 0; c < cluster.nl; ++c) Kd.col(c) = eval.K.col(cluster.dependent_local[static_cast<std::size_t>(c)]);
    Eigen::PartialPivLU<MatX<S>> lu(Kd);
    const VecX<S> step = lu.solve(eval.phi);

    double scale = 1.0;
    for (int back = 0; back < 12; ++back) {
      VecX<S> q_try = q;
      for (int c = 0; c < cluster.nl; ++c) {
        q_try(cluster.dependent_local[static_cast<std::size_t>(c)]) -= S(scale) * step(c);
      }
      auto eval_try = residual(q_try);
      if (maxAbs(eval_try.phi) < err || scale < 1e-3) {
        q = q_try;
        eval = eval_try;
        break;
      }
      scale *= 0.5;
    }
  }
  if (maxAbs(eval.phi) > tol) {
    std::ostringstream os;
    os << "loop closure did not converge for cluster " << cluster.id << " (residual " << maxAbs(eval.phi) << ")";
    throw NumericalError(os.str());
  }
}

}  // namespace clusterdyn
