// Dense, non-recursive constrained forward dynamics used as correctness
// oracle and benchmark baseline, plus textbook spanning-tree RNEA / ABA /
// CRBA reference implementations.  These routines deliberately operate on
// the spanning tree alone (loop constraints enter only through the KKT
// system), independent of the cluster machinery they cross-check.
#pragma once

#include "clusterdyn/joints.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <sstream>
#include <vector>

namespace clusterdyn {

namespace detail {

template <typename S>
struct TreeKinematics {
  std::vector<SpatialTransform<S>> X_up;
  std::vector<Vec6<S>> Sax;
  std::vector<SpatialInertia<S>> inertia;
};

template <typename S>
TreeKinematics<S> treeKinematics(const Model& model, const VecX<S>& q) {
  const int n = model.numBodies();
  TreeKinematics<S> tk;
  tk.X_up.resize(static_cast<std::size_t>(n));
  tk.Sax.resize(static_cast<std::size_t>(n));
  tk.inertia.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Body& b = model.body(i + 1);
    const auto jk = jcalc<S>(b.joint.type, b.joint.axis.template cast<S>().eval(), q(i));
    tk.Sax[static_cast<std::size_t>(i)] = jk.S;
    tk.X_up[static_cast<std::size_t>(i)] =
        jk.X_J * SpatialTransform<S>(b.X_T.rotation().template cast<S>().eval(),
                                     b.X_T.translation().template cast<S>().eval());
    tk.inertia[static_cast<std::size_t>(i)] =
        SpatialInertia<S>(S(b.inertia.mass()), b.inertia.firstMoment().template cast<S>().eval(),
                          b.inertia.rotationalInertia().template cast<S>().eval());
  }
  return tk;
}

}  // namespace detail

/// Spanning-tree recursive Newton-Euler: generalized forces for a prescribed
/// (q, qd, qdd).  Gravity enters through the base acceleration a_0 = -a_g.
/// Optional per-coordinate armature adds a diagonal rotor inertia on the
/// joint coordinate itself.
template <typename S>
VecX<S> treeRnea(const Model& model, const VecX<S>& q, const VecX<S>& qd, const VecX<S>& qdd,
                 const Eigen::Vector3d& gravity, const Eigen::VectorXd* armature = nullptr) {
  const int n = model.numBodies();
  auto tk = detail::treeKinematics<S>(model, q);
  const SpatialMotion<S> a_base(Vec3<S>::Zero(), (-gravity).cast<S>().eval());

  std::vector<SpatialMotion<S>> v(static_cast<std::size_t>(n));
  std::vector<SpatialMotion<S>> a(static_cast<std::size_t>(n));
  std::vector<SpatialForce<S>> f(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int lam = model.tree().parent[static_cast<std::size_t>(i + 1)];
    const auto& X = tk.X_up[static_cast<std::size_t>(i)];
    const SpatialMotion<S> vj(Vec6<S>(tk.Sax[static_cast<std::size_t>(i)] * qd(i)));
    const SpatialMotion<S> vp = lam == 0 ? SpatialMotion<S>() : v[static_cast<std::size_t>(lam - 1)];
    const SpatialMotion<S> ap = lam == 0 ? a_base : a[static_cast<std::size_t>(lam - 1)];
    v[static_cast<std::size_t>(i)] = X.apply(vp) + vj;
    a[static_cast<std::size_t>(i)] =
        X.apply(ap) + SpatialMotion<S>(Vec6<S>(tk.Sax[static_cast<std::size_t>(i)] * qdd(i))) +
        crossMotion(v[static_cast<std::size_t>(i)], vj);
    const auto& I = tk.inertia[static_cast<std::size_t>(i)];
    f[static_cast<std::size_t>(i)] =
        I.apply(a[static_cast<std::size_t>(i)]) +
        crossForce(v[static_cast<std::size_t>(i)], I.apply(v[static_cast<std::size_t>(i)]));
  }

  VecX<S> tau(n);
  for (int i = n - 1; i >= 0; --i) {
    tau(i) = tk.Sax[static_cast<std::size_t>(i)].dot(f[static_cast<std::size_t>(i)].vec());
    if (armature != nullptr) tau(i) += S((*armature)(i)) * qdd(i);
    const int lam = model.tree().parent[static_cast<std::size_t>(i + 1)];
    if (lam > 0) {
      f[static_cast<std::size_t>(lam - 1)] =
          f[static_cast<std::size_t>(lam - 1)] +
          tk.X_up[static_cast<std::size_t>(i)].applyTransposeForce(f[static_cast<std::size_t>(i)]);
    }
  }
  return tau;
}

/// Textbook articulated-body algorithm on the spanning tree (loop
/// constraints ignored), with optional armature on the joint coordinates.
template <typename S>
VecX<S> treeAba(const Model& model, const VecX<S>& q, const VecX<S>& qd, const VecX<S>& tau,
                const Eigen::Vector3d& gravity, const Eigen::VectorXd* armature = nullptr) {
  const int n = model.numBodies();
  auto tk = detail::treeKinematics<S>(model, q);

  std::vector<SpatialMotion<S>> v(static_cast<std::size_t>(n)), c(static_cast<std::size_t>(n));
  std::vector<Mat6<S>> IA(static_cast<std::size_t>(n));
  std::vector<SpatialForce<S>> pA(static_cast<std::size_t>(n));
  std::vector<Vec6<S>> U(static_cast<std::size_t>(n));
  VecX<S> D(n), u(n);

  for (int i = 0; i < n; ++i) {
    const int lam = model.tree().parent[static_cast<std::size_t>(i + 1)];
    const auto& X = tk.X_up[static_cast<std::size_t>(i)];
    const SpatialMotion<S> vj(Vec6<S>(tk.Sax[static_cast<std::size_t>(i)] * qd(i)));
    const SpatialMotion<S> vp = lam == 0 ? SpatialMotion<S>() : v[static_cast<std::size_t>(lam - 1)];
    v[static_cast<std::size_t>(i)] = X.apply(vp) + vj;
    c[static_cast<std::size_t>(i)] = crossMotion(v[static_cast<std::size_t>(i)], vj);
    const auto& I = tk.inertia[static_cast<std::size_t>(i)];
    IA[static_cast<std::size_t>(i)] = I.matrix();
    pA[static_cast<std::size_t>(i)] =
        crossForce(v[static_cast<std::size_t>(i)], I.apply(v[static_cast<std::size_t>(i)]));
  }

  for (int i = n - 1; i >= 0; --i) {
    const auto& Si = tk.Sax[static_cast<std::size_t>(i)];
    U[static_cast<std::size_t>(i)] = IA[static_cast<std::size_t>(i)] * Si;
    D(i) = Si.dot(U[static_cast<std::size_t>(i)]);
    if (armature != nullptr) D(i) += S((*armature)(i));
    u(i) = tau(i) - Si.dot(pA[static_cast<std::size_t>(i)].vec());
    const int lam = model.tree().parent[static_cast<std::size_t>(i + 1)];
    if (lam > 0) {
      const Mat6<S> Ia = IA[static_cast<std::size_t>(i)] -
                         (U[static_cast<std::size_t>(i)] / D(i)) * U[static_cast<std::size_t>(i)].transpose();
      const Vec6<S> pa = pA[static_cast<std::size_t>(i)].vec() + Ia * c[static_cast<std::size_t>(i)].vec() +
                         U[static_cast<std::size_t>(i)] * (u(i) / D(i));
      const auto& X = tk.X_up[static_cast<std::size_t>(i)];
      IA[static_cast<std::size_t>(lam - 1)] += congruenceToSource(X, Ia);
      pA[static_cast<std::size_t>(lam - 1)] =
          pA[static_cast<std::size_t>(lam - 1)] + X.applyTransposeForce(SpatialForce<S>(pa));
    }
  }

  std::vector<SpatialMotion<S>> a(static_cast<std::size_t>(n));
  const SpatialMotion<S> a_base(Vec3<S>::Zero(), (-gravity).cast<S>().eval());
  VecX<S> qdd(n);
  for (int i = 0; i < n; ++i) {
    const int lam = model.tree().parent[static_cast<std::size_t>(i + 1)];
    const auto& X = tk.X_up[static_cast<std::size_t>(i)];
    const SpatialMotion<S> ap = lam == 0 ? a_base : a[static_cast<std::size_t>(lam - 1)];
    const SpatialMotion<S> aprime = X.apply(ap) + c[static_cast<std::size_t>(i)];
    qdd(i) = (u(i) - U[static_cast<std::size_t>(i)].dot(aprime.vec())) / D(i);
    a[static_cast<std::size_t>(i)] =
        aprime + SpatialMotion<S>(Vec6<S>(tk.Sax[static_cast<std::size_t>(i)] * qdd(i)));
  }
  return qdd;
}

/// Joint-space inertia matrix by composite-rigid-body accumulation.
template <typename S>
MatX<S> massMatrix(const Model& model, const VecX<S>& q) {
  const int n = model.numBodies();
  auto tk = detail::treeKinematics<S>(model, q);
  std::vector<SpatialInertia<S>> Ic = tk.inertia;
  for (int i = n - 1; i >= 0; --i) {
    const int lam = model.tree().parent[static_cast<std::size_t>(i + 1)];
    if (lam > 0) {
      Ic[static_cast<std::size_t>(lam - 1)] =
          Ic[static_cast<std::size_t>(lam - 1)] +
          transformInertia(tk.X_up[static_cast<std::size_t>(i)], Ic[static_cast<std::size_t>(i)]);
    }
  }
  MatX<S> H = MatX<S>::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    SpatialForce<S> F =
        Ic[static_cast<std::size_t>(i)].apply(SpatialMotion<S>(Vec6<S>(tk.Sax[static_cast<std::size_t>(i)])));
    H(i, i) = tk.Sax[static_cast<std::size_t>(i)].dot(F.vec());
    int j = i + 1;
    while (model.tree().parent[static_cast<std::size_t>(j)] > 0) {
      F = tk.X_up[static_cast<std::size_t>(j - 1)].applyTransposeForce(F);
      j = model.tree().parent[static_cast<std::size_t>(j)];
      H(i, j - 1) = tk.Sax[static_cast<std::size_t>(j - 1)].dot(F.vec());
      H(j - 1, i) = H(i, j - 1);
    }
  }
  return H;
}

/// Bias force c(q, qd) including gravity: spanning-tree RNEA at qdd = 0.
template <typename S>
VecX<S> biasForce(const Model& model, const VecX<S>& q, const VecX<S>& qd, const Eigen::Vector3d& gravity) {
  return treeRnea<S>(model, q, qd, VecX<S>::Zero(model.nq()), gravity);
}

template <typename S>
struct KktResult {
  VecX<S> qdd;
  VecX<S> lambda;
  int iterations = 0;
  double residual = 0.0;
};

/// Solves the proximally regularized KKT saddle system
///   [ H  K^T ] [qdd]     [tau - c]
///   [ K  -mu ] [lam]  =  [k - mu*lam_prev],
/// iterating on lambda until the proximal fixed point is reached.  The
/// regularization keeps the system well-posed even for redundant
/// (duplicated or rank-deficient) constraint rows.  Lambda enters the
/// dynamics as H qdd + c + K^T lambda = tau.
template <typename S>
KktResult<S> proximalKktSolve(const MatX<S>& H, const VecX<S>& c, const MatX<S>& K, const VecX<S>& kbias,
                              const VecX<S>& tau_tree, double mu = 1e-8, double tol = 1e-12,
                              int max_iters = 25) {
  const int n = static_cast<int>(H.rows());
  const int nl = static_cast<int>(K.rows());

  KktResult<S> out;
  if (nl == 0) {
    out.qdd = H.ldlt().solve(tau_tree - c);
    out.lambda.resize(0);
    return out;
  }

  const int dim = n + nl;
  MatX<S> A = MatX<S>::Zero(dim, dim);
  A.topLeftCorner(n, n) = H;
  A.topRightCorner(n, nl) = K.transpose();
  A.bottomLeftCorner(nl, n) = K;
  for (int r = 0; r < nl; ++r) A(n + r, n + r) = S(-mu);
  Eigen::PartialPivLU<MatX<S>> lu(A);

  VecX<S> rhs(dim), sol(dim);
  VecX<S> lambda = VecX<S>::Zero(nl);
  out.qdd = VecX<S>::Zero(n);
  for (int it = 0; it < max_iters; ++it) {
    rhs.head(n) = tau_tree - c;
    rhs.tail(nl) = kbias - S(mu) * lambda;
    sol = lu.solve(rhs);
    S diff(0);
    for (int r = 0; r < nl; ++r) {
      using std::abs;
      const S d = abs(sol(n + r) - lambda(r));
      if (d > diff) diff = d;
    }
    out.qdd = sol.head(n);
    lambda = sol.tail(nl);
    out.iterations = it + 1;
    out.residual = toDouble(diff);
    if (diff <= S(tol)) {
      out.lambda = lambda;
      return out;
    }
  }
  std::ostringstream os;
  os << "proximal KKT iteration did not converge (residual " << out.residual << " after " << out.iterations
     << " iterations)";
  throw NumericalError(os.str());
}

/// Stacks the implicit constraint rows of every cluster over the global
/// spanning coordinates.
template <typename S>
void stackedConstraints(const Model& model, const VecX<S>& q, const VecX<S>& qd, MatX<S>& K, VecX<S>& kbias) {
  int nl = 0;
  for (const auto& cl : model.clusters()) nl += cl.nl;
  K = MatX<S>::Zero(nl, model.nq());
  kbias = VecX<S>::Zero(nl);
  int row = 0;
  for (int kc = 0; kc < model.numClusters(); ++kc) {
    const Cluster& cl = model.cluster(kc);
    if (cl.nl == 0) continue;
    VecX<S> qk(cl.nf), qdk(cl.nf);
    for (int j = 0; j < cl.nf; ++j) {
      qk(j) = q(cl.bodies[static_cast<std::size_t>(j)] - 1);
      qdk(j) = qd(cl.bodies[static_cast<std::size_t>(j)] - 1);
    }
    auto eval = evalClusterConstraints<S>(model, kc, qk, qdk);
    for (int j = 0; j < cl.nf; ++j) {
      K.block(row, cl.bodies[static_cast<std::size_t>(j)] - 1, cl.nl, 1) = eval.K.col(j);
    }
    kbias.segment(row, cl.nl) = eval.k;
    row += cl.nl;
  }
}

/// Dense constrained forward dynamics: CRBA mass matrix, RNEA bias force,
/// stacked constraint rows, proximal KKT solve.
template <typename S>
KktResult<S> kktForwardDynamics(const Model& model, const VecX<S>& q, const VecX<S>& qd, const VecX<S>& tau_tree,
                                const Eigen::Vector3d& gravity, double mu = 1e-8, double tol = 1e-12,
                                int max_iters = 25) {
  const MatX<S> H = massMatrix<S>(model, q);
  const VecX<S> c = biasForce<S>(model, q, qd, gravity);
  MatX<S> K;
  VecX<S> kbias;
  stackedConstraints<S>(model, q, qd, K, kbias);
  return proximalKktSolve<S>(H, c, K, kbias, tau_tree, mu, tol, max_iters);
}

}  // namespace clusterdyn
