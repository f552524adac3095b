// Cluster joint model assembly: stacked operators over the bodies of a
// cluster (SPO / SPOF propagators, cluster motion subspace S_k, the
// velocity-product acceleration, cluster spatial transforms) plus the force
// subspace constructions used by the consistency checks.
//
// The hot-path routines never materialize the block operators: products with
// SPO and the cluster transforms are carried out recursively over the
// precomputed nonzero blocks (X_up within the cluster, X_out towards the
// output body).  Dense builders exist for differential testing.
#pragma once

#include "clusterdyn/joints.hpp"

#include <Eigen/Cholesky>

namespace clusterdyn {

/// dst.col(c) += X.apply(src.col(c)) for every column of a 6-row block.
template <typename S, typename SrcDerived, typename DstDerived>
void addTransformedMotionCols(const SpatialTransform<S>& X, const Eigen::MatrixBase<SrcDerived>& src,
                              Eigen::MatrixBase<DstDerived> const& dst_in) {
  auto& dst = const_cast<Eigen::MatrixBase<DstDerived>&>(dst_in);
  for (Eigen::Index c = 0; c < src.cols(); ++c) {
    dst.col(c) += X.apply(SpatialMotion<S>(Vec6<S>(src.col(c)))).vec();
  }
}

/// dst.col(c) += X^T * src.col(c) (force transform to the source frame).
template <typename S, typename SrcDerived, typename DstDerived>
void addTransposeForceCols(const SpatialTransform<S>& X, const Eigen::MatrixBase<SrcDerived>& src,
                           Eigen::MatrixBase<DstDerived> const& dst_in) {
  auto& dst = const_cast<Eigen::MatrixBase<DstDerived>&>(dst_in);
  for (Eigen::Index c = 0; c < src.cols(); ++c) {
    dst.col(c) += X.applyTransposeForce(SpatialForce<S>(Vec6<S>(src.col(c)))).vec();
  }
}

/// Per-cluster joint data: casted model constants plus every
/// configuration-dependent quantity of the cluster joint.  All buffers are
/// sized once in allocate(); update calls never allocate.
template <typename S>
struct ClusterJointModel {
  int nb = 0, nf = 0, nl = 0, m = 0;
  bool constant = true;

  // model constants (casted once)
  std::vector<TreeJointSpec::Type> jtype;
  std::vector<Vec3<S>> axis;
  std::vector<SpatialTransform<S>> X_tree;
  std::vector<SpatialInertia<S>> inertia;
  std::vector<Mat6<S>> inertia6;

  // configuration-dependent
  std::vector<SpatialTransform<S>> X_up;   // from the tree-parent frame
  std::vector<SpatialTransform<S>> X_out;  // from the output-body frame
  std::vector<Vec6<S>> Sax;                // per-joint motion subspace column
  VecX<S> q, qd;
  MatX<S> K;
  VecX<S> phi, kb;
  MatX<S> G;
  VecX<S> g;
  MatX<S> Smat;       // 6nb x m cluster motion subspace
  VecX<S> v;          // 6nb stacked body velocities
  VecX<S> SdotYdot;   // 6nb velocity-product acceleration

  // four-bar extraction scratch
  FourBarScratch<S> fb;
  MatX<S> Kd, Ki, Gd;
  VecX<S> gdep;
  Eigen::PartialPivLU<MatX<S>> Kd_lu;

  void allocate(const Model& model, int cluster_idx) {
    const Cluster& c = model.cluster(cluster_idx);
    nb = static_cast<int>(c.bodies.size());
    nf = c.nf;
    nl = c.nl;
    m = c.ndof;
    constant = c.constant_jacobian;

    jtype.resize(static_cast<std::size_t>(nb));
    axis.resize(static_cast<std::size_t>(nb));
    X_tree.resize(static_cast<std::size_t>(nb));
    inertia.resize(static_cast<std::size_t>(nb));
    inertia6.resize(static_cast<std::size_t>(nb));
    X_up.resize(static_cast<std::size_t>(nb));
    X_out.resize(static_cast<std::size_t>(nb));
    Sax.resize(static_cast<std::size_t>(nb));
    for (int j = 0; j < nb; ++j) {
      const Body& body = model.body(c.bodies[static_cast<std::size_t>(j)]);
      jtype[static_cast<std::size_t>(j)] = body.joint.type;
      axis[static_cast<std::size_t>(j)] = body.joint.axis.cast<S>();
      X_tree[static_cast<std::size_t>(j)] = SpatialTransform<S>(body.X_T.rotation().cast<S>().eval(),
                                                                body.X_T.translation().cast<S>().eval());
      inertia[static_cast<std::size_t>(j)] =
          SpatialInertia<S>(S(body.inertia.mass()), body.inertia.firstMoment().cast<S>().eval(),
                            body.inertia.rotationalInertia().cast<S>().eval());
      inertia6[static_cast<std::size_t>(j)] = body.inertia.matrix().cast<S>();
    }

    q = VecX<S>::Zero(nf);
    qd = VecX<S>::Zero(nf);
    K = MatX<S>::Zero(nl, nf);
    phi = VecX<S>::Zero(nl);
    kb = VecX<S>::Zero(nl);
    g = VecX<S>::Zero(nf);
    G = constant ? c.G_const.cast<S>().eval() : MatX<S>::Zero(nf, m);
    Smat = MatX<S>::Zero(6 * nb, m);
    v = VecX<S>::Zero(6 * nb);
    SdotYdot = VecX<S>::Zero(6 * nb);

    if (!constant) {
      Kd = MatX<S>::Zero(nl, nl);
      Ki = MatX<S>::Zero(nl, m);
      Gd = MatX<S>::Zero(nl, m);
      gdep = VecX<S>::Zero(nl);
      fb.resize(nb);
    }
  }
};

/// jcalc for every tree joint of the cluster plus the composed transforms
/// X_up (from the tree parent) and X_out (from the output body).
template <typename S>
void updateClusterKinematics(const Cluster& c, ClusterJointModel<S>& cj) {
  for (int j = 0; j < cj.nb; ++j) {
    const auto jk = jcalc<S>(cj.jtype[static_cast<std::size_t>(j)], cj.axis[static_cast<std::size_t>(j)], cj.q(j));
    cj.Sax[static_cast<std::size_t>(j)] = jk.S;
    cj.X_up[static_cast<std::size_t>(j)] = jk.X_J * cj.X_tree[static_cast<std::size_t>(j)];
    const int lp = c.local_parent[static_cast<std::size_t>(j)];
    cj.X_out[static_cast<std::size_t>(j)] =
        lp >= 0 ? cj.X_up[static_cast<std::size_t>(j)] * cj.X_out[static_cast<std::size_t>(lp)]
                : cj.X_up[static_cast<std::size_t>(j)];
  }
}

/// Rebuilds the implicit stack (K, phi, k) of a four-bar cluster at
/// (q, qd) and extracts (G, g) for the cluster's independent-coordinate
/// selection.  Constant-Jacobian clusters keep their load-time data.
template <typename S>
void updateClusterConstraints(const Model& model, int cluster_idx, ClusterJointModel<S>& cj) {
  const Cluster& c = model.cluster(cluster_idx);
  if (cj.constant) return;

  int row = 0;
  for (int li : c.constraints) {
    const auto& spec = model.loops()[static_cast<std::size_t>(li)];
    if (spec.kind == LoopConstraintSpec::Kind::FourBar) {
      detail::evalFourBarInto<S>(model, c, spec, cj.q, cj.qd, true, cj.fb, cj.K.middleRows(row, 2),
                                 cj.phi.segment(row, 2), cj.kb.segment(row, 2));
    } else {
      constantConstraintRows<S>(spec, model.clusterTree(), cj.K.middleRows(row, spec.rows()));
      cj.phi.segment(row, spec.rows()).noalias() = cj.K.middleRows(row, spec.rows()) * cj.q;
      cj.kb.segment(row, spec.rows()).setZero();
    }
    row += spec.rows();
  }

  for (int d = 0; d < cj.nl; ++d) cj.Kd.col(d) = cj.K.col(c.dependent_local[static_cast<std::size_t>(d)]);
  for (int i = 0; i < cj.m; ++i) cj.Ki.col(i) = cj.K.col(c.independent_local[static_cast<std::size_t>(i)]);
  cj.Kd_lu.compute(cj.Kd);
  double umax = 0.0, umin = 0.0;
  for (int i = 0; i < cj.nl; ++i) {
    const double d = std::abs(toDouble(cj.Kd_lu.matrixLU()(i, i)));
    umax = i == 0 ? d : std::max(umax, d);
    umin = i == 0 ? d : std::min(umin, d);
  }
  if (umin == 0.0 || umax / umin > 1e12) {
    std::ostringstream os;
    os << "cluster " << c.id << ": invalid independent-coordinate selection "
       << "(condition estimate " << (umin == 0.0 ? std::numeric_limits<double>::infinity() : umax / umin) << ")";
    throw NumericalError(os.str());
  }

  cj.Gd = cj.Kd_lu.solve(cj.Ki);
  cj.gdep = cj.Kd_lu.solve(cj.kb);
  cj.G.setZero();
  cj.g.setZero();
  for (int i = 0; i < cj.m; ++i) cj.G(c.independent_local[static_cast<std::size_t>(i)], i) = S(1);
  for (int d = 0; d < cj.nl; ++d) {
    cj.G.row(c.dependent_local[static_cast<std::size_t>(d)]) = -cj.Gd.row(d);
    cj.g(c.dependent_local[static_cast<std::size_t>(d)]) = cj.gdep(d);
  }
}

/// S_k = SPO * blockdiag(S_i) * G, applied recursively over the cluster.
template <typename S>
void updateMotionSubspace(const Cluster& c, ClusterJointModel<S>& cj) {
  for (int j = 0; j < cj.nb; ++j) {
    cj.Smat.middleRows(6 * j, 6).noalias() = cj.Sax[static_cast<std::size_t>(j)] * cj.G.row(j);
  }
  for (int j = 0; j < cj.nb; ++j) {
    const int lp = c.local_parent[static_cast<std::size_t>(j)];
    if (lp >= 0) {
      addTransformedMotionCols(cj.X_up[static_cast<std::size_t>(j)], cj.Smat.middleRows(6 * lp, 6),
                               cj.Smat.middleRows(6 * j, 6));
    }
  }
}

/// Stacked body velocities: v_k = X_M^{k,parent} v_parent + SPO diag(S_i) qd,
/// unrolled into the per-body recursion.  `v_output` is the output body's
/// spatial velocity (zero when the parent is the base).
template <typename S>
void updateClusterVelocity(const Cluster& c, ClusterJointModel<S>& cj, const SpatialMotion<S>& v_output) {
  for (int j = 0; j < cj.nb; ++j) {
    const int lp = c.local_parent[static_cast<std::size_t>(j)];
    const SpatialMotion<S> vparent = lp >= 0 ? SpatialMotion<S>(Vec6<S>(cj.v.segment(6 * lp, 6))) : v_output;
    cj.v.segment(6 * j, 6) =
        (cj.X_up[static_cast<std::size_t>(j)].apply(vparent) +
         SpatialMotion<S>(Vec6<S>(cj.Sax[static_cast<std::size_t>(j)] * cj.qd(j))))
            .vec();
  }
}

/// Velocity-product acceleration
///   Sdot*yd = SPO ( diag(S_i) g + diag(Sring_i + v_i x S_i) qd ),
/// with Sring = 0 for revolute/prismatic joints.
template <typename S>
void updateVelocityProduct(const Cluster& c, ClusterJointModel<S>& cj) {
  for (int j = 0; j < cj.nb; ++j) {
    const SpatialMotion<S> vj(Vec6<S>(cj.v.segment(6 * j, 6)));
    const SpatialMotion<S> sqd(Vec6<S>(cj.Sax[static_cast<std::size_t>(j)] * cj.qd(j)));
    cj.SdotYdot.segment(6 * j, 6) =
        cj.Sax[static_cast<std::size_t>(j)] * cj.g(j) + crossMotion(vj, sqd).vec();
  }
  for (int j = 0; j < cj.nb; ++j) {
    const int lp = c.local_parent[static_cast<std::size_t>(j)];
    if (lp >= 0) {
      addTransformedMotionCols(cj.X_up[static_cast<std::size_t>(j)], cj.SdotYdot.segment(6 * lp, 6),
                               cj.SdotYdot.segment(6 * j, 6));
    }
  }
}

// ---------------------------------------------------------------------------
// Dense builders (differential testing, duality checks, CLI `check`)
// ---------------------------------------------------------------------------

/// Dense SPO: block (i,j) = X_{A(i),A(j)} for j supporting i inside the
/// cluster, unit diagonal; block unit lower triangular by regular numbering.
template <typename S>
MatX<S> denseSpo(const Cluster& c, const ClusterJointModel<S>& cj) {
  MatX<S> P = MatX<S>::Zero(6 * cj.nb, 6 * cj.nb);
  for (int i = 0; i < cj.nb; ++i) {
    P.template block<6, 6>(6 * i, 6 * i) = Mat6<S>::Identity();
    SpatialTransform<S> X = cj.X_up[static_cast<std::size_t>(i)];
    for (int l = c.local_parent[static_cast<std::size_t>(i)]; l >= 0;
         l = c.local_parent[static_cast<std::size_t>(l)]) {
      P.template block<6, 6>(6 * i, 6 * l) = X.motionMatrix();
      X = X * cj.X_up[static_cast<std::size_t>(l)];
    }
  }
  return P;
}

/// Dense SPOF: unit diagonal with -X_F^{i,j} where i is the tree parent of j.
template <typename S>
MatX<S> denseSpof(const Cluster& c, const ClusterJointModel<S>& cj) {
  MatX<S> F = MatX<S>::Zero(6 * cj.nb, 6 * cj.nb);
  for (int j = 0; j < cj.nb; ++j) {
    F.template block<6, 6>(6 * j, 6 * j) = Mat6<S>::Identity();
    const int lp = c.local_parent[static_cast<std::size_t>(j)];
    if (lp >= 0) {
      F.template block<6, 6>(6 * lp, 6 * j) = -cj.X_up[static_cast<std::size_t>(j)].motionMatrix().transpose();
    }
  }
  return F;
}

/// Dense cluster motion transform X_M^{k,parent} (6 nb_k x 6 nb_parent):
/// nonzero only in the output body's block column.
template <typename S>
MatX<S> denseClusterMotionToParent(const Cluster& c, const ClusterJointModel<S>& cj, int parent_nb) {
  MatX<S> X = MatX<S>::Zero(6 * cj.nb, 6 * parent_nb);
  const int pos = c.output_local_in_parent;
  for (int j = 0; j < cj.nb; ++j) {
    X.template block<6, 6>(6 * j, 6 * pos) = cj.X_out[static_cast<std::size_t>(j)].motionMatrix();
  }
  return X;
}

/// Dense cluster force transform X_F^{parent,k} = (X_M^{k,parent})^T.
template <typename S>
MatX<S> denseClusterForceFromChild(const Cluster& c, const ClusterJointModel<S>& cj, int parent_nb) {
  return denseClusterMotionToParent(c, cj, parent_nb).transpose();
}

/// Force subspace construction: the lift P_k = pinv(G^T) and the active
/// force subspace T^a_k = SPOF * blockdiag(T^a_i) * P_k.
struct ClusterForceSubspaces {
  Eigen::MatrixXd P;   // nf x m,  G^T P = 1
  Eigen::MatrixXd Ta;  // 6nb x m, S^T Ta = 1
};

inline ClusterForceSubspaces computeForceSubspaces(const Cluster& c, const ClusterJointModel<double>& cj) {
  ClusterForceSubspaces out;
  const Eigen::MatrixXd GtG = cj.G.transpose() * cj.G;
  out.P = GtG.llt().solve(cj.G.transpose()).transpose();

  // Per-joint active force subspace: for a unit-axis 1-DoF joint, T^a_i = S_i.
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(6 * cj.nb, cj.nf);
  for (int j = 0; j < cj.nb; ++j) {
    Y.block<6, 1>(6 * j, j) = cj.Sax[static_cast<std::size_t>(j)];
  }
  Eigen::MatrixXd YP = Y * out.P;
  out.Ta = YP;
  for (int j = 0; j < cj.nb; ++j) {
    const int lp = c.local_parent[static_cast<std::size_t>(j)];
    if (lp >= 0) {
      // SPOF = 1 - SKO: subtract X_F^{lp,j} applied to block j.
      for (Eigen::Index col = 0; col < YP.cols(); ++col) {
        out.Ta.block<6, 1>(6 * lp, col) -=
            cj.X_up[static_cast<std::size_t>(j)]
                .applyTransposeForce(SpatialForce<double>(Vec6<double>(YP.block<6, 1>(6 * j, col))))
                .vec();
      }
    }
  }
  return out;
}

}  // namespace clusterdyn
