// Recursive dynamics over the cluster tree: the constraint-embedding
// articulated-body algorithm (three passes plus the optional spanning-tree
// acceleration conversion), the constraint-embedding RNEA, and the
// approximate "armature" ABA that reflects rotor inertias onto their links.
//
// All per-evaluation state lives in a Workspace sized once per model; the
// evaluation path performs no allocation, so repeated calls are cheap and
// operation counts reflect the algorithms alone.
#pragma once

#include "clusterdyn/cluster.hpp"
#include "clusterdyn/oracle.hpp"

#include <Eigen/Cholesky>

#include <sstream>
#include <vector>

namespace clusterdyn {

/// Inputs for one dynamics evaluation.  Positions/velocities/forces may each
/// be given in spanning or independent coordinates; empty vectors mean
/// "not provided".  When both are present the spanning data wins.
struct DynamicsState {
  Eigen::VectorXd q, qd;     // spanning coordinates (size nq)
  Eigen::VectorXd y, yd;     // independent coordinates (size ny)
  Eigen::VectorXd tau_tree;  // spanning generalized forces
  Eigen::VectorXd tau;       // independent generalized forces
};

struct EvalOptions {
  bool dense_operators = false;  // route block operators through dense matrices (differential testing)
  bool compute_qdd = true;       // convert ydd to spanning accelerations
};

template <typename S>
struct ClusterScratch {
  ClusterJointModel<S> joint;
  std::vector<Mat6<S>> IA;  // block-diagonal articulated inertia (6x6 per body)
  VecX<S> pA;               // stacked articulated bias forces
  VecX<S> a;                // stacked body accelerations
  VecX<S> aprime;           // scratch: p^a in the inward pass, a' in the outward pass
  VecX<S> f;                // stacked cluster joint forces (RNEA)
  MatX<S> U;                // 6nb x m
  MatX<S> D;                // m x m
  Eigen::LDLT<MatX<S>> Dldlt;
  VecX<S> u, ydd, tauk, ydot, scr_m;
  VecX<S> qdd, tau_tree;  // nf-sized
  Eigen::Matrix<S, 6, Eigen::Dynamic> W;
  MatX<S> Wsol;
  Mat6<S> IAo, WDW;
};

template <typename S>
class Workspace {
 public:
  explicit Workspace(const Model& model) : model_(&model) {
    cw_.resize(static_cast<std::size_t>(model.numClusters()));
    for (int k = 0; k < model.numClusters(); ++k) {
      auto& cs = cw_[static_cast<std::size_t>(k)];
      cs.joint.allocate(model, k);
      const int nb = cs.joint.nb;
      const int nf = cs.joint.nf;
      const int m = cs.joint.m;
      cs.IA.assign(static_cast<std::size_t>(nb), Mat6<S>::Zero());
      cs.pA = VecX<S>::Zero(6 * nb);
      cs.a = VecX<S>::Zero(6 * nb);
      cs.aprime = VecX<S>::Zero(6 * nb);
      cs.f = VecX<S>::Zero(6 * nb);
      cs.U = MatX<S>::Zero(6 * nb, m);
      cs.D = MatX<S>::Zero(m, m);
      cs.u = VecX<S>::Zero(m);
      cs.ydd = VecX<S>::Zero(m);
      cs.tauk = VecX<S>::Zero(m);
      cs.ydot = VecX<S>::Zero(m);
      cs.scr_m = VecX<S>::Zero(m);
      cs.qdd = VecX<S>::Zero(nf);
      cs.tau_tree = VecX<S>::Zero(nf);
      cs.W.resize(6, m);
      cs.Wsol = MatX<S>::Zero(m, 6);
    }
  }

  void reset() {
    for (auto& cs : cw_) {
      for (auto& blk : cs.IA) blk.setZero();
      cs.pA.setZero();
      cs.a.setZero();
      cs.aprime.setZero();
      cs.f.setZero();
      cs.U.setZero();
      cs.D.setZero();
      cs.u.setZero();
      cs.ydd.setZero();
      cs.tauk.setZero();
      cs.ydot.setZero();
      cs.scr_m.setZero();
      cs.qdd.setZero();
      cs.tau_tree.setZero();
      cs.joint.v.setZero();
      cs.joint.SdotYdot.setZero();
    }
  }

  std::vector<ClusterScratch<S>>& clusters() { return cw_; }
  const std::vector<ClusterScratch<S>>& clusters() const { return cw_; }
  const Model& model() const { return *model_; }

 private:
  const Model* model_;
  std::vector<ClusterScratch<S>> cw_;
};

template <typename S>
struct AbaResult {
  VecX<S> ydd;  // independent accelerations, stacked per cluster
  VecX<S> qdd;  // spanning accelerations (empty unless computed)
};

template <typename S>
void stageClusters(const Model& model, const DynamicsState& st, Workspace<S>& ws, const EvalOptions& opts = {});

namespace detail {

inline void checkStateSizes(const Model& model, const DynamicsState& st, bool need_force) {
  auto fail = [&](const std::string& what) { throw ModelError("dynamics state mismatch: " + what); };
  if (st.q.size() == 0 && st.y.size() == 0) fail("positions missing (q or y required)");
  if (st.q.size() > 0 && st.q.size() != model.nq()) fail("q has wrong dimension");
  if (st.q.size() == 0 && st.y.size() != model.numIndependent()) fail("y has wrong dimension");
  if (st.qd.size() == 0 && st.yd.size() == 0) fail("velocities missing (qd or yd required)");
  if (st.qd.size() > 0 && st.qd.size() != model.nq()) fail("qd has wrong dimension");
  if (st.qd.size() == 0 && st.yd.size() != model.numIndependent()) fail("yd has wrong dimension");
  if (need_force) {
    if (st.tau.size() == 0 && st.tau_tree.size() == 0) fail("forces missing (tau or tau_tree required)");
    if (st.tau.size() > 0 && st.tau.size() != model.numIndependent()) fail("tau has wrong dimension");
    if (st.tau.size() == 0 && st.tau_tree.size() != model.nq()) fail("tau_tree has wrong dimension");
  }
}

/// Outward-pass staging shared by ABA and RNEA: coordinates, constraint
/// data, cluster motion subspace, stacked velocities, velocity-product
/// acceleration, bias force, and the initial (rigid-body) articulated
/// inertia blocks.
template <typename S>
void stageCluster(const Model& model, int k, const DynamicsState& st, Workspace<S>& ws,
                  const EvalOptions& opts) {
  auto& cs = ws.clusters()[static_cast<std::size_t>(k)];
  auto& cj = cs.joint;
  const Cluster& c = model.cluster(k);

  // positions (q = gamma(y) when only independents are given)
  if (st.q.size() > 0) {
    for (int j = 0; j < cj.nf; ++j) cj.q(j) = S(st.q(c.bodies[static_cast<std::size_t>(j)] - 1));
  } else {
    cj.q.setZero();
    for (int i = 0; i < cj.m; ++i) {
      cj.q(c.independent_local[static_cast<std::size_t>(i)]) = S(st.y(model.yOffset(k) + i));
    }
    solveClosure<S>(model, k, cj.q);
  }
  updateClusterKinematics(c, cj);

  // velocities and explicit constraint data
  if (st.qd.size() > 0) {
    for (int j = 0; j < cj.nf; ++j) cj.qd(j) = S(st.qd(c.bodies[static_cast<std::size_t>(j)] - 1));
    updateClusterConstraints(model, k, cj);
    for (int i = 0; i < cj.m; ++i) cs.ydot(i) = cj.qd(c.independent_local[static_cast<std::size_t>(i)]);
  } else {
    cj.qd.setZero();
    updateClusterConstraints(model, k, cj);  // G(q); bias not yet meaningful
    for (int i = 0; i < cj.m; ++i) cs.ydot(i) = S(st.yd(model.yOffset(k) + i));
    cj.qd.noalias() = cj.G * cs.ydot;
    updateClusterConstraints(model, k, cj);  // refresh k and g at the actual qd
  }

  const int pc = c.parent_cluster;
  if (!opts.dense_operators) {
    updateMotionSubspace(c, cj);
    const SpatialMotion<S> v_out =
        pc >= 0 ? SpatialMotion<S>(Vec6<S>(ws.clusters()[static_cast<std::size_t>(pc)].joint.v.segment(
                      6 * c.output_local_in_parent, 6)))
                : SpatialMotion<S>();
    updateClusterVelocity(c, cj, v_out);
    updateVelocityProduct(c, cj);
  } else {
    const MatX<S> SPO = denseSpo(c, cj);
    MatX<S> diagS = MatX<S>::Zero(6 * cj.nb, cj.nf);
    for (int j = 0; j < cj.nb; ++j) diagS.template block<6, 1>(6 * j, j) = cj.Sax[static_cast<std::size_t>(j)];
    cj.Smat = SPO * diagS * cj.G;
    VecX<S> vparent = VecX<S>::Zero(6 * cj.nb);
    if (pc >= 0) {
      const auto& pj = ws.clusters()[static_cast<std::size_t>(pc)].joint;
      vparent = denseClusterMotionToParent(c, cj, pj.nb) * pj.v;
    }
    cj.v = vparent + SPO * (diagS * cj.qd);
    VecX<S> cross = VecX<S>::Zero(6 * cj.nb);
    for (int j = 0; j < cj.nb; ++j) {
      const SpatialMotion<S> vj(Vec6<S>(cj.v.segment(6 * j, 6)));
      const SpatialMotion<S> sqd(Vec6<S>(cj.Sax[static_cast<std::size_t>(j)] * cj.qd(j)));
      cross.segment(6 * j, 6) = crossMotion(vj, sqd).vec();
    }
    cj.SdotYdot = SPO * (diagS * cj.g + cross);
  }

  for (int j = 0; j < cj.nb; ++j) {
    cs.IA[static_cast<std::size_t>(j)] = cj.inertia6[static_cast<std::size_t>(j)];
    const SpatialMotion<S> vj(Vec6<S>(cj.v.segment(6 * j, 6)));
    cs.pA.segment(6 * j, 6) = crossForce(vj, cj.inertia[static_cast<std::size_t>(j)].apply(vj)).vec();
  }
}

template <typename S>
void checkDPivots(const Cluster& c, const Eigen::LDLT<MatX<S>>& ldlt) {
  double dmax = 0.0, dmin = 0.0;
  const auto dv = ldlt.vectorD();
  for (int i = 0; i < dv.size(); ++i) {
    const double d = toDouble(dv(i));
    dmax = i == 0 ? d : std::max(dmax, d);
    dmin = i == 0 ? d : std::min(dmin, d);
  }
  if (!(dmin > 1e-12 * dmax)) {
    std::ostringstream os;
    os << "cluster " << c.id << ": D = S^T I^A S is singular (overconstrained or ill-posed cluster; "
       << "pivot ratio " << (dmax > 0 ? dmin / dmax : 0.0) << ")";
    throw NumericalError(os.str());
  }
}

}  // namespace detail

/// Updates every cluster joint model for a state (coordinates, constraint
/// data, motion subspaces, stacked velocities, bias terms) without running
/// dynamics.  This is the first outward pass of both recursive algorithms,
/// exposed for kinematics consumers and consistency checks.
template <typename S>
void stageClusters(const Model& model, const DynamicsState& st, Workspace<S>& ws, const EvalOptions& opts) {
  detail::checkStateSizes(model, st, false);
  for (int k = 0; k < model.numClusters(); ++k) detail::stageCluster(model, k, st, ws, opts);
}

/// Constraint-embedding articulated-body algorithm.  Three passes over the
/// cluster tree: outward velocities and bias terms (v_0 = 0), inward
/// articulated-inertia assembly, outward accelerations with the base
/// accelerating upward at gravity (a_0 = -a_g).
template <typename S>
AbaResult<S> clusterAba(const Model& model, const DynamicsState& st, const Eigen::Vector3d& gravity,
                        Workspace<S>& ws, const EvalOptions& opts = {}) {
  detail::checkStateSizes(model, st, true);
  const int nk = model.numClusters();

  // Outward pass 1
  for (int k = 0; k < nk; ++k) detail::stageCluster(model, k, st, ws, opts);

  // Inward pass
  for (int k = nk - 1; k >= 0; --k) {
    auto& cs = ws.clusters()[static_cast<std::size_t>(k)];
    auto& cj = cs.joint;
    const Cluster& c = model.cluster(k);

    if (st.tau.size() > 0) {
      for (int i = 0; i < cj.m; ++i) cs.tauk(i) = S(st.tau(model.yOffset(k) + i));
    } else {
      for (int j = 0; j < cj.nf; ++j) {
        cs.tau_tree(j) = S(st.tau_tree(c.bodies[static_cast<std::size_t>(j)] - 1));
      }
      cs.tauk.noalias() = cj.G.transpose() * cs.tau_tree;
    }

    for (int j = 0; j < cj.nb; ++j) {
      cs.U.middleRows(6 * j, 6).noalias() = cs.IA[static_cast<std::size_t>(j)] * cj.Smat.middleRows(6 * j, 6);
    }
    cs.D.noalias() = cj.Smat.transpose() * cs.U;
    cs.u = cs.tauk;
    cs.u.noalias() -= cj.Smat.transpose() * cs.pA;
    cs.Dldlt.compute(cs.D);
    detail::checkDPivots(c, cs.Dldlt);

    const int pc = c.parent_cluster;
    if (pc < 0) continue;
    auto& ps = ws.clusters()[static_cast<std::size_t>(pc)];
    const int pos = c.output_local_in_parent;

    // p^a = p^A + I^A Sdot*yd + U D^-1 (u - U^T Sdot*yd)
    cs.scr_m.noalias() = cs.U.transpose() * cj.SdotYdot;
    cs.scr_m = cs.u - cs.scr_m;
    cs.Dldlt.solveInPlace(cs.scr_m);
    cs.aprime = cs.pA;
    for (int j = 0; j < cj.nb; ++j) {
      cs.aprime.segment(6 * j, 6).noalias() += cs.IA[static_cast<std::size_t>(j)] * cj.SdotYdot.segment(6 * j, 6);
    }
    cs.aprime.noalias() += cs.U * cs.scr_m;

    if (!opts.dense_operators) {
      // X_F^{parent,k} (I^A - U D^-1 U^T) X_M^{k,parent} collapses onto the
      // output body's diagonal block.
      cs.W.setZero();
      cs.IAo.setZero();
      for (int j = 0; j < cj.nb; ++j) {
        addTransposeForceCols(cj.X_out[static_cast<std::size_t>(j)], cs.U.middleRows(6 * j, 6), cs.W);
        cs.IAo += congruenceToSource(cj.X_out[static_cast<std::size_t>(j)], cs.IA[static_cast<std::size_t>(j)]);
      }
      cs.Wsol = cs.W.transpose();
      cs.Dldlt.solveInPlace(cs.Wsol);
      cs.WDW.noalias() = cs.W * cs.Wsol;
      ps.IA[static_cast<std::size_t>(pos)] += cs.IAo - cs.WDW;
      for (int j = 0; j < cj.nb; ++j) {
        ps.pA.segment(6 * pos, 6) +=
            cj.X_out[static_cast<std::size_t>(j)]
                .applyTransposeForce(SpatialForce<S>(Vec6<S>(cs.aprime.segment(6 * j, 6))))
                .vec();
      }
    } else {
      MatX<S> IAfull = MatX<S>::Zero(6 * cj.nb, 6 * cj.nb);
      for (int j = 0; j < cj.nb; ++j) {
        IAfull.template block<6, 6>(6 * j, 6 * j) = cs.IA[static_cast<std::size_t>(j)];
      }
      MatX<S> Usol = cs.U.transpose();
      cs.Dldlt.solveInPlace(Usol);
      const MatX<S> Ia = IAfull - cs.U * Usol;
      const MatX<S> Xm = denseClusterMotionToParent(c, cj, ps.joint.nb);
      const MatX<S> Xf = Xm.transpose();
      const MatX<S> P6 = Xf * Ia * Xm;
      ps.IA[static_cast<std::size_t>(pos)] += P6.template block<6, 6>(6 * pos, 6 * pos);
      ps.pA += Xf * cs.aprime;
    }
  }

  // Outward pass 2
  const SpatialMotion<S> a_base(Vec3<S>::Zero(), (-gravity).cast<S>().eval());
  for (int k = 0; k < nk; ++k) {
    auto& cs = ws.clusters()[static_cast<std::size_t>(k)];
    auto& cj = cs.joint;
    const Cluster& c = model.cluster(k);
    const int pc = c.parent_cluster;

    if (opts.dense_operators && pc >= 0) {
      const auto& ps = ws.clusters()[static_cast<std::size_t>(pc)];
      cs.aprime = denseClusterMotionToParent(c, cj, ps.joint.nb) * ps.a + cj.SdotYdot;
    } else {
      const SpatialMotion<S> ap =
          pc >= 0 ? SpatialMotion<S>(Vec6<S>(ws.clusters()[static_cast<std::size_t>(pc)].a.segment(
                        6 * c.output_local_in_parent, 6)))
                  : a_base;
      for (int j = 0; j < cj.nb; ++j) {
        cs.aprime.segment(6 * j, 6) =
            cj.X_out[static_cast<std::size_t>(j)].apply(ap).vec() + cj.SdotYdot.segment(6 * j, 6);
      }
    }
    cs.scr_m.noalias() = cs.U.transpose() * cs.aprime;
    cs.scr_m = cs.u - cs.scr_m;
    cs.Dldlt.solveInPlace(cs.scr_m);
    cs.ydd = cs.scr_m;
    cs.a = cs.aprime;
    cs.a.noalias() += cj.Smat * cs.ydd;

    if (opts.compute_qdd || !c.constant_jacobian) {
      cs.qdd.noalias() = cj.G * cs.ydd;
      cs.qdd += cj.g;
    }
  }

  AbaResult<S> res;
  res.ydd.resize(model.numIndependent());
  for (int k = 0; k < nk; ++k) {
    res.ydd.segment(model.yOffset(k), model.cluster(k).ndof) = ws.clusters()[static_cast<std::size_t>(k)].ydd;
  }
  if (opts.compute_qdd) {
    res.qdd.resize(model.nq());
    for (int k = 0; k < nk; ++k) {
      const Cluster& c = model.cluster(k);
      for (int j = 0; j < c.nf; ++j) {
        res.qdd(c.bodies[static_cast<std::size_t>(j)] - 1) = ws.clusters()[static_cast<std::size_t>(k)].qdd(j);
      }
    }
  }
  return res;
}

/// Constraint-embedding RNEA: generalized active forces that produce the
/// prescribed independent accelerations.  Per-body cluster joint forces are
/// left in the workspace (`clusters()[k].f`).
template <typename S>
VecX<S> clusterRnea(const Model& model, const DynamicsState& st, const Eigen::VectorXd& ydd,
                    const Eigen::Vector3d& gravity, Workspace<S>& ws, const EvalOptions& opts = {}) {
  detail::checkStateSizes(model, st, false);
  if (ydd.size() != model.numIndependent()) {
    throw ModelError("dynamics state mismatch: ydd has wrong dimension");
  }
  const int nk = model.numClusters();
  const SpatialMotion<S> a_base(Vec3<S>::Zero(), (-gravity).cast<S>().eval());

  for (int k = 0; k < nk; ++k) {
    detail::stageCluster(model, k, st, ws, opts);
    auto& cs = ws.clusters()[static_cast<std::size_t>(k)];
    auto& cj = cs.joint;
    const Cluster& c = model.cluster(k);
    for (int i = 0; i < cj.m; ++i) cs.ydd(i) = S(ydd(model.yOffset(k) + i));

    const int pc = c.parent_cluster;
    if (opts.dense_operators && pc >= 0) {
      const auto& ps = ws.clusters()[static_cast<std::size_t>(pc)];
      cs.aprime = denseClusterMotionToParent(c, cj, ps.joint.nb) * ps.a + cj.SdotYdot;
    } else {
      const SpatialMotion<S> ap =
          pc >= 0 ? SpatialMotion<S>(Vec6<S>(ws.clusters()[static_cast<std::size_t>(pc)].a.segment(
                        6 * c.output_local_in_parent, 6)))
                  : a_base;
      for (int j = 0; j < cj.nb; ++j) {
        cs.aprime.segment(6 * j, 6) =
            cj.X_out[static_cast<std::size_t>(j)].apply(ap).vec() + cj.SdotYdot.segment(6 * j, 6);
      }
    }
    cs.a = cs.aprime;
    cs.a.noalias() += cj.Smat * cs.ydd;

    // f_net = I a + v x* I v  (the bias part already sits in pA)
    cs.f = cs.pA;
    for (int j = 0; j < cj.nb; ++j) {
      const SpatialMotion<S> aj(Vec6<S>(cs.a.segment(6 * j, 6)));
      cs.f.segment(6 * j, 6) += cj.inertia[static_cast<std::size_t>(j)].apply(aj).vec();
    }
  }

  for (int k = nk - 1; k >= 0; --k) {
    auto& cs = ws.clusters()[static_cast<std::size_t>(k)];
    auto& cj = cs.joint;
    const Cluster& c = model.cluster(k);
    cs.tauk.noalias() = cj.Smat.transpose() * cs.f;
    const int pc = c.parent_cluster;
    if (pc >= 0) {
      auto& ps = ws.clusters()[static_cast<std::size_t>(pc)];
      const int pos = c.output_local_in_parent;
      for (int j = 0; j < cj.nb; ++j) {
        ps.f.segment(6 * pos, 6) +=
            cj.X_out[static_cast<std::size_t>(j)]
                .applyTransposeForce(SpatialForce<S>(Vec6<S>(cs.f.segment(6 * j, 6))))
                .vec();
      }
    }
  }

  VecX<S> tau(model.numIndependent());
  for (int k = 0; k < nk; ++k) {
    tau.segment(model.yOffset(k), model.cluster(k).ndof) = ws.clusters()[static_cast<std::size_t>(k)].tauk;
  }
  return tau;
}

// ---------------------------------------------------------------------------
// Approximate (armature) dynamics
// ---------------------------------------------------------------------------

/// Rotor-free spanning tree with gear-ratio-squared rotor inertias added to
/// the corresponding link coordinates.
struct ReducedModel {
  Model model;
  Eigen::VectorXd armature;        // per reduced coordinate
  std::vector<int> body_of_coord;  // reduced coordinate -> full-model body id
  std::vector<int> y_of_coord;     // reduced coordinate -> independent coordinate index
  Eigen::MatrixXd force_map;       // tau_reduced = force_map * tau_tree(full)
};

inline ReducedModel makeArmatureReducedModel(const Model& full) {
  const int n = full.numBodies();
  std::vector<bool> is_rotor(static_cast<std::size_t>(n) + 1, false);

  for (const auto& c : full.clusters()) {
    if (c.bodies.size() == 1) continue;
    for (int li : c.constraints) {
      if (full.loops()[static_cast<std::size_t>(li)].kind != LoopConstraintSpec::Kind::LinearTransmission) {
        throw ModelError("approximate ABA unsupported: cluster " + std::to_string(c.id) +
                         " is not a linear transmission");
      }
    }
    for (int d : c.dependent_local) {
      const int rotor = c.bodies[static_cast<std::size_t>(d)];
      if (!full.tree().children[static_cast<std::size_t>(rotor)].empty()) {
        throw ModelError("approximate ABA unsupported: rotor body " + std::to_string(rotor) +
                         " is not a leaf");
      }
      is_rotor[static_cast<std::size_t>(rotor)] = true;
    }
  }

  std::vector<int> new_id(static_cast<std::size_t>(n) + 1, 0);
  std::vector<Body> kept;
  for (int b = 1; b <= n; ++b) {
    if (is_rotor[static_cast<std::size_t>(b)]) continue;
    Body nb = full.body(b);
    nb.id = static_cast<int>(kept.size()) + 1;
    nb.parent = new_id[static_cast<std::size_t>(nb.parent)];
    new_id[static_cast<std::size_t>(b)] = nb.id;
    kept.push_back(std::move(nb));
  }

  ReducedModel rm{Model(full.name() + "-armature", std::move(kept), {}), {}, {}, {}, {}};
  const int nr = rm.model.nq();
  rm.armature = Eigen::VectorXd::Zero(nr);
  rm.body_of_coord.assign(static_cast<std::size_t>(nr), 0);
  rm.y_of_coord.assign(static_cast<std::size_t>(nr), 0);
  rm.force_map = Eigen::MatrixXd::Zero(nr, full.nq());

  for (int kc = 0; kc < full.numClusters(); ++kc) {
    const Cluster& c = full.cluster(kc);
    for (int i = 0; i < c.ndof; ++i) {
      const int body = c.bodies[static_cast<std::size_t>(c.independent_local[static_cast<std::size_t>(i)])];
      const int rc = new_id[static_cast<std::size_t>(body)] - 1;
      rm.body_of_coord[static_cast<std::size_t>(rc)] = body;
      rm.y_of_coord[static_cast<std::size_t>(rc)] = full.yOffset(kc) + i;
      for (int j = 0; j < c.nf; ++j) {
        rm.force_map(rc, c.bodies[static_cast<std::size_t>(j)] - 1) = c.G_const(j, i);
      }
    }
    // Reflect each rotor onto the link coordinate it drives (the strongest
    // coupling in its G row; ties resolve to the most distal link).
    for (int d = 0; d < c.nl; ++d) {
      const int dep_local = c.dependent_local[static_cast<std::size_t>(d)];
      const int rotor = c.bodies[static_cast<std::size_t>(dep_local)];
      int best = 0;
      for (int i = 1; i < c.ndof; ++i) {
        if (std::abs(c.G_const(dep_local, i)) >= std::abs(c.G_const(dep_local, best))) best = i;
      }
      const double ratio = c.G_const(dep_local, best);
      const Body& rb = full.body(rotor);
      const auto jk = jcalc<double>(rb.joint, 0.0, 0.0);
      const double axial = jk.S.dot(rb.inertia.matrix() * jk.S);
      const int link_body = c.bodies[static_cast<std::size_t>(c.independent_local[static_cast<std::size_t>(best)])];
      rm.armature(new_id[static_cast<std::size_t>(link_body)] - 1) += ratio * ratio * axial;
    }
  }
  return rm;
}

/// Standard ABA on the reduced (rotor-free) tree with the armature reflected
/// onto the joint-space inertia.
template <typename S>
VecX<S> approximateAba(const ReducedModel& rm, const DynamicsState& st, const Eigen::Vector3d& gravity) {
  const int nr = rm.model.nq();
  VecX<S> q(nr), qd(nr), tau(nr);
  for (int rc = 0; rc < nr; ++rc) {
    const int body = rm.body_of_coord[static_cast<std::size_t>(rc)];
    const int yi = rm.y_of_coord[static_cast<std::size_t>(rc)];
    q(rc) = st.q.size() > 0 ? S(st.q(body - 1)) : S(st.y(yi));
    qd(rc) = st.qd.size() > 0 ? S(st.qd(body - 1)) : S(st.yd(yi));
    tau(rc) = st.tau.size() > 0 ? S(st.tau(yi)) : S(rm.force_map.row(rc).dot(st.tau_tree));
  }
  return treeAba<S>(rm.model, q, qd, tau, gravity, &rm.armature);
}

// ---------------------------------------------------------------------------
// Inverse-dynamics accuracy experiment
// ---------------------------------------------------------------------------

/// Torque traces for synchronized sinusoidal joint trajectories
/// y_j(t) = A sin(2 pi w t), computed by the exact constraint-embedding
/// RNEA, the plain RNEA on the rotor-free tree, and the armature RNEA.
struct IdErrorTraces {
  std::vector<double> time;
  Eigen::MatrixXd exact, unconstrained, approximate;  // sample x coordinate
  Eigen::VectorXd rms_unconstrained, rms_approximate;
};

inline IdErrorTraces idErrorExperiment(const Model& model, double amplitude, double omega, double dt,
                                       double duration, const Eigen::Vector3d& gravity) {
  const ReducedModel rm = makeArmatureReducedModel(model);
  const int nr = rm.model.nq();
  Workspace<double> ws(model);

  const int samples = static_cast<int>(duration / dt) + 1;
  IdErrorTraces out;
  out.time.resize(static_cast<std::size_t>(samples));
  out.exact.resize(samples, nr);
  out.unconstrained.resize(samples, nr);
  out.approximate.resize(samples, nr);

  const double twopiw = 2.0 * M_PI * omega;
  for (int s = 0; s < samples; ++s) {
    const double t = s * dt;
    out.time[static_cast<std::size_t>(s)] = t;
    Eigen::VectorXd y = Eigen::VectorXd::Constant(model.numIndependent(), amplitude * std::sin(twopiw * t));
    Eigen::VectorXd yd = Eigen::VectorXd::Constant(model.numIndependent(), amplitude * twopiw * std::cos(twopiw * t));
    Eigen::VectorXd ydd =
        Eigen::VectorXd::Constant(model.numIndependent(), -amplitude * twopiw * twopiw * std::sin(twopiw * t));

    DynamicsState st;
    st.y = y;
    st.yd = yd;
    const Eigen::VectorXd tau_exact = clusterRnea<double>(model, st, ydd, gravity, ws);

    Eigen::VectorXd qr(nr), qdr(nr), qddr(nr);
    for (int rc = 0; rc < nr; ++rc) {
      const int yi = rm.y_of_coord[static_cast<std::size_t>(rc)];
      qr(rc) = y(yi);
      qdr(rc) = yd(yi);
      qddr(rc) = ydd(yi);
      out.exact(s, rc) = tau_exact(yi);
    }
    out.unconstrained.row(s) = treeRnea<double>(rm.model, qr, qdr, qddr, gravity, nullptr).transpose();
    out.approximate.row(s) = treeRnea<double>(rm.model, qr, qdr, qddr, gravity, &rm.armature).transpose();
  }

  out.rms_unconstrained =
      (out.unconstrained - out.exact).array().square().colwise().mean().sqrt().matrix().transpose();
  out.rms_approximate =
      (out.approximate - out.exact).array().square().colwise().mean().sqrt().matrix().transpose();
  return out;
}

template <typename S>
Eigen::VectorXd toDoubleVector(const VecX<S>& v) {
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out(i) = toDouble(v(i));
  return out;
}

}  // namespace clusterdyn
