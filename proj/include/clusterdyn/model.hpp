// System description: bodies with tree joints, loop constraints, and the
// derived spanning tree and cluster tree.  A Model is immutable once built
// and can be shared across threads; all mutable evaluation state lives in
// per-call workspaces.
//
// Bodies are numbered 1..N with the regular numbering scheme (every parent
// id is smaller than its children's); body 0 is the fixed base.  Each tree
// joint has one coordinate, so spanning coordinate i-1 belongs to body i.
#pragma once

#include "clusterdyn/errors.hpp"
#include "clusterdyn/spatial.hpp"

#include <string>
#include <vector>

namespace clusterdyn {

struct TreeJointSpec {
  enum class Type { Revolute, Prismatic };
  Type type = Type::Revolute;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();  // unit length
};

struct Body {
  int id = 0;  // 1..N
  std::string name;
  int parent = 0;  // lambda(i), always < id
  TreeJointSpec joint;
  SpatialTransform<double> X_T;    // home-pose transform from the parent frame
  SpatialInertia<double> inertia;  // about the body frame origin
};

struct SpanningTree {
  std::vector<int> parent;                 // indexed by body id; parent[0] = -1
  std::vector<std::vector<int>> children;  // mu(i), indexed by body id incl. base
  std::vector<std::vector<int>> support;   // nu(i) ascending, excludes the base
};

/// Builds parent/children/support sets, verifying regular numbering.
SpanningTree buildSpanningTree(const std::vector<Body>& bodies);

struct LoopConstraintSpec {
  enum class Kind { LinearTransmission, ChainedTransmission, FourBar };

  Kind kind = Kind::LinearTransmission;
  std::vector<int> bodies;       // involved bodies, ascending
  std::vector<int> independent;  // body ids of independent coordinates

  // LinearTransmission: qdot over `bodies` = G * ydot over `independent`.
  // G carries identity rows at the independent coordinates.
  Eigen::MatrixXd G;

  // ChainedTransmission: sum of branch1 joint angles = eta * sum of branch2
  // joint angles (one constraint row).
  double eta = 1.0;
  std::vector<int> branch1, branch2;

  // FourBar: a connecting rod closes onto an anchor body through a revolute
  // pin; two position constraint rows in the output body's x-y plane.
  int rod_body = 0;
  int anchor_body = 0;
  Eigen::Vector3d rod_pin = Eigen::Vector3d::Zero();     // in rod frame
  Eigen::Vector3d anchor_pin = Eigen::Vector3d::Zero();  // in anchor frame

  /// Constraint rows contributed by this loop joint.
  int rows() const { return kind == Kind::FourBar ? 2 : (kind == Kind::ChainedTransmission ? 1 : static_cast<int>(bodies.size() - independent.size())); }
};

struct Cluster {
  int id = 0;                // lowest body id in the cluster
  std::vector<int> bodies;   // ascending
  int parent_cluster = -1;   // index into ClusterTree::clusters; -1 when the parent is the base
  int output_body = 0;       // o(k); 0 for clusters hanging off the base
  int output_local_in_parent = -1;  // local index of o(k) within the parent cluster
  std::vector<int> local_parent;    // per body: local index of its tree parent, -1 for base bodies

  std::vector<int> constraints;  // indices into Model::loops()

  int nf = 0;    // spanning coordinates (one per body)
  int nl = 0;    // stacked constraint rows
  int ndof = 0;  // independent coordinates m = nf - nl
  std::vector<int> independent_local;  // ascending local coordinate indices
  std::vector<int> dependent_local;

  // Transmission-only clusters have state-independent constraint data,
  // extracted once at load time.
  bool constant_jacobian = true;
  Eigen::MatrixXd K_const;  // nl x nf
  Eigen::MatrixXd G_const;  // nf x ndof
};

struct ClusterTree {
  std::vector<Cluster> clusters;      // ascending by id (regularly numbered)
  std::vector<int> body_to_cluster;   // body id -> cluster index
  std::vector<int> body_local_index;  // body id -> local index within its cluster
};

struct Diagnostic {
  enum class Severity { Error, Warning };
  Severity severity = Severity::Error;
  std::string code;
  std::string message;
};

class Model {
 public:
  Model(std::string name, std::vector<Body> bodies, std::vector<LoopConstraintSpec> loops);

  /// Parses and validates a model document; throws ModelError on any defect.
  static Model loadFile(const std::string& path);
  static Model fromJsonText(const std::string& text);

  const std::string& name() const { return name_; }
  int numBodies() const { return static_cast<int>(bodies_.size()); }
  int nq() const { return numBodies(); }
  int numIndependent() const { return ny_; }
  const std::vector<Body>& bodies() const { return bodies_; }
  const Body& body(int id) const { return bodies_.at(static_cast<std::size_t>(id - 1)); }
  const SpanningTree& tree() const { return tree_; }
  const std::vector<LoopConstraintSpec>& loops() const { return loops_; }
  const ClusterTree& clusterTree() const { return ctree_; }
  const std::vector<Cluster>& clusters() const { return ctree_.clusters; }
  const Cluster& cluster(int idx) const { return ctree_.clusters.at(static_cast<std::size_t>(idx)); }
  int numClusters() const { return static_cast<int>(ctree_.clusters.size()); }

  /// Global spanning coordinate of a body's joint.
  static int coordOfBody(int body_id) { return body_id - 1; }
  /// Offset of a cluster's independent coordinates within the stacked y vector.
  int yOffset(int cluster_idx) const { return y_offset_.at(static_cast<std::size_t>(cluster_idx)); }

 private:
  std::string name_;
  std::vector<Body> bodies_;
  std::vector<LoopConstraintSpec> loops_;
  SpanningTree tree_;
  ClusterTree ctree_;
  std::vector<int> y_offset_;
  int ny_ = 0;
};

/// Groups loop-involved bodies (plus connecting spanning-tree path bodies)
/// into clusters via union-find, leaving singletons elsewhere.  Throws on
/// topologies with multiple distinct output bodies for one cluster.
ClusterTree buildClusterTree(const std::vector<Body>& bodies, const SpanningTree& tree,
                             const std::vector<LoopConstraintSpec>& loops);

/// Semantic checks: inertia positive-definiteness, cluster-tree invariants,
/// and constraint dimension consistency.  Structural defects already throw
/// at construction time.
std::vector<Diagnostic> validateModel(const Model& model);

}  // namespace clusterdyn
