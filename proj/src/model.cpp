#include "clusterdyn/model.hpp"

#include "clusterdyn/joints.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace clusterdyn {

namespace {

using json = nlohmann::json;

std::string bodyLabel(const Body& b) {
  std::ostringstream os;
  os << "body " << b.id << " (\"" << b.name << "\")";
  return os.str();
}

/// Nearest common ancestor of a set of bodies (0 = base if none deeper).
int nearestCommonAncestor(const SpanningTree& tree, const std::vector<int>& ids) {
  if (ids.empty()) return 0;
  std::vector<int> common = tree.support[static_cast<std::size_t>(ids.front())];
  for (std::size_t n = 1; n < ids.size(); ++n) {
    const auto& sup = tree.support[static_cast<std::size_t>(ids[n])];
    std::vector<int> next;
    std::set_intersection(common.begin(), common.end(), sup.begin(), sup.end(), std::back_inserter(next));
    common = std::move(next);
    if (common.empty()) return 0;
  }
  return common.back();
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) { parent[static_cast<std::size_t>(find(a))] = find(b); }
};

}  // namespace

SpanningTree buildSpanningTree(const std::vector<Body>& bodies) {
  const int n = static_cast<int>(bodies.size());
  SpanningTree tree;
  tree.parent.assign(static_cast<std::size_t>(n) + 1, -1);
  tree.children.assign(static_cast<std::size_t>(n) + 1, {});
  tree.support.assign(static_cast<std::size_t>(n) + 1, {});

  for (int i = 1; i <= n; ++i) {
    const Body& b = bodies[static_cast<std::size_t>(i - 1)];
    if (b.id != 0 && b.id != i) {  // id 0 means "assign from position"
      throw ModelError("numbering violation: " + bodyLabel(b) + " appears at position " + std::to_string(i));
    }
    if (b.parent < 0 || b.parent > n) {
      throw ModelError("unknown parent: body " + std::to_string(b.parent) + " referenced by " + bodyLabel(b) +
                       " does not exist");
    }
    if (b.parent >= i) {
      throw ModelError("numbering violation: " + bodyLabel(b) + " has parent " + std::to_string(b.parent) +
                       " >= its own id (a cycle or non-regular numbering)");
    }
    tree.parent[static_cast<std::size_t>(i)] = b.parent;
    tree.children[static_cast<std::size_t>(b.parent)].push_back(i);
    tree.support[static_cast<std::size_t>(i)] = tree.support[static_cast<std::size_t>(b.parent)];
    tree.support[static_cast<std::size_t>(i)].push_back(i);
  }
  return tree;
}

ClusterTree buildClusterTree(const std::vector<Body>& bodies, const SpanningTree& tree,
                             const std::vector<LoopConstraintSpec>& loops) {
  const int n = static_cast<int>(bodies.size());

  // Closure of each loop: involved bodies plus every body strictly between
  // them and their nearest common ancestor, so clusters stay internally
  // connected through the spanning tree.
  std::vector<std::vector<int>> closures;
  closures.reserve(loops.size());
  for (const auto& spec : loops) {
    std::set<int> closure(spec.bodies.begin(), spec.bodies.end());
    const int nca = nearestCommonAncestor(tree, spec.bodies);
    for (int b : spec.bodies) {
      for (int x = b; x != nca && x != 0; x = tree.parent[static_cast<std::size_t>(x)]) {
        closure.insert(x);
      }
    }
    closures.emplace_back(closure.begin(), closure.end());
  }

  // Transitively merge closures that share any body (nested/parallel loops).
  UnionFind uf(n + 1);
  std::vector<int> owner(static_cast<std::size_t>(n) + 1, -1);
  for (std::size_t li = 0; li < closures.size(); ++li) {
    for (int b : closures[li]) {
      if (owner[static_cast<std::size_t>(b)] < 0) {
        owner[static_cast<std::size_t>(b)] = b;
      }
      uf.unite(b, closures[li].front());
    }
  }

  std::vector<std::vector<int>> groups(static_cast<std::size_t>(n) + 1);
  for (int b = 1; b <= n; ++b) {
    if (owner[static_cast<std::size_t>(b)] >= 0) {
      groups[static_cast<std::size_t>(uf.find(b))].push_back(b);
    } else {
      groups[static_cast<std::size_t>(b)].push_back(b);  // singleton cluster
    }
  }

  ClusterTree ct;
  for (int b = 1; b <= n; ++b) {
    auto& g = groups[static_cast<std::size_t>(b)];
    if (g.empty()) continue;
    std::sort(g.begin(), g.end());
    Cluster c;
    c.id = g.front();
    c.bodies = g;
    ct.clusters.push_back(std::move(c));
  }
  std::sort(ct.clusters.begin(), ct.clusters.end(), [](const Cluster& a, const Cluster& b) { return a.id < b.id; });

  ct.body_to_cluster.assign(static_cast<std::size_t>(n) + 1, -1);
  ct.body_local_index.assign(static_cast<std::size_t>(n) + 1, -1);
  for (std::size_t k = 0; k < ct.clusters.size(); ++k) {
    const auto& c = ct.clusters[k];
    for (std::size_t j = 0; j < c.bodies.size(); ++j) {
      ct.body_to_cluster[static_cast<std::size_t>(c.bodies[j])] = static_cast<int>(k);
      ct.body_local_index[static_cast<std::size_t>(c.bodies[j])] = static_cast<int>(j);
    }
  }

  // Output body, parent cluster, and intra-cluster parent links.
  for (std::size_t k = 0; k < ct.clusters.size(); ++k) {
    Cluster& c = ct.clusters[k];
    c.local_parent.assign(c.bodies.size(), -1);
    int output = -1;
    for (std::size_t j = 0; j < c.bodies.size(); ++j) {
      const int p = tree.parent[static_cast<std::size_t>(c.bodies[j])];
      const bool inside = ct.body_to_cluster[static_cast<std::size_t>(p)] == static_cast<int>(k) && p != 0;
      if (inside) {
        c.local_parent[j] = ct.body_local_index[static_cast<std::size_t>(p)];
      } else {
        if (output >= 0 && output != p) {
          throw ModelError("unsupported topology: cluster " + std::to_string(c.id) +
                           " has multiple distinct output bodies (" + std::to_string(output) + ", " +
                           std::to_string(p) + ")");
        }
        output = p;
      }
    }
    c.output_body = output;
    c.parent_cluster = output == 0 ? -1 : ct.body_to_cluster[static_cast<std::size_t>(output)];
    c.output_local_in_parent = output == 0 ? -1 : ct.body_local_index[static_cast<std::size_t>(output)];
    if (c.parent_cluster >= static_cast<int>(k)) {
      throw ModelError("cluster tree is not regularly numbered");  // unreachable with regular body numbering
    }
  }

  // Attach loop constraints to the (unique) cluster containing their bodies.
  for (std::size_t li = 0; li < loops.size(); ++li) {
    const int k = ct.body_to_cluster[static_cast<std::size_t>(loops[li].bodies.front())];
    for (int b : loops[li].bodies) {
      if (ct.body_to_cluster[static_cast<std::size_t>(b)] != k) {
        throw ModelError("internal error: loop constraint spans multiple clusters");
      }
    }
    ct.clusters[static_cast<std::size_t>(k)].constraints.push_back(static_cast<int>(li));
  }
  return ct;
}

namespace {

void normalizeSpec(LoopConstraintSpec& spec, int num_bodies, const SpanningTree& tree, std::size_t index) {
  const std::string label = "loop constraint " + std::to_string(index);

  if (spec.kind == LoopConstraintSpec::Kind::ChainedTransmission) {
    if (spec.branch1.empty() || spec.branch2.empty()) {
      throw ModelError(label + ": chained transmission requires two non-empty branches");
    }
    if (spec.eta == 0.0) throw ModelError(label + ": transmission ratio eta must be nonzero");
    spec.bodies = spec.branch1;
    spec.bodies.insert(spec.bodies.end(), spec.branch2.begin(), spec.branch2.end());
  }
  if (spec.kind == LoopConstraintSpec::Kind::FourBar) {
    // The four-bar closure involves every coordinate on the pin support
    // paths down from the loop's nearest common ancestor.
    for (int b : {spec.rod_body, spec.anchor_body}) {
      if (b < 1 || b > num_bodies) {
        throw ModelError(label + ": constraint on unknown body " + std::to_string(b));
      }
      spec.bodies.push_back(b);
    }
    const int nca = nearestCommonAncestor(tree, {spec.rod_body, spec.anchor_body});
    for (int b : {spec.rod_body, spec.anchor_body}) {
      for (int x = b; x != nca && x != 0; x = tree.parent[static_cast<std::size_t>(x)]) {
        spec.bodies.push_back(x);
      }
    }
  }

  std::sort(spec.bodies.begin(), spec.bodies.end());
  spec.bodies.erase(std::unique(spec.bodies.begin(), spec.bodies.end()), spec.bodies.end());
  if (spec.bodies.size() < 2) throw ModelError(label + ": needs at least two involved bodies");
  for (int b : spec.bodies) {
    if (b < 1 || b > num_bodies) {
      throw ModelError(label + ": constraint on unknown body " + std::to_string(b));
    }
  }

  const int rows = spec.kind == LoopConstraintSpec::Kind::FourBar ? 2
                   : spec.kind == LoopConstraintSpec::Kind::ChainedTransmission
                       ? 1
                       : static_cast<int>(spec.G.rows() - spec.G.cols());

  if (spec.kind == LoopConstraintSpec::Kind::LinearTransmission) {
    if (spec.independent.empty()) {
      throw ModelError(label + ": linear transmission requires an explicit independent-coordinate list");
    }
    if (spec.G.rows() != static_cast<Eigen::Index>(spec.bodies.size()) ||
        spec.G.cols() != static_cast<Eigen::Index>(spec.independent.size())) {
      throw ModelError(label + ": G must be (#bodies x #independent)");
    }
  } else if (spec.independent.empty()) {
    // Default: lowest-numbered coordinates are independent, so the highest
    // `rows` involved coordinates become dependent.
    const int m = static_cast<int>(spec.bodies.size()) - rows;
    if (m < 1) throw ModelError(label + ": overconstrained cluster (independent DoF <= 0)");
    spec.independent.assign(spec.bodies.begin(), spec.bodies.begin() + m);
  }

  std::sort(spec.independent.begin(), spec.independent.end());
  for (int b : spec.independent) {
    if (std::find(spec.bodies.begin(), spec.bodies.end(), b) == spec.bodies.end()) {
      throw ModelError(label + ": independent coordinate " + std::to_string(b) + " is not an involved body");
    }
  }
  if (static_cast<int>(spec.bodies.size() - spec.independent.size()) != rows) {
    throw ModelError(label + ": independent-coordinate count must equal spanning DoF minus constraint rows");
  }

  if (spec.kind == LoopConstraintSpec::Kind::LinearTransmission) {
    // The stored explicit form must carry identity rows at the independent
    // coordinates so that extraction round-trips exactly.
    for (std::size_t c = 0; c < spec.independent.size(); ++c) {
      const auto r = static_cast<Eigen::Index>(
          std::find(spec.bodies.begin(), spec.bodies.end(), spec.independent[c]) - spec.bodies.begin());
      Eigen::RowVectorXd unit = Eigen::RowVectorXd::Zero(spec.G.cols());
      unit(static_cast<Eigen::Index>(c)) = 1.0;
      if ((spec.G.row(r) - unit).cwiseAbs().maxCoeff() > 1e-12) {
        throw ModelError(label + ": G must have identity rows at the independent coordinates");
      }
    }
  }
}

}  // namespace

Model::Model(std::string name, std::vector<Body> bodies, std::vector<LoopConstraintSpec> loops)
    : name_(std::move(name)), bodies_(std::move(bodies)), loops_(std::move(loops)) {
  for (std::size_t i = 0; i < bodies_.size(); ++i) {
    if (bodies_[i].id == 0) bodies_[i].id = static_cast<int>(i) + 1;
  }
  tree_ = buildSpanningTree(bodies_);
  for (std::size_t li = 0; li < loops_.size(); ++li) {
    normalizeSpec(loops_[li], numBodies(), tree_, li);
  }
  ctree_ = buildClusterTree(bodies_, tree_, loops_);

  for (auto& c : ctree_.clusters) {
    c.nf = static_cast<int>(c.bodies.size());
    c.nl = 0;
    for (int li : c.constraints) c.nl += loops_[static_cast<std::size_t>(li)].rows();
    c.ndof = c.nf - c.nl;
    if (c.ndof < 1) {
      throw ModelError("overconstrained cluster " + std::to_string(c.id) + " (independent DoF <= 0)");
    }

    // Dependent coordinates come from the constraint specs; everything else
    // in the cluster is independent.
    std::vector<bool> dep(static_cast<std::size_t>(c.nf), false);
    for (int li : c.constraints) {
      const auto& spec = loops_[static_cast<std::size_t>(li)];
      for (int b : spec.bodies) {
        if (std::find(spec.independent.begin(), spec.independent.end(), b) != spec.independent.end()) continue;
        const int l = ctree_.body_local_index[static_cast<std::size_t>(b)];
        if (dep[static_cast<std::size_t>(l)]) {
          throw ModelError("cluster " + std::to_string(c.id) + ": coordinate of body " + std::to_string(b) +
                           " is dependent in more than one loop constraint");
        }
        dep[static_cast<std::size_t>(l)] = true;
      }
    }
    c.independent_local.clear();
    c.dependent_local.clear();
    for (int l = 0; l < c.nf; ++l) {
      (dep[static_cast<std::size_t>(l)] ? c.dependent_local : c.independent_local).push_back(l);
    }

    c.constant_jacobian = true;
    for (int li : c.constraints) {
      if (loops_[static_cast<std::size_t>(li)].kind == LoopConstraintSpec::Kind::FourBar) {
        c.constant_jacobian = false;
      }
    }
    if (c.constant_jacobian && c.nl > 0) {
      c.K_const.resize(c.nl, c.nf);
      int row = 0;
      for (int li : c.constraints) {
        const auto& spec = loops_[static_cast<std::size_t>(li)];
        constantConstraintRows<double>(spec, ctree_, c.K_const.middleRows(row, spec.rows()));
        row += spec.rows();
      }
      try {
        auto expl = extractExplicit<double>(c.K_const, Eigen::VectorXd::Zero(c.nl), c.independent_local);
        c.G_const = expl.G;
      } catch (const NumericalError& e) {
        throw ModelError("cluster " + std::to_string(c.id) + ": " + e.what());
      }
    } else if (c.nl == 0) {
      c.K_const.resize(0, c.nf);
      c.G_const = Eigen::MatrixXd::Identity(c.nf, c.nf);
    }
  }

  // Planarity requirements for four-bar clusters: revolute z joints and
  // in-plane fixed transforms along the pin support paths.
  for (const auto& spec : loops_) {
    if (spec.kind != LoopConstraintSpec::Kind::FourBar) continue;
    std::set<int> involved;
    for (int endpoint : {spec.rod_body, spec.anchor_body}) {
      const int k = ctree_.body_to_cluster[static_cast<std::size_t>(endpoint)];
      for (int x = endpoint; x != 0 && ctree_.body_to_cluster[static_cast<std::size_t>(x)] == k;
           x = tree_.parent[static_cast<std::size_t>(x)]) {
        involved.insert(x);
      }
    }
    for (int b : involved) {
      const Body& body = this->body(b);
      const Eigen::Matrix3d E = body.X_T.rotation();
      const bool planar = body.joint.type == TreeJointSpec::Type::Revolute &&
                          (body.joint.axis - Eigen::Vector3d::UnitZ()).norm() < 1e-12 &&
                          std::abs(E(2, 2) - 1.0) < 1e-9 && std::abs(E(0, 2)) < 1e-9 &&
                          std::abs(E(1, 2)) < 1e-9 && std::abs(E(2, 0)) < 1e-9 &&
                          std::abs(E(2, 1)) < 1e-9 && std::abs(body.X_T.translation().z()) < 1e-9;
      if (!planar) {
        throw ModelError("out-of-plane four-bar: " + bodyLabel(body) +
                         " must be revolute about +z with an in-plane fixed transform");
      }
    }
    if (std::abs(spec.rod_pin.z()) > 1e-9 || std::abs(spec.anchor_pin.z()) > 1e-9) {
      throw ModelError("out-of-plane four-bar: pin offsets must lie in the x-y plane");
    }
  }

  y_offset_.clear();
  ny_ = 0;
  for (const auto& c : ctree_.clusters) {
    y_offset_.push_back(ny_);
    ny_ += c.ndof;
  }
}

std::vector<Diagnostic> validateModel(const Model& model) {
  std::vector<Diagnostic> diags;
  auto error = [&](const std::string& code, const std::string& msg) {
    diags.push_back({Diagnostic::Severity::Error, code, msg});
  };

  for (const auto& b : model.bodies()) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> es(b.inertia.matrix());
    if (es.eigenvalues().minCoeff() <= 0.0) {
      error("inertia_not_pd", "inertia not PD for body " + std::to_string(b.id) + " (\"" + b.name + "\")");
    }
    if (std::abs(b.joint.axis.norm() - 1.0) > 1e-12) {
      error("axis_not_unit", "joint axis of body " + std::to_string(b.id) + " is not unit length");
    }
  }

  // Cluster-tree invariants: full single coverage, regular numbering, one
  // output body per cluster.
  std::vector<int> seen(static_cast<std::size_t>(model.numBodies()) + 1, 0);
  for (std::size_t k = 0; k < model.clusters().size(); ++k) {
    const Cluster& c = model.clusters()[k];
    if (c.id != c.bodies.front()) error("cluster_id", "cluster id must be its lowest body id");
    if (c.parent_cluster >= static_cast<int>(k)) error("cluster_order", "cluster tree not regularly numbered");
    for (std::size_t j = 0; j < c.bodies.size(); ++j) {
      seen[static_cast<std::size_t>(c.bodies[j])]++;
      const int p = model.tree().parent[static_cast<std::size_t>(c.bodies[j])];
      if (c.local_parent[j] < 0 && p != c.output_body) {
        error("cluster_output", "base bodies of cluster " + std::to_string(c.id) + " do not share one parent");
      }
    }
    // Constraint dimension consistency: n_c = 6 n_b - (n_f - n_l).
    const int nc = 6 * static_cast<int>(c.bodies.size()) - c.ndof;
    if (c.ndof < 1 || nc < 0) {
      error("cluster_dims", "cluster " + std::to_string(c.id) + " has inconsistent constraint dimensions");
    }
    if (c.constant_jacobian && c.nl > 0) {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(c.K_const);
      lu.setThreshold(1e-10);
      if (lu.rank() < c.nl) {
        error("constraint_rank", "cluster " + std::to_string(c.id) + " has rank-deficient constraint rows");
      }
    }
  }
  for (int b = 1; b <= model.numBodies(); ++b) {
    if (seen[static_cast<std::size_t>(b)] != 1) {
      error("cluster_cover", "body " + std::to_string(b) + " is not covered exactly once by the cluster tree");
    }
  }

  // The number of independent loops must equal the number of chords of the
  // connectivity graph.
  const int edges = model.numBodies() + static_cast<int>(model.loops().size());
  const int nodes = model.numBodies() + 1;
  if (static_cast<int>(model.loops().size()) != edges - nodes + 1) {
    error("loop_count", "independent loop count does not match chord count");
  }
  return diags;
}

// ---------------------------------------------------------------------------
// JSON document loading
// ---------------------------------------------------------------------------

namespace {

Eigen::Vector3d parseVec3(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 3) throw ModelError("parse error: " + ctx + " must be a 3-array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::Matrix3d parseMat3(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 3) throw ModelError("parse error: " + ctx + " must be a 3x3 array");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    if (!j[static_cast<std::size_t>(r)].is_array() || j[static_cast<std::size_t>(r)].size() != 3) {
      throw ModelError("parse error: " + ctx + " must be a 3x3 array");
    }
    for (int c = 0; c < 3; ++c) {
      m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

SpatialTransform<double> parseTransform(const json& j, const std::string& ctx) {
  Eigen::Matrix3d E = Eigen::Matrix3d::Identity();
  Eigen::Vector3d r = Eigen::Vector3d::Zero();
  if (j.contains("rotation")) E = parseMat3(j.at("rotation"), ctx + ".rotation");
  if (j.contains("translation")) r = parseVec3(j.at("translation"), ctx + ".translation");
  if ((E.transpose() * E - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      std::abs(E.determinant() - 1.0) > 1e-9) {
    throw ModelError("parse error: " + ctx + ".rotation is not orthonormal with det +1");
  }
  return SpatialTransform<double>(E, r);
}

std::vector<int> parseIds(const json& j) {
  std::vector<int> v;
  for (const auto& e : j) v.push_back(e.get<int>());
  return v;
}

Model parseModel(const json& doc) {
  std::vector<Body> bodies;
  if (!doc.contains("bodies") || !doc.at("bodies").is_array()) {
    throw ModelError("parse error: document must contain a bodies[] array");
  }
  int id = 0;
  for (const auto& jb : doc.at("bodies")) {
    Body b;
    b.id = ++id;
    b.name = jb.value("name", "body" + std::to_string(id));
    if (!jb.contains("parent")) throw ModelError("parse error: body \"" + b.name + "\" is missing parent");
    b.parent = jb.at("parent").get<int>();

    const json& jj = jb.at("joint");
    const std::string type = jj.at("type").get<std::string>();
    if (type == "revolute") {
      b.joint.type = TreeJointSpec::Type::Revolute;
    } else if (type == "prismatic") {
      b.joint.type = TreeJointSpec::Type::Prismatic;
    } else {
      throw ModelError("parse error: unknown joint type \"" + type + "\"");
    }
    b.joint.axis = parseVec3(jj.at("axis"), "joint.axis");

    if (jb.contains("X_T")) b.X_T = parseTransform(jb.at("X_T"), "X_T of " + b.name);

    const json& ji = jb.at("inertia");
    const double mass = ji.at("mass").get<double>();
    const Eigen::Vector3d com = ji.contains("com") ? parseVec3(ji.at("com"), "inertia.com") : Eigen::Vector3d::Zero();
    const Eigen::Matrix3d I = parseMat3(ji.at("I"), "inertia.I");
    b.inertia = SpatialInertia<double>::FromMassComInertia(mass, com, I);
    bodies.push_back(std::move(b));
  }

  std::vector<LoopConstraintSpec> loops;
  if (doc.contains("loop_constraints")) {
    for (const auto& jl : doc.at("loop_constraints")) {
      LoopConstraintSpec spec;
      const std::string kind = jl.at("kind").get<std::string>();
      if (kind == "linear_transmission") {
        spec.kind = LoopConstraintSpec::Kind::LinearTransmission;
        spec.bodies = parseIds(jl.at("bodies"));
        spec.independent = parseIds(jl.at("independent"));
        const json& jg = jl.at("G");
        spec.G.resize(static_cast<Eigen::Index>(jg.size()),
                      static_cast<Eigen::Index>(jg.empty() ? 0 : jg[0].size()));
        for (Eigen::Index r = 0; r < spec.G.rows(); ++r) {
          for (Eigen::Index c = 0; c < spec.G.cols(); ++c) {
            spec.G(r, c) = jg[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
          }
        }
      } else if (kind == "chained_transmission") {
        spec.kind = LoopConstraintSpec::Kind::ChainedTransmission;
        spec.eta = jl.at("eta").get<double>();
        spec.branch1 = parseIds(jl.at("branch1"));
        spec.branch2 = parseIds(jl.at("branch2"));
        if (jl.contains("independent")) spec.independent = parseIds(jl.at("independent"));
      } else if (kind == "four_bar") {
        spec.kind = LoopConstraintSpec::Kind::FourBar;
        spec.bodies = jl.contains("bodies") ? parseIds(jl.at("bodies")) : std::vector<int>{};
        spec.rod_body = jl.at("rod").get<int>();
        spec.anchor_body = jl.at("anchor").get<int>();
        if (jl.contains("rod_length")) spec.rod_pin = Eigen::Vector3d(jl.at("rod_length").get<double>(), 0, 0);
        if (jl.contains("pin_offsets")) {
          const json& jp = jl.at("pin_offsets");
          if (jp.contains("rod")) spec.rod_pin = parseVec3(jp.at("rod"), "pin_offsets.rod");
          if (jp.contains("link")) spec.anchor_pin = parseVec3(jp.at("link"), "pin_offsets.link");
        }
        if (jl.contains("independent")) spec.independent = parseIds(jl.at("independent"));
      } else {
        throw ModelError("parse error: unknown loop constraint kind \"" + kind + "\"");
      }
      loops.push_back(std::move(spec));
    }
  }

  Model model(doc.value("name", "model"), std::move(bodies), std::move(loops));
  std::vector<Diagnostic> diags = validateModel(model);
  for (const auto& d : diags) {
    if (d.severity == Diagnostic::Severity::Error) {
      throw ModelError("invalid model: " + d.message);
    }
  }
  return model;
}

}  // namespace

Model Model::fromJsonText(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ModelError(std::string("parse error: ") + e.what());
  }
  return parseModel(doc);
}

Model Model::loadFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("parse error: cannot open model file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return fromJsonText(ss.str());
}

}  // namespace clusterdyn
