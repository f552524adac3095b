#include "clusterdyn/model.hpp"

#include "support/fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace clusterdyn;

namespace {

const char* kGearJson = R"({
  "name": "gear",
  "bodies": [
    {"name": "link", "parent": 0, "joint": {"type": "revolute", "axis": [0, 0, 1]},
     "X_T": {"translation": [0.5, 0, 0]},
     "inertia": {"mass": 1.0, "com": [0, 0, 0], "I": [[0.05, 0, 0], [0, 0.05, 0], [0, 0, 0.7]]}},
    {"name": "rotor", "parent": 0, "joint": {"type": "revolute", "axis": [0, 0, 1]},
     "inertia": {"mass": 0.2, "com": [0, 0, 0], "I": [[0.004, 0, 0], [0, 0.004, 0], [0, 0, 0.012]]}}
  ],
  "loop_constraints": [
    {"kind": "linear_transmission", "bodies": [1, 2], "G": [[1], [9]], "independent": [1]}
  ]
})";

/// Brute-force clustering oracle: merge loop closures to a fixpoint with
/// naive set unions, pulling in spanning-tree path bodies.
std::vector<std::set<int>> bruteForceClusters(const Model& m) {
  std::vector<std::set<int>> sets;
  for (const auto& spec : m.loops()) {
    std::set<int> s(spec.bodies.begin(), spec.bodies.end());
    // paths to the common ancestor
    std::vector<int> common = m.tree().support[static_cast<std::size_t>(spec.bodies.front())];
    for (int b : spec.bodies) {
      std::vector<int> next;
      const auto& sup = m.tree().support[static_cast<std::size_t>(b)];
      std::set_intersection(common.begin(), common.end(), sup.begin(), sup.end(), std::back_inserter(next));
      common = next;
    }
    const int nca = common.empty() ? 0 : common.back();
    for (int b : spec.bodies) {
      for (int x = b; x != nca && x != 0; x = m.tree().parent[static_cast<std::size_t>(x)]) s.insert(x);
    }
    sets.push_back(std::move(s));
  }
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < sets.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < sets.size() && !merged; ++j) {
        std::vector<int> inter;
        std::set_intersection(sets[i].begin(), sets[i].end(), sets[j].begin(), sets[j].end(),
                              std::back_inserter(inter));
        if (!inter.empty()) {
          sets[i].insert(sets[j].begin(), sets[j].end());
          sets.erase(sets.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
        }
      }
    }
  }
  std::set<int> used;
  for (const auto& s : sets) used.insert(s.begin(), s.end());
  for (int b = 1; b <= m.numBodies(); ++b) {
    if (!used.count(b)) sets.push_back({b});
  }
  std::sort(sets.begin(), sets.end(), [](const auto& a, const auto& b) { return *a.begin() < *b.begin(); });
  return sets;
}

Body simpleBody(int parent, const std::string& name) {
  Body b;
  b.parent = parent;
  b.name = name;
  b.inertia = testing::axialInertia(1.0, 0.3);
  return b;
}

LoopConstraintSpec gearSpec(int a, int b, double ratio) {
  LoopConstraintSpec s;
  s.kind = LoopConstraintSpec::Kind::LinearTransmission;
  s.bodies = {a, b};
  s.independent = {a};
  s.G.resize(2, 1);
  s.G << 1.0, ratio;
  return s;
}

}  // namespace

TEST_CASE("gear-pair document loads into one two-body cluster") {
  const Model m = Model::fromJsonText(kGearJson);
  CHECK(m.numBodies() == 2);
  CHECK(m.numClusters() == 1);
  CHECK(m.cluster(0).bodies == std::vector<int>{1, 2});
  CHECK(m.cluster(0).ndof == 1);
  CHECK(m.cluster(0).output_body == 0);
  CHECK(validateModel(m).empty());
}

TEST_CASE("single pendulum: one singleton cluster") {
  const Model m = testing::makePendulumModel();
  CHECK(m.numClusters() == 1);
  CHECK(m.cluster(0).bodies.size() == 1);
  CHECK(m.cluster(0).nl == 0);
  CHECK(m.cluster(0).ndof == 1);
}

TEST_CASE("numbering violation is rejected") {
  std::vector<Body> bodies;
  bodies.push_back(simpleBody(2, "a"));  // parent id > own id
  bodies.push_back(simpleBody(0, "b"));
  CHECK_THROWS_WITH_AS(Model("bad", bodies, {}), doctest::Contains("numbering violation"), ModelError);

  const char* bad_json = R"({"bodies": [
    {"name": "x", "parent": 3, "joint": {"type": "revolute", "axis": [0,0,1]},
     "inertia": {"mass": 1, "I": [[1,0,0],[0,1,0],[0,0,1]]}}
  ]})";
  CHECK_THROWS_AS(Model::fromJsonText(bad_json), ModelError);
}

TEST_CASE("constraint on unknown body is rejected") {
  std::vector<Body> bodies = {simpleBody(0, "a"), simpleBody(0, "b")};
  auto spec = gearSpec(1, 5, 2.0);
  CHECK_THROWS_WITH_AS(Model("bad", bodies, {spec}), doctest::Contains("unknown body"), ModelError);
}

TEST_CASE("overconstrained clusters are rejected") {
  std::vector<Body> bodies = {simpleBody(0, "a"), simpleBody(0, "b")};
  LoopConstraintSpec s1 = gearSpec(1, 2, 3.0);  // body 2 dependent
  LoopConstraintSpec s2;                        // body 1 dependent
  s2.kind = LoopConstraintSpec::Kind::LinearTransmission;
  s2.bodies = {1, 2};
  s2.independent = {2};
  s2.G.resize(2, 1);
  s2.G << 0.5, 1.0;
  CHECK_THROWS_WITH_AS(Model("bad", bodies, {s1, s2}), doctest::Contains("overconstrained"), ModelError);
}

TEST_CASE("spanning tree support and children sets") {
  // chain 0-1-2-3
  std::vector<Body> bodies = {simpleBody(0, "a"), simpleBody(1, "b"), simpleBody(2, "c")};
  const auto tree = buildSpanningTree(bodies);
  CHECK(tree.support[3] == std::vector<int>{1, 2, 3});
  CHECK(tree.children[0] == std::vector<int>{1});
  CHECK(tree.children[3].empty());  // leaf
}

TEST_CASE("nested and parallel loops merge into the expected clusters") {
  // 1 carries three subtrees: 2->6, 3->7, 4->5->8.  Chords (2,3) and (6,7)
  // nest; two chords at body 4 run in parallel.
  std::vector<Body> bodies;
  bodies.push_back(simpleBody(0, "b1"));
  bodies.push_back(simpleBody(1, "b2"));
  bodies.push_back(simpleBody(1, "b3"));
  bodies.push_back(simpleBody(1, "b4"));
  bodies.push_back(simpleBody(4, "b5"));
  bodies.push_back(simpleBody(2, "b6"));
  bodies.push_back(simpleBody(3, "b7"));
  bodies.push_back(simpleBody(5, "b8"));

  std::vector<LoopConstraintSpec> loops = {gearSpec(2, 3, 2.0), gearSpec(6, 7, 3.0), gearSpec(4, 5, 4.0),
                                           gearSpec(4, 8, 5.0)};
  const Model m("fig3", bodies, loops);

  CHECK(m.tree().children[1] == std::vector<int>{2, 3, 4});
  REQUIRE(m.numClusters() == 3);
  CHECK(m.cluster(0).bodies == std::vector<int>{1});
  CHECK(m.cluster(1).bodies == std::vector<int>{2, 3, 6, 7});
  CHECK(m.cluster(2).bodies == std::vector<int>{4, 5, 8});
  CHECK(m.cluster(1).output_body == 1);
  CHECK(m.cluster(2).output_body == 1);
  CHECK(validateModel(m).empty());
}

TEST_CASE("cluster partition matches the brute-force union oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const Model m = testing::makeRandomClusteredModel(rng, 4 + static_cast<int>(rng.next() % 9));
    const auto expected = bruteForceClusters(m);
    REQUIRE(m.numClusters() == static_cast<int>(expected.size()));
    for (int k = 0; k < m.numClusters(); ++k) {
      const std::set<int> got(m.cluster(k).bodies.begin(), m.cluster(k).bodies.end());
      CHECK(got == expected[static_cast<std::size_t>(k)]);
    }
  }
}

TEST_CASE("two loops sharing one body merge into a single cluster") {
  std::vector<Body> bodies = {simpleBody(0, "a"), simpleBody(0, "b"), simpleBody(1, "c")};
  // gear(1,2) and gear(1,3) share body 1
  std::vector<LoopConstraintSpec> loops = {gearSpec(1, 2, 2.0), gearSpec(1, 3, 3.0)};
  const Model m("shared", bodies, loops);
  CHECK(m.numClusters() == 1);
  CHECK(m.cluster(0).bodies == std::vector<int>{1, 2, 3});
  CHECK(m.cluster(0).ndof == 1);
}

TEST_CASE("loop-free models reduce to the spanning tree structure") {
  Rng rng(12);
  const Model m = testing::makeRandomTree(rng, 9);
  REQUIRE(m.numClusters() == m.numBodies());
  for (int k = 0; k < m.numClusters(); ++k) {
    CHECK(m.cluster(k).bodies.size() == 1);
    CHECK(m.cluster(k).bodies.front() == k + 1);
    CHECK(m.cluster(k).output_body == m.tree().parent[static_cast<std::size_t>(k + 1)]);
    CHECK(m.cluster(k).constant_jacobian);
  }
}

TEST_CASE("validate_model flags non-PD inertia") {
  std::vector<Body> bodies = {simpleBody(0, "a")};
  bodies[0].inertia = SpatialInertia<double>(0.0, Eigen::Vector3d::Zero(), Eigen::Matrix3d::Zero());
  const Model m("zero-mass", bodies, {});
  const auto diags = validateModel(m);
  REQUIRE_FALSE(diags.empty());
  CHECK(diags.front().message.find("inertia not PD") != std::string::npos);
}

TEST_CASE("four-bar cluster dimension count: 3 spanning DoF, 2 rows, 1 independent") {
  const Model m = testing::makeFourBarModel();
  REQUIRE(m.numClusters() == 1);
  const Cluster& c = m.cluster(0);
  CHECK(c.nf == 3);
  CHECK(c.nl == 2);
  CHECK(c.ndof == 1);
  CHECK_FALSE(c.constant_jacobian);
  CHECK(validateModel(m).empty());
}

TEST_CASE("out-of-plane four-bars are rejected") {
  Rng rng(13);
  std::vector<Body> bodies;
  Body crank = simpleBody(0, "crank");
  crank.X_T = SpatialTransform<double>::Translation({0.4, 0, 0.2});  // off-plane pivot
  bodies.push_back(crank);
  Body follower = simpleBody(0, "follower");
  follower.X_T = SpatialTransform<double>::Translation({1.4, 0, 0});
  bodies.push_back(follower);
  Body rod = simpleBody(1, "rod");
  rod.X_T = SpatialTransform<double>::Translation({0, 1, 0});
  bodies.push_back(rod);

  LoopConstraintSpec spec;
  spec.kind = LoopConstraintSpec::Kind::FourBar;
  spec.rod_body = 3;
  spec.anchor_body = 2;
  spec.rod_pin = Eigen::Vector3d(1, 0, 0);
  spec.anchor_pin = Eigen::Vector3d(0, 1, 0);
  spec.independent = {1};
  CHECK_THROWS_WITH_AS(Model("tilted", bodies, {spec}), doctest::Contains("out-of-plane"), ModelError);
}

TEST_CASE("independent loop count equals the chord count") {
  Rng rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const Model m = testing::makeRandomClusteredModel(rng, 10);
    // connectivity graph: N tree edges + one chord per loop joint
    const int edges = m.numBodies() + static_cast<int>(m.loops().size());
    const int nodes = m.numBodies() + 1;
    CHECK(static_cast<int>(m.loops().size()) == edges - nodes + 1);
    for (const auto& d : validateModel(m)) CHECK(d.code != "loop_count");
  }
}

TEST_CASE("clusters cover every body exactly once with one shared output") {
  Rng rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const Model m = testing::makeRandomClusteredModel(rng, 12);
    CHECK(validateModel(m).empty());
    std::vector<int> seen(static_cast<std::size_t>(m.numBodies()) + 1, 0);
    for (const auto& c : m.clusters()) {
      for (std::size_t j = 0; j < c.bodies.size(); ++j) {
        seen[static_cast<std::size_t>(c.bodies[j])]++;
        if (c.local_parent[j] < 0) {
          CHECK(m.tree().parent[static_cast<std::size_t>(c.bodies[j])] == c.output_body);
        }
      }
    }
    for (int b = 1; b <= m.numBodies(); ++b) CHECK(seen[static_cast<std::size_t>(b)] == 1);
  }
}

TEST_CASE("model file parse errors carry context") {
  CHECK_THROWS_WITH_AS(Model::fromJsonText("{not json"), doctest::Contains("parse error"), ModelError);
  CHECK_THROWS_WITH_AS(Model::fromJsonText("{}"), doctest::Contains("bodies"), ModelError);
}
