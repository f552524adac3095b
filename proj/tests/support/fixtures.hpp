// Shared test fixtures: hand-built models with known closed forms, a random
// model corpus mixing every cluster kind, and small numeric helpers.
#pragma once

#include "clusterdyn/bench.hpp"
#include "clusterdyn/dynamics.hpp"

#include <vector>

namespace clusterdyn::testing {

inline SpatialInertia<double> axialInertia(double mass, double izz, double ixx = 0.05) {
  Eigen::Matrix3d I = Eigen::Matrix3d::Zero();
  I(0, 0) = ixx;
  I(1, 1) = ixx;
  I(2, 2) = izz;
  return SpatialInertia<double>::FromMassComInertia(mass, Eigen::Vector3d::Zero(), I);
}

/// Sibling link/rotor pair about +z on the base; q_R = eta * q_L, y = q_L.
inline Model makeGearModel(double eta, double I_L = 0.7, double I_R = 0.012) {
  std::vector<Body> bodies;
  Body link;
  link.name = "link";
  link.parent = 0;
  link.X_T = SpatialTransform<double>::Translation({0.5, 0, 0});
  link.inertia = axialInertia(1.0, I_L);
  bodies.push_back(link);
  Body rotor;
  rotor.name = "rotor";
  rotor.parent = 0;
  rotor.X_T = SpatialTransform<double>::Translation({0, 0, 0});
  rotor.inertia = axialInertia(0.2, I_R, 0.004);
  bodies.push_back(rotor);

  LoopConstraintSpec spec;
  spec.kind = LoopConstraintSpec::Kind::LinearTransmission;
  spec.bodies = {1, 2};
  spec.independent = {1};
  spec.G.resize(2, 1);
  spec.G << 1.0, eta;
  return Model("gear", std::move(bodies), {spec});
}

/// Point mass m on a massless arm of length l, revolute about +z.
inline Model makePendulumModel(double mass = 1.5, double length = 0.8) {
  Body b;
  b.name = "pendulum";
  b.parent = 0;
  const Eigen::Vector3d com(length, 0, 0);
  Eigen::Matrix3d I_origin = mass * (com.squaredNorm() * Eigen::Matrix3d::Identity() - com * com.transpose());
  I_origin += 1e-6 * Eigen::Matrix3d::Identity();  // keep the 6x6 inertia PD
  b.inertia = SpatialInertia<double>::FromMassComInertia(mass, com, I_origin);
  return Model("pendulum", {b}, {});
}

/// Parallelogram four-bar: crank (1) and follower (2) on the base, rod (3)
/// on the crank; closed at q = 0.
inline Model makeFourBarModel(std::uint64_t seed = 7) {
  Rng rng(seed);
  std::vector<Body> bodies;
  Body crank = {};
  crank.name = "crank";
  crank.parent = 0;
  crank.X_T = SpatialTransform<double>::Translation({0.4, 0, 0});
  crank.inertia = randomLinkInertia(rng);
  bodies.push_back(crank);
  Body follower = {};
  follower.name = "follower";
  follower.parent = 0;
  follower.X_T = SpatialTransform<double>::Translation({1.4, 0, 0});
  follower.inertia = randomLinkInertia(rng);
  bodies.push_back(follower);
  Body rod = {};
  rod.name = "rod";
  rod.parent = 1;
  rod.X_T = SpatialTransform<double>::Translation({0, 1, 0});
  rod.inertia = randomLinkInertia(rng);
  bodies.push_back(rod);

  LoopConstraintSpec spec;
  spec.kind = LoopConstraintSpec::Kind::FourBar;
  spec.rod_body = 3;
  spec.anchor_body = 2;
  spec.rod_pin = Eigen::Vector3d(1, 0, 0);
  spec.anchor_pin = Eigen::Vector3d(0, 1, 0);
  spec.independent = {1};
  return Model("fourbar", std::move(bodies), {spec});
}

/// Loop-free chain/branched tree of revolute and prismatic joints with
/// randomized axes and offsets.
inline Model makeRandomTree(Rng& rng, int num_bodies, bool allow_branching = true) {
  std::vector<Body> bodies;
  for (int i = 1; i <= num_bodies; ++i) {
    Body b;
    b.name = "t" + std::to_string(i);
    b.parent = i == 1 ? 0 : (allow_branching ? 1 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(i - 1)) : i - 1);
    b.joint.type = rng.uniform(0, 1) < 0.8 ? TreeJointSpec::Type::Revolute : TreeJointSpec::Type::Prismatic;
    Eigen::Vector3d axis(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    while (axis.norm() < 1e-3) axis = Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    b.joint.axis = axis.normalized();
    Eigen::Vector3d raxis(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (raxis.norm() < 1e-3) raxis = Eigen::Vector3d::UnitX();
    const auto rot = SpatialTransform<double>::RotationAbout(raxis.normalized().eval(), rng.uniform(-1.5, 1.5));
    b.X_T = SpatialTransform<double>(rot.rotation(),
                                     Eigen::Vector3d(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6)));
    b.inertia = randomLinkInertia(rng);
    bodies.push_back(std::move(b));
  }
  return Model("random-tree", std::move(bodies), {});
}

/// Random model mixing singleton links and gear / belt / chained /
/// four-bar clusters, capped at `max_bodies` bodies.
inline Model makeRandomClusteredModel(Rng& rng, int max_bodies = 12) {
  std::vector<Body> bodies;
  std::vector<LoopConstraintSpec> loops;
  std::vector<int> attach_points = {0};  // bodies new stages may hang off

  auto addBody = [&](int parent, const Eigen::Vector3d& off, const SpatialInertia<double>& inertia) {
    Body b;
    b.name = "r" + std::to_string(bodies.size() + 1);
    b.parent = parent;
    b.X_T = SpatialTransform<double>::Translation(off);
    b.inertia = inertia;
    bodies.push_back(b);
    return static_cast<int>(bodies.size());
  };

  while (static_cast<int>(bodies.size()) < max_bodies) {
    const int remaining = max_bodies - static_cast<int>(bodies.size());
    const int parent = attach_points[rng.next() % attach_points.size()];
    const int kind = static_cast<int>(rng.next() % 6);
    if (kind == 0 || remaining < 2) {
      const int b = addBody(parent, {rng.uniform(0.3, 1.0), rng.uniform(-0.4, 0.4), 0}, randomLinkInertia(rng));
      attach_points.push_back(b);
      continue;
    }
    if (kind == 1 || remaining < 3) {  // gear pair, occasionally with a prismatic link
      const double eta = rng.uniform(2.0, 12.0);
      const int L = addBody(parent, {rng.uniform(0.4, 1.0), 0, 0}, randomLinkInertia(rng));
      const int R = addBody(parent, {0, 0, 0}, rotorInertia(rng));
      if (rng.uniform(0, 1) < 0.25) {
        bodies[static_cast<std::size_t>(L - 1)].joint.type = TreeJointSpec::Type::Prismatic;
        bodies[static_cast<std::size_t>(L - 1)].joint.axis = Eigen::Vector3d::UnitX();
      }
      LoopConstraintSpec spec;
      spec.kind = LoopConstraintSpec::Kind::LinearTransmission;
      spec.bodies = {L, R};
      spec.independent = {L};
      spec.G.resize(2, 1);
      spec.G << 1.0, eta;
      loops.push_back(std::move(spec));
      attach_points.push_back(L);
      continue;
    }
    if (kind == 5 && remaining >= 4) {  // four-bar with a geared crank rotor (mixed cluster)
      const double eta = rng.uniform(2.0, 8.0);
      const int I = addBody(parent, {0.4, 0, 0}, randomLinkInertia(rng));
      const int O = addBody(parent, {1.4, 0, 0}, randomLinkInertia(rng));
      const int C = addBody(I, {0, 1, 0}, randomLinkInertia(rng));
      const int R = addBody(parent, {0, 0, 0}, rotorInertia(rng));
      LoopConstraintSpec fb;
      fb.kind = LoopConstraintSpec::Kind::FourBar;
      fb.rod_body = C;
      fb.anchor_body = O;
      fb.rod_pin = Eigen::Vector3d(1, 0, 0);
      fb.anchor_pin = Eigen::Vector3d(0, 1, 0);
      fb.independent = {I};
      loops.push_back(std::move(fb));
      LoopConstraintSpec gear;
      gear.kind = LoopConstraintSpec::Kind::LinearTransmission;
      gear.bodies = {I, R};
      gear.independent = {I};
      gear.G.resize(2, 1);
      gear.G << 1.0, eta;
      loops.push_back(std::move(gear));
      attach_points.push_back(O);
      continue;
    }
    if (kind == 2 && remaining >= 4) {  // chained transmission over two fresh branches
      const int d = 2;
      const double eta = rng.uniform(1.5, 6.0);
      std::vector<int> br1, br2;
      int p = parent;
      for (int j = 0; j < d; ++j) {
        p = addBody(p, {rng.uniform(0.4, 1.0), 0, 0}, randomLinkInertia(rng));
        br1.push_back(p);
      }
      p = parent;
      for (int j = 0; j < d; ++j) {
        p = addBody(p, {rng.uniform(0.4, 1.0), 0.3, 0}, randomLinkInertia(rng));
        br2.push_back(p);
      }
      LoopConstraintSpec spec;
      spec.kind = LoopConstraintSpec::Kind::ChainedTransmission;
      spec.eta = eta;
      spec.branch1 = br1;
      spec.branch2 = br2;
      loops.push_back(std::move(spec));
      attach_points.push_back(br1.back());
      attach_points.push_back(br2.back());
      continue;
    }
    if (kind == 3 && remaining >= 4) {  // belt
      const double eta = rng.uniform(2.0, 9.0);
      const int L1 = addBody(parent, {rng.uniform(0.4, 1.0), 0, 0}, randomLinkInertia(rng));
      const int R1 = addBody(parent, {0, 0, 0}, rotorInertia(rng));
      const int L2 = addBody(L1, {rng.uniform(0.4, 1.0), 0, 0}, randomLinkInertia(rng));
      const int R2 = addBody(L1, {0, 0, 0}, rotorInertia(rng));
      LoopConstraintSpec gear;
      gear.kind = LoopConstraintSpec::Kind::LinearTransmission;
      gear.bodies = {L1, R1};
      gear.independent = {L1};
      gear.G.resize(2, 1);
      gear.G << 1.0, eta;
      loops.push_back(std::move(gear));
      LoopConstraintSpec belt;
      belt.kind = LoopConstraintSpec::Kind::LinearTransmission;
      belt.bodies = {L1, L2, R2};
      belt.independent = {L1, L2};
      belt.G.resize(3, 2);
      belt.G << 1.0, 0.0, 0.0, 1.0, eta, eta;
      loops.push_back(std::move(belt));
      attach_points.push_back(L2);
      continue;
    }
    if (remaining >= 3) {  // four-bar (planar stage)
      const int I = addBody(parent, {0.4, 0, 0}, randomLinkInertia(rng));
      const int O = addBody(parent, {1.4, 0, 0}, randomLinkInertia(rng));
      const int C = addBody(I, {0, 1, 0}, randomLinkInertia(rng));
      LoopConstraintSpec spec;
      spec.kind = LoopConstraintSpec::Kind::FourBar;
      spec.rod_body = C;
      spec.anchor_body = O;
      spec.rod_pin = Eigen::Vector3d(1, 0, 0);
      spec.anchor_pin = Eigen::Vector3d(0, 1, 0);
      spec.independent = {I};
      loops.push_back(std::move(spec));
      attach_points.push_back(O);
      continue;
    }
    const int b = addBody(parent, {rng.uniform(0.3, 1.0), 0, 0}, randomLinkInertia(rng));
    attach_points.push_back(b);
  }
  return Model("random-clustered", std::move(bodies), std::move(loops));
}

inline SpatialTransform<double> randomTransform(Rng& rng) {
  Eigen::Vector3d axis(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  if (axis.norm() < 1e-3) axis = Eigen::Vector3d::UnitZ();
  const auto rot = SpatialTransform<double>::RotationAbout(axis.normalized().eval(), rng.uniform(-3.0, 3.0));
  return SpatialTransform<double>(rot.rotation(),
                                  Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
}

inline SpatialMotion<double> randomMotion(Rng& rng) {
  return {Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)),
          Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))};
}

inline SpatialForce<double> randomForce(Rng& rng) {
  return {Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)),
          Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))};
}

inline SpatialInertia<double> randomInertia(Rng& rng) { return randomLinkInertia(rng); }

}  // namespace clusterdyn::testing
