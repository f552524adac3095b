#include "clusterdyn/spatial.hpp"

#include "support/fixtures.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

using namespace clusterdyn;
using testing::randomForce;
using testing::randomInertia;
using testing::randomMotion;
using testing::randomTransform;

namespace {
double maxAbs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }
}  // namespace

TEST_CASE("compose: identity and inverse") {
  Rng rng(1);
  const auto X = randomTransform(rng);
  const SpatialTransform<double> I;

  const auto XI = compose(I, X);
  CHECK(maxAbs(XI.motionMatrix() - X.motionMatrix()) < 1e-15);

  const auto XXinv = compose(X, X.inverse());
  CHECK(maxAbs(XXinv.motionMatrix() - Eigen::MatrixXd::Identity(6, 6)) < 1e-12);
}

TEST_CASE("compose: successive z rotations multiply like rotation matrices") {
  const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
  const auto Xa = SpatialTransform<double>::RotationAbout(z, M_PI / 2);
  const auto Xb = SpatialTransform<double>::RotationAbout(z, M_PI);
  // Oracle: plain 3x3 coordinate-rotation product.
  const Eigen::Matrix3d expected = Xa.rotation() * Xa.rotation();
  const auto X2 = compose(Xa, Xa);
  CHECK(maxAbs(X2.rotation() - expected) < 1e-15);
  CHECK(maxAbs(X2.rotation() - Xb.rotation()) < 1e-12);
}

TEST_CASE("apply_motion: identity, point-velocity shift, isometry") {
  const SpatialMotion<double> v({1, 2, 3}, {4, 5, 6});
  CHECK(maxAbs(SpatialTransform<double>().apply(v).vec() - v.vec()) == 0.0);

  // Pure translation r: the linear part becomes the velocity of the
  // body-fixed point at the new origin, -r x w.
  const Eigen::Vector3d r(0, 0, 1);
  const SpatialMotion<double> w({1, 0, 0}, {0, 0, 0});
  const auto out = SpatialTransform<double>::Translation(r).apply(w);
  CHECK(maxAbs(out.angular - w.angular) == 0.0);
  CHECK(maxAbs(out.linear - (-r.cross(w.angular))) < 1e-15);

  Rng rng(2);
  const auto R = SpatialTransform<double>::RotationAbout(Eigen::Vector3d::UnitY(), 0.7);
  const auto m = randomMotion(rng);
  const auto rm = R.apply(m);
  CHECK(rm.angular.norm() == doctest::Approx(m.angular.norm()).epsilon(1e-14));
  CHECK(rm.linear.norm() == doctest::Approx(m.linear.norm()).epsilon(1e-14));
}

TEST_CASE("apply_force: identity and moment shift") {
  const SpatialForce<double> f({1, -2, 0.5}, {0.3, 2, -1});
  CHECK(maxAbs(SpatialTransform<double>().applyForce(f).vec() - f.vec()) == 0.0);

  const Eigen::Vector3d r(0.2, -0.4, 0.9);
  const auto out = SpatialTransform<double>::Translation(r).applyForce(f);
  // Statics oracle: moving the reference point shifts the moment by -r x f.
  CHECK(maxAbs(out.moment - (f.moment - r.cross(f.force))) < 1e-15);
  CHECK(maxAbs(out.force - f.force) == 0.0);
}

TEST_CASE("power invariance under simultaneous motion/force transform") {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto X = randomTransform(rng);
    const auto v = randomMotion(rng);
    const auto f = randomForce(rng);
    const double before = dot(f, v);
    const double after = dot(X.applyForce(f), X.apply(v));
    CHECK(std::abs(after - before) < 1e-12);
  }
}

TEST_CASE("force transform equals inverse-transpose of the motion transform") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto X = randomTransform(rng);
    const Eigen::Matrix<double, 6, 6> Xm = X.motionMatrix();
    const Eigen::Matrix<double, 6, 6> Xf = X.forceMatrix();
    CHECK(maxAbs(Xf - Xm.inverse().transpose()) < 1e-12);
    // applyTransposeForce implements X_M^T.
    const auto f = randomForce(rng);
    CHECK(maxAbs(X.applyTransposeForce(f).vec() - Xm.transpose() * f.vec()) < 1e-13);
    const auto m = randomMotion(rng);
    CHECK(maxAbs(X.applyInverse(m).vec() - Xm.inverse() * m.vec()) < 1e-12);
  }
}

TEST_CASE("cross products: self-annihilation, unit case, duality") {
  Rng rng(5);
  const auto v = randomMotion(rng);
  CHECK(maxAbs(crossMotion(v, v).vec()) < 1e-15);

  const SpatialMotion<double> wz({0, 0, 1}, {0, 0, 0});
  const SpatialMotion<double> wx({1, 0, 0}, {0, 0, 0});
  const auto wy = crossMotion(wz, wx);
  CHECK(maxAbs(wy.vec() - (Eigen::VectorXd(6) << 0, 1, 0, 0, 0, 0).finished()) < 1e-15);

  for (int trial = 0; trial < 100; ++trial) {
    const auto a = randomMotion(rng);
    const auto m = randomMotion(rng);
    const auto f = randomForce(rng);
    CHECK(std::abs(dot(crossForce(a, f), m) + dot(f, crossMotion(a, m))) < 1e-12);
  }
}

TEST_CASE("crossForce(v,.) = -crossMotion(v,.)^T as 6x6 operators") {
  Rng rng(6);
  const auto v = randomMotion(rng);
  Eigen::Matrix<double, 6, 6> crm, crf;
  for (int c = 0; c < 6; ++c) {
    Vec6<double> e = Vec6<double>::Zero();
    e(c) = 1.0;
    crm.col(c) = crossMotion(v, SpatialMotion<double>(e)).vec();
    crf.col(c) = crossForce(v, SpatialForce<double>(e)).vec();
  }
  CHECK(maxAbs(crf + crm.transpose()) < 1e-15);
}

TEST_CASE("inertia: point-mass Newton law and 6x6 agreement") {
  const double m = 2.5;
  const SpatialInertia<double> I = SpatialInertia<double>::FromMassComInertia(
      m, Eigen::Vector3d::Zero(), Eigen::Matrix3d::Zero());
  const SpatialMotion<double> a({0, 0, 0}, {1, -2, 3});
  const auto f = I.apply(a);
  CHECK(maxAbs(f.force - m * a.linear) < 1e-15);
  CHECK(maxAbs(f.moment) < 1e-15);

  Rng rng(7);
  const auto J = randomInertia(rng);
  const auto x = randomMotion(rng);
  CHECK(maxAbs(J.apply(x).vec() - J.matrix() * x.vec()) < 1e-13);
}

TEST_CASE("inertia transform: round trip, PD preservation, dense congruence") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto X = randomTransform(rng);
    const auto I = randomInertia(rng);

    const auto moved = transformInertia(X, I);
    const auto back = transformInertia(X.inverse(), moved);
    CHECK(maxAbs(back.matrix() - I.matrix()) < 1e-12);

    // Dense oracle: X^T I X with the 6x6 matrices.
    const Eigen::Matrix<double, 6, 6> dense = X.motionMatrix().transpose() * I.matrix() * X.motionMatrix();
    CHECK(maxAbs(moved.matrix() - dense) < 1e-12);

    // Eigen-solver oracle: congruence preserves positive definiteness.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> es(moved.matrix());
    CHECK(es.eigenvalues().minCoeff() > 0.0);

    const Mat6<double> M = I.matrix();
    CHECK(maxAbs(congruenceToSource(X, M) - dense) < 1e-12);
  }
}

TEST_CASE("axis-angle transforms stay orthonormal with unit determinant") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto X = randomTransform(rng);
    const Eigen::Matrix3d E = X.rotation();
    CHECK(maxAbs(E.transpose() * E - Eigen::Matrix3d::Identity()) < 1e-12);
    CHECK(std::abs(E.determinant() - 1.0) < 1e-12);
  }
}
