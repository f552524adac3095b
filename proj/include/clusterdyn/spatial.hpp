// 6D spatial vector algebra (Featherstone convention: angular components on
// top).  Everything is templated on the scalar type so the same kernels run
// on plain doubles and on instrumented scalars for operation counting.
//
// A SpatialTransform holds a (rotation, translation) pair and is never
// expanded to a dense 6x6 inside the dynamics algorithms; the apply routines
// below exploit the block structure.  Dense 6x6 views exist for testing and
// for the dense differential-check path.
#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace clusterdyn {

inline double toDouble(double v) { return v; }

template <typename S> using Vec3 = Eigen::Matrix<S, 3, 1>;
template <typename S> using Mat3 = Eigen::Matrix<S, 3, 3>;
template <typename S> using Vec6 = Eigen::Matrix<S, 6, 1>;
template <typename S> using Mat6 = Eigen::Matrix<S, 6, 6>;
template <typename S> using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S> using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
Mat3<S> skew(const Vec3<S>& a) {
  Mat3<S> m;
  m << S(0), -a.z(), a.y(),
       a.z(), S(0), -a.x(),
      -a.y(), a.x(), S(0);
  return m;
}

/// Velocity or acceleration of a rigid body: (angular; linear at frame origin).
template <typename S>
struct SpatialMotion {
  Vec3<S> angular = Vec3<S>::Zero();
  Vec3<S> linear = Vec3<S>::Zero();

  SpatialMotion() = default;
  SpatialMotion(const Vec3<S>& ang, const Vec3<S>& lin) : angular(ang), linear(lin) {}
  explicit SpatialMotion(const Vec6<S>& v) : angular(v.template head<3>()), linear(v.template tail<3>()) {}

  Vec6<S> vec() const {
    Vec6<S> v;
    v << angular, linear;
    return v;
  }

  SpatialMotion operator+(const SpatialMotion& o) const { return {angular + o.angular, linear + o.linear}; }
  SpatialMotion operator-(const SpatialMotion& o) const { return {angular - o.angular, linear - o.linear}; }
  SpatialMotion operator*(const S& s) const { return {angular * s, linear * s}; }
  SpatialMotion operator-() const { return {-angular, -linear}; }
};

/// Moment about the frame origin plus net linear force.
template <typename S>
struct SpatialForce {
  Vec3<S> moment = Vec3<S>::Zero();
  Vec3<S> force = Vec3<S>::Zero();

  SpatialForce() = default;
  SpatialForce(const Vec3<S>& n, const Vec3<S>& f) : moment(n), force(f) {}
  explicit SpatialForce(const Vec6<S>& v) : moment(v.template head<3>()), force(v.template tail<3>()) {}

  Vec6<S> vec() const {
    Vec6<S> v;
    v << moment, force;
    return v;
  }

  SpatialForce operator+(const SpatialForce& o) const { return {moment + o.moment, force + o.force}; }
  SpatialForce operator-(const SpatialForce& o) const { return {moment - o.moment, force - o.force}; }
  SpatialForce operator*(const S& s) const { return {moment * s, force * s}; }
  SpatialForce operator-() const { return {-moment, -force}; }
};

/// Duality pairing <f, v> = power.
template <typename S>
S dot(const SpatialForce<S>& f, const SpatialMotion<S>& v) {
  return f.moment.dot(v.angular) + f.force.dot(v.linear);
}

/// Coordinate transform between two frames, A ("source") and B ("destination").
///
/// Stored as E (3x3 rotation taking A coordinates to B coordinates) and r
/// (origin of B expressed in A coordinates).  As a motion transform this is
/// Featherstone's  B_X_A = [E, 0; -E rx, E];  the dual force transform in the
/// same direction is B_X*_A = (B_X_A)^-T = [E, -E rx; 0, E].
template <typename S>
class SpatialTransform {
 public:
  SpatialTransform() : E_(Mat3<S>::Identity()), r_(Vec3<S>::Zero()) {}
  SpatialTransform(const Mat3<S>& E, const Vec3<S>& r) : E_(E), r_(r) {}

  static SpatialTransform Identity() { return SpatialTransform(); }

  /// Coordinate rotation induced by rotating the destination frame by `angle`
  /// about `axis` (unit vector, shared by both frames).
  static SpatialTransform RotationAbout(const Vec3<S>& axis, const S& angle) {
    using std::cos;
    using std::sin;
    const S c = cos(angle);
    const S s = sin(angle);
    // E = R(axis, angle)^T = c*I - s*skew(axis) + (1-c)*axis*axis^T
    Mat3<S> E = c * Mat3<S>::Identity() - s * skew(axis) + (S(1) - c) * (axis * axis.transpose());
    return SpatialTransform(E, Vec3<S>::Zero());
  }

  static SpatialTransform Translation(const Vec3<S>& r) {
    return SpatialTransform(Mat3<S>::Identity(), r);
  }

  const Mat3<S>& rotation() const { return E_; }
  const Vec3<S>& translation() const { return r_; }

  /// this * other: apply `other` first, then `this` (C_X_B * B_X_A = C_X_A).
  SpatialTransform operator*(const SpatialTransform& other) const {
    return SpatialTransform(E_ * other.E_, other.r_ + other.E_.transpose() * r_);
  }

  SpatialTransform inverse() const {
    return SpatialTransform(E_.transpose(), -(E_ * r_));
  }

  /// B_v = B_X_A * A_v
  SpatialMotion<S> apply(const SpatialMotion<S>& m) const {
    return {E_ * m.angular, E_ * (m.linear - r_.cross(m.angular))};
  }

  /// A_v = (B_X_A)^-1 * B_v
  SpatialMotion<S> applyInverse(const SpatialMotion<S>& m) const {
    const Vec3<S> w = E_.transpose() * m.angular;
    return {w, E_.transpose() * m.linear + r_.cross(w)};
  }

  /// B_f = B_X*_A * A_f  with  B_X*_A = (B_X_A)^-T
  SpatialForce<S> applyForce(const SpatialForce<S>& f) const {
    return {E_ * (f.moment - r_.cross(f.force)), E_ * f.force};
  }

  /// A_f = (B_X_A)^T * B_f.  This is the force transform from destination back
  /// to source coordinates, the workhorse of every inward pass.
  SpatialForce<S> applyTransposeForce(const SpatialForce<S>& f) const {
    const Vec3<S> fs = E_.transpose() * f.force;
    return {E_.transpose() * f.moment + r_.cross(fs), fs};
  }

  /// Dense 6x6 motion-transform matrix (tests / dense differential path only).
  Mat6<S> motionMatrix() const {
    Mat6<S> X = Mat6<S>::Zero();
    X.template topLeftCorner<3, 3>() = E_;
    X.template bottomRightCorner<3, 3>() = E_;
    X.template bottomLeftCorner<3, 3>() = -E_ * skew(r_);
    return X;
  }

  /// Dense 6x6 force-transform matrix, equal to motionMatrix()^-T.
  Mat6<S> forceMatrix() const {
    Mat6<S> X = Mat6<S>::Zero();
    X.template topLeftCorner<3, 3>() = E_;
    X.template bottomRightCorner<3, 3>() = E_;
    X.template topRightCorner<3, 3>() = -E_ * skew(r_);
    return X;
  }

 private:
  Mat3<S> E_;
  Vec3<S> r_;
};

/// compose(outer, inner): applying the result equals applying inner then outer.
template <typename S>
SpatialTransform<S> compose(const SpatialTransform<S>& outer, const SpatialTransform<S>& inner) {
  return outer * inner;
}

/// v x m  (motion cross motion)
template <typename S>
SpatialMotion<S> crossMotion(const SpatialMotion<S>& v, const SpatialMotion<S>& m) {
  return {v.angular.cross(m.angular),
          v.angular.cross(m.linear) + v.linear.cross(m.angular)};
}

/// v x* f  (motion cross force), the dual of crossMotion:
/// <crossForce(v,f), m> = -<f, crossMotion(v,m)>.
template <typename S>
SpatialForce<S> crossForce(const SpatialMotion<S>& v, const SpatialForce<S>& f) {
  return {v.angular.cross(f.moment) + v.linear.cross(f.force),
          v.angular.cross(f.force)};
}

/// Rigid-body spatial inertia about the local frame origin:
///   [ Ibar     hx  ]
///   [ hx^T    m*1  ]
/// with h = m * com the first moment of mass.
template <typename S>
class SpatialInertia {
 public:
  SpatialInertia() : mass_(S(0)), h_(Vec3<S>::Zero()), Ibar_(Mat3<S>::Zero()) {}
  SpatialInertia(const S& mass, const Vec3<S>& h, const Mat3<S>& Ibar)
      : mass_(mass), h_(h), Ibar_(Ibar) {}

  /// From mass, center of mass, and rotational inertia about the frame origin.
  static SpatialInertia FromMassComInertia(const S& mass, const Vec3<S>& com, const Mat3<S>& I_origin) {
    return SpatialInertia(mass, com * mass, I_origin);
  }

  const S& mass() const { return mass_; }
  const Vec3<S>& firstMoment() const { return h_; }
  const Mat3<S>& rotationalInertia() const { return Ibar_; }

  /// f = I * a
  SpatialForce<S> apply(const SpatialMotion<S>& a) const {
    return {Ibar_ * a.angular + h_.cross(a.linear),
            mass_ * a.linear - h_.cross(a.angular)};
  }

  SpatialInertia operator+(const SpatialInertia& o) const {
    return SpatialInertia(mass_ + o.mass_, h_ + o.h_, Ibar_ + o.Ibar_);
  }

  Mat6<S> matrix() const {
    Mat6<S> M;
    const Mat3<S> hx = skew(h_);
    M.template topLeftCorner<3, 3>() = Ibar_;
    M.template topRightCorner<3, 3>() = hx;
    M.template bottomLeftCorner<3, 3>() = hx.transpose();
    M.template bottomRightCorner<3, 3>() = mass_ * Mat3<S>::Identity();
    return M;
  }

 private:
  S mass_;
  Vec3<S> h_;
  Mat3<S> Ibar_;
};

/// Congruence X^T I X for a rigid-body inertia: given I expressed in the
/// destination frame of X, returns it expressed in the source frame.  With
/// X = (child from parent) this is exactly the inward-pass map
/// X_F * I * X_M that accumulates a child inertia onto its parent.
template <typename S>
SpatialInertia<S> transformInertia(const SpatialTransform<S>& X, const SpatialInertia<S>& I) {
  const Mat3<S>& E = X.rotation();
  const Vec3<S>& r = X.translation();
  const Vec3<S> hp = E.transpose() * I.firstMoment();
  const Mat3<S> rx = skew(r);
  const Mat3<S> hpx = skew(hp);
  Mat3<S> Ibar = E.transpose() * I.rotationalInertia() * E - hpx * rx - rx * hpx - I.mass() * rx * rx;
  return SpatialInertia<S>(I.mass(), hp + I.mass() * r, Ibar);
}

/// Congruence X^T M X for a general symmetric 6x6 block (articulated inertia),
/// computed with the specialized apply routines instead of dense products.
template <typename S>
Mat6<S> congruenceToSource(const SpatialTransform<S>& X, const Mat6<S>& M) {
  Mat6<S> C;
  for (int c = 0; c < 6; ++c) {
    C.col(c) = X.applyTransposeForce(SpatialForce<S>(Vec6<S>(M.col(c)))).vec();
  }
  // R = C X = (X^T C^T)^T
  Mat6<S> R;
  for (int c = 0; c < 6; ++c) {
    R.row(c) = X.applyTransposeForce(SpatialForce<S>(Vec6<S>(C.row(c).transpose()))).vec().transpose();
  }
  return R;
}

}  // namespace clusterdyn
