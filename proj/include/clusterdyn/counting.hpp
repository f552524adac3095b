// Instrumented scalar for arithmetic-operation counting.
//
// CountingScalar wraps a double and mirrors its arithmetic bit-for-bit; when
// a counter sink is installed (thread-local), every add/sub, mul, div, sqrt,
// and comparison bumps the matching counter.  With no sink installed the
// value path is identical, so counted and uncounted evaluations agree
// exactly.  The whole dynamics stack is templated on the scalar type, so
// threading this through Eigen gives operation counts of the real kernels.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>

namespace clusterdyn {

struct OpCounts {
  std::uint64_t adds = 0;
  std::uint64_t mults = 0;
  std::uint64_t divs = 0;
  std::uint64_t sqrts = 0;
  std::uint64_t compares = 0;

  std::uint64_t total() const { return adds + mults + divs + sqrts + compares; }

  OpCounts& operator+=(const OpCounts& o) {
    adds += o.adds;
    mults += o.mults;
    divs += o.divs;
    sqrts += o.sqrts;
    compares += o.compares;
    return *this;
  }
};

class CountingScalar {
 public:
  CountingScalar() : v_(0.0) {}
  CountingScalar(double v) : v_(v) {}
  CountingScalar(int v) : v_(static_cast<double>(v)) {}
  CountingScalar(long v) : v_(static_cast<double>(v)) {}

  double value() const { return v_; }

  /// Install a counter sink for this thread; nullptr disables counting.
  static void setSink(OpCounts* sink) { sink_ = sink; }
  static OpCounts* sink() { return sink_; }

  friend CountingScalar operator+(const CountingScalar& a, const CountingScalar& b) {
    bumpAdd();
    return CountingScalar(a.v_ + b.v_);
  }
  friend CountingScalar operator-(const CountingScalar& a, const CountingScalar& b) {
    bumpAdd();
    return CountingScalar(a.v_ - b.v_);
  }
  friend CountingScalar operator*(const CountingScalar& a, const CountingScalar& b) {
    bumpMul();
    return CountingScalar(a.v_ * b.v_);
  }
  friend CountingScalar operator/(const CountingScalar& a, const CountingScalar& b) {
    bumpDiv();
    return CountingScalar(a.v_ / b.v_);
  }
  CountingScalar operator-() const { return CountingScalar(-v_); }

  CountingScalar& operator+=(const CountingScalar& o) { return *this = *this + o; }
  CountingScalar& operator-=(const CountingScalar& o) { return *this = *this - o; }
  CountingScalar& operator*=(const CountingScalar& o) { return *this = *this * o; }
  CountingScalar& operator/=(const CountingScalar& o) { return *this = *this / o; }

  friend bool operator<(const CountingScalar& a, const CountingScalar& b) { bumpCmp(); return a.v_ < b.v_; }
  friend bool operator>(const CountingScalar& a, const CountingScalar& b) { bumpCmp(); return a.v_ > b.v_; }
  friend bool operator<=(const CountingScalar& a, const CountingScalar& b) { bumpCmp(); return a.v_ <= b.v_; }
  friend bool operator>=(const CountingScalar& a, const CountingScalar& b) { bumpCmp(); return a.v_ >= b.v_; }
  friend bool operator==(const CountingScalar& a, const CountingScalar& b) { bumpCmp(); return a.v_ == b.v_; }
  friend bool operator!=(const CountingScalar& a, const CountingScalar& b) { bumpCmp(); return a.v_ != b.v_; }

  friend CountingScalar abs(const CountingScalar& a) { return CountingScalar(std::abs(a.v_)); }
  friend CountingScalar fabs(const CountingScalar& a) { return CountingScalar(std::abs(a.v_)); }
  friend CountingScalar sqrt(const CountingScalar& a) {
    bumpSqrt();
    return CountingScalar(std::sqrt(a.v_));
  }
  // Trig is not in the counted basic-op set; pass through.
  friend CountingScalar sin(const CountingScalar& a) { return CountingScalar(std::sin(a.v_)); }
  friend CountingScalar cos(const CountingScalar& a) { return CountingScalar(std::cos(a.v_)); }
  friend CountingScalar atan2(const CountingScalar& a, const CountingScalar& b) {
    return CountingScalar(std::atan2(a.v_, b.v_));
  }
  friend bool isfinite(const CountingScalar& a) { return std::isfinite(a.v_); }

 private:
  static void bumpAdd() { if (sink_) ++sink_->adds; }
  static void bumpMul() { if (sink_) ++sink_->mults; }
  static void bumpDiv() { if (sink_) ++sink_->divs; }
  static void bumpSqrt() { if (sink_) ++sink_->sqrts; }
  static void bumpCmp() { if (sink_) ++sink_->compares; }

  inline static thread_local OpCounts* sink_ = nullptr;

  double v_;
};

inline double toDouble(const CountingScalar& v) { return v.value(); }

/// RAII scope that accumulates counts into `counts` while alive.
class CountingScope {
 public:
  explicit CountingScope(OpCounts& counts) : prev_(CountingScalar::sink()) {
    CountingScalar::setSink(&counts);
  }
  ~CountingScope() { CountingScalar::setSink(prev_); }
  CountingScope(const CountingScope&) = delete;
  CountingScope& operator=(const CountingScope&) = delete;

 private:
  OpCounts* prev_;
};

}  // namespace clusterdyn

namespace Eigen {

template <>
struct NumTraits<clusterdyn::CountingScalar> {
  using Real = clusterdyn::CountingScalar;
  using NonInteger = clusterdyn::CountingScalar;
  using Nested = clusterdyn::CountingScalar;
  using Literal = clusterdyn::CountingScalar;

  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 1,
    MulCost = 1,
  };

  static clusterdyn::CountingScalar epsilon() { return NumTraits<double>::epsilon(); }
  static clusterdyn::CountingScalar dummy_precision() { return NumTraits<double>::dummy_precision(); }
  static clusterdyn::CountingScalar highest() { return NumTraits<double>::highest(); }
  static clusterdyn::CountingScalar lowest() { return NumTraits<double>::lowest(); }
  static int digits10() { return NumTraits<double>::digits10(); }
};

}  // namespace Eigen
