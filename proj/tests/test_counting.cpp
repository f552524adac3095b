#include "clusterdyn/counting.hpp"

#include "clusterdyn/spatial.hpp"

#include <doctest.h>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <cmath>

using namespace clusterdyn;
using CS = CountingScalar;

TEST_CASE("each arithmetic operation bumps exactly one counter") {
  OpCounts counts;
  CountingScope scope(counts);
  const CS a(3.5), b(-1.25);

  (void)(a + b);
  CHECK(counts.adds == 1);
  (void)(a - b);
  CHECK(counts.adds == 2);
  (void)(a * b);
  CHECK(counts.mults == 1);
  (void)(a / b);
  CHECK(counts.divs == 1);
  using std::sqrt;
  (void)sqrt(CS(2.0));
  CHECK(counts.sqrts == 1);
  (void)(a < b);
  CHECK(counts.compares == 1);
  CHECK(counts.total() == 6);
}

TEST_CASE("counted values mirror double arithmetic bit-for-bit") {
  const double x = 0.1, y = 0.3;
  OpCounts counts;
  CountingScope scope(counts);
  CHECK((CS(x) + CS(y)).value() == x + y);
  CHECK((CS(x) * CS(y)).value() == x * y);
  CHECK((CS(x) / CS(y)).value() == x / y);
  CHECK((CS(x) - CS(y)).value() == x - y);
}

TEST_CASE("counting on vs off leaves results bit-for-bit identical") {
  auto kernel = [](double seed) {
    MatX<CS> A(4, 4);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) A(r, c) = CS(std::sin(seed + r * 4 + c) + (r == c ? 4.0 : 0.0));
    }
    VecX<CS> b(4);
    for (int r = 0; r < 4; ++r) b(r) = CS(std::cos(seed + r));
    const VecX<CS> x = Eigen::PartialPivLU<MatX<CS>>(A).solve(b);
    Eigen::Vector4d out;
    for (int r = 0; r < 4; ++r) out(r) = x(r).value();
    return out;
  };

  const Eigen::Vector4d off = kernel(1.7);
  OpCounts counts;
  Eigen::Vector4d on;
  {
    CountingScope scope(counts);
    on = kernel(1.7);
  }
  CHECK(counts.total() > 0);
  for (int r = 0; r < 4; ++r) CHECK(on(r) == off(r));
}

TEST_CASE("fixed-size matrix product has the expected flop count") {
  Mat3<CS> A, B;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      A(r, c) = CS(r + 2.0 * c + 1.0);
      B(r, c) = CS(r - c + 0.5);
    }
  }
  OpCounts counts;
  {
    CountingScope scope(counts);
    const Mat3<CS> C = A * B;
    (void)C;
  }
  CHECK(counts.mults == 27);
  CHECK(counts.adds == 18);
  CHECK(counts.divs == 0);
}

TEST_CASE("LDLT on counted scalars matches the double path bitwise") {
  Eigen::Matrix4d Ad;
  Ad << 4, 1, 0.5, 0, 1, 5, 0.25, 0.1, 0.5, 0.25, 3, 0.2, 0, 0.1, 0.2, 6;
  Eigen::Vector4d bd(1, -2, 0.5, 3);

  const Eigen::Vector4d xd = Ad.ldlt().solve(bd);

  MatX<CS> A = Ad.cast<CS>();
  VecX<CS> b = bd.cast<CS>();
  OpCounts counts;
  CountingScope scope(counts);
  const VecX<CS> x = Eigen::LDLT<MatX<CS>>(A).solve(b);
  for (int r = 0; r < 4; ++r) CHECK(x(r).value() == xd(r));
  CHECK(counts.mults > 0);
}
