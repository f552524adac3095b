// Benchmark-system generators (mechanism chains and constrained two-branch
// trees), feasible-state sampling, and the arithmetic-operation-counting
// benchmark runner with CSV output.
#pragma once

#include "clusterdyn/counting.hpp"
#include "clusterdyn/dynamics.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace clusterdyn {

/// Deterministic splitmix64 generator so identical seeds give byte-identical
/// benchmark output on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  double uniform(double lo, double hi) {
    const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

 private:
  std::uint64_t state_;
};

enum class MechanismType { LinkRotor, Belt, FourBar };
enum class BranchKind { Transmission, ConnectingRod };

std::string mechanismName(MechanismType type);

/// Random positive-definite link inertia (unit mass) and a coaxial rotor
/// inertia, both drawn deterministically from the generator.
SpatialInertia<double> randomLinkInertia(Rng& rng);
SpatialInertia<double> rotorInertia(Rng& rng);

/// Chains `depth` actuation sub-mechanisms in series on each of `branches`
/// branches hanging off the base.  Link-rotor stages contribute 2 bodies and
/// 1 constraint row, belt stages 4 and 2, four-bar stages 3 and 2.
Model generateMechanismChain(MechanismType type, int depth, int branches, std::uint64_t seed, double eta = 6.0);

/// Two branches of depth d_t; a transmission constraint couples the first
/// d_l joints of the branches (loop size 2 d_l) or a connecting rod joins
/// the d_l-th bodies through revolute pins (loop size 2 d_l + 1).
Model generateConstrainedBranches(BranchKind kind, int d_t, int d_l, double eta, std::uint64_t seed);

struct FeasibleState {
  Eigen::VectorXd q, qd;  // spanning
  Eigen::VectorXd y, yd;  // independent
};

/// Samples independent coordinates uniformly and closes each loop for the
/// dependent ones (damped Newton for four-bar clusters), then lifts the
/// independent velocities through G.
FeasibleState sampleFeasibleState(const Model& model, Rng& rng, double pos_range = 0.4, double vel_range = 1.0);

struct BenchmarkSpec {
  enum class Family { MechanismChain, TransmissionBranches, ConnectingRodBranches };
  Family family = Family::MechanismChain;
  MechanismType mechanism = MechanismType::LinkRotor;
  std::vector<int> depths{2, 4, 8};  // d_a grid
  std::vector<int> branches{1};      // b_a grid
  int d_t = 10;
  std::vector<int> d_ls{1};
  double eta = 6.0;
  std::vector<std::string> algorithms{"cluster-aba", "kkt"};
  std::uint64_t seed = 0;
  int trials = 1;
};

struct BenchmarkRow {
  std::string family;
  std::string mechanism;
  int d_a = -1, b_a = -1, d_t = -1, d_l = -1;  // -1 = not applicable
  std::string algorithm;
  OpCounts counts;
  bool ok = true;
  std::string error;
};

/// Evaluates forward dynamics once per grid point and algorithm on counted
/// scalars at a seeded feasible state.  Generation or evaluation failures
/// are recorded on the row and the run continues.
std::vector<BenchmarkRow> runBenchmark(const BenchmarkSpec& spec);

/// Fixed columns: family,mechanism,d_a,b_a,d_t,d_l,algorithm,adds,mults,
/// divs,sqrts,total.  LF line endings.
void writeCsv(std::ostream& os, const std::vector<BenchmarkRow>& rows);

/// Seed 0 unless the CLUSTER_DYN_SEED environment variable overrides it.
std::uint64_t defaultSeed();

}  // namespace clusterdyn
