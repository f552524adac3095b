#include "clusterdyn/bench.hpp"

#include <cmath>
#include <cstdlib>
#include <ostream>
#include <sstream>

namespace clusterdyn {

std::string mechanismName(MechanismType type) {
  switch (type) {
    case MechanismType::LinkRotor: return "link-rotor";
    case MechanismType::Belt: return "belt";
    case MechanismType::FourBar: return "four-bar";
  }
  return "?";
}

SpatialInertia<double> randomLinkInertia(Rng& rng) {
  Eigen::Matrix3d A;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) A(r, c) = rng.uniform(-1.0, 1.0);
  }
  const Eigen::Matrix3d I_com = 0.05 * (A.transpose() * A) + 0.1 * Eigen::Matrix3d::Identity();
  const double mass = 1.0;
  const Eigen::Vector3d com(0.3 + rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), 0.0);
  const Eigen::Matrix3d I_origin = I_com + mass * (com.squaredNorm() * Eigen::Matrix3d::Identity() - com * com.transpose());
  return SpatialInertia<double>::FromMassComInertia(mass, com, I_origin);
}

SpatialInertia<double> rotorInertia(Rng& rng) {
  const double ja = rng.uniform(0.002, 0.02);
  Eigen::Matrix3d I = Eigen::Matrix3d::Zero();
  I(0, 0) = 0.6 * ja;
  I(1, 1) = 0.6 * ja;
  I(2, 2) = ja;
  return SpatialInertia<double>::FromMassComInertia(0.2, Eigen::Vector3d::Zero(), I);
}

namespace {

Body makeBody(int parent, const std::string& name, const Eigen::Vector3d& offset,
              const SpatialInertia<double>& inertia) {
  Body b;
  b.parent = parent;
  b.name = name;
  b.joint.type = TreeJointSpec::Type::Revolute;
  b.joint.axis = Eigen::Vector3d::UnitZ();
  b.X_T = SpatialTransform<double>::Translation(offset);
  b.inertia = inertia;
  return b;
}

}  // namespace

Model generateMechanismChain(MechanismType type, int depth, int branches, std::uint64_t seed, double eta) {
  if (depth < 1 || branches < 1) throw ModelError("mechanism chain requires depth >= 1 and branches >= 1");
  Rng rng(seed);
  std::vector<Body> bodies;
  std::vector<LoopConstraintSpec> loops;

  auto addBody = [&](int parent, const std::string& name, const Eigen::Vector3d& offset,
                     const SpatialInertia<double>& inertia) {
    bodies.push_back(makeBody(parent, name, offset, inertia));
    return static_cast<int>(bodies.size());
  };

  for (int br = 0; br < branches; ++br) {
    int parent = 0;
    for (int stage = 0; stage < depth; ++stage) {
      const Eigen::Vector3d base_off = parent == 0 ? Eigen::Vector3d(0.0, 1.2 * br, 0.0) : Eigen::Vector3d::Zero();
      const std::string tag = "b" + std::to_string(br) + "s" + std::to_string(stage);
      switch (type) {
        case MechanismType::LinkRotor: {
          const int L = addBody(parent, "link_" + tag, base_off + Eigen::Vector3d(1, 0, 0), randomLinkInertia(rng));
          const int R = addBody(parent, "rotor_" + tag, base_off, rotorInertia(rng));
          LoopConstraintSpec spec;
          spec.kind = LoopConstraintSpec::Kind::LinearTransmission;
          spec.bodies = {L, R};
          spec.independent = {L};
          spec.G.resize(2, 1);
          spec.G << 1.0, eta;
          loops.push_back(std::move(spec));
          parent = L;
          break;
        }
        case MechanismType::Belt: {
          const int L1 = addBody(parent, "link1_" + tag, base_off + Eigen::Vector3d(1, 0, 0), randomLinkInertia(rng));
          const int R1 = addBody(parent, "rotor1_" + tag, base_off, rotorInertia(rng));
          const int L2 = addBody(L1, "link2_" + tag, Eigen::Vector3d(1, 0, 0), randomLinkInertia(rng));
          const int R2 = addBody(L1, "rotor2_" + tag, Eigen::Vector3d::Zero(), rotorInertia(rng));
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
          parent = L2;
          break;
        }
        case MechanismType::FourBar: {
          const int I = addBody(parent, "crank_" + tag, base_off + Eigen::Vector3d(0.4, 0, 0), randomLinkInertia(rng));
          const int O = addBody(parent, "follower_" + tag, base_off + Eigen::Vector3d(1.4, 0, 0), randomLinkInertia(rng));
          const int C = addBody(I, "rod_" + tag, Eigen::Vector3d(0, 1, 0), randomLinkInertia(rng));
          LoopConstraintSpec spec;
          spec.kind = LoopConstraintSpec::Kind::FourBar;
          spec.rod_body = C;
          spec.anchor_body = O;
          spec.rod_pin = Eigen::Vector3d(1, 0, 0);
          spec.anchor_pin = Eigen::Vector3d(0, 1, 0);
          spec.independent = {I};
          loops.push_back(std::move(spec));
          parent = O;
          break;
        }
      }
    }
  }

  std::ostringstream name;
  name << mechanismName(type) << "-chain-d" << depth << "-b" << branches;
  return Model(name.str(), std::move(bodies), std::move(loops));
}

Model generateConstrainedBranches(BranchKind kind, int d_t, int d_l, double eta, std::uint64_t seed) {
  if (d_t < 1 || d_l < 1 || d_l > d_t) {
    throw ModelError("constrained branches require 1 <= d_l <= d_t");
  }
  Rng rng(seed);
  std::vector<Body> bodies;
  std::vector<LoopConstraintSpec> loops;
  const double h = 0.8;

  for (int j = 0; j < d_t; ++j) {
    const int parent = j == 0 ? 0 : j;
    const Eigen::Vector3d off = j == 0 ? Eigen::Vector3d::Zero() : Eigen::Vector3d(1, 0, 0);
    bodies.push_back(makeBody(parent, "a" + std::to_string(j + 1), off, randomLinkInertia(rng)));
  }
  for (int j = 0; j < d_t; ++j) {
    const int parent = j == 0 ? 0 : d_t + j;
    const Eigen::Vector3d off = j == 0 ? Eigen::Vector3d(0, -h, 0) : Eigen::Vector3d(1, 0, 0);
    bodies.push_back(makeBody(parent, "b" + std::to_string(j + 1), off, randomLinkInertia(rng)));
  }

  if (kind == BranchKind::Transmission) {
    LoopConstraintSpec spec;
    spec.kind = LoopConstraintSpec::Kind::ChainedTransmission;
    spec.eta = eta;
    for (int j = 1; j <= d_l; ++j) spec.branch1.push_back(j);
    for (int j = 1; j <= d_l; ++j) spec.branch2.push_back(d_t + j);
    loops.push_back(std::move(spec));
  } else {
    bodies.push_back(makeBody(d_l, "rod", Eigen::Vector3d(1, 0, 0), randomLinkInertia(rng)));
    LoopConstraintSpec spec;
    spec.kind = LoopConstraintSpec::Kind::FourBar;
    spec.rod_body = 2 * d_t + 1;
    spec.anchor_body = d_t + d_l;
    spec.rod_pin = Eigen::Vector3d(0, -h, 0);
    spec.anchor_pin = Eigen::Vector3d(1, 0, 0);
    loops.push_back(std::move(spec));
  }

  std::ostringstream name;
  name << (kind == BranchKind::Transmission ? "transmission" : "connecting-rod") << "-dt" << d_t << "-dl" << d_l;
  return Model(name.str(), std::move(bodies), std::move(loops));
}

FeasibleState sampleFeasibleState(const Model& model, Rng& rng, double pos_range, double vel_range) {
  FeasibleState out;
  out.q.resize(model.nq());
  out.qd.resize(model.nq());
  out.y.resize(model.numIndependent());
  out.yd.resize(model.numIndependent());

  double range = pos_range;
  for (int attempt = 0; attempt < 8; ++attempt) {
    for (int i = 0; i < model.numIndependent(); ++i) {
      out.y(i) = rng.uniform(-range, range);
      out.yd(i) = rng.uniform(-vel_range, vel_range);
    }
    try {
      for (int k = 0; k < model.numClusters(); ++k) {
        const Cluster& c = model.cluster(k);
        Eigen::VectorXd qk = Eigen::VectorXd::Zero(c.nf);
        for (int i = 0; i < c.ndof; ++i) {
          qk(c.independent_local[static_cast<std::size_t>(i)]) = out.y(model.yOffset(k) + i);
        }
        solveClosure<double>(model, k, qk);
        auto eval = evalClusterConstraints<double>(model, k, qk, Eigen::VectorXd::Zero(c.nf));
        auto expl = extractExplicit<double>(eval.K, eval.k, c.independent_local);
        const Eigen::VectorXd qdk = expl.G * out.yd.segment(model.yOffset(k), c.ndof);
        for (int j = 0; j < c.nf; ++j) {
          out.q(c.bodies[static_cast<std::size_t>(j)] - 1) = qk(j);
          out.qd(c.bodies[static_cast<std::size_t>(j)] - 1) = qdk(j);
        }
      }
      return out;
    } catch (const NumericalError&) {
      range *= 0.6;  // retry closer to the closed reference configuration
    }
  }
  throw NumericalError("could not sample a feasible state for model " + model.name());
}

namespace {

const Eigen::Vector3d kBenchGravity(0.0, 0.0, -9.81);

OpCounts countClusterAba(const Model& model, const FeasibleState& fs, const Eigen::VectorXd& tau_tree) {
  Workspace<CountingScalar> ws(model);
  DynamicsState st;
  st.q = fs.q;
  st.qd = fs.qd;
  st.tau_tree = tau_tree;
  OpCounts counts;
  {
    CountingScope scope(counts);
    EvalOptions opts;
    opts.compute_qdd = true;
    (void)clusterAba<CountingScalar>(model, st, kBenchGravity, ws, opts);
  }
  return counts;
}

OpCounts countKkt(const Model& model, const FeasibleState& fs, const Eigen::VectorXd& tau_tree) {
  const VecX<CountingScalar> q = fs.q.cast<CountingScalar>();
  const VecX<CountingScalar> qd = fs.qd.cast<CountingScalar>();
  const VecX<CountingScalar> tau = tau_tree.cast<CountingScalar>();
  OpCounts counts;
  {
    CountingScope scope(counts);
    (void)kktForwardDynamics<CountingScalar>(model, q, qd, tau, kBenchGravity);
  }
  return counts;
}

OpCounts countApproximateAba(const Model& model, const FeasibleState& fs, const Eigen::VectorXd& tau_tree) {
  const ReducedModel rm = makeArmatureReducedModel(model);
  DynamicsState st;
  st.q = fs.q;
  st.qd = fs.qd;
  st.tau_tree = tau_tree;
  OpCounts counts;
  {
    CountingScope scope(counts);
    (void)approximateAba<CountingScalar>(rm, st, kBenchGravity);
  }
  return counts;
}

void runPoint(const BenchmarkSpec& spec, const Model& model, BenchmarkRow base, Rng& rng,
              std::vector<BenchmarkRow>& rows) {
  const int trials = std::max(1, spec.trials);
  for (const auto& alg : spec.algorithms) {
    BenchmarkRow row = base;
    row.algorithm = alg;
    Rng trial_rng(rng.next());
    try {
      OpCounts sum;
      for (int t = 0; t < trials; ++t) {
        FeasibleState fs = sampleFeasibleState(model, trial_rng);
        Eigen::VectorXd tau_tree(model.nq());
        for (int i = 0; i < model.nq(); ++i) tau_tree(i) = trial_rng.uniform(-1.0, 1.0);
        OpCounts one;
        if (alg == "cluster-aba") {
          one = countClusterAba(model, fs, tau_tree);
        } else if (alg == "kkt") {
          one = countKkt(model, fs, tau_tree);
        } else if (alg == "approximate-aba") {
          one = countApproximateAba(model, fs, tau_tree);
        } else {
          throw ModelError("unknown algorithm \"" + alg + "\"");
        }
        sum += one;
      }
      const auto avg = [&](std::uint64_t v) { return (v + static_cast<std::uint64_t>(trials) / 2) / static_cast<std::uint64_t>(trials); };
      row.counts.adds = avg(sum.adds);
      row.counts.mults = avg(sum.mults);
      row.counts.divs = avg(sum.divs);
      row.counts.sqrts = avg(sum.sqrts);
      row.counts.compares = avg(sum.compares);
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
      row.counts = OpCounts{};
    }
    rows.push_back(std::move(row));
  }
}

}  // namespace

std::vector<BenchmarkRow> runBenchmark(const BenchmarkSpec& spec) {
  std::vector<BenchmarkRow> rows;
  Rng master(spec.seed);

  if (spec.family == BenchmarkSpec::Family::MechanismChain) {
    for (int d_a : spec.depths) {
      for (int b_a : spec.branches) {
        BenchmarkRow base;
        base.family = "mechanism-chain";
        base.mechanism = mechanismName(spec.mechanism);
        base.d_a = d_a;
        base.b_a = b_a;
        Rng point_rng(master.next());
        try {
          const Model model = generateMechanismChain(spec.mechanism, d_a, b_a, point_rng.next(), spec.eta);
          runPoint(spec, model, base, point_rng, rows);
        } catch (const std::exception& e) {
          for (const auto& alg : spec.algorithms) {
            BenchmarkRow row = base;
            row.algorithm = alg;
            row.ok = false;
            row.error = e.what();
            rows.push_back(std::move(row));
          }
        }
      }
    }
    return rows;
  }

  const BranchKind kind =
      spec.family == BenchmarkSpec::Family::TransmissionBranches ? BranchKind::Transmission : BranchKind::ConnectingRod;
  for (int d_l : spec.d_ls) {
    BenchmarkRow base;
    base.family = spec.family == BenchmarkSpec::Family::TransmissionBranches ? "transmission-branches"
                                                                             : "connecting-rod-branches";
    base.mechanism = kind == BranchKind::Transmission ? "transmission" : "connecting-rod";
    base.d_t = spec.d_t;
    base.d_l = d_l;
    Rng point_rng(master.next());
    try {
      const Model model = generateConstrainedBranches(kind, spec.d_t, d_l, spec.eta, point_rng.next());
      runPoint(spec, model, base, point_rng, rows);
    } catch (const std::exception& e) {
      for (const auto& alg : spec.algorithms) {
        BenchmarkRow row = base;
        row.algorithm = alg;
        row.ok = false;
        row.error = e.what();
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

void writeCsv(std::ostream& os, const std::vector<BenchmarkRow>& rows) {
  os << "family,mechanism,d_a,b_a,d_t,d_l,algorithm,adds,mults,divs,sqrts,total\n";
  auto cell = [&](int v) { return v < 0 ? std::string() : std::to_string(v); };
  for (const auto& r : rows) {
    os << r.family << ',' << r.mechanism << ',' << cell(r.d_a) << ',' << cell(r.b_a) << ',' << cell(r.d_t) << ','
       << cell(r.d_l) << ',' << r.algorithm << ',' << r.counts.adds << ',' << r.counts.mults << ',' << r.counts.divs
       << ',' << r.counts.sqrts << ',' << r.counts.total() << '\n';
  }
}

std::uint64_t defaultSeed() {
  if (const char* env = std::getenv("CLUSTER_DYN_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 0;
}

}  // namespace clusterdyn
