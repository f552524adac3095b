// Command-line front end: forward/inverse dynamics on model files, model
// checking (diagnostics plus cluster duality identities), operation-count
// benchmarks, and the inverse-dynamics accuracy experiment.
#include "clusterdyn/bench.hpp"
#include "clusterdyn/cluster.hpp"
#include "clusterdyn/dynamics.hpp"
#include "clusterdyn/oracle.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/QR>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace clusterdyn;

std::vector<double> parseList(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::vector<int> parseIntList(const std::string& text) {
  std::vector<int> out;
  for (double v : parseList(text)) out.push_back(static_cast<int>(v));
  return out;
}

Eigen::VectorXd toVec(const std::vector<double>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

Eigen::Vector3d parseGravity(const std::string& text) {
  const auto v = parseList(text);
  if (v.size() != 3) throw ModelError("gravity must be three comma-separated numbers");
  return {v[0], v[1], v[2]};
}

void loadStateFile(const std::string& path, DynamicsState& st) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open state file " + path);
  nlohmann::json doc;
  in >> doc;
  auto grab = [&](const char* key, Eigen::VectorXd& dst) {
    if (!doc.contains(key)) return;
    std::vector<double> v = doc.at(key).get<std::vector<double>>();
    dst = toVec(v);
  };
  grab("q", st.q);
  grab("qd", st.qd);
  grab("y", st.y);
  grab("yd", st.yd);
  grab("tau", st.tau);
  grab("tau_tree", st.tau_tree);
}

void printVector(const std::string& label, const Eigen::VectorXd& v) {
  std::cout << label << ":";
  for (Eigen::Index i = 0; i < v.size(); ++i) std::cout << " " << v(i);
  std::cout << "\n";
}

/// Duality identities of the cluster joint model, evaluated at random
/// feasible configurations.
bool runDualityChecks(const Model& model, int configs, std::uint64_t seed, double tol, std::ostream& os) {
  Rng rng(seed);
  Workspace<double> ws(model);
  double worst = 0.0;
  for (int trial = 0; trial < configs; ++trial) {
    const FeasibleState fs = sampleFeasibleState(model, rng);
    DynamicsState st;
    st.q = fs.q;
    st.qd = fs.qd;
    stageClusters(model, st, ws, {});
    for (int k = 0; k < model.numClusters(); ++k) {
      const Cluster& c = model.cluster(k);
      const auto& cj = ws.clusters()[static_cast<std::size_t>(k)].joint;
      const Eigen::MatrixXd spo = denseSpo(c, cj);
      const Eigen::MatrixXd spof = denseSpof(c, cj);
      worst = std::max(worst, (spo.transpose() * spof - Eigen::MatrixXd::Identity(6 * cj.nb, 6 * cj.nb))
                                  .cwiseAbs()
                                  .maxCoeff());
      const auto fss = computeForceSubspaces(c, cj);
      worst = std::max(worst, (cj.Smat.transpose() * fss.Ta - Eigen::MatrixXd::Identity(cj.m, cj.m))
                                  .cwiseAbs()
                                  .maxCoeff());
      worst = std::max(worst, (cj.G.transpose() * fss.P - Eigen::MatrixXd::Identity(cj.m, cj.m))
                                  .cwiseAbs()
                                  .maxCoeff());
      // T^c from the QR nullspace of S^T spans the constraint force subspace.
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(cj.Smat);
      const Eigen::MatrixXd Q = qr.householderQ();
      const Eigen::MatrixXd Tc = Q.rightCols(6 * cj.nb - cj.m);
      worst = std::max(worst, (cj.Smat.transpose() * Tc).cwiseAbs().maxCoeff());
    }
  }
  os << "duality max residual: " << worst << "\n";
  const bool pass = worst < tol;
  os << "duality: " << (pass ? "PASS" : "FAIL") << "\n";
  return pass;
}

int mainImpl(int argc, char** argv) {
  CLI::App app{"Constraint-embedding rigid-body dynamics library and benchmark CLI"};
  app.require_subcommand(1);

  // ---- fd ----
  auto* fd = app.add_subcommand("fd", "Forward dynamics of a model file");
  std::string fd_model, fd_state, fd_q, fd_qd, fd_y, fd_yd, fd_tau, fd_tau_tree, fd_coords = "independent",
                                                                                 fd_gravity = "0,0,-9.81";
  fd->add_option("--model", fd_model, "model file (.json)")->required();
  fd->add_option("--state", fd_state, "state file with q/qd or y/yd");
  fd->add_option("--q", fd_q, "spanning positions, comma-separated");
  fd->add_option("--qd", fd_qd, "spanning velocities");
  fd->add_option("--y", fd_y, "independent positions");
  fd->add_option("--yd", fd_yd, "independent velocities");
  fd->add_option("--tau", fd_tau, "independent generalized forces");
  fd->add_option("--tau-tree", fd_tau_tree, "spanning generalized forces");
  fd->add_option("--coords", fd_coords, "output coordinates: spanning | independent");
  fd->add_option("--gravity", fd_gravity, "gravity vector, default 0,0,-9.81");

  // ---- id ----
  auto* id = app.add_subcommand("id", "Inverse dynamics of a model file");
  std::string id_model, id_state, id_q, id_qd, id_y, id_yd, id_ydd, id_gravity = "0,0,-9.81";
  id->add_option("--model", id_model)->required();
  id->add_option("--state", id_state);
  id->add_option("--q", id_q);
  id->add_option("--qd", id_qd);
  id->add_option("--y", id_y);
  id->add_option("--yd", id_yd);
  id->add_option("--ydd", id_ydd, "independent accelerations")->required();
  id->add_option("--gravity", id_gravity);

  // ---- check ----
  auto* check = app.add_subcommand("check", "Model diagnostics and duality identities");
  std::string check_model;
  int check_configs = 25;
  std::uint64_t check_seed = defaultSeed();
  check->add_option("--model", check_model)->required();
  check->add_option("--configs", check_configs, "random configurations per cluster check");
  check->add_option("--seed", check_seed);

  // ---- bench ----
  auto* bench = app.add_subcommand("bench", "Arithmetic-operation-count benchmark");
  std::string b_family = "mechanism-chain", b_mech = "link-rotor", b_depths = "2,4,8", b_branches = "1",
              b_dls = "1,2,3", b_algos = "cluster-aba,kkt", b_out;
  int b_dt = 10, b_trials = 1;
  double b_eta = 6.0;
  std::uint64_t b_seed = defaultSeed();
  bench->add_option("--family", b_family, "mechanism-chain | transmission-branches | connecting-rod-branches");
  bench->add_option("--mechanism", b_mech, "link-rotor | belt | four-bar");
  bench->add_option("--depths", b_depths, "d_a grid, comma-separated");
  bench->add_option("--branches", b_branches, "b_a grid");
  bench->add_option("--dt", b_dt, "branch depth d_t");
  bench->add_option("--dls", b_dls, "d_l grid");
  bench->add_option("--eta", b_eta, "transmission ratio");
  bench->add_option("--algorithms", b_algos, "subset of cluster-aba,kkt,approximate-aba");
  bench->add_option("--seed", b_seed);
  bench->add_option("--trials", b_trials);
  bench->add_option("--out", b_out, "CSV output path (default stdout)");

  // ---- experiment ----
  auto* experiment = app.add_subcommand("experiment", "Numerical experiments");
  auto* iderr = experiment->add_subcommand("id-error", "Inverse-dynamics torque error study");
  std::string e_model, e_out, e_gravity = "0,-9.81,0";
  double e_A = 0.5, e_omega = 1.5, e_dt = 0.01, e_duration = 2.0, e_eta = 6.0;
  std::uint64_t e_seed = defaultSeed();
  iderr->add_option("--model", e_model, "model file (default: built-in two-joint belt leg)");
  iderr->add_option("--A", e_A, "amplitude [rad]");
  iderr->add_option("--omega", e_omega, "frequency [rad/s]");
  iderr->add_option("--dt", e_dt, "sample interval [s]");
  iderr->add_option("--duration", e_duration, "trace length [s]");
  iderr->add_option("--eta", e_eta, "ratio for the built-in fixture");
  iderr->add_option("--seed", e_seed, "seed for the built-in fixture");
  iderr->add_option("--gravity", e_gravity);
  iderr->add_option("--out", e_out, "CSV output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  if (fd->parsed()) {
    const Model model = Model::loadFile(fd_model);
    DynamicsState st;
    if (!fd_state.empty()) loadStateFile(fd_state, st);
    if (!fd_q.empty()) st.q = toVec(parseList(fd_q));
    if (!fd_qd.empty()) st.qd = toVec(parseList(fd_qd));
    if (!fd_y.empty()) st.y = toVec(parseList(fd_y));
    if (!fd_yd.empty()) st.yd = toVec(parseList(fd_yd));
    if (!fd_tau.empty()) st.tau = toVec(parseList(fd_tau));
    if (!fd_tau_tree.empty()) st.tau_tree = toVec(parseList(fd_tau_tree));
    Workspace<double> ws(model);
    EvalOptions opts;
    opts.compute_qdd = fd_coords == "spanning";
    const auto res = clusterAba<double>(model, st, parseGravity(fd_gravity), ws, opts);
    printVector("ydd", res.ydd);
    if (opts.compute_qdd) printVector("qdd", res.qdd);
    return 0;
  }

  if (id->parsed()) {
    const Model model = Model::loadFile(id_model);
    DynamicsState st;
    if (!id_state.empty()) loadStateFile(id_state, st);
    if (!id_q.empty()) st.q = toVec(parseList(id_q));
    if (!id_qd.empty()) st.qd = toVec(parseList(id_qd));
    if (!id_y.empty()) st.y = toVec(parseList(id_y));
    if (!id_yd.empty()) st.yd = toVec(parseList(id_yd));
    const Eigen::VectorXd ydd = toVec(parseList(id_ydd));
    Workspace<double> ws(model);
    const Eigen::VectorXd tau = clusterRnea<double>(model, st, ydd, parseGravity(id_gravity), ws);
    printVector("tau", tau);
    return 0;
  }

  if (check->parsed()) {
    Model model = Model::loadFile(check_model);
    const auto diags = validateModel(model);
    for (const auto& d : diags) {
      std::cout << (d.severity == Diagnostic::Severity::Error ? "error" : "warning") << " [" << d.code
                << "] " << d.message << "\n";
    }
    std::cout << "bodies: " << model.numBodies() << ", clusters: " << model.numClusters()
              << ", independent DoF: " << model.numIndependent() << "\n";
    if (!diags.empty()) return 1;
    if (!runDualityChecks(model, check_configs, check_seed, 1e-10, std::cout)) return 2;
    return 0;
  }

  if (bench->parsed()) {
    BenchmarkSpec spec;
    if (b_family == "mechanism-chain") {
      spec.family = BenchmarkSpec::Family::MechanismChain;
    } else if (b_family == "transmission-branches") {
      spec.family = BenchmarkSpec::Family::TransmissionBranches;
    } else if (b_family == "connecting-rod-branches") {
      spec.family = BenchmarkSpec::Family::ConnectingRodBranches;
    } else {
      throw ModelError("unknown benchmark family \"" + b_family + "\"");
    }
    if (b_mech == "link-rotor") {
      spec.mechanism = MechanismType::LinkRotor;
    } else if (b_mech == "belt") {
      spec.mechanism = MechanismType::Belt;
    } else if (b_mech == "four-bar") {
      spec.mechanism = MechanismType::FourBar;
    } else {
      throw ModelError("unknown mechanism \"" + b_mech + "\"");
    }
    spec.depths = parseIntList(b_depths);
    spec.branches = parseIntList(b_branches);
    spec.d_t = b_dt;
    spec.d_ls = parseIntList(b_dls);
    spec.eta = b_eta;
    spec.algorithms.clear();
    {
      std::stringstream ss(b_algos);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) spec.algorithms.push_back(item);
      }
    }
    spec.seed = b_seed;
    spec.trials = b_trials;

    const auto rows = runBenchmark(spec);
    for (const auto& r : rows) {
      if (!r.ok) std::cerr << "benchmark row failed (" << r.algorithm << "): " << r.error << "\n";
    }
    if (b_out.empty()) {
      writeCsv(std::cout, rows);
    } else {
      std::ofstream os(b_out, std::ios::binary);
      if (!os) throw ModelError("cannot open output file " + b_out);
      writeCsv(os, rows);
    }
    return 0;
  }

  if (iderr->parsed()) {
    const Model model = e_model.empty() ? generateMechanismChain(MechanismType::Belt, 1, 1, e_seed, e_eta)
                                        : Model::loadFile(e_model);
    const auto traces = idErrorExperiment(model, e_A, e_omega, e_dt, e_duration, parseGravity(e_gravity));
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!e_out.empty()) {
      file.open(e_out, std::ios::binary);
      if (!file) throw ModelError("cannot open output file " + e_out);
      os = &file;
    }
    const int nr = static_cast<int>(traces.exact.cols());
    *os << "t";
    for (int j = 0; j < nr; ++j) *os << ",exact_" << j << ",unconstrained_" << j << ",approximate_" << j;
    *os << "\n";
    for (std::size_t s = 0; s < traces.time.size(); ++s) {
      *os << traces.time[s];
      for (int j = 0; j < nr; ++j) {
        *os << "," << traces.exact(static_cast<Eigen::Index>(s), j) << ","
            << traces.unconstrained(static_cast<Eigen::Index>(s), j) << ","
            << traces.approximate(static_cast<Eigen::Index>(s), j);
      }
      *os << "\n";
    }
    std::cerr << "RMS torque difference vs exact (per joint):\n";
    for (int j = 0; j < nr; ++j) {
      std::cerr << "  joint " << j << ": unconstrained " << traces.rms_unconstrained(j) << ", approximate "
                << traces.rms_approximate(j) << "\n";
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return mainImpl(argc, argv);
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
