// Command-line front end: synthetic node sets, interpolation solves with
// iteration reports, the saddle-scaling condition experiment, kriging
// prediction/MSE grids, and detail-block entry-decay profiles.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hbrbf/hbrbf.hpp"

namespace {

using namespace hbrbf;

constexpr const char* kReportHeader =
    "N,kernel,m,p,preconditioner,outer_iterations,final_residual,"
    "hb_seconds,precond_seconds,solve_seconds,total_seconds";

KernelSpec make_kernel(const std::string& name, double delta, bool delta_set,
                       double scale) {
  if (name == "biharmonic") {
    if (delta_set)
      throw ConfigError("--delta does not apply to the biharmonic kernel");
    return KernelSpec::biharmonic(scale);
  }
  if (name == "mq") return KernelSpec::multiquadric(delta, scale);
  if (name == "imq") return KernelSpec::inverse_multiquadric(delta, scale);
  throw ConfigError("unknown kernel '" + name +
                    "' (choose biharmonic, mq, or imq)");
}

Preconditioner parse_precond(const std::string& name) {
  if (name == "none") return Preconditioner::None;
  if (name == "diag") return Preconditioner::Diagonal;
  if (name == "ssor") return Preconditioner::BlockSsor;
  throw ConfigError("unknown preconditioner '" + name +
                    "' (choose none, diag, or ssor)");
}

Eigen::VectorXd values_of(const NodeSet& nodes, const std::string& path) {
  if (!nodes.has_values())
    throw DataError(path + ": no value column; this command needs "
                    "x,y,z,value input");
  return Eigen::Map<const Eigen::VectorXd>(nodes.values.data(), nodes.size());
}

double condition_2norm(const Eigen::MatrixXd& A) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s[s.size() - 1] <= 0.0)
    throw NumericError("condition estimate: matrix is numerically singular");
  return s[0] / s[s.size() - 1];
}

// nx-by-nx mesh over [0,1]^2 at fixed third coordinate, endpoints included.
std::vector<Vec3> cross_section_grid(int nx, double x3) {
  std::vector<Vec3> grid;
  grid.reserve(static_cast<std::size_t>(nx) * nx);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nx; ++j)
      grid.emplace_back(static_cast<double>(i) / (nx - 1),
                        static_cast<double>(j) / (nx - 1), x3);
  return grid;
}

std::string fmt(double v) { return detail::fmt_double(v); }

// --- generate ---------------------------------------------------------------

struct GenerateArgs {
  std::string test_case = "uniform";
  int n = 0;
  std::uint64_t seed = 1;
  std::string out;
};

void run_generate(const GenerateArgs& a) {
  const NodeSet nodes = generate_test_case(parse_test_case(a.test_case), a.n,
                                           a.seed);
  write_nodes_csv(a.out, nodes);
  std::cout << "generate: wrote " << nodes.size() << " nodes (requested "
            << a.n << ", case " << a.test_case << ", seed " << a.seed
            << ") to " << a.out << '\n';
}

// --- solve -------------------------------------------------------------------

struct SolveArgs {
  std::string in;
  std::string out = "hbrbf_report.csv";
  std::string solution_out;
  std::string kernel = "biharmonic";
  double delta = 0.01;
  bool delta_set = false;
  double scale = 1.0;
  int m = 1;
  int p = 3;
  std::string precond = "diag";
  double tol = 1e-3;
  int restart = 100;
};

void run_solve(const SolveArgs& a) {
  const NodeSet nodes = load_nodes_csv(a.in);
  const Eigen::VectorXd d = values_of(nodes, a.in);
  const KernelSpec kernel = make_kernel(a.kernel, a.delta, a.delta_set,
                                        a.scale);
  SolveOptions opts;
  opts.preconditioner = parse_precond(a.precond);
  opts.outer_tol = a.tol;
  opts.restart = a.restart;

  const RBFSolution sol = solve_rbf(nodes, d, kernel, a.m, a.p, opts);
  const SolveReport& r = sol.report;

  std::ostringstream row;
  row << nodes.size() << ',' << kernel_name(kernel.family) << ',' << a.m << ','
      << a.p << ',' << a.precond << ',' << r.outer_iterations << ','
      << fmt(r.final_residual) << ',' << fmt(r.hb_seconds) << ','
      << fmt(r.precond_seconds) << ',' << fmt(r.solve_seconds) << ','
      << fmt(r.total_seconds);
  append_csv_row(a.out, kReportHeader, row.str());

  if (!a.solution_out.empty()) {
    // Coefficients on normalized coordinates: u per node, then the trend in
    // the monomial basis (recover raw-frame values via the affine node map).
    std::ofstream dump(a.solution_out);
    if (!dump) throw ConfigError("cannot open '" + a.solution_out + "'");
    dump << "kind,index,value\n";
    for (Eigen::Index i = 0; i < sol.u.size(); ++i)
      dump << "u," << i << ',' << fmt(sol.u[i]) << '\n';
    const Eigen::VectorXd c_mono = sol.poly_coeffs * sol.c;
    for (Eigen::Index i = 0; i < c_mono.size(); ++i)
      dump << "c," << i << ',' << fmt(c_mono[i]) << '\n';
  }

  std::cout << "solve: N=" << nodes.size() << " kernel="
            << kernel_name(kernel.family) << " m=" << a.m << " p=" << a.p
            << " precond=" << a.precond << " iterations="
            << r.outer_iterations << " residual=" << fmt(r.final_residual)
            << " interp_residual=" << fmt(r.interpolation_residual)
            << " total_s=" << fmt(r.total_seconds) << '\n';
  if (!r.converged)
    throw NumericError("solve: stopped at relative residual " +
                       fmt(r.final_residual) + " without reaching " +
                       fmt(a.tol));
}

// --- condition ----------------------------------------------------------------

struct ConditionArgs {
  std::string in;
  std::string out = "condition.csv";
  std::string kernel = "biharmonic";
  double delta = 0.01;
  bool delta_set = false;
  double scale = 1.0;
  int m = 3;
  int p = 3;
  std::vector<double> alphas = {1.0, 10.0, 100.0};
};

void run_condition(const ConditionArgs& a) {
  if (a.alphas.empty())
    throw ConfigError("condition: need at least one --alpha-list value");
  const NodeSet raw = load_nodes_csv(a.in);
  const Eigen::Index n = raw.size();
  if (n > 2000)
    throw ConfigError("condition: dense estimates are capped at N <= 2000");
  const KernelSpec kernel = make_kernel(a.kernel, a.delta, a.delta_set,
                                        a.scale);

  // The saddle sweep models a direct solve on the raw, un-normalized
  // problem: the polynomial block is evaluated on the domain blown up by
  // alpha while the kernel part keeps its scale.
  const Eigen::MatrixXd K = kernel_matrix(kernel, raw.points);

  // The reduced operator's conditioning is a property of the node set and
  // kernel alone (the pipeline normalizes internally); compute it once,
  // outside the alpha loop.
  auto [norm, map] = normalize_nodes(raw);
  const Octree tree = build_octree(norm, poly_dim(a.p));
  const HBTransform hb = build_hb(tree, norm, a.m, a.p);
  const MultiResOperator op(hb, norm, kernel);
  const double kappa_kw = condition_2norm(dense_KW(op));

  std::cout << "condition: N=" << n << " kernel=" << kernel_name(kernel.family)
            << " m=" << a.m << " kappa(K_W)=" << std::setprecision(6)
            << kappa_kw << '\n';
  for (double alpha : a.alphas) {
    std::vector<Vec3> scaled = raw.points;
    for (Vec3& x : scaled) x *= alpha;
    const Eigen::MatrixXd Q = monomial_matrix(scaled, a.m);
    const Eigen::Index M = Q.cols();
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n + M, n + M);
    S.topLeftCorner(n, n) = K;
    S.topRightCorner(n, M) = Q;
    S.bottomLeftCorner(M, n) = Q.transpose();
    const double kappa = condition_2norm(S);
    std::ostringstream row;
    row << n << ',' << kernel_name(kernel.family) << ',' << a.m << ','
        << fmt(alpha) << ',' << fmt(kappa) << ',' << fmt(kappa_kw);
    append_csv_row(a.out, "N,kernel,m,alpha,kappa_saddle,kappa_kw", row.str());
    std::cout << "condition: alpha=" << alpha << " kappa(saddle)="
              << std::setprecision(6) << kappa << '\n';
  }
}

// --- kriging -------------------------------------------------------------------

struct KrigingArgs {
  int n = 1000;
  std::uint64_t seed = 1;
  double delta = 0.01;
  double scale = 1e-4;
  int m = 2;
  std::vector<double> delta_list;
  std::string out = "kriging";
};

void run_kriging(const KrigingArgs& a) {
  const NodeSet nodes = gen_bimodal(a.n, a.seed);
  const KernelSpec cov = KernelSpec::inverse_multiquadric(a.delta, a.scale);
  const Eigen::VectorXd y = simulate_observations(nodes, cov, a.seed);

  const std::vector<Vec3> grid = cross_section_grid(40, 0.5);
  Eigen::VectorXd truth(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i)
    truth[static_cast<Eigen::Index>(i)] =
        std::pow(grid[i].cwiseAbs().sum(), 3);

  if (!a.delta_list.empty()) {
    // Shape-parameter grid scan: refit with each trial delta against the
    // same observations and score the squared error against the known
    // generating field on the cross-section.
    const std::string scan_path = a.out + "_delta_scan.csv";
    double best_delta = std::numeric_limits<double>::quiet_NaN();
    double best_err = std::numeric_limits<double>::infinity();
    for (double trial : a.delta_list) {
      const KernelSpec trial_cov =
          KernelSpec::inverse_multiquadric(trial, a.scale);
      const RegressionModel model = fit_blue(nodes, y, trial_cov, a.m);
      const Eigen::VectorXd pred = blue_predict(model, grid);
      const double err =
          (pred - truth).squaredNorm() / static_cast<double>(grid.size());
      std::ostringstream row;
      row << fmt(trial) << ',' << fmt(err);
      append_csv_row(scan_path, "delta,mean_sq_error", row.str());
      std::cout << "kriging: delta=" << trial << " mean_sq_error=" << err
                << '\n';
      if (err < best_err) {
        best_err = err;
        best_delta = trial;
      }
    }
    std::cout << "kriging: best delta=" << best_delta << " (mean_sq_error="
              << best_err << ") -> " << scan_path << '\n';
    return;
  }

  for (int mm : {0, 1, 2}) {
    const RegressionModel model = fit_blue(nodes, y, cov, mm);
    const Eigen::VectorXd pred = blue_predict(model, grid);
    const Eigen::VectorXd mse = blue_mse(model, grid);
    const std::string pred_path = a.out + "_pred_m" + std::to_string(mm) +
                                  ".csv";
    const std::string mse_path = a.out + "_mse_m" + std::to_string(mm) +
                                 ".csv";
    write_grid_csv(pred_path, grid, pred);
    write_grid_csv(mse_path, grid, mse);
    const double rms_dev = std::sqrt((pred - truth).squaredNorm() /
                                     static_cast<double>(grid.size()));
    std::cout << "kriging: m=" << mm << " sigma2=" << model.sigma2
              << " mean_mse=" << mse.mean() << " rms_deviation=" << rms_dev
              << " -> " << pred_path << ", " << mse_path << '\n';
  }
}

// --- decay --------------------------------------------------------------------

struct DecayArgs {
  std::string in;
  std::string out = "decay.csv";
  std::string kernel = "biharmonic";
  double delta = 0.01;
  bool delta_set = false;
  double scale = 1.0;
  int m = 3;
  int p = 3;
  int level = 2;
};

void run_decay(const DecayArgs& a) {
  const NodeSet raw = load_nodes_csv(a.in);
  auto [norm, map] = normalize_nodes(raw);
  const KernelSpec kernel = make_kernel(a.kernel, a.delta, a.delta_set,
                                        a.scale);
  const Octree tree = build_octree(norm, poly_dim(a.p));
  const HBTransform hb = build_hb(tree, norm, a.m, a.p);
  if (a.level < 0 || a.level > hb.levels())
    throw ConfigError("decay: level " + std::to_string(a.level) +
                      " outside tree range 0.." +
                      std::to_string(hb.levels()));
  const MultiResOperator op(hb, norm, kernel);
  const auto bins = decay_profile(op, a.level);
  if (bins.empty()) {
    std::cout << "decay: no detail columns at level " << a.level << '\n';
    return;
  }
  for (const DecayBin& bin : bins) {
    std::ostringstream row;
    row << a.level << ',' << fmt(bin.distance) << ',' << fmt(bin.max_abs);
    append_csv_row(a.out, "level,distance,max_abs", row.str());
  }
  std::cout << "decay: N=" << norm.size() << " level=" << a.level << " bins="
            << bins.size() << " near_max=" << bins.front().max_abs
            << " far_max=" << bins.back().max_abs << " -> " << a.out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical-basis RBF interpolation and kriging toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "key=value configuration file; command-line flags win");

  GenerateArgs gen;
  CLI::App* cmd_gen = app.add_subcommand(
      "generate", "Draw a synthetic node set and write it as CSV");
  cmd_gen->add_option("--case", gen.test_case, "uniform | vplane | bimodal")
      ->capture_default_str();
  cmd_gen->add_option("--n", gen.n, "number of samples to draw")->required();
  cmd_gen->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
  cmd_gen->add_option("--out", gen.out, "output CSV path")->required();

  SolveArgs sol;
  CLI::App* cmd_solve = app.add_subcommand(
      "solve", "Interpolate a valued node set; append a report row");
  cmd_solve->add_option("--in", sol.in, "input CSV (x,y,z,value)")->required();
  cmd_solve->add_option("--out", sol.out, "report CSV path")
      ->capture_default_str();
  cmd_solve->add_option("--solution-out", sol.solution_out,
                        "optional coefficient dump path");
  cmd_solve->add_option("--kernel", sol.kernel, "biharmonic | mq | imq")
      ->capture_default_str();
  CLI::Option* sol_delta =
      cmd_solve->add_option("--delta", sol.delta, "kernel shape parameter");
  cmd_solve->add_option("--scale", sol.scale, "kernel scale factor")
      ->capture_default_str();
  cmd_solve->add_option("-m,--m", sol.m, "polynomial trend order")
      ->capture_default_str();
  cmd_solve->add_option("-p,--p", sol.p, "vanishing-moment order")
      ->capture_default_str();
  cmd_solve->add_option("--precond", sol.precond, "none | diag | ssor")
      ->capture_default_str();
  cmd_solve->add_option("--tol", sol.tol, "relative residual target")
      ->capture_default_str();
  cmd_solve->add_option("--restart", sol.restart, "GMRES restart length")
      ->capture_default_str();

  ConditionArgs cond;
  CLI::App* cmd_cond = app.add_subcommand(
      "condition", "Condition numbers of the raw saddle system under "
                   "polynomial-domain scaling, and of the reduced operator");
  cmd_cond->add_option("--in", cond.in, "input CSV (values optional)")
      ->required();
  cmd_cond->add_option("--out", cond.out, "report CSV path")
      ->capture_default_str();
  cmd_cond->add_option("--kernel", cond.kernel, "biharmonic | mq | imq")
      ->capture_default_str();
  CLI::Option* cond_delta =
      cmd_cond->add_option("--delta", cond.delta, "kernel shape parameter");
  cmd_cond->add_option("--scale", cond.scale, "kernel scale factor")
      ->capture_default_str();
  cmd_cond->add_option("-m,--m", cond.m, "polynomial trend order")
      ->capture_default_str();
  cmd_cond->add_option("-p,--p", cond.p, "vanishing-moment order")
      ->capture_default_str();
  cmd_cond->add_option("--alpha-list", cond.alphas,
                       "polynomial-domain scalings to sweep")
      ->delimiter(',')
      ->capture_default_str();

  KrigingArgs krig;
  CLI::App* cmd_krig = app.add_subcommand(
      "kriging", "Simulate noisy observations, fit trends, emit "
                 "prediction/MSE grids");
  cmd_krig->add_option("--n", krig.n, "number of observation sites")
      ->capture_default_str();
  cmd_krig->add_option("--seed", krig.seed, "RNG seed")->capture_default_str();
  cmd_krig->add_option("--delta", krig.delta,
                       "covariance shape parameter (imq)")
      ->capture_default_str();
  cmd_krig->add_option("--scale", krig.scale, "covariance scale factor")
      ->capture_default_str();
  cmd_krig->add_option("-m,--m", krig.m, "trend order for --delta-list scans")
      ->capture_default_str();
  cmd_krig->add_option("--delta-list", krig.delta_list,
                       "scan these shape parameters instead of emitting grids")
      ->delimiter(',');
  cmd_krig->add_option("--out", krig.out, "output path prefix")
      ->capture_default_str();

  DecayArgs dec;
  CLI::App* cmd_decay = app.add_subcommand(
      "decay", "Entry-decay profile of one detail level block");
  cmd_decay->add_option("--in", dec.in, "input CSV (values optional)")
      ->required();
  cmd_decay->add_option("--out", dec.out, "profile CSV path")
      ->capture_default_str();
  cmd_decay->add_option("--kernel", dec.kernel, "biharmonic | mq | imq")
      ->capture_default_str();
  CLI::Option* dec_delta =
      cmd_decay->add_option("--delta", dec.delta, "kernel shape parameter");
  cmd_decay->add_option("--scale", dec.scale, "kernel scale factor")
      ->capture_default_str();
  cmd_decay->add_option("-m,--m", dec.m, "polynomial trend order")
      ->capture_default_str();
  cmd_decay->add_option("-p,--p", dec.p, "vanishing-moment order")
      ->capture_default_str();
  cmd_decay->add_option("--level", dec.level, "octree level to profile")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    sol.delta_set = sol_delta->count() > 0;
    cond.delta_set = cond_delta->count() > 0;
    dec.delta_set = dec_delta->count() > 0;
    if (app.got_subcommand(cmd_gen)) run_generate(gen);
    if (app.got_subcommand(cmd_solve)) run_solve(sol);
    if (app.got_subcommand(cmd_cond)) run_condition(cond);
    if (app.got_subcommand(cmd_krig)) run_kriging(krig);
    if (app.got_subcommand(cmd_decay)) run_decay(dec);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
