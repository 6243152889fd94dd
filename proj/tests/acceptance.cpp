// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spde/config.hpp"
#include "spde/ergodics.hpp"
#include "spde/estimate.hpp"
#include "spde/harness.hpp"
#include "spde/simulate.hpp"
#include "spde/stats.hpp"

using namespace spde;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

// Allen-Cahn on (0, 1), T = 1, white noise, sigma = nu^{1/4}, 200 x 40000.
const char* kStudy = R"(
[model]
nu = 0.001
reaction = allen_cahn
horizon = 1

[grid]
n_space = 200
n_time = 40000

[estimator]
h = 0.1
alpha_bar = 0.05
beta = 2
)";

ExperimentConfig study(const std::string& extra) { return build_experiment(Config::parse(std::string(kStudy) + extra)); }

ModelSpec window_model(double gl, double gr) {
  ModelSpec m;
  m.nu = 0.01;
  m.reaction = zero_reaction();
  m.domain.gamma_left = gl;
  m.domain.gamma_right = gr;
  return m;
}

EstimatorConfig estimator(double x0, double h, double nu, double sigma) {
  EstimatorConfig c;
  c.x0 = x0;
  c.h = h;
  c.nu_known = nu;
  c.sigma = sigma;
  return c;
}

Outcome exact_recovery() {
  const auto m = window_model(0.2, 0.8);
  const auto g = GridSpec::for_model(m, 5, 3);
  double worst = 0.0;
  for (double c : {0.1, -0.12, 0.05, 1e-3}) {
    std::vector<double> v((g.n_time + 1) * g.n_space);
    for (std::size_t i = 0; i <= g.n_time; ++i)
      for (std::size_t k = 0; k < g.n_space; ++k) v[i * g.n_space + k] = 1.0 + 0.1 * (g.y(k) - 0.5) + c * g.t(i);
    const auto r = estimate(Trajectory(m, g, 0, v), estimator(1.0, 0.3, 0.37, 1.0));
    worst = std::max(worst, std::abs(r.f_hat - c) / std::abs(c));
  }
  return {worst <= 1e-10, "max relative error " + fmt(worst)};
}

Outcome kernel_identities() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto m = window_model(0.1, 0.9);
  const auto g = GridSpec::for_model(m, 12, 20);
  double worst_mass = 0.0, worst_moment = 0.0, min_kernel = 0.0, worst_rescale = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double x0 = 2.0 * u(rng);
    const double h = 0.3 + 0.5 * (u(rng) + 1.0);
    std::vector<double> v((g.n_time + 1) * g.n_space);
    for (auto& x : v) x = x0 + 1.2 * h * u(rng);
    const Trajectory traj(m, g, 0, v);
    const auto cfg = estimator(x0, h, m.nu, 1.0);
    const auto kernel = random_kernel(compute_weights(traj, cfg), cfg.kernels, h, x0);
    double mass = 0.0, moment = 0.0;
    for (std::size_t i = 0; i < g.n_time; ++i)
      for (std::size_t k = 0; k < g.n_space; ++k) {
        const double x = traj.at(i, k);
        if (!m.domain.in_window(g.y(k)) || std::abs(x - x0) > h) continue;
        const double kx = kernel(x);
        min_kernel = std::min(min_kernel, kx);
        mass += g.dt * g.dx * kx;
        moment += g.dt * g.dx * kx * (x - x0);
      }
    worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
    worst_moment = std::max(worst_moment, std::abs(moment));

    const auto base = estimate(traj, cfg);
    auto scaled = cfg;
    scaled.kernels = scale_kernels(cfg.kernels, 0.4 + 5.0 * (u(rng) + 1.0), 0.4 + 5.0 * (u(rng) + 1.0));
    const auto r = estimate(traj, scaled);
    worst_rescale = std::max(worst_rescale, std::abs(r.f_hat - base.f_hat) / std::max(std::abs(base.f_hat), 1e-300));
  }
  const bool ok = min_kernel >= -1e-12 && worst_mass <= 1e-12 && worst_moment <= 1e-12 && worst_rescale <= 1e-10;
  return {ok, "min K " + fmt(min_kernel) + ", |mass-1| " + fmt(worst_mass) + ", |moment| " + fmt(worst_moment) +
                  ", rescale rel " + fmt(worst_rescale)};
}

Outcome linear_oracle() {
  ModelSpec m;
  m.nu = 0.1;
  m.reaction = zero_reaction();
  const auto g = GridSpec::for_model(m, 99);  // y_49 = 0.5
  const std::size_t runs = 2000;
  const auto rows = ensemble_rows(m, g, g.n_time, runs, 31, 0);
  std::vector<double> mid(runs);
  for (std::size_t r = 0; r < runs; ++r) mid[r] = rows[r * g.n_space + 49];
  const double mc = stats::variance(mid);
  const double exact = linear_variance_exact(m.nu, m.sigma(), 1.0, 0.5, 10000);
  const double rel = std::abs(mc / exact - 1.0);
  return {rel <= 0.10, "MC var " + fmt(mc) + " vs exact " + fmt(exact) + " (rel " + fmt(rel, 3) + ")"};
}

Outcome figure_reproduction() {
  const auto cfg = study(
      "[experiment]\nn_runs = 200\nbase_seed = 1000\nx0_grid = [-4, -3.5, -3, -2.5, -2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, "
      "2, 2.5, 3, 3.5, 4]\n");
  const auto reports = run_figure_experiment(cfg);
  bool located = true;
  std::string misses;
  double iqr_stationary = 0.0, iqr_shoulder = INFINITY;
  for (const auto& r : reports) {
    if (std::abs(r.x0) <= 3.0 + 1e-9) {
      const double tol = std::max(1.0, 0.25 * std::abs(r.true_f));
      if (!(std::abs(r.summary.median - r.true_f) <= tol)) {
        located = false;
        misses += " x0=" + fmt(r.x0) + ":" + fmt(r.summary.median) + "/" + fmt(r.true_f);
      }
    }
    for (double s : {-3.0, 0.0, 3.0})
      if (std::abs(r.x0 - s) < 1e-9) iqr_stationary = std::max(iqr_stationary, r.summary.iqr);
    for (double s : {-1.5, 1.5})
      if (std::abs(r.x0 - s) < 1e-9) iqr_shoulder = std::min(iqr_shoulder, r.summary.iqr);
  }
  const bool shape = iqr_stationary < iqr_shoulder;
  std::string detail = "(a) medians " + std::string(located ? "ok" : "off:" + misses) + "; (b) max IQR {-3,0,3} " +
                       fmt(iqr_stationary) + " vs min IQR {+-1.5} " + fmt(iqr_shoulder);
  return {located && shape, detail};
}

Outcome coverage() {
  const auto cfg = study("[estimator]\nx0 = 1\n[experiment]\nn_runs = 300\nbase_seed = 5000\n");
  const auto res = run_coverage_experiment(cfg);
  const bool ok = res.coverage_rate >= 0.88 && res.coverage_rate <= 0.995;
  return {ok, "coverage " + fmt(res.coverage_rate) + " +- " + fmt(res.mc_stderr, 2) + " over " +
                  std::to_string(res.report.summary.n_ok) + " runs"};
}

Outcome rate() {
  const auto cfg = study(
      "[estimator]\nx0 = 1\n[experiment]\nn_runs = 100\nbase_seed = 7000\nnu_list = [0.1, 0.01, 0.001, "
      "0.0001]\n");
  const auto table = run_rate_experiment(cfg);
  std::string detail = "rmse";
  for (const auto& row : table.rows) detail += " " + fmt(row.rmse);
  if (!table.fitted_slope) return {false, detail + "; slope undefined"};
  const double s = *table.fitted_slope;
  return {s >= 0.5 && s <= 1.1, detail + "; slope " + fmt(s) + " (target " + fmt(table.target_slope) + ")"};
}

Outcome variance_concentration() {
  const auto cfg = study("[estimator]\nx0 = 0\n");
  const std::vector<double> hs{0.05, 0.1, 0.2};
  const auto family = kernel_family(tent_plus, hs, cfg.estimator.x0);
  const auto scan = variance_scan(cfg.model, cfg.grid, family, cfg.grid.n_time, 500, 9000, 0);
  bool below = true;
  double lo = INFINITY, hi = 0.0;
  std::string detail;
  for (const auto& row : scan.rows) {
    below = below && row.mc_var < row.bound_l1;
    lo = std::min(lo, row.mc_var);
    hi = std::max(hi, row.mc_var);
    detail += "h=" + fmt(row.h) + ": var " + fmt(row.mc_var) + " / bound " + fmt(row.bound_l1) + "; ";
  }
  const double ratio = hi / lo;
  return {below && ratio <= 3.0, detail + "max/min " + fmt(ratio)};
}

Outcome occupation() {
  const auto cfg = study("");
  const std::vector<double> nus{0.1, 0.01, 0.001};
  const auto rows = occupation_concentration(cfg.model, cfg.grid, 0.5, 1.5, cfg.grid.n_time, nus, 300, 11000, 0);
  bool decreasing = true;
  std::string detail = "sd(M/mu)";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail += " " + fmt(rows[i].sd_ratio) + (rows[i].visited ? "" : "(unvisited)");
    decreasing = decreasing && rows[i].visited;
    if (i > 0) decreasing = decreasing && rows[i].sd_ratio < rows[i - 1].sd_ratio;
  }
  return {decreasing, detail};
}

Outcome growing_window() {
  const auto cfg = build_experiment(Config::parse(R"(
[model]
nu = 1
sigma = 1
reaction = allen_cahn

[grid]
dx = 0.1
dt = 0.0001

[estimator]
x0 = 1
beta = 2

[experiment]
n_runs = 100
base_seed = 13000
buffer = 5
gamma_list = [10, 40]
)"));
  const auto table = run_growing_window_experiment(cfg);
  const double r10 = table.rows.at(0).rmse, r40 = table.rows.at(1).rmse;
  return {r40 < r10, "RMSE(10) " + fmt(r10) + ", RMSE(40) " + fmt(r40)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const auto root = std::filesystem::temp_directory_path() / "spde_acceptance_determinism";
  std::filesystem::remove_all(root);
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const std::string command : {"figure", "coverage"}) {
    std::vector<std::filesystem::path> dirs;
    CommandOutput out;
    for (int workers : {1, 8, 1}) {
      auto cfg = build_experiment(Config::parse(R"(
[model]
nu = 0.01
[grid]
n_space = 40
[estimator]
x0 = 1
h = 0.3
[experiment]
n_runs = 16
base_seed = 77
x0_grid = [-1, 0, 1, 2]
)"));
      cfg.workers = workers;
      cfg.output_dir = root / (command + "_" + std::to_string(dirs.size()) + "_w" + std::to_string(workers));
      out = run_command(command, cfg);
      dirs.push_back(cfg.output_dir);
    }
    for (const auto& f : out.files) {
      ++compared;
      const auto ref = slurp(dirs[0] / f);
      if (ref.empty() || ref != slurp(dirs[1] / f) || ref != slurp(dirs[2] / f)) differing.push_back(command + "/" + f);
    }
  }
  std::string detail = std::to_string(compared) + " CSV files compared across 1/8/1 workers";
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty() && compared > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "exact recovery", exact_recovery},
      {2, "kernel identities", kernel_identities},
      {3, "linear SPDE variance oracle", linear_oracle},
      {4, "Allen-Cahn figure reproduction", figure_reproduction},
      {5, "confidence interval coverage", coverage},
      {6, "rate in sigma", rate},
      {7, "spatial-average concentration", variance_concentration},
      {8, "occupation-time concentration", occupation},
      {9, "growing-window regime", growing_window},
      {10, "determinism across workers", determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d %s  %s: %s [%.1f s]\n", c.id, o.pass ? "PASS" : "FAIL", c.name.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
