#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "spde/ensemble.hpp"
#include "spde/errors.hpp"
#include "spde/simulate.hpp"
#include "spde/stats.hpp"
#include "spde/trajectory_io.hpp"

using namespace spde;

namespace {

ModelSpec free_model(double nu, Boundary b = Boundary::Dirichlet) {
  ModelSpec m;
  m.nu = nu;
  m.reaction = zero_reaction();
  m.domain.boundary = b;
  return m;
}

double l2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("grid defaults to n_time = n_space^2") {
  const auto m = free_model(1.0);
  const auto g = GridSpec::for_model(m, 20);
  CHECK(g.n_time == 400);
  CHECK(g.dx == doctest::Approx(1.0 / 21.0));
  CHECK(g.dt == doctest::Approx(1.0 / 400.0));
  CHECK(g.y(0) == doctest::Approx(g.dx));
  CHECK_THROWS_AS(GridSpec::for_model(m, 2), ConfigError);
  auto other = m;
  other.horizon = 2.0;
  CHECK_THROWS_AS(g.check_against(other), ConfigError);
}

TEST_CASE("implicit scheme damps the first Dirichlet mode by the discrete factor") {
  auto m = free_model(1.0);
  m.sigma_override = 0.0;
  m.initial = [](double y) { return std::sin(std::numbers::pi * y); };
  const auto g = GridSpec::for_model(m, 20, 50);
  const auto traj = simulate(m, g, 1);
  const double lambda = 2.0 * (1.0 - std::cos(std::numbers::pi * g.dx)) / (g.dx * g.dx);
  const double factor = 1.0 / (1.0 + g.dt * m.nu * lambda);
  for (std::size_t i : {1u, 10u, 50u})
    for (std::size_t k = 0; k < g.n_space; ++k)
      CHECK(traj.at(i, k) == doctest::Approx(std::sin(std::numbers::pi * g.y(k)) * std::pow(factor, i)).epsilon(1e-12));
}

TEST_CASE("constants are invariant under Neumann conditions") {
  auto m = free_model(0.3, Boundary::Neumann);
  m.sigma_override = 0.0;
  m.initial = [](double) { return 2.5; };
  const auto traj = simulate(m, GridSpec::for_model(m, 15), 3);
  for (double v : traj.values()) CHECK(v == doctest::Approx(2.5).epsilon(1e-13));
}

TEST_CASE("free Dirichlet solutions decay in L2") {
  auto m = free_model(0.2);
  m.sigma_override = 0.0;
  m.initial = [](double y) { return std::sin(3.0 * y) + y * y - 0.4 + std::cos(17.0 * y); };
  const auto traj = simulate(m, GridSpec::for_model(m, 25), 9);
  for (std::size_t i = 1; i < traj.rows(); ++i) CHECK(l2(traj.row(i)) <= l2(traj.row(i - 1)) + 1e-15);
}

TEST_CASE("no blow-up for Lipschitz reaction with dt L < 1/2") {
  ModelSpec m;
  m.nu = 0.01;
  m.reaction = allen_cahn_reaction();
  m.sigma_override = 0.0;
  m.initial = [](double y) { return 5.0 * std::sin(std::numbers::pi * y); };
  const auto g = GridSpec::for_model(m, 30, 900);
  CHECK(g.dt * m.reaction.lipschitz_bound < 0.5);
  CHECK_NOTHROW(simulate(m, g, 1));
}

TEST_CASE("non-finite state raises a numerical error naming the step") {
  ModelSpec m;
  m.reaction = linear_reaction(1e200, 0.0);
  m.sigma_override = 0.0;
  m.initial = [](double) { return 1e200; };
  try {
    simulate(m, GridSpec::for_model(m, 10), 1);
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}

TEST_CASE("white noise cell variance is dt/dx") {
  const auto m = free_model(1.0);
  const auto g = GridSpec::for_model(m, 10, 100);
  NoiseIncrement gen(m.noise, m.domain.boundary, g);
  Rng rng(5);
  std::vector<double> buf(g.n_space), xs;
  for (int i = 0; i < 100000; ++i) {
    gen.draw(rng, buf);
    xs.push_back(buf[3]);
  }
  CHECK(stats::variance(xs) == doctest::Approx(g.dt / g.dx).epsilon(0.03));
}

TEST_CASE("multiplier scales white noise pointwise") {
  auto m = free_model(1.0);
  m.noise.multiplier = Multiplier{[](double y) { return 1.0 + y; }, 1.0, 2.0};
  const auto g = GridSpec::for_model(m, 4, 16);
  NoiseIncrement plain(NoiseSpec{}, m.domain.boundary, g);
  NoiseIncrement scaled(m.noise, m.domain.boundary, g);
  Rng a(3), b(3);
  std::vector<double> x(g.n_space), y(g.n_space);
  plain.draw(a, x);
  scaled.draw(b, y);
  for (std::size_t k = 0; k < g.n_space; ++k) CHECK(y[k] == doctest::Approx(x[k] * (1.0 + g.y(k))));
}

TEST_CASE("Riesz covariance is symmetric positive semidefinite and factorises") {
  ModelSpec m = free_model(1.0);
  const auto g = GridSpec::for_model(m, 64, 10);
  for (double rho : {0.55, 0.8, 0.95}) {
    const auto a = riesz_covariance(rho, g);
    Eigen::MatrixXd mat(64, 64);
    for (int j = 0; j < 64; ++j)
      for (int k = 0; k < 64; ++k) mat(j, k) = a[j * 64 + k];
    CHECK((mat - mat.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mat);
    CHECK(es.eigenvalues().minCoeff() > -1e-10 * mat.trace() / 64.0);

    bool jittered = true;
    const auto l = cholesky_lower(a, 64, &jittered);
    Eigen::MatrixXd lm(64, 64);
    for (int j = 0; j < 64; ++j)
      for (int k = 0; k < 64; ++k) lm(j, k) = l[j * 64 + k];
    const double tol = jittered ? 1e-8 * mat.trace() : 1e-9 * mat.norm();
    CHECK((lm * lm.transpose() - mat).cwiseAbs().maxCoeff() < tol);
  }
}

TEST_CASE("cholesky rejects indefinite matrices") {
  std::vector<double> a{1.0, 2.0, 2.0, 1.0};
  CHECK_THROWS_AS(cholesky_lower(a, 2), NumericalError);
}

TEST_CASE("Riesz increments reproduce the covariance") {
  ModelSpec m = free_model(1.0);
  m.noise.kind = RieszNoise{0.7};
  const auto g = GridSpec::for_model(m, 8, 4);
  NoiseIncrement gen(m.noise, m.domain.boundary, g);
  Rng rng(8);
  std::vector<double> buf(g.n_space);
  double c01 = 0.0, c00 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    gen.draw(rng, buf);
    c00 += buf[0] * buf[0];
    c01 += buf[0] * buf[1];
  }
  const auto cov = riesz_covariance(0.7, g);
  CHECK(c00 / n == doctest::Approx(cov[0] * g.dt).epsilon(0.02));
  CHECK(c01 / n == doctest::Approx(cov[1] * g.dt).epsilon(0.02));
}

TEST_CASE("spectral increments reproduce the eigen-expansion covariance") {
  for (auto b : {Boundary::Dirichlet, Boundary::Neumann}) {
    ModelSpec m = free_model(1.0, b);
    m.noise.kind = SpectralNoise{2.0, 0.3};
    const auto g = GridSpec::for_model(m, 6, 4);
    NoiseIncrement gen(m.noise, b, g);
    Rng rng(21);
    std::vector<double> buf(g.n_space);
    double c23 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      gen.draw(rng, buf);
      c23 += buf[2] * buf[3];
    }
    double exact = 0.0;
    for (int k = 1; k <= 6; ++k) {
      auto e = [&](double y) {
        return std::sqrt(2.0) * (b == Boundary::Dirichlet ? std::sin(k * std::numbers::pi * y)
                                                          : std::cos(k * std::numbers::pi * y));
      };
      exact += std::pow(k, -0.6) * e(g.y(2)) * e(g.y(3)) * g.dt;
    }
    CHECK(c23 / n == doctest::Approx(exact).epsilon(0.03));
  }
}

TEST_CASE("spectral noise switched off leaves the deterministic solution") {
  ModelSpec m;
  m.nu = 0.1;
  m.reaction = allen_cahn_reaction();
  m.initial = [](double y) { return std::sin(std::numbers::pi * y); };
  m.sigma_override = 0.0;
  const auto g = GridSpec::for_model(m, 12);
  auto s = m;
  s.noise.kind = SpectralNoise{2.0, 0.0};
  const auto a = simulate(m, g, 1);
  const auto b = simulate(s, g, 99);
  for (std::size_t i = 0; i < a.values().size(); ++i) CHECK(a.values()[i] == b.values()[i]);
}

TEST_CASE("simulation is deterministic given the seed") {
  ModelSpec m;
  m.nu = 0.05;
  m.reaction = allen_cahn_reaction();
  const auto g = GridSpec::for_model(m, 16, 100);
  const auto a = simulate(m, g, 42);
  const auto b = simulate(m, g, 42);
  const auto c = simulate(m, g, 43);
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  CHECK_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
  for (std::size_t k = 0; k < g.n_space; ++k) CHECK(a.at(0, k) == 0.0);
  // regression baseline for the generator and scheme
  CHECK(a.at(100, 5) == doctest::Approx(-3.3215800819165917).epsilon(1e-12));
  CHECK(a.at(37, 11) == doctest::Approx(-2.4792500230329786).epsilon(1e-12));
}

TEST_CASE("linear variance series") {
  CHECK(linear_variance_exact(0.1, std::pow(0.1, 0.25), 1.0, 0.5, 10000) ==
        doctest::Approx(0.35076076553943697).epsilon(1e-12));
  CHECK(linear_variance_exact(0.1, 1.0, 1.0, 0.0, 1000) == doctest::Approx(0.0));
  CHECK(linear_variance_exact(1e12, 1.0, 1.0, 0.5, 1000) < 1e-10);
}

TEST_CASE("Monte-Carlo variance of the free equation matches the series") {
  const auto m = [] {
    auto f = free_model(0.1);
    return f;
  }();
  const auto g = GridSpec::for_model(m, 39);
  const auto rows = ensemble_rows(m, g, g.n_time, 1000, 500, 0);
  std::vector<double> mid(1000);
  for (std::size_t r = 0; r < 1000; ++r) mid[r] = rows[r * g.n_space + 19];
  const double exact = linear_variance_exact(m.nu, m.sigma(), 1.0, 0.5, 10000);
  CHECK(std::abs(stats::mean(mid)) < 4.0 * std::sqrt(exact / 1000.0));
  CHECK(stats::variance(mid) == doctest::Approx(exact).epsilon(0.15));
}

TEST_CASE("marginal variance is stable in nu under the coupling law") {
  std::vector<double> vars;
  for (double nu : {0.1, 0.01}) {
    const auto m = free_model(nu);
    const auto g = GridSpec::for_model(m, 49);
    const auto rows = ensemble_rows(m, g, g.n_time, 300, 1, 0);
    std::vector<double> mid(300);
    for (std::size_t r = 0; r < 300; ++r) mid[r] = rows[r * g.n_space + 24];
    vars.push_back(stats::variance(mid));
  }
  CHECK(std::max(vars[0], vars[1]) / std::min(vars[0], vars[1]) < 2.0);
}

TEST_CASE("parallel ensembles equal the serial reference") {
  ModelSpec m;
  m.nu = 0.02;
  m.reaction = allen_cahn_reaction();
  const auto g = GridSpec::for_model(m, 20);
  const auto one = ensemble_rows(m, g, 200, 24, 9, 1);
  const auto many = ensemble_rows(m, g, 200, 24, 9, 4);
  CHECK(one == many);

  const auto serial = map_runs_serial(50, [](std::size_t r) { return r * r; });
  const auto parallel = map_runs(50, 3, [](std::size_t r) { return r * r; });
  CHECK(serial == parallel);
  CHECK_THROWS_AS(map_runs(10, 3,
                           [](std::size_t r) -> int {
                             if (r == 7) throw NumericalError("run 7");
                             return 0;
                           }),
                  NumericalError);
}

TEST_CASE("zooming out at nu = 1 is the identity") {
  ModelSpec m;
  m.nu = 1.0;
  m.reaction = allen_cahn_reaction();
  const auto z = zoomed_out_model(m);
  CHECK(z.domain.right == doctest::Approx(1.0));
  CHECK(z.sigma() == doctest::Approx(m.sigma()));
  const auto g = GridSpec::for_model(m, 19);
  const auto rep = rescale_check(m, g, g.n_time, 200, 3, 5, 0);
  CHECK(rep.max_abs_mean_z < 4.0);
}

TEST_CASE("rescaled moments agree at nu = 0.04") {
  ModelSpec m;
  m.nu = 0.04;
  m.reaction = allen_cahn_reaction();
  m.initial = [](double) { return 0.5; };
  const auto z = zoomed_out_model(m);
  CHECK(z.domain.length() == doctest::Approx(5.0));
  CHECK(z.nu == 1.0);
  CHECK(z.sigma() == doctest::Approx(std::pow(0.04, -0.25) * m.sigma()));
  const auto g = GridSpec::for_model(m, 49);
  const auto rep = rescale_check(m, g, g.n_time, 500, 11, 5, 0);
  CHECK(rep.points.size() == 5);
  CHECK(rep.max_abs_mean_z < 3.0);
  CHECK(rep.max_rel_var_diff < 0.3);
}

TEST_CASE("deterministic rescaled solutions agree") {
  ModelSpec m;
  m.nu = 0.04;
  m.reaction = zero_reaction();
  m.sigma_override = 0.0;
  m.initial = [](double y) { return std::sin(std::numbers::pi * y); };
  const auto g = GridSpec::for_model(m, 29);
  const auto rep = rescale_check(m, g, g.n_time / 2, 2, 1, 7, 0);
  CHECK(rep.max_abs_diff < 1e-9);
}

TEST_CASE("trajectory binary round trip and CSV layout") {
  ModelSpec m;
  m.nu = 0.1;
  m.reaction = allen_cahn_reaction();
  const auto g = GridSpec::for_model(m, 8, 10);
  const auto traj = simulate(m, g, 4);

  std::stringstream bin;
  io::write_binary(traj, bin);
  CHECK(bin.str().size() == 16 + 8 * traj.values().size());
  const auto raw = io::read_binary(bin);
  CHECK(raw.rows == 11);
  CHECK(raw.cols == 8);
  CHECK(std::equal(raw.values.begin(), raw.values.end(), traj.values().begin()));

  std::stringstream truncated(bin.str().substr(0, 40));
  CHECK_THROWS_AS(io::read_binary(truncated), NumericalError);

  std::stringstream csv;
  io::write_csv(traj, csv, 3);
  std::string line;
  std::getline(csv, line);
  CHECK(line == "t,y,value");
  std::size_t n = 0;
  while (std::getline(csv, line)) ++n;
  CHECK(n == 8 * 5);  // i = 0, 3, 6, 9 and the final 10

  const auto dir = std::filesystem::temp_directory_path() / "spde_io_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "t.bin", std::ios::binary);
    io::write_binary(traj, f);
  }
  const auto back = io::load_trajectory(dir / "t.bin", m, g);
  CHECK(back.at(10, 7) == traj.at(10, 7));
  CHECK_THROWS_AS(io::load_trajectory(dir / "t.bin", m, GridSpec::for_model(m, 9, 10)), ConfigError);
  try {
    io::load_trajectory(dir / "missing.bin", m, g);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("missing.bin") != std::string::npos);
  }
}
