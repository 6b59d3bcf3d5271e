#include <cmath>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "consol/consolidation.hpp"
#include "consol/errors.hpp"
#include "consol/integrators.hpp"
#include "consol/random_fields.hpp"
#include "consol/rng.hpp"
#include "consol/tridiagonal.hpp"

using namespace consol;

namespace {

Eigen::MatrixXd dense(const Tridiagonal& t) {
  const auto n = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, i) = t.diag[static_cast<std::size_t>(i)];
    if (i + 1 < n) {
      a(i + 1, i) = t.lower[static_cast<std::size_t>(i)];
      a(i, i + 1) = t.upper[static_cast<std::size_t>(i)];
    }
  }
  return a;
}

Tridiagonal scalar(double a) { return Tridiagonal({}, {a}, {}); }

ConsolidationCase grf_case(std::uint64_t seed) {
  return sample_case(SamplingRanges{}, ProfileKind::Grf, GrfSpec{}, 100, seed);
}

double l2(std::span<const double> u) {
  double s = 0.0;
  for (double x : u) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(Thomas, Identity) {
  const std::vector<double> rhs{3, 7, 2};
  EXPECT_EQ(thomas_solve(Tridiagonal::identity(3), rhs), rhs);
}

TEST(Thomas, TwoByTwo) {
  const auto x = thomas_solve(Tridiagonal({1}, {2, 2}, {1}), std::vector<double>{3, 3});
  EXPECT_NEAR(x[0], 1.0, 1e-15);
  EXPECT_NEAR(x[1], 1.0, 1e-15);
}

TEST(Thomas, MatchesDenseElimination) {
  Rng rng(11);
  const std::size_t n = 50;
  Tridiagonal t(std::vector<double>(n - 1), std::vector<double>(n), std::vector<double>(n - 1));
  for (auto& v : t.lower) v = rng.uniform(-1, 1);
  for (auto& v : t.upper) v = rng.uniform(-1, 1);
  for (auto& v : t.diag) v = (rng.uniform01() < 0.5 ? -1 : 1) * rng.uniform(2.5, 4.0);
  std::vector<double> rhs(n);
  for (auto& v : rhs) v = rng.uniform(-10, 10);
  const auto x = thomas_solve(t, rhs);
  const Eigen::VectorXd ref = dense(t).partialPivLu().solve(Eigen::Map<const Eigen::VectorXd>(rhs.data(), n));
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(x[i], ref(static_cast<Eigen::Index>(i)), 1e-10 * ref.cwiseAbs().maxCoeff());
}

TEST(Thomas, RoundTripsBackwardEulerMatrices) {
  Rng rng(12);
  for (int k = 0; k < 10; ++k) {
    const auto nz = static_cast<std::size_t>(3 + rng.below(200));
    const Tridiagonal a = build_system_matrix(nz, 1.0 / static_cast<double>(nz - 1), rng.uniform(0.1, 1.5));
    const Tridiagonal m = a.shifted_identity(-std::pow(10.0, rng.uniform(-8, 0)));
    std::vector<double> x(nz - 1);
    for (auto& v : x) v = rng.uniform(-1e4, 1e4);
    const auto back = thomas_solve(m, m.multiply(x));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-10 * 1e4);
  }
}

TEST(Thomas, SingularPivot) {
  EXPECT_THROW(thomas_solve(Tridiagonal({1}, {1, 1}, {1}), std::vector<double>{1, 1}), NumericalError);
  EXPECT_THROW(thomas_solve(Tridiagonal({1}, {1, 1}, {1}), std::vector<double>{1}), DomainError);
}

TEST(BdfStep, BackwardEulerScalar) {
  const std::vector<std::vector<double>> h{{1.0}};
  EXPECT_NEAR(bdf_step(scalar(-1.0), h, 0.1, 1)[0], 1.0 / 1.1, 1e-15);
}

TEST(BdfStep, ZeroIsFixedPoint) {
  const Tridiagonal a = build_system_matrix(10, 0.1, 0.5);
  const std::vector<std::vector<double>> h{std::vector<double>(9, 0.0), std::vector<double>(9, 0.0)};
  for (int order : {1, 2}) {
    for (double v : bdf_step(a, std::span(h).first(static_cast<std::size_t>(order)), 0.3, order)) EXPECT_EQ(v, 0.0);
  }
}

TEST(BdfStep, Bdf2ScalarRecurrence) {
  const double dt = 0.1, a = -1.0;
  const std::vector<std::vector<double>> h{{1.0}, {std::exp(0.1)}};
  const double expected = (4.0 / 3.0 * 1.0 - 1.0 / 3.0 * std::exp(0.1)) / (1.0 - 2.0 / 3.0 * dt * a);
  EXPECT_NEAR(bdf_step(scalar(a), h, dt, 2)[0], expected, 1e-12);
  // Unit ratio reduces the variable-step form to the constant one.
  const std::vector<double> cur{1.0}, prev{std::exp(0.1)};
  EXPECT_NEAR(bdf2_variable_step(scalar(a), cur, prev, dt, 1.0)[0], expected, 1e-12);
}

TEST(BdfStep, BadHistory) {
  const std::vector<std::vector<double>> h{{1.0}};
  EXPECT_THROW(bdf_step(scalar(-1.0), h, 0.1, 2), DomainError);
  EXPECT_THROW(bdf_step(scalar(-1.0), h, 0.0, 1), DomainError);
  EXPECT_THROW(bdf_step(scalar(-1.0), h, 0.1, 3), DomainError);
}

TEST(BdfStep, ConvergenceOrder) {
  auto endpoint_error = [](int order, int steps) {
    const double dt = 1.0 / steps;
    std::vector<std::vector<double>> h{{1.0}};
    int taken = 0;
    if (order == 2) {
      h = {{std::exp(-dt)}, {1.0}};
      taken = 1;
    }
    for (; taken < steps; ++taken) {
      const double next = bdf_step(scalar(-1.0), h, dt, order)[0];
      h.insert(h.begin(), std::vector<double>{next});
      h.resize(static_cast<std::size_t>(order));
    }
    return std::abs(h[0][0] - std::exp(-1.0));
  };
  const double r1 = endpoint_error(1, 100) / endpoint_error(1, 200);
  const double r2 = endpoint_error(2, 100) / endpoint_error(2, 200);
  EXPECT_GE(r1, 1.7);
  EXPECT_LE(r1, 2.3);
  EXPECT_GE(r2, 3.4);
  EXPECT_LE(r2, 4.6);
}

TEST(Rk4Step, ScalarTaylor) {
  const std::vector<double> u{1.0};
  EXPECT_NEAR(rk4_step(scalar(-1.0), u, 0.1)[0], 0.9048375, 1e-7);
  const std::vector<double> z{0.0};
  EXPECT_EQ(rk4_step(scalar(-1.0), z, 0.1)[0], 0.0);
}

TEST(Rk4Step, MatchesStageOracle) {
  Rng rng(5);
  const Tridiagonal a = build_system_matrix(21, 0.05, 0.3);
  std::vector<double> u(20);
  for (auto& v : u) v = rng.uniform(-1e4, 1e4);
  const double dt = 1e-4;
  const Eigen::MatrixXd m = dense(a);
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(u.data(), 20);
  const Eigen::VectorXd k1 = m * x;
  const Eigen::VectorXd k2 = m * (x + 0.5 * dt * k1);
  const Eigen::VectorXd k3 = m * (x + 0.5 * dt * k2);
  const Eigen::VectorXd k4 = m * (x + dt * k3);
  const Eigen::VectorXd ref = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  const auto out = rk4_step(a, u, dt);
  for (int i = 0; i < 20; ++i) EXPECT_NEAR(out[static_cast<std::size_t>(i)], ref(i), 1e-13 * ref.cwiseAbs().maxCoeff());
}

TEST(Config, Validation) {
  IntegratorConfig c;
  EXPECT_NO_THROW(c.validate());
  c.rtol = 0.0;
  EXPECT_THROW(c.validate(), DomainError);
  c = {};
  c.dt_min = 1.0;
  EXPECT_THROW(c.validate(), DomainError);
  EXPECT_EQ(parse_method("bdf"), Method::BDF2);
  EXPECT_EQ(parse_method("rk45"), Method::RK45);
  EXPECT_THROW(parse_method("euler"), DomainError);
}

TEST(BdfSolve, MatchesAnalyticalSeries) {
  const ConsolidationCase c = ConsolidationCase::uniform(0.5, 10e3, 100);
  const auto times = uniform_tv_times(c, 100);
  const SolutionField f = bdf_solve(c, 100, times);
  const SolutionField exact = analytical_field(c, f.depths, times);
  double worst = 0.0;
  for (std::size_t j = 0; j < f.nt(); ++j) {
    if (f.tv_times[j] < 0.01) continue;
    for (std::size_t i = 0; i < f.nz(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      worst = std::max(worst, std::abs(f.values(ii, jj) - exact.values(ii, jj)));
    }
  }
  EXPECT_LT(worst, 0.01 * 10e3);
  EXPECT_EQ(f.dense_output, "step-to-output");
}

TEST(BdfSolve, ZeroStaysZero) {
  const ConsolidationCase c = ConsolidationCase::uniform(0.5, 0.0, 20);
  for (Method m : {Method::BDF1, Method::BDF2, Method::RK45}) {
    IntegratorConfig cfg;
    cfg.method = m;
    const SolutionField f = solve(c, 30, uniform_tv_times(c, 10), cfg);
    EXPECT_EQ(f.values.cwiseAbs().maxCoeff(), 0.0) << to_string(m);
  }
}

TEST(BdfSolve, DissipativeOnGrfProfiles) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const ConsolidationCase c = grf_case(seed);
    double prev = l2(interpolate_profile(c, 100)) * (1 + 1e-12);
    std::size_t violations = 0;
    bdf_solve(c, 100, uniform_tv_times(c, 20), {}, [&](double, std::span<const double> u) {
      const double n = l2(u);
      if (n > prev * (1 + 1e-9)) ++violations;
      prev = n;
    });
    EXPECT_EQ(violations, 0u) << "seed " << seed;
  }
}

TEST(Solvers, DiscreteMaximumPrinciple) {
  for (Method m : {Method::BDF2, Method::RK45}) {
    for (std::uint64_t seed : {4u, 5u}) {
      const ConsolidationCase c = grf_case(seed);
      const auto u0 = interpolate_profile(c, 100);
      double bound = 0.0;
      for (double v : u0) bound = std::max(bound, std::abs(v));
      double worst = 0.0;
      IntegratorConfig cfg;
      cfg.method = m;
      solve(c, 100, uniform_tv_times(c, 20), cfg, [&](double, std::span<const double> u) {
        for (double v : u) worst = std::max(worst, std::abs(v));
      });
      EXPECT_LE(worst, bound * (1 + 1e-6)) << to_string(m) << " seed " << seed;
    }
  }
}

TEST(Solvers, TopBoundaryIsExactlyZero) {
  const ConsolidationCase c = grf_case(9);
  for (Method m : {Method::BDF1, Method::BDF2, Method::RK45}) {
    IntegratorConfig cfg;
    cfg.method = m;
    const SolutionField f = solve(c, 50, uniform_tv_times(c, 15), cfg);
    EXPECT_EQ(f.values.row(0).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_TRUE(f.all_finite());
  }
}

TEST(Solvers, Deterministic) {
  const ConsolidationCase c = grf_case(10);
  for (Method m : {Method::BDF2, Method::RK45}) {
    IntegratorConfig cfg;
    cfg.method = m;
    const auto t = uniform_tv_times(c, 25);
    EXPECT_EQ(solve(c, 60, t, cfg).values, solve(c, 60, t, cfg).values);
  }
}

TEST(Rk45Solve, ScalarDecay) {
  IntegratorConfig cfg;
  cfg.method = Method::RK45;
  const std::vector<double> t{1.0};
  const auto out = integrate_linear({scalar(-1.0), {1.0}}, t, cfg);
  EXPECT_LT(std::abs(out[0][0] - std::exp(-1.0)), cfg.rtol * std::exp(-1.0));
}

TEST(Rk45Solve, AgreesWithBdfOnUniformProfile) {
  const ConsolidationCase c = ConsolidationCase::uniform(0.5, 15e3, 100);
  const auto t = uniform_tv_times(c, 100);
  IntegratorConfig cfg;
  const SolutionField b = bdf_solve(c, 100, t, cfg);
  const SolutionField r = rk45_solve(c, 100, t, cfg);
  const double band = std::max(10 * cfg.rtol * 15e3, 10 * cfg.atol);
  EXPECT_LE((b.values - r.values).cwiseAbs().maxCoeff(), band);
}

TEST(Solvers, StepUnderflowAndStepLimit) {
  const ConsolidationCase c = ConsolidationCase::uniform(0.5, 15e3, 20);
  IntegratorConfig cfg;
  cfg.max_steps = 5;
  EXPECT_THROW(bdf_solve(c, 50, uniform_tv_times(c, 5), cfg), NumericalError);
  cfg = {};
  cfg.method = Method::RK45;
  cfg.dt_max = 1e-9;
  cfg.dt_init = 1e-9;
  cfg.dt_min = 1e-9;
  cfg.max_steps = 100;
  EXPECT_THROW(rk45_solve(c, 50, uniform_tv_times(c, 5), cfg), NumericalError);
}

TEST(Solvers, RejectsUnsortedTimes) {
  const ConsolidationCase c = ConsolidationCase::uniform(0.5, 15e3, 20);
  const std::vector<double> t{0.5, 0.1};
  EXPECT_THROW(bdf_solve(c, 50, t), DomainError);
  const std::vector<double> neg{-0.1};
  EXPECT_THROW(bdf_solve(c, 50, neg), DomainError);
  EXPECT_THROW(bdf_solve(c, 2, std::vector<double>{0.1}), DomainError);
}

TEST(Solvers, FixedRk4MatchesAnalytical) {
  const ConsolidationCase c = ConsolidationCase::uniform(1.0, 15e3, 100);
  IntegratorConfig cfg;
  cfg.method = Method::RK4_FIXED;
  cfg.dt_init = 2e-5;
  const auto t = uniform_tv_times(c, 10);
  const SolutionField f = solve(c, 50, t, cfg);
  const SolutionField e = analytical_field(c, f.depths, t);
  for (std::size_t j = 2; j < f.nt(); ++j) {
    EXPECT_LT((f.values.col(static_cast<Eigen::Index>(j)) - e.values.col(static_cast<Eigen::Index>(j))).cwiseAbs().maxCoeff(),
              0.01 * 15e3);
  }
}
