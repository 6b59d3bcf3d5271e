#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "consol/consolidation.hpp"
#include "consol/errors.hpp"
#include "consol/integrators.hpp"
#include "consol/rng.hpp"

using namespace consol;

namespace {

// Plain partial sum with a fixed number of terms.
double series_oracle(double z, double tv, double u0, int terms) {
  double s = 0.0;
  for (int m = 0; m < terms; ++m) {
    const double big_m = std::numbers::pi / 2.0 * (2 * m + 1);
    s += 2.0 * u0 / big_m * std::sin(big_m * z) * std::exp(-big_m * big_m * tv);
  }
  return s;
}

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

}  // namespace

TEST(TimeFactor, Definition) {
  EXPECT_DOUBLE_EQ(time_factor(1.0, 1.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(time_factor(0.3, 0.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(time_factor(0.5, 4.0, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(physical_time(0.5, time_factor(0.5, 3.7, 2.0), 2.0), 3.7);
}

TEST(TimeFactor, RejectsBadInputs) {
  EXPECT_THROW(time_factor(0.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(time_factor(-1.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(time_factor(1.0, 1.0, 0.0), DomainError);
  EXPECT_THROW(time_factor(1.0, -1.0, 1.0), DomainError);
}

TEST(AnalyticalSolution, DrainedTopIsZero) { EXPECT_EQ(analytical_solution(0.0, 0.5, 10000.0), 0.0); }

TEST(AnalyticalSolution, InitialConditionAtBottom) {
  EXPECT_NEAR(analytical_solution(1.0, 0.0, 10000.0), 10000.0, 1e-12 * 10000.0);
}

TEST(AnalyticalSolution, MatchesDirectSummation) {
  const double v = analytical_solution(1.0, 0.2, 10000.0);
  EXPECT_NEAR(v, series_oracle(1.0, 0.2, 10000.0, 50), 1e-12 * 10000.0);
  EXPECT_NEAR(v, 7720.0, 5.0);
}

TEST(AnalyticalSolution, TruncationIsConverged) {
  for (double tv : {0.01, 0.05, 0.3, 1.0}) {
    for (double z : {0.05, 0.5, 1.0}) {
      const double a = analytical_solution(z, tv, 15e3, 1e-12, 10000);
      const double b = analytical_solution(z, tv, 15e3, 1e-14, 100000);
      EXPECT_LT(std::abs(a - b), 1e-12 * 15e3) << "z=" << z << " tv=" << tv;
    }
  }
}

TEST(AnalyticalSolution, NonIncreasingInTime) {
  for (int i = 0; i < 20; ++i) {
    const double z = i / 19.0;
    double prev = analytical_solution(z, 0.01, 15e3);
    for (int j = 1; j < 20; ++j) {
      const double tv = 0.01 + 2.0 * j / 19.0;
      const double cur = analytical_solution(z, tv, 15e3);
      EXPECT_LE(cur, prev + 1e-9 * std::max(std::abs(prev), 1.0)) << "z=" << z << " tv=" << tv;
      prev = cur;
    }
  }
}

TEST(AnalyticalSolution, PreconditionsAndNonConvergence) {
  EXPECT_THROW(analytical_solution(-0.1, 0.5, 1.0), DomainError);
  EXPECT_THROW(analytical_solution(1.1, 0.5, 1.0), DomainError);
  EXPECT_THROW(analytical_solution(0.5, -0.1, 1.0), DomainError);
  EXPECT_THROW(analytical_solution(0.5, 0.5, 1.0, 0.0), DomainError);
  // Tiny tv near the boundary needs far more than three terms.
  EXPECT_THROW(analytical_solution(0.01, 1e-6, 1.0, 1e-12, 3), NumericalError);
}

TEST(DegreeOfConsolidation, Limits) {
  EXPECT_EQ(average_degree_of_consolidation(0.0), 0.0);
  // Only the leading term survives at large tv.
  const double pi2 = std::numbers::pi * std::numbers::pi;
  EXPECT_NEAR(average_degree_of_consolidation(5.0), 1.0 - 8.0 / pi2 * std::exp(-pi2 / 4.0 * 5.0), 1e-12);
}

TEST(DegreeOfConsolidation, HalfAtTv0197) {
  double s = 0.0;
  for (int m = 0; m < 200; ++m) {
    const double big_m = std::numbers::pi / 2.0 * (2 * m + 1);
    s += 2.0 / (big_m * big_m) * std::exp(-big_m * big_m * 0.197);
  }
  const double u = average_degree_of_consolidation(0.197);
  EXPECT_NEAR(u, 1.0 - s, 1e-10);
  EXPECT_NEAR(u, 0.50, 0.005);
}

TEST(DegreeOfConsolidation, Monotone) {
  double prev = 0.0;
  for (int i = 1; i <= 100; ++i) {
    const double u = average_degree_of_consolidation(0.03 * i);
    EXPECT_GE(u, prev);
    EXPECT_LE(u, 1.0);
    prev = u;
  }
}

TEST(SystemMatrix, SmallTranscription) {
  const Tridiagonal a = build_system_matrix(4, 1.0, 1.0);
  Eigen::MatrixXd expected(3, 3);
  expected << -2, 1, 0, 1, -2, 1, 0, 1, -1;
  EXPECT_TRUE(dense(a).isApprox(expected));
}

TEST(SystemMatrix, SymmetricAndScaled) {
  const Tridiagonal a = build_system_matrix(50, 0.02, 0.7);
  const Eigen::MatrixXd d = dense(a);
  EXPECT_TRUE(d.isApprox(d.transpose()));
  EXPECT_NEAR(d(10, 10), -2.0 * 0.7 / (0.02 * 0.02), 1e-9);
}

TEST(SystemMatrix, NegativeDefinite) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense(build_system_matrix(10, 1.0 / 9.0, 0.5)));
  EXPECT_LT(eig.eigenvalues().maxCoeff(), 0.0);

  Rng rng(7);
  for (int k = 0; k < 5; ++k) {
    const auto nz = static_cast<std::size_t>(3 + rng.below(60));
    const double dz = rng.uniform(0.001, 1.0);
    const double cv = rng.uniform(0.05, 3.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e(dense(build_system_matrix(nz, dz, cv)));
    EXPECT_LT(e.eigenvalues().maxCoeff(), 0.0) << "nz=" << nz;
  }
}

TEST(SystemMatrix, RejectsBadSizes) {
  EXPECT_THROW(build_system_matrix(2, 1.0, 1.0), DomainError);
  EXPECT_THROW(build_system_matrix(5, 0.0, 1.0), DomainError);
  EXPECT_THROW(build_system_matrix(5, 1.0, -1.0), DomainError);
}

TEST(Case, Validation) {
  ConsolidationCase c = ConsolidationCase::uniform(0.5, 1e4, 10);
  EXPECT_NO_THROW(c.validate());
  c.sensor_depths[3] = c.sensor_depths[2];
  EXPECT_THROW(c.validate(), DomainError);
  c = ConsolidationCase::uniform(0.5, 1e4, 10);
  c.u0.pop_back();
  EXPECT_THROW(c.validate(), DomainError);
  EXPECT_THROW(ConsolidationCase::uniform(0.5, 1e4, 1), DomainError);
  EXPECT_THROW(ConsolidationCase::uniform(0.0, 1e4, 10), DomainError);
}

TEST(AnalyticalField, TopRowZeroAndFinite) {
  const ConsolidationCase c = ConsolidationCase::uniform(0.5, 15e3, 100);
  const SolutionField f = analytical_field(c, equally_spaced_depths(20), uniform_tv_times(c, 10));
  EXPECT_TRUE(f.all_finite());
  for (std::size_t j = 0; j < f.nt(); ++j) EXPECT_EQ(f.values(0, static_cast<Eigen::Index>(j)), 0.0);
}
