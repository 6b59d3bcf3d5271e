#include "consol/consolidation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "consol/errors.hpp"

namespace consol {

void ConsolidationCase::validate() const {
  if (!(cv > 0.0) || !std::isfinite(cv)) throw DomainError("case: cv must be positive");
  if (!(h_dr > 0.0) || !std::isfinite(h_dr)) throw DomainError("case: h_dr must be positive");
  if (u0.size() < 2) throw DomainError("case: need at least two sensors");
  if (u0.size() != sensor_depths.size()) {
    throw DomainError("case: u0 and sensor_depths lengths differ");
  }
  if (sensor_depths.front() != 0.0 || sensor_depths.back() != 1.0) {
    throw DomainError("case: sensor depths must start at 0 and end at 1");
  }
  for (std::size_t i = 1; i < sensor_depths.size(); ++i) {
    if (!(sensor_depths[i] > sensor_depths[i - 1])) {
      throw DomainError("case: sensor depths must be strictly increasing");
    }
  }
  for (double v : u0) {
    if (!std::isfinite(v)) throw DomainError("case: non-finite initial pressure");
  }
}

ConsolidationCase ConsolidationCase::uniform(double cv, double u0_pa, std::size_t m, double h_dr) {
  ConsolidationCase c;
  c.cv = cv;
  c.h_dr = h_dr;
  c.sensor_depths = equally_spaced_depths(m);
  c.u0.assign(m, u0_pa);
  c.validate();
  return c;
}

double ConsolidationCase::max_abs_u0() const {
  double m = 0.0;
  for (double v : u0) m = std::max(m, std::abs(v));
  return m;
}

std::vector<double> equally_spaced_depths(std::size_t m) {
  if (m < 2) throw DomainError("equally_spaced_depths: need m >= 2");
  std::vector<double> z(m);
  for (std::size_t i = 0; i < m; ++i) z[i] = static_cast<double>(i) / static_cast<double>(m - 1);
  z.back() = 1.0;
  return z;
}

bool SolutionField::all_finite() const { return values.allFinite(); }

double time_factor(double cv, double t, double h_dr) {
  if (!(cv > 0.0)) throw DomainError("time_factor: cv must be positive");
  if (!(h_dr > 0.0)) throw DomainError("time_factor: h_dr must be positive");
  if (t < 0.0) throw DomainError("time_factor: t must be non-negative");
  return cv * t / (h_dr * h_dr);
}

double physical_time(double cv, double tv, double h_dr) {
  if (!(cv > 0.0)) throw DomainError("physical_time: cv must be positive");
  if (!(h_dr > 0.0)) throw DomainError("physical_time: h_dr must be positive");
  return tv * h_dr * h_dr / cv;
}

namespace {

double series_m(std::size_t k) { return std::numbers::pi / 2.0 * static_cast<double>(2 * k + 1); }

}  // namespace

double analytical_solution(double z, double tv, double u0_const, double tol, std::size_t max_terms) {
  if (z < 0.0 || z > 1.0) throw DomainError("analytical_solution: z outside [0, 1]");
  if (tv < 0.0) throw DomainError("analytical_solution: tv must be non-negative");
  if (!(tol > 0.0)) throw DomainError("analytical_solution: tol must be positive");
  if (u0_const == 0.0 || z == 0.0) return 0.0;
  // Sum of the sine series of a constant.
  if (tv == 0.0) return u0_const;

  const double bound = tol * std::abs(u0_const);
  double sum = 0.0;
  for (std::size_t k = 0; k < max_terms; ++k) {
    const double m = series_m(k);
    const double decay = std::exp(-m * m * tv);
    sum += 2.0 * u0_const / m * std::sin(m * z) * decay;
    const double m_next = series_m(k + 1);
    if (2.0 * std::abs(u0_const) / m_next * std::exp(-m_next * m_next * tv) < bound) return sum;
  }
  throw NumericalError("analytical_solution: series did not converge within " +
                       std::to_string(max_terms) + " terms (z=" + std::to_string(z) +
                       ", tv=" + std::to_string(tv) + ")");
}

double average_degree_of_consolidation(double tv, double tol, std::size_t max_terms) {
  if (tv < 0.0) throw DomainError("average_degree_of_consolidation: tv must be non-negative");
  if (!(tol > 0.0)) throw DomainError("average_degree_of_consolidation: tol must be positive");
  // sum 2/M^2 over all terms is exactly 1.
  if (tv == 0.0) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < max_terms; ++k) {
    const double m = series_m(k);
    sum += 2.0 / (m * m) * std::exp(-m * m * tv);
    const double m_next = series_m(k + 1);
    if (2.0 / (m_next * m_next) * std::exp(-m_next * m_next * tv) < tol) {
      return std::clamp(1.0 - sum, 0.0, 1.0);
    }
  }
  throw NumericalError("average_degree_of_consolidation: series did not converge");
}

SolutionField analytical_field(const ConsolidationCase& c, const std::vector<double>& depths,
                               const std::vector<double>& times) {
  c.validate();
  const double u0 = c.u0.front();
  for (double v : c.u0) {
    if (v != u0) throw DomainError("analytical_field: initial profile must be uniform");
  }
  SolutionField f;
  f.depths = depths;
  f.times = times;
  f.method = "analytic/series";
  f.dense_output = "exact";
  f.values.resize(static_cast<Eigen::Index>(depths.size()), static_cast<Eigen::Index>(times.size()));
  f.tv_times.reserve(times.size());
  for (double t : times) f.tv_times.push_back(time_factor(c.cv, t, c.h_dr));
  for (std::size_t j = 0; j < times.size(); ++j) {
    for (std::size_t i = 0; i < depths.size(); ++i) {
      f.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          analytical_solution(depths[i], f.tv_times[j], u0);
    }
  }
  return f;
}

Tridiagonal build_system_matrix(std::size_t nz, double dz, double cv) {
  if (nz < 3) throw DomainError("build_system_matrix: nz must be at least 3");
  if (!(dz > 0.0)) throw DomainError("build_system_matrix: dz must be positive");
  if (!(cv > 0.0)) throw DomainError("build_system_matrix: cv must be positive");
  const std::size_t n = nz - 1;
  const double s = cv / (dz * dz);
  Tridiagonal a;
  a.lower.assign(n - 1, s);
  a.upper.assign(n - 1, s);
  a.diag.assign(n, -2.0 * s);
  a.diag.back() = -s;
  return a;
}

}  // namespace consol
