#include "consol/random_fields.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "consol/errors.hpp"

namespace consol {

void GrfSpec::validate() const {
  if (!(variance > 0.0)) throw DomainError("grf: variance must be positive");
  if (!(length_scale > 0.0)) throw DomainError("grf: length_scale must be positive");
  if (!(jitter >= 0.0)) throw DomainError("grf: jitter must be non-negative");
  if (!std::isfinite(mean)) throw DomainError("grf: mean must be finite");
}

GrfSpec GrfSpec::with_variance(double variance, double length_scale, double mean) {
  GrfSpec s;
  s.mean = mean;
  s.variance = variance;
  s.length_scale = length_scale;
  s.jitter = 1e-8 * variance;
  return s;
}

void SamplingRanges::validate() const {
  auto check = [](const Range& r, const char* name) {
    if (!(r.first <= r.second)) throw DomainError(std::string("ranges: ") + name + " low > high");
  };
  check(u0_uniform_range, "u0_uniform_range");
  check(mean_range, "mean_range");
  check(cv_range, "cv_range");
  if (!(cv_range.first > 0.0)) throw DomainError("ranges: cv must be positive");
}

std::string to_string(ProfileKind k) { return k == ProfileKind::Uniform ? "uniform" : "grf"; }

Eigen::MatrixXd covariance_matrix(const std::vector<double>& depths, const GrfSpec& spec) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(depths.size());
  Eigen::MatrixXd c(n, n);
  const double l2 = spec.length_scale * spec.length_scale;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double d = depths[static_cast<std::size_t>(i)] - depths[static_cast<std::size_t>(j)];
      const double v = spec.variance * std::exp(-d * d / l2);
      c(i, j) = v;
      c(j, i) = v;
    }
    c(i, i) += spec.jitter;
  }
  return c;
}

Eigen::MatrixXd grf_factor(const std::vector<double>& depths, const GrfSpec& spec, double* jitter_used) {
  GrfSpec attempt = spec;
  for (int retry = 0; retry <= 3; ++retry) {
    if (retry > 0) attempt.jitter = (attempt.jitter > 0.0 ? attempt.jitter : 1e-8 * spec.variance) * 10.0;
    Eigen::LLT<Eigen::MatrixXd> llt(covariance_matrix(depths, attempt));
    if (llt.info() == Eigen::Success) {
      if (jitter_used) *jitter_used = attempt.jitter;
      return llt.matrixL();
    }
  }
  throw NumericalError("grf: covariance factorization failed after jitter escalation");
}

std::vector<double> sample_grf(const std::vector<double>& depths, const GrfSpec& spec, Rng& rng) {
  const Eigen::MatrixXd l = grf_factor(depths, spec);
  Eigen::VectorXd xi(l.rows());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = rng.normal();
  const Eigen::VectorXd f = l * xi;
  std::vector<double> out(depths.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = spec.mean + f(static_cast<Eigen::Index>(i));
  return out;
}

std::vector<double> sample_grf(const std::vector<double>& depths, const GrfSpec& spec,
                               std::uint64_t seed) {
  Rng rng(seed);
  return sample_grf(depths, spec, rng);
}

ConsolidationCase sample_case(const SamplingRanges& ranges, ProfileKind kind, const GrfSpec& grf,
                              std::size_t m, std::uint64_t seed) {
  ranges.validate();
  Rng rng(seed);
  ConsolidationCase c;
  c.sensor_depths = equally_spaced_depths(m);
  c.cv = rng.uniform(ranges.cv_range.first, ranges.cv_range.second);
  if (kind == ProfileKind::Uniform) {
    c.u0.assign(m, rng.uniform(ranges.u0_uniform_range.first, ranges.u0_uniform_range.second));
  } else {
    GrfSpec spec = grf;
    spec.mean = rng.uniform(ranges.mean_range.first, ranges.mean_range.second);
    c.u0 = sample_grf(c.sensor_depths, spec, rng);
  }
  c.validate();
  return c;
}

}  // namespace consol
