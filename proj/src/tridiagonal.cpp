#include "consol/tridiagonal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "consol/errors.hpp"

namespace consol {

Tridiagonal::Tridiagonal(std::vector<double> lo, std::vector<double> d, std::vector<double> up)
    : lower(std::move(lo)), diag(std::move(d)), upper(std::move(up)) {
  validate();
}

void Tridiagonal::validate() const {
  const std::size_t n = diag.size();
  if (n == 0) throw DomainError("tridiagonal: empty matrix");
  if (lower.size() != n - 1 || upper.size() != n - 1) {
    throw DomainError("tridiagonal: band lengths must be (n-1, n, n-1), got (" +
                      std::to_string(lower.size()) + ", " + std::to_string(n) + ", " +
                      std::to_string(upper.size()) + ")");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(lower.begin(), lower.end(), finite) ||
      !std::all_of(diag.begin(), diag.end(), finite) ||
      !std::all_of(upper.begin(), upper.end(), finite)) {
    throw DomainError("tridiagonal: non-finite entry");
  }
}

void Tridiagonal::multiply(std::span<const double> x, std::span<double> y) const {
  const std::size_t n = diag.size();
  if (x.size() != n || y.size() != n) throw DomainError("tridiagonal multiply: size mismatch");
  if (n == 1) {
    y[0] = diag[0] * x[0];
    return;
  }
  y[0] = diag[0] * x[0] + upper[0] * x[1];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    y[i] = lower[i - 1] * x[i - 1] + diag[i] * x[i] + upper[i] * x[i + 1];
  }
  y[n - 1] = lower[n - 2] * x[n - 2] + diag[n - 1] * x[n - 1];
}

std::vector<double> Tridiagonal::multiply(std::span<const double> x) const {
  std::vector<double> y(diag.size());
  multiply(x, y);
  return y;
}

Tridiagonal Tridiagonal::shifted_identity(double scale) const {
  Tridiagonal out = *this;
  for (auto& v : out.lower) v *= scale;
  for (auto& v : out.upper) v *= scale;
  for (auto& v : out.diag) v = 1.0 + scale * v;
  return out;
}

Tridiagonal Tridiagonal::identity(std::size_t n) {
  if (n == 0) throw DomainError("tridiagonal: empty matrix");
  return Tridiagonal(std::vector<double>(n - 1, 0.0), std::vector<double>(n, 1.0),
                     std::vector<double>(n - 1, 0.0));
}

std::vector<double> thomas_solve(const Tridiagonal& a, std::span<const double> rhs) {
  const std::size_t n = a.size();
  if (rhs.size() != n) throw DomainError("thomas_solve: rhs length does not match matrix");
  if (n == 0) return {};

  double max_diag = 0.0;
  for (double d : a.diag) max_diag = std::max(max_diag, std::abs(d));
  const double pivot_floor = 1e-14 * max_diag;

  std::vector<double> c(n);  // modified upper band
  std::vector<double> x(n);
  double pivot = a.diag[0];
  if (!(std::abs(pivot) >= pivot_floor) || pivot == 0.0) {
    throw NumericalError("thomas_solve: singular pivot at row 0");
  }
  c[0] = n > 1 ? a.upper[0] / pivot : 0.0;
  x[0] = rhs[0] / pivot;
  for (std::size_t i = 1; i < n; ++i) {
    pivot = a.diag[i] - a.lower[i - 1] * c[i - 1];
    if (!(std::abs(pivot) >= pivot_floor) || pivot == 0.0) {
      throw NumericalError("thomas_solve: singular pivot at row " + std::to_string(i));
    }
    c[i] = i + 1 < n ? a.upper[i] / pivot : 0.0;
    x[i] = (rhs[i] - a.lower[i - 1] * x[i - 1]) / pivot;
  }
  for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
  return x;
}

}  // namespace consol
