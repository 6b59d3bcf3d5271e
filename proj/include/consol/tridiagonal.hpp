#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace consol {

/// Banded storage of an n x n tridiagonal matrix.
///
/// lower[i] is A(i+1, i), diag[i] is A(i, i), upper[i] is A(i, i+1).
struct Tridiagonal {
  std::vector<double> lower;
  std::vector<double> diag;
  std::vector<double> upper;

  Tridiagonal() = default;
  Tridiagonal(std::vector<double> lo, std::vector<double> d, std::vector<double> up);

  std::size_t size() const noexcept { return diag.size(); }

  /// Throws DomainError on inconsistent band lengths or non-finite entries.
  void validate() const;

  /// y = A x.
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> multiply(std::span<const double> x) const;

  /// Returns I + scale * A.
  Tridiagonal shifted_identity(double scale) const;

  static Tridiagonal identity(std::size_t n);
};

/// Direct O(n) solve of A x = rhs by forward elimination and back substitution.
///
/// Throws NumericalError when a pivot falls below 1e-14 * max|diag|.
std::vector<double> thomas_solve(const Tridiagonal& a, std::span<const double> rhs);

}  // namespace consol
