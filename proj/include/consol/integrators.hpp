#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "consol/consolidation.hpp"
#include "consol/tridiagonal.hpp"

namespace consol {

enum class Method { BDF1, BDF2, RK4_FIXED, RK45 };

std::string to_string(Method m);
/// Accepts "bdf1", "bdf2", "bdf" (= bdf2), "rk4", "rk45". Throws DomainError otherwise.
Method parse_method(const std::string& name);

struct IntegratorConfig {
  Method method = Method::BDF2;
  double rtol = 1e-6;
  double atol = 1e-9;     ///< Pa
  double dt_init = 1e-5;  ///< years; the fixed step for RK4_FIXED
  double dt_min = 1e-12;
  double dt_max = 0.5;
  std::size_t max_steps = 5'000'000;

  void validate() const;
};

/// Called after every accepted step with the time reached and the unknown-node state
/// (nodes 1 .. nz-1; node 0 is the Dirichlet boundary).
using StepObserver = std::function<void(double t, std::span<const double> state)>;

/// One step of the backward differentiation formula with constant step size.
///
/// history[0] is the newest state u^t, history[1] (order 2 only) is u^{t-1}.
std::vector<double> bdf_step(const Tridiagonal& a, std::span<const std::vector<double>> history,
                             double dt, int order);

/// Variable-step BDF2: the previous step was dt / ratio long.
std::vector<double> bdf2_variable_step(const Tridiagonal& a, std::span<const double> current,
                                       std::span<const double> previous, double dt, double ratio);

/// Classical four-stage Runge-Kutta step for u' = f(u).
template <typename F>
  requires std::is_invocable_r_v<std::vector<double>, F&, std::span<const double>>
std::vector<double> rk4_step(F&& f_apply, std::span<const double> u, double dt) {
  const std::size_t n = u.size();
  std::vector<double> stage(n);
  const std::vector<double> k1 = f_apply(u);
  for (std::size_t i = 0; i < n; ++i) stage[i] = u[i] + 0.5 * dt * k1[i];
  const std::vector<double> k2 = f_apply(std::span<const double>(stage));
  for (std::size_t i = 0; i < n; ++i) stage[i] = u[i] + 0.5 * dt * k2[i];
  const std::vector<double> k3 = f_apply(std::span<const double>(stage));
  for (std::size_t i = 0; i < n; ++i) stage[i] = u[i] + dt * k3[i];
  const std::vector<double> k4 = f_apply(std::span<const double>(stage));
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return out;
}

/// rk4_step with f(u) = A u.
std::vector<double> rk4_step(const Tridiagonal& a, std::span<const double> u, double dt);

/// Linear interpolation of the sensor profile onto nz equally spaced nodes.
std::vector<double> interpolate_profile(const ConsolidationCase& c, std::size_t nz);

/// Generic autonomous linear system u' = A u with outputs at sorted times.
struct LinearProblem {
  Tridiagonal a;
  std::vector<double> u0;
};

/// Integrates a linear problem, returning one state per requested time.
/// Steps are shortened so that every requested time is hit exactly.
std::vector<std::vector<double>> integrate_linear(const LinearProblem& problem,
                                                  std::span<const double> t_eval,
                                                  const IntegratorConfig& cfg,
                                                  const StepObserver& observer = {},
                                                  std::size_t* accepted = nullptr,
                                                  std::size_t* rejected = nullptr);

/// Adaptive BDF (order 1 or 2 per cfg.method) with step-doubling error control.
SolutionField bdf_solve(const ConsolidationCase& c, std::size_t nz, std::span<const double> t_eval,
                        const IntegratorConfig& cfg = {}, const StepObserver& observer = {});

/// Dormand-Prince 5(4) with PI step control.
SolutionField rk45_solve(const ConsolidationCase& c, std::size_t nz, std::span<const double> t_eval,
                         const IntegratorConfig& cfg = {}, const StepObserver& observer = {});

/// Classical RK4 at the fixed step cfg.dt_init.
SolutionField rk4_fixed_solve(const ConsolidationCase& c, std::size_t nz,
                              std::span<const double> t_eval, const IntegratorConfig& cfg = {},
                              const StepObserver& observer = {});

/// Dispatches on cfg.method.
SolutionField solve(const ConsolidationCase& c, std::size_t nz, std::span<const double> t_eval,
                    const IntegratorConfig& cfg = {}, const StepObserver& observer = {});

/// Physical times for nt equally spaced time factors on [0, tv_max].
std::vector<double> uniform_tv_times(const ConsolidationCase& c, std::size_t nt, double tv_max = 2.0);

}  // namespace consol
