#include "consol/integrators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "consol/errors.hpp"

namespace consol {

std::string to_string(Method m) {
  switch (m) {
    case Method::BDF1: return "bdf1";
    case Method::BDF2: return "bdf2";
    case Method::RK4_FIXED: return "rk4";
    case Method::RK45: return "rk45";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "bdf1") return Method::BDF1;
  if (name == "bdf2" || name == "bdf") return Method::BDF2;
  if (name == "rk4") return Method::RK4_FIXED;
  if (name == "rk45") return Method::RK45;
  throw DomainError("unknown integration method '" + name + "'");
}

void IntegratorConfig::validate() const {
  if (!(rtol > 0.0) || !(atol > 0.0)) throw DomainError("integrator: rtol and atol must be positive");
  if (!(dt_min > 0.0) || !(dt_min <= dt_init) || !(dt_init <= dt_max)) {
    throw DomainError("integrator: need 0 < dt_min <= dt_init <= dt_max");
  }
  if (max_steps == 0) throw DomainError("integrator: max_steps must be positive");
}

namespace {

void check_sizes(const Tridiagonal& a, std::span<const double> u, const char* who) {
  if (u.size() != a.size()) throw DomainError(std::string(who) + ": state size does not match matrix");
}

/// RMS of err_i / (atol + rtol * max(|a_i|, |b_i|)).
double scaled_rms(std::span<const double> err, std::span<const double> a, std::span<const double> b,
                  double rtol, double atol) {
  double acc = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(a[i]), std::abs(b[i]));
    const double r = err[i] / sc;
    acc += r * r;
  }
  return err.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(err.size()));
}

// Largest weighted component of err.
double scaled_max(std::span<const double> err, std::span<const double> a, std::span<const double> b,
                  double rtol, double atol) {
  double worst = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(a[i]), std::abs(b[i]));
    worst = std::max(worst, std::abs(err[i]) / sc);
  }
  return worst;
}

void check_t_eval(std::span<const double> t_eval) {
  if (t_eval.empty()) return;
  if (!(t_eval.front() >= 0.0)) throw DomainError("t_eval must start at t >= 0");
  for (std::size_t i = 1; i < t_eval.size(); ++i) {
    if (!(t_eval[i] >= t_eval[i - 1])) throw DomainError("t_eval must be sorted");
  }
}

/// Step length towards `target`: never overshoots, and splits a remainder that is
/// only slightly longer than `dt` into two comparable steps.
double clamp_to_target(double dt, double t, double target) {
  const double remaining = target - t;
  if (dt >= remaining) return remaining;
  if (dt < remaining && remaining < 2.0 * dt) return 0.5 * remaining;
  return dt;
}

std::vector<std::vector<double>> integrate_bdf(const LinearProblem& p, std::span<const double> t_eval,
                                               const IntegratorConfig& cfg, const StepObserver& observer,
                                               std::size_t& accepted, std::size_t& rejected) {
  const bool second_order = cfg.method == Method::BDF2;
  std::vector<std::vector<double>> out;
  out.reserve(t_eval.size());

  std::vector<double> u = p.u0;
  std::vector<double> u_prev;
  double h_prev = 0.0;  // length of the last accepted half step
  double t = 0.0;
  double dt = cfg.dt_init;
  std::size_t steps = 0;

  auto advance = [&](std::span<const double> cur, std::span<const double> prev, double h,
                     double prev_h) -> std::vector<double> {
    if (second_order && !prev.empty()) return bdf2_variable_step(p.a, cur, prev, h, h / prev_h);
    const Tridiagonal m = p.a.shifted_identity(-h);
    return thomas_solve(m, cur);
  };

  for (double target : t_eval) {
    while (t < target) {
      if (++steps > cfg.max_steps) throw NumericalError("bdf: max_steps exceeded");
      double step = std::min(dt, cfg.dt_max);
      if (second_order && !u_prev.empty()) step = std::min(step, 4.0 * h_prev);
      if (step < cfg.dt_min) throw NumericalError("bdf: step size underflow at t=" + std::to_string(t));
      const double candidate = step;
      step = clamp_to_target(step, t, target);
      const bool clamped = step < candidate;

      const int order = (second_order && !u_prev.empty()) ? 2 : 1;
      const double half = 0.5 * step;
      const std::vector<double> big = advance(u, u_prev, step, h_prev);
      const std::vector<double> mid = advance(u, u_prev, half, h_prev);
      std::vector<double> fine = advance(mid, u, half, half);

      // Raw difference between one full step and two half steps.
      std::vector<double> err(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) err[i] = fine[i] - big[i];
      const double norm = scaled_max(err, u, fine, cfg.rtol, cfg.atol);

      double factor = norm > 0.0 ? 0.9 * std::pow(norm, -1.0 / (order + 1)) : 2.0;
      if (norm <= 1.0) {
        u_prev = std::move(mid);
        u = std::move(fine);
        h_prev = half;
        t = (target - t - step <= 0.0) ? target : t + step;
        ++accepted;
        if (observer) observer(t, u);
        // A step shortened to land on an output time does not shrink the controller's step.
        const double proposal = step * std::clamp(factor, 0.2, 2.0);
        dt = clamped ? std::max(proposal, candidate) : proposal;
      } else {
        ++rejected;
        dt = step * std::clamp(factor, 0.1, 0.9);
      }
    }
    out.push_back(u);
  }
  return out;
}

// Dormand-Prince 5(4) tableau.
constexpr double kC2 = 1.0 / 5, kC3 = 3.0 / 10, kC4 = 4.0 / 5, kC5 = 8.0 / 9;
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187, kA53 = 64448.0 / 6561,
                 kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33, kA63 = 46732.0 / 5247, kA64 = 49.0 / 176,
                 kA65 = -5103.0 / 18656;
constexpr double kA71 = 35.0 / 384, kA73 = 500.0 / 1113, kA74 = 125.0 / 192, kA75 = -2187.0 / 6784,
                 kA76 = 11.0 / 84;
constexpr double kE1 = 71.0 / 57600, kE3 = -71.0 / 16695, kE4 = 71.0 / 1920, kE5 = -17253.0 / 339200,
                 kE6 = 22.0 / 525, kE7 = -1.0 / 40;

std::vector<std::vector<double>> integrate_dopri(const LinearProblem& p, std::span<const double> t_eval,
                                                 const IntegratorConfig& cfg,
                                                 const StepObserver& observer, std::size_t& accepted,
                                                 std::size_t& rejected) {
  (void)kC2, (void)kC3, (void)kC4, (void)kC5;  // autonomous system: stage times unused
  const std::size_t n = p.u0.size();
  std::vector<std::vector<double>> out;
  out.reserve(t_eval.size());

  std::vector<double> u = p.u0, y(n), unew(n), err(n);
  std::array<std::vector<double>, 7> k;
  for (auto& v : k) v.resize(n);
  p.a.multiply(u, k[0]);

  constexpr double beta = 0.04;
  constexpr double expo1 = 0.2 - beta * 0.75;
  constexpr double safe = 0.9;
  constexpr double fac_min = 0.2, fac_max = 10.0;
  double facold = 1e-4;
  double t = 0.0;
  double h = cfg.dt_init;
  std::size_t steps = 0;
  bool last_rejected = false;

  for (double target : t_eval) {
    while (t < target) {
      if (++steps > cfg.max_steps) throw NumericalError("rk45: max_steps exceeded");
      if (h < cfg.dt_min) throw NumericalError("rk45: step size underflow at t=" + std::to_string(t));
      const double candidate = std::min(h, cfg.dt_max);
      const double step = clamp_to_target(candidate, t, target);
      const bool clamped = step < candidate;

      for (std::size_t i = 0; i < n; ++i) y[i] = u[i] + step * kA21 * k[0][i];
      p.a.multiply(y, k[1]);
      for (std::size_t i = 0; i < n; ++i) y[i] = u[i] + step * (kA31 * k[0][i] + kA32 * k[1][i]);
      p.a.multiply(y, k[2]);
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = u[i] + step * (kA41 * k[0][i] + kA42 * k[1][i] + kA43 * k[2][i]);
      }
      p.a.multiply(y, k[3]);
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = u[i] + step * (kA51 * k[0][i] + kA52 * k[1][i] + kA53 * k[2][i] + kA54 * k[3][i]);
      }
      p.a.multiply(y, k[4]);
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = u[i] + step * (kA61 * k[0][i] + kA62 * k[1][i] + kA63 * k[2][i] + kA64 * k[3][i] +
                              kA65 * k[4][i]);
      }
      p.a.multiply(y, k[5]);
      for (std::size_t i = 0; i < n; ++i) {
        unew[i] = u[i] + step * (kA71 * k[0][i] + kA73 * k[2][i] + kA74 * k[3][i] + kA75 * k[4][i] +
                                 kA76 * k[5][i]);
      }
      p.a.multiply(unew, k[6]);
      for (std::size_t i = 0; i < n; ++i) {
        err[i] = step * (kE1 * k[0][i] + kE3 * k[2][i] + kE4 * k[3][i] + kE5 * k[4][i] +
                         kE6 * k[5][i] + kE7 * k[6][i]);
      }
      const double norm = scaled_rms(err, u, unew, cfg.rtol, cfg.atol);
      const double fac11 = std::pow(std::max(norm, 1e-300), expo1);

      if (norm <= 1.0) {
        double fac = fac11 / std::pow(facold, beta);
        fac = std::clamp(fac / safe, 1.0 / fac_max, 1.0 / fac_min);
        double hnew = step / fac;
        if (last_rejected) hnew = std::min(hnew, step);
        facold = std::max(norm, 1e-4);
        std::swap(u, unew);
        std::swap(k[0], k[6]);  // first same as last
        t = (target - t - step <= 0.0) ? target : t + step;
        ++accepted;
        last_rejected = false;
        if (observer) observer(t, u);
        // Do not let a step shortened to hit an output time throttle the controller.
        h = clamped ? std::max(hnew, candidate) : hnew;
      } else {
        ++rejected;
        last_rejected = true;
        h = step / std::min(1.0 / fac_min, fac11 / safe);
      }
    }
    out.push_back(u);
  }
  return out;
}

std::vector<std::vector<double>> integrate_rk4(const LinearProblem& p, std::span<const double> t_eval,
                                               const IntegratorConfig& cfg, const StepObserver& observer,
                                               std::size_t& accepted) {
  std::vector<std::vector<double>> out;
  std::vector<double> u = p.u0;
  double t = 0.0;
  std::size_t steps = 0;
  for (double target : t_eval) {
    while (t < target) {
      if (++steps > cfg.max_steps) throw NumericalError("rk4: max_steps exceeded");
      const double step = std::min(cfg.dt_init, target - t);
      u = rk4_step(p.a, u, step);
      t = (target - t - step <= 0.0) ? target : t + step;
      ++accepted;
      if (observer) observer(t, u);
    }
    out.push_back(u);
  }
  return out;
}

SolutionField field_from_states(const ConsolidationCase& c, std::size_t nz, std::span<const double> t_eval,
                                const std::vector<std::vector<double>>& states) {
  SolutionField f;
  f.depths = equally_spaced_depths(nz);
  f.times.assign(t_eval.begin(), t_eval.end());
  for (double t : t_eval) f.tv_times.push_back(time_factor(c.cv, t, c.h_dr));
  f.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nz), static_cast<Eigen::Index>(t_eval.size()));
  for (std::size_t j = 0; j < states.size(); ++j) {
    for (std::size_t i = 1; i < nz; ++i) {
      f.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = states[j][i - 1];
    }
  }
  if (!f.all_finite()) throw NumericalError("solver produced non-finite values");
  return f;
}

LinearProblem make_problem(const ConsolidationCase& c, std::size_t nz) {
  c.validate();
  if (nz < 3) throw DomainError("solver: nz must be at least 3");
  const double dz = c.h_dr / static_cast<double>(nz - 1);
  LinearProblem p{build_system_matrix(nz, dz, c.cv), {}};
  const std::vector<double> full = interpolate_profile(c, nz);
  p.u0.assign(full.begin() + 1, full.end());
  return p;
}

}  // namespace

std::vector<double> bdf2_variable_step(const Tridiagonal& a, std::span<const double> current,
                                       std::span<const double> previous, double dt, double ratio) {
  check_sizes(a, current, "bdf2");
  check_sizes(a, previous, "bdf2");
  if (!(dt > 0.0) || !(ratio > 0.0)) throw DomainError("bdf2: dt and ratio must be positive");
  // (1+2w)/(1+w) u+ - (1+w) u + w^2/(1+w) u- = dt A u+
  const double w = ratio;
  const double alpha0 = (1.0 + 2.0 * w) / (1.0 + w);
  const double c_cur = (1.0 + w) / alpha0;
  const double c_prev = -(w * w / (1.0 + w)) / alpha0;
  std::vector<double> rhs(current.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = c_cur * current[i] + c_prev * previous[i];
  return thomas_solve(a.shifted_identity(-dt / alpha0), rhs);
}

std::vector<double> bdf_step(const Tridiagonal& a, std::span<const std::vector<double>> history,
                             double dt, int order) {
  if (!(dt > 0.0)) throw DomainError("bdf_step: dt must be positive");
  if (order != 1 && order != 2) throw DomainError("bdf_step: order must be 1 or 2");
  if (history.size() != static_cast<std::size_t>(order)) {
    throw DomainError("bdf_step: history length must equal the order");
  }
  check_sizes(a, history[0], "bdf_step");
  if (order == 1) return thomas_solve(a.shifted_identity(-dt), history[0]);
  return bdf2_variable_step(a, history[0], history[1], dt, 1.0);
}

std::vector<double> rk4_step(const Tridiagonal& a, std::span<const double> u, double dt) {
  check_sizes(a, u, "rk4_step");
  if (!(dt > 0.0)) throw DomainError("rk4_step: dt must be positive");
  return rk4_step([&a](std::span<const double> x) { return a.multiply(x); }, u, dt);
}

std::vector<double> interpolate_profile(const ConsolidationCase& c, std::size_t nz) {
  c.validate();
  if (nz < 2) throw DomainError("interpolate_profile: nz must be at least 2");
  const auto& zs = c.sensor_depths;
  std::vector<double> out(nz);
  std::size_t k = 0;
  for (std::size_t i = 0; i < nz; ++i) {
    const double z = i + 1 == nz ? 1.0 : static_cast<double>(i) / static_cast<double>(nz - 1);
    while (k + 2 < zs.size() && zs[k + 1] < z) ++k;
    const double w = (z - zs[k]) / (zs[k + 1] - zs[k]);
    out[i] = w <= 0.0 ? c.u0[k] : (w >= 1.0 ? c.u0[k + 1] : (1.0 - w) * c.u0[k] + w * c.u0[k + 1]);
  }
  return out;
}

std::vector<std::vector<double>> integrate_linear(const LinearProblem& problem,
                                                  std::span<const double> t_eval,
                                                  const IntegratorConfig& cfg,
                                                  const StepObserver& observer, std::size_t* accepted,
                                                  std::size_t* rejected) {
  cfg.validate();
  problem.a.validate();
  check_sizes(problem.a, problem.u0, "integrate_linear");
  check_t_eval(t_eval);
  std::size_t acc = 0, rej = 0;
  std::vector<std::vector<double>> states;
  switch (cfg.method) {
    case Method::BDF1:
    case Method::BDF2: states = integrate_bdf(problem, t_eval, cfg, observer, acc, rej); break;
    case Method::RK45: states = integrate_dopri(problem, t_eval, cfg, observer, acc, rej); break;
    case Method::RK4_FIXED: states = integrate_rk4(problem, t_eval, cfg, observer, acc); break;
  }
  if (accepted) *accepted = acc;
  if (rejected) *rejected = rej;
  return states;
}

namespace {

SolutionField run(const ConsolidationCase& c, std::size_t nz, std::span<const double> t_eval,
                  const IntegratorConfig& cfg, const StepObserver& observer, const char* label) {
  const LinearProblem p = make_problem(c, nz);
  SolutionField f;
  std::size_t acc = 0, rej = 0;
  const auto states = integrate_linear(p, t_eval, cfg, observer, &acc, &rej);
  f = field_from_states(c, nz, t_eval, states);
  f.method = label;
  f.dense_output = "step-to-output";
  f.accepted_steps = acc;
  f.rejected_steps = rej;
  return f;
}

}  // namespace

SolutionField bdf_solve(const ConsolidationCase& c, std::size_t nz, std::span<const double> t_eval,
                        const IntegratorConfig& cfg, const StepObserver& observer) {
  if (cfg.method != Method::BDF1 && cfg.method != Method::BDF2) {
    throw DomainError("bdf_solve: method must be bdf1 or bdf2");
  }
  return run(c, nz, t_eval, cfg, observer,
             cfg.method == Method::BDF1 ? "bdf1/adaptive-step" : "bdf2/adaptive-step");
}

SolutionField rk45_solve(const ConsolidationCase& c, std::size_t nz, std::span<const double> t_eval,
                         const IntegratorConfig& cfg, const StepObserver& observer) {
  IntegratorConfig local = cfg;
  local.method = Method::RK45;
  return run(c, nz, t_eval, local, observer, "rk45/dormand-prince");
}

SolutionField rk4_fixed_solve(const ConsolidationCase& c, std::size_t nz,
                              std::span<const double> t_eval, const IntegratorConfig& cfg,
                              const StepObserver& observer) {
  IntegratorConfig local = cfg;
  local.method = Method::RK4_FIXED;
  return run(c, nz, t_eval, local, observer, "rk4/fixed-step");
}

SolutionField solve(const ConsolidationCase& c, std::size_t nz, std::span<const double> t_eval,
                    const IntegratorConfig& cfg, const StepObserver& observer) {
  switch (cfg.method) {
    case Method::BDF1:
    case Method::BDF2: return bdf_solve(c, nz, t_eval, cfg, observer);
    case Method::RK45: return rk45_solve(c, nz, t_eval, cfg, observer);
    case Method::RK4_FIXED: return rk4_fixed_solve(c, nz, t_eval, cfg, observer);
  }
  throw DomainError("solve: unknown method");
}

std::vector<double> uniform_tv_times(const ConsolidationCase& c, std::size_t nt, double tv_max) {
  if (nt < 2) throw DomainError("uniform_tv_times: need nt >= 2");
  std::vector<double> t(nt);
  for (std::size_t j = 0; j < nt; ++j) {
    const double tv = tv_max * static_cast<double>(j) / static_cast<double>(nt - 1);
    t[j] = physical_time(c.cv, tv, c.h_dr);
  }
  return t;
}

}  // namespace consol
