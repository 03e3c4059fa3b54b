#pragma once

#include <functional>
#include <map>
#include <string>

#include "strandsim/assembly.hpp"

namespace strand {

/// Loop-closure residuals and their Jacobian at the cache configuration.
/// phi stacks the constrained components of log(ref^-1 * g_a^-1 g_b) per
/// closure; A = d(phi)/dq.
struct ConstraintEval {
  VecX phi;
  MatX A;
};
ConstraintEval eval_constraints(const Linkage& lk, const KinematicsCache& kin);

struct StaticOptions {
  double tol = 1e-8;      // |R|_inf convergence threshold
  int max_iter = 80;
  double fd_step = 1e-6;  // Newton Jacobian step, scaled by (1 + |x_i|)
};

struct StaticResult {
  VecX q;       // internal coordinates
  VecX lambda;  // closure multipliers (empty without closures)
  bool converged = false;
  double residual = 0.0;
  int iterations = 0;
};

/// One static load case. Prescribed coordinates are read from q_template
/// and held; the remaining coordinates start from q_template as the guess.
struct StaticLoadCase {
  VecX u;           // input efforts (size = num_inputs)
  VecX q_template;  // full internal coordinate vector
  std::map<std::string, double> force_overrides;
  VecX lambda_guess;  // optional warm start for closures
};

/// Damped Newton on R(q) = K q - B(q) u - F(q, 0), with the closure-extended
/// system [R + A^T lambda; phi] when loops are present. Throws
/// std::runtime_error("redundant constraints") on a singular augmented
/// system.
StaticResult solve_static(const Linkage& lk, const StaticLoadCase& load,
                          const StaticOptions& opts = {});

struct DynamicOptions {
  double t_end = 1.0;
  double dt = 0.01;        // fixed-step size (rk4)
  bool adaptive = false;   // rkf45 with PI step control
  double rtol = 1e-6;
  double atol = 1e-9;
  double sample_dt = 0.01;
  double baumgarte_alpha = 20.0;
  double baumgarte_beta = 20.0;
  long max_steps = 200000000;
};

/// Inputs as a function of time and state (controller callback); internal
/// coordinates. Return size must equal num_inputs().
using InputFn = std::function<VecX(double t, const VecX& q, const VecX& qd)>;

struct Trajectory {
  std::vector<double> t;
  std::vector<VecX> q, qd, u;  // internal coordinates, sampled
  bool aborted = false;
  std::string abort_reason;
  long steps = 0;
  long rhs_evals = 0;
};

/// Forward-dynamics acceleration at one state. Prescribed coordinates are
/// overridden from the drives; with closures the Baumgarte-stabilized KKT
/// system is solved. Throws std::runtime_error("singular mass matrix") on
/// factorization failure.
VecX dynamics_rhs(const Linkage& lk, double t, const VecX& q_int, const VecX& qd_int,
                  const VecX& u, const DynamicOptions& opts = {});

/// Explicit time integration with per-step input sampling, principal-branch
/// rebasing of spherical/free joint coordinates, and dense output at the
/// sample period. Throws std::runtime_error("stiff system, integration
/// stalled") on adaptive step underflow; aborts (flag in the result) on a
/// non-finite state.
Trajectory simulate(const Linkage& lk, const VecX& q0_int, const VecX& qd0_int, InputFn input,
                    const DynamicOptions& opts);

}  // namespace strand
