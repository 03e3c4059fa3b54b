#pragma once

#include "strandsim/solvers.hpp"

namespace strand {

/// Desired tip motion: pose, body velocity twist and body acceleration twist
/// as functions of time, plus PD gains.
struct TaskTarget {
  std::function<void(double t, Pose& g_des, Vec6& eta_des, Vec6& etadot_des)> eval;
  Mat6 kp = 100.0 * Mat6::Identity();
  Mat6 kd = 20.0 * Mat6::Identity();
};

/// Task-space computed-torque PD law: builds the feedforward-plus-feedback
/// tip acceleration demand and solves for the input efforts under the
/// channel bounds (bounded least squares); `bounded = false` uses the plain
/// pseudoinverse instead. `tip_point` indexes the controlled frame.
VecX pd_task_control(const Linkage& lk, const KinematicsCache& kin, const TaskTarget& target,
                     double t, int tip_point, bool bounded = true);

/// min |A x - b| subject to lo <= x <= hi, by an active-set sweep
/// (deterministic; ties broken by lowest index).
VecX bounded_least_squares(const MatX& A, const VecX& b, const VecX& lo, const VecX& hi);

struct EnergySample {
  double kinetic = 0.0;
  double gravitational = 0.0;
  double elastic = 0.0;
  double total = 0.0;
};

/// Kinetic + gravitational + elastic energy; gravitational datum at the
/// ground frame origin.
EnergySample compute_energy(const Linkage& lk, const VecX& q_int, const VecX& qd_int);

/// World-frame linear momentum and angular momentum about the origin.
std::pair<Vec3, Vec3> compute_momentum(const Linkage& lk, const VecX& q_int, const VecX& qd_int);

/// Distance objective of the placement problem: solves the static
/// equilibrium at inputs u and sums the position errors of two probe frames.
/// A failed solve returns 1e6 plus the residual as a penalty.
double placement_objective(const Linkage& lk, const VecX& u, int point_mid, int point_end,
                           const Vec3& target_mid, const Vec3& target_end,
                           const StaticOptions& opts = {});

struct PatternResult {
  VecX x;
  double f = 0.0;
  int evaluations = 0;
};

/// Coordinate-direction generalized pattern search with mesh halving on
/// failed polls and doubling on success; never evaluates outside the box.
PatternResult pattern_search(const std::function<double(const VecX&)>& f, const VecX& x0,
                             const VecX& lo, const VecX& hi, double mesh0, double tol,
                             int max_evals = 100000);

}  // namespace strand
