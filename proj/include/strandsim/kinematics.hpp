#pragma once

#include "strandsim/linkage.hpp"

namespace strand {

/// Kinematic state of one evaluation frame, base coordinates.
struct PointState {
  Pose g;
  MatX J;     // 6 x n body Jacobian
  Vec6 eta = Vec6::Zero();
  MatX Jdot;  // 6 x n, filled when requested
};

struct KinematicsCache {
  VecX q, qd;  // internal coordinates this cache was computed at
  bool with_jacobian = false;
  bool with_jdot = false;
  std::vector<PointState> points;     // aligned with Linkage::points
  std::vector<PointState> link_tips;  // per link
};

struct KinematicsOptions {
  bool with_jacobian = true;
  bool with_jdot = false;
};

/// One recursive sweep over the tree: poses, Jacobians and (optionally)
/// Jacobian rates at every evaluation point. Soft divisions advance
/// Gauss-interval by Gauss-interval with the fourth-order Magnus step;
/// lumped joints advance by the joint exponential. Throws
/// std::invalid_argument("NaN in q") on non-finite coordinates.
KinematicsCache compute_kinematics(const Linkage& linkage, const VecX& q_int, const VecX& qd_int,
                                   const KinematicsOptions& opts = {});

/// Pose-only forward kinematics (no Jacobians).
std::vector<Pose> forward_kinematics(const Linkage& linkage, const VecX& q_int);

}  // namespace strand
