#pragma once

#include "strandsim/kinematics.hpp"

namespace strand {

/// Generalized mass M(q) = sum of J^T Mbar J over quadrature points and
/// rigid CoMs, symmetrized. Cache must carry Jacobians.
MatX generalized_mass(const Linkage& lk, const KinematicsCache& kin);

/// Convective term c = C(q, qdot) * qdot, assembled directly as the
/// projected Newton-Euler bias (no Coriolis matrix is formed). Cache must
/// carry Jacobian rates.
VecX generalized_coriolis(const Linkage& lk, const KinematicsCache& kin);

/// Actuation matrix, one column per input channel: collocated unit efforts
/// for wrench-controlled joints, tendon moment-arm integrals for cables.
/// Throws std::runtime_error("degenerate cable path") when a cable tangent
/// vanishes at a quadrature node.
MatX actuation_matrix(const Linkage& lk, const KinematicsCache& kin);

/// Generalized external force: gravity, point wrenches at time t, contact,
/// then custom hooks. Throws std::runtime_error("custom force produced NaN")
/// when a hook yields non-finite values. `force_overrides` replaces the
/// profile magnitude of named point wrenches (load continuation).
VecX generalized_external_force(const Linkage& lk, const KinematicsCache& kin, double t,
                                const std::map<std::string, double>* force_overrides = nullptr);

/// World-frame penalty contact forces of one pair (per proxy; the reaction
/// on the target is minus their sum). Throws
/// std::runtime_error("coincident centers") when the center distance
/// degenerates.
struct ContactForces {
  std::vector<Vec3> proxy_force;  // world frame, acting on the proxy link
  Vec3 target_force = Vec3::Zero();
};
ContactForces contact_forces(const CompiledContact& pair, const KinematicsCache& kin);

/// Adds J^T * body_wrench of one evaluation point into F (helper for custom
/// force hooks).
void accumulate_point_wrench(const KinematicsCache& kin, int point, const Vec6& body_wrench,
                             VecX& F);

}  // namespace strand
