#pragma once

#include <string>

#include "strandsim/lie.hpp"

namespace strand {

enum class JointKind {
  Fixed,
  Revolute,
  Prismatic,
  Helical,
  Cylindrical,
  Universal,
  Planar,
  Spherical,
  Free,
};

enum class JointControl { Passive, Coordinate, Wrench };

int joint_dof(JointKind kind);
JointKind joint_kind_from_name(const std::string& name);
const char* joint_kind_name(JointKind kind);

/// Lumped joint, modeled as g = exp(hat(Phi_j * q_j)) on a constant screw
/// basis Phi_j. Axis conventions:
///   revolute/prismatic/helical/cylindrical: motion along `axis`
///   universal: rotations about `axis` then `axis2`
///   planar: rotation about `axis` (plane normal), translations along the
///           two in-plane directions (axis2, axis x axis2)
///   spherical/free: canonical axes
struct Joint {
  JointKind kind = JointKind::Fixed;
  Vec3 axis = Vec3::UnitZ();
  Vec3 axis2 = Vec3::UnitY();
  double pitch = 0.0;  // m/rad, helical only
  VecX spring_stiffness;  // per dof; empty = unsprung
  JointControl control = JointControl::Passive;

  int dof() const { return joint_dof(kind); }

  /// Constant screw basis, 6 x dof. Throws std::invalid_argument on
  /// non-unit axes.
  Mat6X screw_basis() const;

  /// Spherical and free joints live on exponential coordinates and can be
  /// rebased onto the principal branch during integration.
  bool rebasable() const { return kind == JointKind::Spherical || kind == JointKind::Free; }
};

}  // namespace strand
