#include "strandsim/joint.hpp"

#include <stdexcept>

namespace strand {

int joint_dof(JointKind kind) {
  switch (kind) {
    case JointKind::Fixed: return 0;
    case JointKind::Revolute:
    case JointKind::Prismatic:
    case JointKind::Helical: return 1;
    case JointKind::Cylindrical:
    case JointKind::Universal: return 2;
    case JointKind::Planar:
    case JointKind::Spherical: return 3;
    case JointKind::Free: return 6;
  }
  return 0;
}

JointKind joint_kind_from_name(const std::string& name) {
  if (name == "fixed") return JointKind::Fixed;
  if (name == "revolute") return JointKind::Revolute;
  if (name == "prismatic") return JointKind::Prismatic;
  if (name == "helical") return JointKind::Helical;
  if (name == "cylindrical") return JointKind::Cylindrical;
  if (name == "universal") return JointKind::Universal;
  if (name == "planar") return JointKind::Planar;
  if (name == "spherical") return JointKind::Spherical;
  if (name == "free") return JointKind::Free;
  throw std::invalid_argument("unknown joint kind '" + name + "'");
}

const char* joint_kind_name(JointKind kind) {
  switch (kind) {
    case JointKind::Fixed: return "fixed";
    case JointKind::Revolute: return "revolute";
    case JointKind::Prismatic: return "prismatic";
    case JointKind::Helical: return "helical";
    case JointKind::Cylindrical: return "cylindrical";
    case JointKind::Universal: return "universal";
    case JointKind::Planar: return "planar";
    case JointKind::Spherical: return "spherical";
    case JointKind::Free: return "free";
  }
  return "?";
}

namespace {

Vec6 rot_screw(const Vec3& a) {
  Vec6 s = Vec6::Zero();
  s.head<3>() = a;
  return s;
}

Vec6 trans_screw(const Vec3& a) {
  Vec6 s = Vec6::Zero();
  s.tail<3>() = a;
  return s;
}

void check_unit(const Vec3& a) {
  if (std::abs(a.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("invalid joint parameters (non-unit axis)");
}

}  // namespace

Mat6X Joint::screw_basis() const {
  const int n = dof();
  Mat6X phi = Mat6X::Zero(6, n);
  if (n == 0) return phi;
  switch (kind) {
    case JointKind::Revolute:
      check_unit(axis);
      phi.col(0) = rot_screw(axis);
      break;
    case JointKind::Prismatic:
      check_unit(axis);
      phi.col(0) = trans_screw(axis);
      break;
    case JointKind::Helical:
      check_unit(axis);
      phi.col(0) = rot_screw(axis) + pitch * trans_screw(axis);
      break;
    case JointKind::Cylindrical:
      check_unit(axis);
      phi.col(0) = rot_screw(axis);
      phi.col(1) = trans_screw(axis);
      break;
    case JointKind::Universal:
      check_unit(axis);
      check_unit(axis2);
      phi.col(0) = rot_screw(axis);
      phi.col(1) = rot_screw(axis2);
      break;
    case JointKind::Planar: {
      check_unit(axis);
      check_unit(axis2);
      phi.col(0) = rot_screw(axis);
      phi.col(1) = trans_screw(axis2);
      phi.col(2) = trans_screw(axis.cross(axis2).normalized());
      break;
    }
    case JointKind::Spherical:
      for (int i = 0; i < 3; ++i) phi(i, i) = 1.0;
      break;
    case JointKind::Free:
      phi.setIdentity();
      break;
    default: break;
  }
  return phi;
}

}  // namespace strand
