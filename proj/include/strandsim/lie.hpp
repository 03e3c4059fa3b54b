#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace strand {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat4 = Eigen::Matrix4d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Mat6X = Eigen::Matrix<double, 6, Eigen::Dynamic>;

// Twists are 6-vectors, angular part first: (wx, wy, wz, vx, vy, vz).
// The same layout serves strain twists, velocity twists and wrenches
// (moment first).

/// Rigid transform in SE(3): rotation R plus translation r.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 r = Vec3::Zero();

  Pose() = default;
  Pose(const Mat3& rot, const Vec3& trans) : R(rot), r(trans) {}

  static Pose Identity() { return {}; }
  static Pose Translation(const Vec3& t) { return {Mat3::Identity(), t}; }

  Pose operator*(const Pose& o) const { return {R * o.R, R * o.r + r}; }
  Pose inverse() const { return {R.transpose(), -(R.transpose() * r)}; }
  Vec3 apply(const Vec3& p) const { return R * p + r; }

  Mat4 matrix() const;
  bool isApprox(const Pose& o, double tol = 1e-12) const {
    return R.isApprox(o.R, tol) && r.isApprox(o.r, tol);
  }
};

Mat3 hat3(const Vec3& w);
Mat4 hat(const Vec6& tw);
Vec6 vee(const Mat4& m);

/// Rotation angle carried by a twist or pose, in [0, pi].
double rotation_angle(const Vec6& tw);
double rotation_angle(const Mat3& R);

/// Closed-form exponential se(3) -> SE(3).
Pose exp_se3(const Vec6& tw);

/// Principal-branch logarithm. Throws std::domain_error("log branch
/// singularity") for rotations at or numerically beyond pi.
Vec6 log_se3(const Pose& g);

/// Group adjoint Ad(g) = [[R, 0], [hat(r) R, R]].
Mat6 adjoint(const Pose& g);
Mat6 adjoint_inverse(const Pose& g);  // Ad(g^-1), avoids forming the inverse

/// Algebra adjoint ad(xi) = [[hat(w), 0], [hat(v), hat(w)]].
Mat6 ad(const Vec6& tw);
Vec6 lie_bracket(const Vec6& a, const Vec6& b);  // vee([hat(a), hat(b)])

/// Fourth-order two-node Magnus step for g' = g * hat(xi(X)).
/// xi_a, xi_b are the field sampled at X + h*(1/2 -+ sqrt(3)/6).
/// Throws std::invalid_argument("nonpositive interval") for h <= 0.
Vec6 magnus4(const Vec6& xi_a, const Vec6& xi_b, double h);

/// Body-frame (right) tangent of the exponential:
///   exp(hat(W + s*d)) = exp(hat(W)) * exp(s * hat(dexp(W) d) + O(s^2)).
/// Equals sum_k (-ad(W))^k / (k+1)!, evaluated in closed form.
/// Throws std::domain_error("dexp out of domain") at rotation angle >= pi.
Mat6 dexp(const Vec6& tw);

/// Same map without the domain gate; valid for rotation angles below 2*pi.
/// Used by the kinematics recursion, where multi-DoF joint coordinates are
/// kept on the principal branch by rebasing.
Mat6 dexp_unchecked(const Vec6& tw);

/// Time derivative of dexp(W(t)) along Wdot, via complex-step
/// differentiation of the closed form (exact to machine precision).
Mat6 dexp_deriv(const Vec6& tw, const Vec6& tw_dot);

}  // namespace strand
