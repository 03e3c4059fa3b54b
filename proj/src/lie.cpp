#include "strandsim/lie.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <complex>
#include <stdexcept>

namespace strand {

namespace {

template <typename S>
using M3 = Eigen::Matrix<S, 3, 3>;
template <typename S>
using V3 = Eigen::Matrix<S, 3, 1>;
template <typename S>
using M6 = Eigen::Matrix<S, 6, 6>;
template <typename S>
using V6 = Eigen::Matrix<S, 6, 1>;

inline double real_of(double x) { return x; }
inline double real_of(const std::complex<double>& x) { return x.real(); }

template <typename S>
M3<S> hat3_t(const V3<S>& w) {
  M3<S> m;
  // clang-format off
  m << S(0), -w.z(),  w.y(),
       w.z(),  S(0), -w.x(),
      -w.y(),  w.x(),  S(0);
  // clang-format on
  return m;
}

// Trig ratios as analytic functions of t = theta^2, so the same code path
// serves real and complex-step evaluation. Taylor branch below theta = 1e-4.
template <typename S>
struct ExpCoeffs {
  S a1;  // sin(th)/th
  S a2;  // (1-cos(th))/th^2
  S a3;  // (th-sin(th))/th^3
  S b2;  // (1 - th^2/2 - cos(th))/th^4
  S b3;  // (th - sin(th) - th^3/6)/th^5
};

template <typename S>
ExpCoeffs<S> exp_coeffs(const S& t) {
  ExpCoeffs<S> c;
  if (real_of(t) < 1e-8) {
    c.a1 = S(1) - t / S(6) + t * t / S(120) - t * t * t / S(5040);
    c.a2 = S(0.5) - t / S(24) + t * t / S(720) - t * t * t / S(40320);
    c.a3 = S(1) / S(6) - t / S(120) + t * t / S(5040) - t * t * t / S(362880);
    c.b2 = S(-1) / S(24) + t / S(720) - t * t / S(40320);
    c.b3 = S(-1) / S(120) + t / S(5040) - t * t / S(362880);
  } else {
    using std::cos;
    using std::sin;
    using std::sqrt;
    const S th = sqrt(t);
    const S s = sin(th), co = cos(th);
    c.a1 = s / th;
    c.a2 = (S(1) - co) / t;
    c.a3 = (th - s) / (t * th);
    c.b2 = (S(1) - t / S(2) - co) / (t * t);
    c.b3 = (th - s - t * th / S(6)) / (t * t * th);
  }
  return c;
}

// Left SO(3) Jacobian J_l(w) = I + a2*hat(w) + a3*hat(w)^2.
template <typename S>
M3<S> so3_left_jacobian(const V3<S>& w, const ExpCoeffs<S>& c) {
  const M3<S> W = hat3_t<S>(w);
  return M3<S>::Identity() + c.a2 * W + c.a3 * W * W;
}

// Coupling block of the left SE(3) tangent (angular-first layout, so the
// block sits lower-left). Linear in v, which keeps it exact for twists with
// large translation parts.
template <typename S>
M3<S> tangent_coupling(const V3<S>& w, const V3<S>& v, const ExpCoeffs<S>& c) {
  const M3<S> W = hat3_t<S>(w);
  const M3<S> V = hat3_t<S>(v);
  const M3<S> WV = W * V, VW = V * W, WVW = WV * W;
  const S c1 = c.a3;
  const S c2 = -c.b2;
  const S c3 = S(-0.5) * (c.b2 - S(3) * c.b3);
  return S(0.5) * V + c1 * (WV + VW + WVW) + c2 * (W * WV + VW * W - S(3) * WVW) +
         c3 * (WVW * W + W * WVW);
}

// Left tangent of exp; the body-frame (right) tangent is this at -tw.
template <typename S>
M6<S> dexp_left(const V6<S>& tw) {
  const V3<S> w = tw.template head<3>();
  const V3<S> v = tw.template tail<3>();
  // plain sum of squares; squaredNorm() would conjugate under complex step
  const S t = w(0) * w(0) + w(1) * w(1) + w(2) * w(2);
  const ExpCoeffs<S> c = exp_coeffs<S>(t);
  M6<S> T = M6<S>::Zero();
  const M3<S> J = so3_left_jacobian(w, c);
  T.template topLeftCorner<3, 3>() = J;
  T.template bottomRightCorner<3, 3>() = J;
  T.template bottomLeftCorner<3, 3>() = tangent_coupling(w, v, c);
  return T;
}

}  // namespace

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = R;
  m.topRightCorner<3, 1>() = r;
  return m;
}

Mat3 hat3(const Vec3& w) { return hat3_t<double>(w); }

Mat4 hat(const Vec6& tw) {
  Mat4 m = Mat4::Zero();
  m.topLeftCorner<3, 3>() = hat3(tw.head<3>());
  m.topRightCorner<3, 1>() = tw.tail<3>();
  return m;
}

Vec6 vee(const Mat4& m) {
  Vec6 tw;
  tw << m(2, 1), m(0, 2), m(1, 0), m(0, 3), m(1, 3), m(2, 3);
  return tw;
}

double rotation_angle(const Vec6& tw) { return tw.head<3>().norm(); }

double rotation_angle(const Mat3& R) {
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const Vec3 axis_s(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  return std::atan2(0.5 * axis_s.norm(), c);
}

Pose exp_se3(const Vec6& tw) {
  const Vec3 w = tw.head<3>();
  const Vec3 v = tw.tail<3>();
  const ExpCoeffs<double> c = exp_coeffs(w.squaredNorm());
  const Mat3 W = hat3(w);
  Pose g;
  g.R = Mat3::Identity() + c.a1 * W + c.a2 * W * W;
  g.r = so3_left_jacobian<double>(w, c) * v;
  return g;
}

Vec6 log_se3(const Pose& g) {
  const double theta = rotation_angle(g.R);
  if (theta >= M_PI - 1e-9) throw std::domain_error("log branch singularity");
  const Vec3 axis_s(g.R(2, 1) - g.R(1, 2), g.R(0, 2) - g.R(2, 0), g.R(1, 0) - g.R(0, 1));
  Vec3 w;
  if (theta < 1e-6) {
    const double t = theta * theta;
    w = 0.5 * (1.0 + t / 6.0 + 7.0 * t * t / 360.0) * axis_s;
  } else {
    w = (theta / (2.0 * std::sin(theta))) * axis_s;
  }
  // J_l(w)^-1 r
  const Mat3 W = hat3(w);
  double gcoef;
  const double t = theta * theta;
  if (theta < 1e-4) {
    gcoef = 1.0 / 12.0 + t / 720.0 + t * t / 30240.0;
  } else {
    gcoef = 1.0 / t - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  const Mat3 Jinv = Mat3::Identity() - 0.5 * W + gcoef * W * W;
  Vec6 tw;
  tw.head<3>() = w;
  tw.tail<3>() = Jinv * g.r;
  return tw;
}

Mat6 adjoint(const Pose& g) {
  Mat6 A = Mat6::Zero();
  A.topLeftCorner<3, 3>() = g.R;
  A.bottomRightCorner<3, 3>() = g.R;
  A.bottomLeftCorner<3, 3>() = hat3(g.r) * g.R;
  return A;
}

Mat6 adjoint_inverse(const Pose& g) {
  Mat6 A = Mat6::Zero();
  const Mat3 Rt = g.R.transpose();
  A.topLeftCorner<3, 3>() = Rt;
  A.bottomRightCorner<3, 3>() = Rt;
  A.bottomLeftCorner<3, 3>() = -Rt * hat3(g.r);
  return A;
}

Mat6 ad(const Vec6& tw) {
  Mat6 A = Mat6::Zero();
  const Mat3 W = hat3(tw.head<3>());
  A.topLeftCorner<3, 3>() = W;
  A.bottomRightCorner<3, 3>() = W;
  A.bottomLeftCorner<3, 3>() = hat3(tw.tail<3>());
  return A;
}

Vec6 lie_bracket(const Vec6& a, const Vec6& b) {
  Vec6 out;
  out.head<3>() = a.head<3>().cross(b.head<3>());
  out.tail<3>() = a.head<3>().cross(b.tail<3>()) + a.tail<3>().cross(b.head<3>());
  return out;
}

Vec6 magnus4(const Vec6& xi_a, const Vec6& xi_b, double h) {
  if (h <= 0.0) throw std::invalid_argument("nonpositive interval");
  const double sqrt3 = std::sqrt(3.0);
  return 0.5 * h * (xi_a + xi_b) + (sqrt3 * h * h / 12.0) * lie_bracket(xi_a, xi_b);
}

Mat6 dexp_unchecked(const Vec6& tw) { return dexp_left<double>(-tw); }

Mat6 dexp(const Vec6& tw) {
  if (rotation_angle(tw) >= M_PI) throw std::domain_error("dexp out of domain");
  return dexp_unchecked(tw);
}

Mat6 dexp_deriv(const Vec6& tw, const Vec6& tw_dot) {
  using C = std::complex<double>;
  const double step = 1e-100;
  Eigen::Matrix<C, 6, 1> z = -tw.cast<C>() - C(0.0, step) * tw_dot.cast<C>();
  const Eigen::Matrix<C, 6, 6> T = dexp_left<C>(z);
  Mat6 out;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) out(i, j) = T(i, j).imag() / step;
  return out;
}

}  // namespace strand
