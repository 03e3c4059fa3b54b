#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "strandsim/lie.hpp"

using namespace strand;

namespace {

std::mt19937 rng(12345);

Vec6 random_twist(double ang_scale = 1.0, double lin_scale = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec6 tw;
  for (int i = 0; i < 3; ++i) tw[i] = ang_scale * u(rng);
  for (int i = 3; i < 6; ++i) tw[i] = lin_scale * u(rng);
  return tw;
}

// Dense matrix exponential by scaling and squaring with a Taylor tail,
// independent of the closed forms under test.
MatX expm(const MatX& A) {
  int s = 0;
  double nrm = A.norm();
  while (nrm > 0.25) {
    nrm /= 2.0;
    ++s;
  }
  MatX As = A / std::pow(2.0, s);
  MatX out = MatX::Identity(A.rows(), A.cols());
  MatX term = out;
  for (int k = 1; k < 30; ++k) {
    term = term * As / double(k);
    out += term;
    if (term.norm() < 1e-18) break;
  }
  for (int i = 0; i < s; ++i) out = out * out;
  return out;
}

Vec6 field_at(const Vec6& xi0, const Vec6& xi1, double x) { return (1.0 - x) * xi0 + x * xi1; }

// Reference solution of the matrix ODE G' = G*hat(xi(X)) with xi linear in X,
// by classical RK4 on the raw 4x4 entries. Independent of the closed forms
// and of magnus4.
Mat4 subdivision_oracle(const Vec6& xi0, const Vec6& xi1, double h, int steps) {
  Mat4 G = Mat4::Identity();
  const double dx = h / steps;
  auto rhs = [&](const Mat4& g, double x) -> Mat4 { return g * hat(field_at(xi0, xi1, x / h)); };
  for (int k = 0; k < steps; ++k) {
    const double x = k * dx;
    const Mat4 k1 = rhs(G, x);
    const Mat4 k2 = rhs(G + 0.5 * dx * k1, x + 0.5 * dx);
    const Mat4 k3 = rhs(G + 0.5 * dx * k2, x + 0.5 * dx);
    const Mat4 k4 = rhs(G + dx * k3, x + dx);
    G += dx / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return G;
}

// One Magnus step over physical span [a, b]; the field is parametrized on
// [0, span_total].
Pose magnus_step(const Vec6& xi0, const Vec6& xi1, double a, double b, double span_total) {
  const double h = b - a;
  const double c1 = a + h * (0.5 - std::sqrt(3.0) / 6.0);
  const double c2 = a + h * (0.5 + std::sqrt(3.0) / 6.0);
  return exp_se3(magnus4(field_at(xi0, xi1, c1 / span_total), field_at(xi0, xi1, c2 / span_total), h));
}

}  // namespace

TEST_CASE("hat/vee roundtrip and block structure") {
  for (int it = 0; it < 100; ++it) {
    const Vec6 tw = random_twist(2.0, 3.0);
    const Mat4 m = hat(tw);
    CHECK((vee(m) - tw).norm() == 0.0);
    CHECK(m.bottomRows<1>().norm() == 0.0);
    CHECK((m.topLeftCorner<3, 3>() + m.topLeftCorner<3, 3>().transpose()).norm() == 0.0);
  }
}

TEST_CASE("exp_se3 basic cases") {
  CHECK(exp_se3(Vec6::Zero()).isApprox(Pose::Identity()));

  Vec6 rot;
  rot << 0, 0, M_PI / 2, 0, 0, 0;
  const Pose g = exp_se3(rot);
  Mat3 expect;
  expect << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK(g.R.isApprox(expect, 1e-14));
  CHECK(g.r.norm() < 1e-15);

  Vec6 trans;
  trans << 0, 0, 0, 2.5, 0, 0;
  const Pose t = exp_se3(trans);
  CHECK(t.R.isApprox(Mat3::Identity(), 1e-15));
  CHECK((t.r - Vec3(2.5, 0, 0)).norm() < 1e-15);
}

TEST_CASE("pose composition, inverse and orthogonality") {
  for (int it = 0; it < 200; ++it) {
    const Pose a = exp_se3(random_twist(1.5, 2.0));
    const Pose b = exp_se3(random_twist(1.5, 2.0));
    const Pose c = exp_se3(random_twist(1.5, 2.0));
    CHECK(((a * b) * c).isApprox(a * (b * c), 1e-12));
    const Pose id = a.inverse() * a;
    CHECK((id.R - Mat3::Identity()).norm() + id.r.norm() < 1e-12);
    CHECK((a.R.transpose() * a.R - Mat3::Identity()).norm() < 1e-10);
    CHECK(a.R.determinant() == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("log_se3 identity, roundtrip, branch error") {
  CHECK(log_se3(Pose::Identity()).norm() == 0.0);

  Vec6 tw;
  tw << 0.1, -0.2, 0.3, 0.4, 0.5, -0.6;
  CHECK((log_se3(exp_se3(tw)) - tw).norm() < 1e-12);

  Vec6 pi_rot;
  pi_rot << M_PI, 0, 0, 0, 0, 0;
  CHECK_THROWS_WITH(log_se3(exp_se3(pi_rot)), "log branch singularity");
}

TEST_CASE("exp/log roundtrip over random twists") {
  std::uniform_real_distribution<double> u(0.0, M_PI - 1e-3);
  for (int it = 0; it < 1000; ++it) {
    Vec6 tw = random_twist(1.0, 5.0);
    const double ang = u(rng);
    tw.head<3>() = ang * tw.head<3>().normalized();
    CHECK((log_se3(exp_se3(tw)) - tw).norm() < 1e-10 * (1.0 + tw.norm()));
  }
}

TEST_CASE("adjoint block form and group property") {
  CHECK(adjoint(Pose::Identity()).isApprox(Mat6::Identity()));

  const Pose tr = Pose::Translation(Vec3(1, 0, 0));
  Mat6 expect = Mat6::Identity();
  expect.bottomLeftCorner<3, 3>() = hat3(Vec3(1, 0, 0));
  CHECK(adjoint(tr).isApprox(expect, 1e-15));

  for (int it = 0; it < 100; ++it) {
    const Pose a = exp_se3(random_twist());
    const Pose b = exp_se3(random_twist());
    CHECK((adjoint(a * b) - adjoint(a) * adjoint(b)).norm() < 1e-12);
    CHECK((adjoint_inverse(a) - adjoint(a).inverse()).norm() < 1e-10);
  }
}

TEST_CASE("ad operator") {
  CHECK(ad(Vec6::Zero()).norm() == 0.0);

  Vec6 xi, eta;
  xi << 0, 0, 1, 0, 0, 0;
  eta << 0, 0, 0, 1, 0, 0;
  Vec6 expect;
  expect << 0, 0, 0, 0, 1, 0;
  CHECK((ad(xi) * eta - expect).norm() < 1e-15);

  for (int it = 0; it < 100; ++it) {
    const Vec6 a = random_twist(2, 2), b = random_twist(2, 2);
    CHECK((ad(a) * b + ad(b) * a).norm() < 1e-14);
    CHECK((ad(a) * b - lie_bracket(a, b)).norm() < 1e-14);
  }
}

TEST_CASE("Ad(exp) equals expm(ad)") {
  for (int it = 0; it < 200; ++it) {
    const Vec6 tw = random_twist(1.2, 2.0);
    const Mat6 lhs = adjoint(exp_se3(tw));
    const MatX rhs = expm(ad(tw));
    CHECK((lhs - rhs).norm() < 1e-9);
  }
}

TEST_CASE("magnus4 constant and commuting fields") {
  const Vec6 xi = random_twist(1, 1);
  CHECK((magnus4(xi, xi, 0.3) - 0.3 * xi).norm() < 1e-15);

  Vec6 ta = Vec6::Zero(), tb = Vec6::Zero();
  ta.tail<3>() = Vec3(1, 2, 3);
  tb.tail<3>() = Vec3(-2, 0, 1);
  CHECK((magnus4(ta, tb, 0.5) - 0.25 * (ta + tb)).norm() < 1e-15);

  CHECK_THROWS_WITH(magnus4(ta, tb, 0.0), "nonpositive interval");
  CHECK_THROWS_WITH(magnus4(ta, tb, -1.0), "nonpositive interval");
}

TEST_CASE("magnus4 matches fine subdivision on a linear field") {
  const Vec6 xi0 = 0.01 * (Vec6() << 0.4, -0.3, 0.2, 1.0, 0.1, -0.2).finished();
  const Vec6 xi1 = 0.01 * (Vec6() << -0.2, 0.5, 0.1, 0.9, -0.3, 0.4).finished();
  const Mat4 ref = subdivision_oracle(xi0, xi1, 1.0, 1 << 10);
  const Pose g = magnus_step(xi0, xi1, 0.0, 1.0, 1.0);
  CHECK((g.matrix() - ref).norm() < 1e-8);
}

TEST_CASE("magnus4 fourth-order convergence under step halving") {
  for (int it = 0; it < 50; ++it) {
    const Vec6 xi0 = random_twist(0.5, 0.5);
    const Vec6 xi1 = random_twist(0.5, 0.5);
    const double h = 0.5;
    const Mat4 ref = subdivision_oracle(xi0, xi1, h, 1 << 12);
    const Pose one = magnus_step(xi0, xi1, 0.0, h, h);
    const Pose two = magnus_step(xi0, xi1, 0.0, h / 2, h) * magnus_step(xi0, xi1, h / 2, h, h);
    const double e1 = (one.matrix() - ref).norm();
    const double e2 = (two.matrix() - ref).norm();
    if (e1 < 1e-11) continue;  // nearly commuting sample, nothing to measure
    CHECK(e1 / e2 >= 12.8);
  }
}

TEST_CASE("dexp identity and pure translation") {
  CHECK(dexp(Vec6::Zero()).isApprox(Mat6::Identity()));

  Vec6 tr = Vec6::Zero();
  tr.tail<3>() = Vec3(0.7, -1.2, 0.4);
  const Mat6 expect = Mat6::Identity() - 0.5 * ad(tr);
  CHECK((dexp(tr) - expect).norm() < 1e-14);
}

TEST_CASE("dexp matches truncated series for moderate twists") {
  for (int it = 0; it < 200; ++it) {
    const Vec6 tw = random_twist(0.8, 1.5);
    Mat6 series = Mat6::Zero();
    Mat6 term = Mat6::Identity();
    const Mat6 A = -ad(tw);
    for (int k = 0; k < 40; ++k) {
      series += term / std::tgamma(k + 2.0);  // 1/(k+1)!
      term = term * A;
    }
    CHECK((dexp(tw) - series).norm() < 1e-12);
  }
}

TEST_CASE("dexp finite-difference derivative property") {
  // exp(hat(W + s*d)) ~ exp(hat(W)) exp(s*hat(T d)); check column by column.
  for (int it = 0; it < 100; ++it) {
    const Vec6 tw = random_twist(0.9, 2.0);
    const Mat6 T = dexp(tw);
    const double s = 1e-6;
    for (int j = 0; j < 6; ++j) {
      Vec6 d = Vec6::Zero();
      d[j] = 1.0;
      const Pose gp = exp_se3(tw + s * d);
      const Pose gm = exp_se3(tw - s * d);
      const Vec6 col = (log_se3(exp_se3(tw).inverse() * gp) - log_se3(exp_se3(tw).inverse() * gm)) / (2 * s);
      CHECK((col - T.col(j)).norm() < 1e-6 * (1.0 + T.col(j).norm()));
    }
  }
}

TEST_CASE("dexp domain gate") {
  Vec6 tw = Vec6::Zero();
  tw[0] = M_PI;
  CHECK_THROWS_WITH(dexp(tw), "dexp out of domain");
  tw[0] = M_PI + 0.5;
  CHECK_THROWS_WITH(dexp(tw), "dexp out of domain");
  // unchecked variant stays finite between pi and 2*pi
  CHECK(dexp_unchecked(tw).allFinite());
}

TEST_CASE("dexp_deriv matches finite differences of dexp") {
  for (int it = 0; it < 100; ++it) {
    const Vec6 tw = random_twist(0.9, 2.0);
    const Vec6 twd = random_twist(1.0, 1.0);
    const Mat6 D = dexp_deriv(tw, twd);
    const double s = 1e-7;
    const Mat6 fd = (dexp(tw + s * twd) - dexp(tw - s * twd)) / (2 * s);
    CHECK((D - fd).norm() < 1e-6 * (1.0 + fd.norm()));
  }
}

TEST_CASE("dexp_deriv is exact for large translations") {
  Vec6 tw = random_twist(0.5, 0.1);
  tw.tail<3>() = Vec3(45.0, -12.0, 30.0);  // free-joint scale translations
  const Vec6 twd = random_twist(1.0, 5.0);
  const Mat6 D = dexp_deriv(tw, twd);
  const double s = 1e-6;
  const Mat6 fd = (dexp_unchecked(tw + s * twd) - dexp_unchecked(tw - s * twd)) / (2 * s);
  CHECK((D - fd).norm() < 1e-5 * (1.0 + fd.norm()));
}
