#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "strandsim/basis.hpp"
#include "strandsim/quadrature.hpp"
#include "strandsim/section.hpp"

using namespace strand;

TEST_CASE("gauss rules integrate polynomials exactly") {
  for (int n : {1, 2, 3, 5, 8, 15, 40}) {
    const GaussRule r = gauss_legendre(n);
    double wsum = 0;
    for (double w : r.weights) wsum += w;
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-13));
    // exact up to degree 2n-1
    for (int d = 0; d <= 2 * n - 1; ++d) {
      double s = 0;
      for (int k = 0; k < n; ++k) s += r.weights[k] * std::pow(r.nodes[k], d);
      CHECK(s == doctest::Approx(1.0 / (d + 1)).epsilon(1e-12));
    }
  }
  const GaussRule r2 = gauss_legendre(2);
  CHECK(r2.nodes[0] == doctest::Approx(0.5 - 0.5 / std::sqrt(3.0)));
  CHECK(r2.nodes[1] == doctest::Approx(0.5 + 0.5 / std::sqrt(3.0)));
}

TEST_CASE("circle closed forms") {
  const CrossSection cs = CrossSection::circular(0.01, 0.01);
  const SectionProps sp = cs.properties(0.5);
  CHECK(sp.area == doctest::Approx(3.1416e-4).epsilon(1e-4));
  CHECK(sp.inertia_y == doctest::Approx(7.854e-9).epsilon(1e-4));
  CHECK(sp.torsion == doctest::Approx(1.5708e-8).epsilon(1e-4));
  CHECK_THROWS_WITH((void)cs.properties(1.5), "abscissa out of range");
  CHECK_THROWS_WITH((void)cs.properties(-0.2), "abscissa out of range");
}

TEST_CASE("square section") {
  const CrossSection cs = CrossSection::rectangular(0.05, 0.05, 0.05, 0.05);
  const SectionProps sp = cs.properties(0.3);
  CHECK(sp.area == doctest::Approx(2.5e-3));
  CHECK(sp.inertia_y == doctest::Approx(5.208e-7).epsilon(1e-3));
  CHECK(sp.inertia_z == doctest::Approx(5.208e-7).epsilon(1e-3));
  // square torsion constant: beta = 0.1406
  CHECK(sp.torsion == doctest::Approx(0.1406 * std::pow(0.05, 4)).epsilon(2e-3));
}

TEST_CASE("tapered circle interpolates linearly") {
  const CrossSection cs = CrossSection::circular(0.02, 0.01);
  CHECK(cs.params(0.5)[0] == doctest::Approx(0.015));
  CHECK(cs.properties(0.5).area == doctest::Approx(M_PI * 0.015 * 0.015));
}

TEST_CASE("override table wins") {
  CrossSection cs = CrossSection::circular(0.01, 0.01);
  cs.override_table = [](double) { return SectionProps{1.0, 2.0, 3.0, 4.0}; };
  CHECK(cs.properties(0.2).area == 1.0);
  CHECK(cs.properties(0.9).torsion == 4.0);
}

TEST_CASE("screw inertia") {
  const CrossSection cs = CrossSection::circular(0.01, 0.01);
  Material mat;
  mat.density = 1000.0;
  mat.youngs_modulus = 1e6;
  const Mat6 M = screw_inertia(cs, mat, 0.5);
  CHECK(M(3, 3) == doctest::Approx(0.31416).epsilon(1e-4));
  CHECK(M(0, 0) == doctest::Approx(M(1, 1) + M(2, 2)));

  Material empty = mat;
  empty.density = 0.0;
  CHECK(screw_inertia(cs, empty, 0.5).norm() == 0.0);
}

TEST_CASE("screw stiffness and damping") {
  const CrossSection cs = CrossSection::circular(0.01, 0.01);
  Material mat;
  mat.youngs_modulus = 1e6;
  mat.poisson_ratio = 0.5;
  const Mat6 S = screw_stiffness(cs, mat, 0.0);
  CHECK(S(3, 3) == doctest::Approx(314.16).epsilon(1e-4));    // EA
  CHECK(S(1, 1) == doctest::Approx(7.854e-3).epsilon(1e-4));  // EI
  CHECK(S(0, 0) == doctest::Approx(5.236e-3).epsilon(1e-4));  // GJt, G = E/3

  Material nu0 = mat;
  nu0.poisson_ratio = 0.0;
  CHECK(nu0.shear_modulus() == doctest::Approx(0.5e6));

  CHECK(damping_tensor(cs, mat, 0.5).norm() == 0.0);
  Material damped = mat;
  damped.viscous_modulus = 11.2e3;
  CHECK((damping_tensor(cs, damped, 0.5) - 0.0112 * S).norm() < 1e-12 * S.norm());
}

TEST_CASE("tensor symmetry and definiteness on random sections") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.005, 0.08);
  for (int it = 0; it < 50; ++it) {
    CrossSection cs;
    const int kind = it % 3;
    if (kind == 0)
      cs = CrossSection::circular(u(rng), u(rng));
    else if (kind == 1)
      cs = CrossSection::rectangular(u(rng), u(rng), u(rng), u(rng));
    else
      cs = CrossSection::ellipsoidal(u(rng), u(rng), u(rng), u(rng));
    Material mat;
    mat.youngs_modulus = 1e7;
    mat.poisson_ratio = 0.45;
    mat.density = 1200;
    mat.viscous_modulus = 500;
    for (double X : {0.0, 0.3, 1.0}) {
      const Mat6 M = screw_inertia(cs, mat, X);
      const Mat6 S = screw_stiffness(cs, mat, X);
      const Mat6 Y = damping_tensor(cs, mat, X);
      CHECK((M - M.transpose()).norm() < 1e-12 * M.norm());
      CHECK((S - S.transpose()).norm() < 1e-12 * S.norm());
      CHECK(M.diagonal().minCoeff() > 0.0);
      CHECK(S.diagonal().minCoeff() > 0.0);
      CHECK(Y.diagonal().minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("basis dimensions match the mode bookkeeping") {
  StrainBasisSpec one;
  one.order.fill(-1);
  one.enable(kBendingY, 0);
  CHECK(one.dof() == 1);
  const Mat6X phi = one.eval(0.37);
  CHECK(phi.rows() == 6);
  CHECK(phi.cols() == 1);
  CHECK(phi(kBendingY, 0) == 1.0);
  CHECK(phi.norm() == 1.0);

  StrainBasisSpec bend4;
  bend4.order.fill(-1);
  bend4.enable(kBendingY, 4);
  CHECK(bend4.dof() == 5);

  StrainBasisSpec rot3;
  rot3.order.fill(-1);
  rot3.enable(kTorsionX, 3).enable(kBendingY, 3).enable(kBendingZ, 3);
  CHECK(rot3.dof() == 12);

  // disabling a mode removes exactly p+1 columns
  StrainBasisSpec less = rot3;
  less.order[kTorsionX] = -1;
  CHECK(rot3.dof() - less.dof() == 4);
}

TEST_CASE("basis gram matrix is nonsingular") {
  StrainBasisSpec spec;
  spec.order.fill(-1);
  spec.enable(kBendingY, 4).enable(kBendingZ, 2).enable(kElongationX, 1);
  const int n = spec.dof();
  const GaussRule rule = gauss_legendre(spec.max_order() + 1);
  MatX G = MatX::Zero(n, n);
  for (int k = 0; k < int(rule.nodes.size()); ++k) {
    const Mat6X phi = spec.eval(rule.nodes[k]);
    G += rule.weights[k] * phi.transpose() * phi;
  }
  Eigen::FullPivLU<MatX> lu(G);
  CHECK(lu.isInvertible());
  // shifted Legendre: diagonal 1/(2k+1) blocks
  CHECK(G(0, 0) == doctest::Approx(1.0));
  CHECK(G(1, 1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("default reference strain is the straight unstretched rod") {
  StrainBasisSpec spec;
  const Vec6 expect = (Vec6() << 0, 0, 0, 1, 0, 0).finished();
  CHECK((spec.reference(0.4) - expect).norm() == 0.0);
}
