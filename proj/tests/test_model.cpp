#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "strandsim/kinematics.hpp"
#include "strandsim/linkage.hpp"
#include "strandsim/quadrature.hpp"

using namespace strand;

namespace {

Material rubber() {
  Material m;
  m.youngs_modulus = 1e6;
  m.poisson_ratio = 0.5;
  m.density = 1000.0;
  return m;
}

SoftDivision bending_division(double length, int order, double radius = 0.01) {
  SoftDivision dv;
  dv.length = length;
  dv.section = CrossSection::circular(radius, radius);
  dv.material = rubber();
  dv.basis.order.fill(-1);
  dv.basis.enable(kBendingY, order);
  dv.gauss_order = std::max(5, order + 2);
  return dv;
}

}  // namespace

TEST_CASE("dof accounting across joints and divisions") {
  LinkageBuilder b;
  Joint rev;
  rev.kind = JointKind::Revolute;
  const int l0 = b.add_rigid_link("base", -1, rev, RigidBody::uniform_rod(1.0, 0.5));
  CHECK(b.current_dof() == 1);

  Joint fix;
  b.add_rigid_link("arm", l0, fix, RigidBody::uniform_rod(1.0, 0.5));
  CHECK(b.current_dof() == 1);

  Joint free;
  free.kind = JointKind::Free;
  b.add_rigid_link("fly", l0, free, RigidBody::uniform_rod(1.0, 0.5));
  CHECK(b.current_dof() == 7);

  // Test-1 style rod: one division, bending-y order 4 -> +5
  b.add_soft_link("rod", l0, fix, {bending_division(1.0, 4)});
  CHECK(b.current_dof() == 12);

  // control-manipulator style: (linear y,z) + (constant y,z) -> +6
  SoftDivision d1 = bending_division(0.5, 1);
  d1.basis.enable(kBendingZ, 1);
  SoftDivision d2 = bending_division(0.5, 0);
  d2.basis.enable(kBendingZ, 0);
  b.add_soft_link("manip", l0, fix, {d1, d2});
  CHECK(b.current_dof() == 18);

  // Test-2 style: rot quadratic + trans linear, two divisions -> 15 per link
  SoftDivision q1 = bending_division(0.35, 2);
  q1.basis.enable(kTorsionX, 2).enable(kBendingZ, 2);
  q1.basis.enable(kElongationX, 1).enable(kShearY, 1).enable(kShearZ, 1);
  SoftDivision q2 = q1;
  b.add_soft_link("lshape", l0, fix, {q1, q2});
  CHECK(b.current_dof() == 18 + 30);
}

TEST_CASE("builder error paths") {
  LinkageBuilder b;
  Joint rev;
  rev.kind = JointKind::Revolute;
  rev.axis = Vec3(0, 0, 2);  // not unit
  CHECK_THROWS_WITH(b.add_rigid_link("x", -1, rev, RigidBody::uniform_rod(1, 1)),
                    "invalid joint parameters (non-unit axis)");
  CHECK_THROWS_AS(b.add_rigid_link("x", 3, Joint{}, RigidBody::uniform_rod(1, 1)),
                  std::invalid_argument);
  b.add_rigid_link("x", -1, Joint{}, RigidBody::uniform_rod(1, 1));
  CHECK_THROWS_WITH(b.add_rigid_link("x", -1, Joint{}, RigidBody::uniform_rod(1, 1)),
                    "duplicate link name 'x'");
  CHECK_THROWS_WITH(b.add_soft_link("y", 0, Joint{}, {}), "empty division list");
}

TEST_CASE("loop closure constraint counts") {
  LinkageBuilder b;
  b.add_rigid_link("a", -1, Joint{}, RigidBody::uniform_rod(1, 1));
  b.add_rigid_link("c", 0, Joint{}, RigidBody::uniform_rod(1, 1));
  b.add_loop_closure(1, 1.0, -1, 0.0, JointKind::Fixed);
  b.add_loop_closure(1, 1.0, 0, 0.5, JointKind::Spherical);
  b.add_loop_closure(1, 0.5, 0, 1.0, JointKind::Revolute);
  CHECK_THROWS_WITH(b.add_loop_closure(0, 0.5, 0, 0.5, JointKind::Fixed),
                    "closure between a link and itself at the same point");
  const Linkage lk = b.finalize();
  CHECK(lk.closures[0].rows == 6);
  CHECK(lk.closures[1].rows == 3);
  CHECK(lk.closures[2].rows == 5);
  CHECK(lk.num_constraints() == 14);
  // constrained directions are orthogonal to the joint screws
  Joint rev;
  rev.kind = JointKind::Revolute;
  CHECK((lk.closures[2].constrained_basis.transpose() * rev.screw_basis()).norm() < 1e-12);
}

TEST_CASE("stiffness of a constant bending division equals EI*L") {
  LinkageBuilder b(false);  // physical coordinates
  b.add_soft_link("rod", -1, Joint{}, {bending_division(0.5, 0)});
  const Linkage lk = b.finalize();
  const double EI = 1e6 * M_PI * std::pow(0.01, 4) / 4.0;
  CHECK(lk.K(0, 0) == doctest::Approx(EI * 0.5).epsilon(1e-12));
  CHECK(lk.stiffness_physical()(0, 0) == doctest::Approx(EI * 0.5).epsilon(1e-12));

  LinkageBuilder bn(true);  // normalized internal coordinates
  bn.add_soft_link("rod", -1, Joint{}, {bending_division(0.5, 0)});
  const Linkage lkn = bn.finalize();
  CHECK(lkn.K(0, 0) == doctest::Approx(EI / 0.5).epsilon(1e-12));
  CHECK(lkn.stiffness_physical()(0, 0) == doctest::Approx(EI * 0.5).epsilon(1e-12));
}

TEST_CASE("unsprung joint has zero stiffness row") {
  LinkageBuilder b;
  Joint rev;
  rev.kind = JointKind::Revolute;
  b.add_rigid_link("a", -1, rev, RigidBody::uniform_rod(1, 1));
  Joint sprung = rev;
  sprung.spring_stiffness = VecX::Constant(1, 42.0);
  b.add_rigid_link("s", 0, sprung, RigidBody::uniform_rod(1, 1));
  const Linkage lk = b.finalize();
  CHECK(lk.K(0, 0) == 0.0);
  CHECK(lk.K(1, 1) == 42.0);
}

TEST_CASE("K matches dense quadrature at 4x order") {
  SoftDivision dv = bending_division(0.8, 3, 0.02);
  dv.section = CrossSection::circular(0.02, 0.01);  // tapered
  dv.basis.enable(kTorsionX, 2).enable(kElongationX, 1);
  dv.gauss_order = 7;
  LinkageBuilder b;
  b.add_soft_link("rod", -1, Joint{}, {dv});
  const Linkage lk = b.finalize();

  const CompiledDivision& cd = lk.links[0].divisions[0];
  const GaussRule rule = gauss_legendre(4 * (dv.gauss_order + 5));
  MatX Kd = MatX::Zero(cd.q_count, cd.q_count);
  const double s = cd.length / (cd.coord_scale * cd.coord_scale);
  for (size_t k = 0; k < rule.nodes.size(); ++k) {
    const Mat6X phi = cd.basis.eval(rule.nodes[k]);
    Kd += rule.weights[k] * s * phi.transpose() *
          screw_stiffness(cd.section, cd.material, rule.nodes[k], cd.shear) * phi;
  }
  CHECK((lk.K - Kd).norm() < 1e-10 * Kd.norm());
}

TEST_CASE("stiffness override doubles K") {
  SoftDivision dv = bending_division(0.5, 2);
  SoftDivision dv2 = dv;
  dv2.stiffness_override = [](double, const Mat6& s) { return Mat6(2.0 * s); };
  LinkageBuilder b1, b2;
  b1.add_soft_link("rod", -1, Joint{}, {dv});
  b2.add_soft_link("rod", -1, Joint{}, {dv2});
  CHECK((b2.finalize().K - 2.0 * b1.finalize().K).norm() < 1e-12);
}

TEST_CASE("K and D are symmetric PSD") {
  SoftDivision dv = bending_division(0.5, 3);
  dv.basis.enable(kBendingZ, 3).enable(kTorsionX, 3);
  dv.material.viscous_modulus = 11.2e3;
  LinkageBuilder b;
  Joint rev;
  rev.kind = JointKind::Revolute;
  b.add_rigid_link("base", -1, rev, RigidBody::uniform_rod(1, 0.2));
  b.add_soft_link("rod", 0, Joint{}, {dv});
  const Linkage lk = b.finalize();
  CHECK((lk.K - lk.K.transpose()).norm() < 1e-12 * (1 + lk.K.norm()));
  CHECK((lk.D - lk.D.transpose()).norm() < 1e-12 * (1 + lk.D.norm()));
  Eigen::SelfAdjointEigenSolver<MatX> es(lk.K);
  CHECK(es.eigenvalues().minCoeff() > -1e-9 * lk.K.norm());
  // Kelvin-Voigt: soft block of D is (eta/E) times the soft block of K
  const int nq = lk.dof();
  CHECK((lk.D.bottomRightCorner(nq - 1, nq - 1) -
         0.0112 * lk.K.bottomRightCorner(nq - 1, nq - 1))
            .norm() < 1e-12 * lk.K.norm());
  CHECK(lk.D(0, 0) == 0.0);  // rigid joint row undamped
}

TEST_CASE("eval point table covers stations and extras") {
  SoftDivision dv = bending_division(1.0, 2);
  dv.gauss_order = 5;
  LinkageBuilder b;
  b.add_soft_link("rod", -1, Joint{}, {dv});
  b.add_point_force("tip", 0, 1.0, (Vec6() << 0, 0, 0, 1, 0, 0).finished(), true);
  b.add_point_force("mid", 0, 0.37, (Vec6() << 0, 0, 0, 1, 0, 0).finished(), true);
  const Linkage lk = b.finalize();
  // stations: start + 5 nodes + end
  CHECK(lk.links[0].divisions[0].stations.size() == 7);
  // tip force reuses the end station, mid force adds one side point
  CHECK(lk.forces[0].point == lk.links[0].divisions[0].stations.back());
  CHECK(lk.links[0].divisions[0].side_points.size() == 1);
  CHECK(lk.points[lk.forces[1].point].X == doctest::Approx(0.37));
}
