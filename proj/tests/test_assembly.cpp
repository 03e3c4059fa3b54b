#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "strandsim/assembly.hpp"
#include "strandsim/control.hpp"
#include "strandsim/linkage.hpp"

using namespace strand;

namespace {

std::mt19937 rng(4242);

VecX random_vec(int n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  VecX v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

Linkage planar_2r(double l1, double l2, double m1, double m2, const Vec3& gravity) {
  LinkageBuilder b;
  Joint rev;
  rev.kind = JointKind::Revolute;
  b.add_rigid_link("a", -1, rev, RigidBody::uniform_rod(m1, l1));
  b.add_rigid_link("c", 0, rev, RigidBody::uniform_rod(m2, l2));
  b.set_gravity(gravity);
  return b.finalize();
}

Material rubber() {
  Material m;
  m.youngs_modulus = 1e6;
  m.poisson_ratio = 0.45;
  m.density = 1000.0;
  return m;
}

KinematicsCache full_kin(const Linkage& lk, const VecX& q, const VecX& qd) {
  KinematicsOptions opts;
  opts.with_jdot = true;
  return compute_kinematics(lk, q, qd, opts);
}

}  // namespace

TEST_CASE("rigid rod on a revolute joint: M = m l^2 / 3") {
  const Linkage lk = planar_2r(1.3, 0.5, 2.0, 0.0, Vec3::Zero());
  const KinematicsCache kin = full_kin(lk, VecX::Zero(2), VecX::Zero(2));
  const MatX M = generalized_mass(lk, kin);
  CHECK(M(0, 0) == doctest::Approx(2.0 * 1.3 * 1.3 / 3.0).epsilon(1e-12));
}

TEST_CASE("soft rod, constant elongation: M = rho A L^3 / 3") {
  SoftDivision dv;
  dv.length = 0.8;
  dv.section = CrossSection::circular(0.01, 0.01);
  dv.material = rubber();
  dv.basis.order.fill(-1);
  dv.basis.enable(kElongationX, 0);
  dv.gauss_order = 6;
  LinkageBuilder b(false);
  b.add_soft_link("rod", -1, Joint{}, {dv});
  const Linkage lk = b.finalize();
  const KinematicsCache kin = full_kin(lk, VecX::Zero(1), VecX::Zero(1));
  const MatX M = generalized_mass(lk, kin);
  const double rho_a = 1000.0 * M_PI * 1e-4;
  CHECK(M(0, 0) == doctest::Approx(rho_a * std::pow(0.8, 3) / 3.0).epsilon(1e-10));
}

TEST_CASE("planar 2R matches the textbook M, c and gravity vector") {
  const double l1 = 0.9, l2 = 0.6, m1 = 1.4, m2 = 0.8, g = 9.81;
  const Linkage lk = planar_2r(l1, l2, m1, m2, Vec3(0, -g, 0));
  const double lc1 = l1 / 2, lc2 = l2 / 2;
  const double I1 = m1 * l1 * l1 / 12.0, I2 = m2 * l2 * l2 / 12.0;
  for (int trial = 0; trial < 20; ++trial) {
    const VecX q = random_vec(2, M_PI);
    const VecX qd = random_vec(2, 2.0);
    const KinematicsCache kin = full_kin(lk, q, qd);
    const MatX M = generalized_mass(lk, kin);
    const VecX c = generalized_coriolis(lk, kin);
    const VecX F = generalized_external_force(lk, kin, 0.0);

    const double c2 = std::cos(q[1]), s2 = std::sin(q[1]);
    MatX Mref(2, 2);
    Mref(0, 0) = m1 * lc1 * lc1 + I1 + m2 * (l1 * l1 + lc2 * lc2 + 2 * l1 * lc2 * c2) + I2;
    Mref(0, 1) = Mref(1, 0) = m2 * (lc2 * lc2 + l1 * lc2 * c2) + I2;
    Mref(1, 1) = m2 * lc2 * lc2 + I2;
    CHECK((M - Mref).norm() < 1e-9 * Mref.norm());

    const double h = -m2 * l1 * lc2 * s2;
    VecX cref(2);
    cref << h * (2 * qd[0] * qd[1] + qd[1] * qd[1]), -h * qd[0] * qd[0];
    CHECK((c - cref).norm() < 1e-9 * (1.0 + cref.norm()));

    // F is the generalized gravity force, -dU/dq
    VecX Fref(2);
    const double c1 = std::cos(q[0]), c12 = std::cos(q[0] + q[1]);
    Fref << -((m1 * lc1 + m2 * l1) * g * c1 + m2 * lc2 * g * c12), -(m2 * lc2 * g * c12);
    CHECK((F - Fref).norm() < 1e-9 * (1.0 + Fref.norm()));
  }
}

TEST_CASE("coriolis vanishes at rest and satisfies the power identity") {
  SoftDivision dv;
  dv.length = 0.5;
  dv.section = CrossSection::circular(0.02, 0.01);
  dv.material = rubber();
  dv.basis.order.fill(-1);
  dv.basis.enable(kBendingY, 2).enable(kBendingZ, 1).enable(kTorsionX, 1);
  dv.gauss_order = 6;
  LinkageBuilder b;
  Joint rev;
  rev.kind = JointKind::Revolute;
  b.add_rigid_link("base", -1, rev, RigidBody::uniform_rod(0.3, 0.2));
  b.add_soft_link("rod", 0, Joint{}, {dv});
  const Linkage lk = b.finalize();
  const int n = lk.dof();

  CHECK(generalized_coriolis(lk, full_kin(lk, random_vec(n, 0.5), VecX::Zero(n))).norm() == 0.0);

  // qd' * c(q, qd) must equal (1/2) qd' * dM/dt * qd
  for (int trial = 0; trial < 5; ++trial) {
    const VecX q = random_vec(n, 0.5);
    const VecX qd = random_vec(n, 1.0);
    const VecX c = generalized_coriolis(lk, full_kin(lk, q, qd));
    const double eps = 1e-6;
    const MatX Mp = generalized_mass(lk, full_kin(lk, q + eps * qd, qd));
    const MatX Mm = generalized_mass(lk, full_kin(lk, q - eps * qd, qd));
    const double lhs = qd.dot(c);
    const double rhs = 0.5 * qd.dot(((Mp - Mm) / (2 * eps)) * qd);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
  }
}

TEST_CASE("mass matrix is SPD on random configurations") {
  SoftDivision dv;
  dv.length = 0.5;
  dv.section = CrossSection::circular(0.02, 0.01);
  dv.material = rubber();
  dv.basis.order.fill(-1);
  dv.basis.enable(kBendingY, 3).enable(kBendingZ, 3).enable(kTorsionX, 3);
  dv.gauss_order = 6;
  LinkageBuilder b;
  Joint free;
  free.kind = JointKind::Free;
  b.add_soft_link("rod", -1, free, {dv});
  const Linkage lk = b.finalize();
  for (int trial = 0; trial < 10; ++trial) {
    const VecX q = random_vec(lk.dof(), 0.4);
    const MatX M = generalized_mass(lk, full_kin(lk, q, VecX::Zero(lk.dof())));
    CHECK((M - M.transpose()).norm() < 1e-12 * M.norm());
    Eigen::LLT<MatX> llt(M);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("gravity on a horizontal rod over a planar revolute") {
  // revolute about z, gravity -y: generalized force = -m g l/2 at q = 0
  const Linkage lk = planar_2r(1.0, 0.5, 2.0, 0.0, Vec3(0, -9.81, 0));
  const KinematicsCache kin = full_kin(lk, VecX::Zero(2), VecX::Zero(2));
  const VecX F = generalized_external_force(lk, kin, 0.0);
  CHECK(F[0] == doctest::Approx(-2.0 * 9.81 * 0.5).epsilon(1e-12));

  // zero gravity, no forces -> F = 0
  const Linkage lk0 = planar_2r(1.0, 0.5, 2.0, 0.0, Vec3::Zero());
  CHECK(generalized_external_force(lk0, full_kin(lk0, VecX::Zero(2), VecX::Zero(2)), 0.0).norm() ==
        0.0);
}

TEST_CASE("dead and follower tip forces coincide on the reference rod") {
  auto build = [&](bool follower) {
    SoftDivision dv;
    dv.length = 0.6;
    dv.section = CrossSection::circular(0.01, 0.01);
    dv.material = rubber();
    dv.basis.order.fill(-1);
    dv.basis.enable(kBendingY, 2);
    dv.gauss_order = 5;
    LinkageBuilder b;
    b.add_soft_link("rod", -1, Joint{}, {dv});
    b.add_point_force("tip", 0, 1.0, (Vec6() << 0, 0, 0, 0, 0, 1).finished(), follower);
    return b.finalize();
  };
  const Linkage lf = build(true);
  const Linkage ld = build(false);
  const VecX q0 = VecX::Zero(lf.dof());
  const VecX Ff = generalized_external_force(lf, full_kin(lf, q0, q0), 0.0);
  const VecX Fd = generalized_external_force(ld, full_kin(ld, q0, q0), 0.0);
  CHECK((Ff - Fd).norm() < 1e-12 * (1 + Ff.norm()));
}

TEST_CASE("force assembly is linear in the registered wrenches") {
  auto build = [&](bool first, bool second) {
    SoftDivision dv;
    dv.length = 0.6;
    dv.section = CrossSection::circular(0.01, 0.01);
    dv.material = rubber();
    dv.basis.order.fill(-1);
    dv.basis.enable(kBendingY, 2).enable(kBendingZ, 1);
    dv.gauss_order = 5;
    LinkageBuilder b;
    b.add_soft_link("rod", -1, Joint{}, {dv});
    if (first) b.add_point_force("f1", 0, 1.0, (Vec6() << 0, 0, 0, 0, 0, 1).finished(), true);
    if (second) b.add_point_force("f2", 0, 0.5, (Vec6() << 0, 0.2, 0, 1, 0, 0).finished(), true);
    return b.finalize();
  };
  const VecX q = random_vec(build(true, true).dof(), 0.3);
  const VecX qz = VecX::Zero(q.size());
  auto F = [&](bool a, bool c) {
    const Linkage lk = build(a, c);
    return generalized_external_force(lk, full_kin(lk, q, qz), 0.0);
  };
  CHECK((F(true, true) - F(true, false) - F(false, true)).norm() < 1e-12);
}

TEST_CASE("cable columns: centroidal zero, offset closed form, virtual work") {
  auto build = [&](double y_off) {
    SoftDivision dv;
    dv.length = 0.7;
    dv.section = CrossSection::circular(0.05, 0.05);
    dv.material = rubber();
    dv.basis.order.fill(-1);
    dv.basis.enable(kBendingZ, 0);
    dv.gauss_order = 6;
    LinkageBuilder b(false);
    b.add_soft_link("rod", -1, Joint{}, {dv});
    b.add_cable("c", 0, 0.0, 1.0, (VecX(1) << y_off).finished(), VecX::Zero(1), 100.0);
    return b.finalize();
  };

  // centroidal path on a bending-only rod: zero column
  {
    const Linkage lk = build(0.0);
    const KinematicsCache kin = full_kin(lk, VecX::Zero(1), VecX::Zero(1));
    CHECK(actuation_matrix(lk, kin).norm() < 1e-14);
  }

  // constant offset d1 on a straight rod with one constant bending-z mode:
  // unit tension shortens the +y side, so the column is +d1*L
  {
    const double d1 = 0.01, L = 0.7;
    const Linkage lk = build(d1);
    const KinematicsCache kin = full_kin(lk, VecX::Zero(1), VecX::Zero(1));
    const MatX B = actuation_matrix(lk, kin);
    CHECK(B(0, 0) == doctest::Approx(d1 * L).epsilon(1e-10));
  }

  // virtual work: column = -d(cable length)/dq at a bent configuration
  {
    const double d1 = 0.012;
    const Linkage lk = build(d1);
    VecX q(1);
    q << 1.7;
    const MatX B = actuation_matrix(lk, full_kin(lk, q, VecX::Zero(1)));
    auto cable_length = [&](double kappa) {
      // xi = (0,0,kappa, 1,0,0), d = (0, d1, 0), t = xi_lin + xi_ang x d
      const Vec3 t = Vec3(1, 0, 0) + Vec3(0, 0, kappa).cross(Vec3(0, d1, 0));
      return 0.7 * t.norm();
    };
    const double eps = 1e-6;
    const double dldq = (cable_length(q[0] + eps) - cable_length(q[0] - eps)) / (2 * eps);
    CHECK(B(0, 0) == doctest::Approx(-dldq).epsilon(1e-4));
  }
}

TEST_CASE("joint actuator column is a unit vector on its coordinate") {
  LinkageBuilder b;
  Joint rev;
  rev.kind = JointKind::Revolute;
  rev.control = JointControl::Wrench;
  b.add_rigid_link("a", -1, rev, RigidBody::uniform_rod(1, 1));
  Joint rev2;
  rev2.kind = JointKind::Revolute;
  b.add_rigid_link("c", 0, rev2, RigidBody::uniform_rod(1, 1));
  const Linkage lk = b.finalize();
  REQUIRE(lk.num_inputs() == 1);
  const MatX B = actuation_matrix(lk, full_kin(lk, VecX::Zero(2), VecX::Zero(2)));
  CHECK(B(0, 0) == 1.0);
  CHECK(B(1, 0) == 0.0);
}

TEST_CASE("contact force arithmetic, Heaviside gate and reaction balance") {
  LinkageBuilder b;
  Joint prism;
  prism.kind = JointKind::Prismatic;
  prism.axis = Vec3::UnitX();
  b.add_rigid_link("slider", -1, prism, RigidBody::solid_sphere(1.0, 0.05));
  CompiledContact spec;
  spec.proxies.push_back({0, -1, 0.05});
  spec.target_link = -1;
  spec.target_center = Vec3(0.2, 0, 0);
  spec.target_radius = 0.1;
  spec.stiffness = 1e4;
  spec.damping = 0.0;
  b.add_contact(spec, {{0, 0.0}});
  const Linkage lk = b.finalize();

  // separated: |p| = 0.2, sum of radii 0.15 -> no force
  {
    VecX q(1), qd(1);
    q << 0.0;
    qd << 0.0;
    const auto cf = contact_forces(lk.contacts[0], full_kin(lk, q, qd));
    CHECK(cf.proxy_force[0].norm() == 0.0);
  }
  // gap = 1e-3: |f| = 10 N along the center line, reaction opposite
  {
    VecX q(1), qd(1);
    q << 0.051;  // center distance 0.149, gap 1e-3
    qd << 0.0;
    const auto cf = contact_forces(lk.contacts[0], full_kin(lk, q, qd));
    CHECK(cf.proxy_force[0].norm() == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(cf.proxy_force[0].x() == doctest::Approx(-10.0).epsilon(1e-9));
    CHECK((cf.proxy_force[0] + cf.target_force).norm() < 1e-12);
  }
}

TEST_CASE("gravity part of F equals minus the potential gradient") {
  SoftDivision dv;
  dv.length = 0.5;
  dv.section = CrossSection::circular(0.02, 0.01);
  dv.material = rubber();
  dv.basis.order.fill(-1);
  dv.basis.enable(kBendingY, 2).enable(kBendingZ, 1);
  dv.gauss_order = 6;
  LinkageBuilder b;
  b.add_soft_link("rod", -1, Joint{}, {dv});
  b.set_gravity(Vec3(0, 0, -9.81));
  const Linkage lk = b.finalize();
  const int n = lk.dof();
  const VecX q = random_vec(n, 0.5);
  const VecX F = generalized_external_force(lk, full_kin(lk, q, VecX::Zero(n)), 0.0);
  for (int i = 0; i < n; ++i) {
    VecX qp = q, qm = q;
    const double eps = 1e-6;
    qp[i] += eps;
    qm[i] -= eps;
    const double dU = (compute_energy(lk, qp, VecX::Zero(n)).gravitational -
                       compute_energy(lk, qm, VecX::Zero(n)).gravitational) /
                      (2 * eps);
    CHECK(F[i] == doctest::Approx(-dU).epsilon(1e-5));
  }
}

TEST_CASE("custom hook contributes and NaN is rejected") {
  LinkageBuilder b;
  Joint rev;
  rev.kind = JointKind::Revolute;
  b.add_rigid_link("a", -1, rev, RigidBody::uniform_rod(1, 1));
  b.add_custom_force([](double, const Linkage&, const KinematicsCache&, VecX& F) { F[0] += 3.5; });
  const Linkage lk = b.finalize();
  const VecX F = generalized_external_force(lk, full_kin(lk, VecX::Zero(1), VecX::Zero(1)), 0.0);
  CHECK(F[0] == 3.5);

  LinkageBuilder b2;
  b2.add_rigid_link("a", -1, rev, RigidBody::uniform_rod(1, 1));
  b2.add_custom_force(
      [](double, const Linkage&, const KinematicsCache&, VecX& F) { F[0] = std::nan(""); });
  const Linkage lk2 = b2.finalize();
  CHECK_THROWS_WITH(
      (void)generalized_external_force(lk2, full_kin(lk2, VecX::Zero(1), VecX::Zero(1)), 0.0),
      "custom force produced NaN");
}
