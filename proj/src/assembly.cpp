#include "strandsim/assembly.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace strand {

namespace {

Vec6 gravity_twist(const Vec3& g) {
  Vec6 G = Vec6::Zero();
  G.tail<3>() = g;
  return G;
}

}  // namespace

MatX generalized_mass(const Linkage& lk, const KinematicsCache& kin) {
  const int n = lk.dof();
  MatX M = MatX::Zero(n, n);
  for (size_t pi = 0; pi < lk.points.size(); ++pi) {
    const EvalPoint& ep = lk.points[pi];
    const PointState& ps = kin.points[pi];
    if (ep.kind == PointKind::GaussNode) {
      const CompiledDivision& dv = lk.links[ep.link].divisions[ep.division];
      const Mat6 mbar = screw_inertia(dv.section, dv.material, ep.X);
      M.noalias() += (ep.weight * ep.arc_scale) * ps.J.transpose() * mbar * ps.J;
    } else if (ep.kind == PointKind::RigidCom) {
      M.noalias() += ps.J.transpose() * lk.links[ep.link].body.inertia * ps.J;
    }
  }
  return 0.5 * (M + M.transpose());
}

VecX generalized_coriolis(const Linkage& lk, const KinematicsCache& kin) {
  const int n = lk.dof();
  VecX c = VecX::Zero(n);
  for (size_t pi = 0; pi < lk.points.size(); ++pi) {
    const EvalPoint& ep = lk.points[pi];
    const PointState& ps = kin.points[pi];
    Mat6 mbar;
    double w = 1.0;
    if (ep.kind == PointKind::GaussNode) {
      const CompiledDivision& dv = lk.links[ep.link].divisions[ep.division];
      mbar = screw_inertia(dv.section, dv.material, ep.X);
      w = ep.weight * ep.arc_scale;
    } else if (ep.kind == PointKind::RigidCom) {
      mbar = lk.links[ep.link].body.inertia;
    } else {
      continue;
    }
    const Vec6 h = mbar * ps.eta;
    const Vec6 bias = mbar * (ps.Jdot * kin.qd) - ad(ps.eta).transpose() * h;
    c.noalias() += w * ps.J.transpose() * bias;
  }
  return c;
}

MatX actuation_matrix(const Linkage& lk, const KinematicsCache& kin) {
  const int n = lk.dof();
  MatX B = MatX::Zero(n, lk.num_inputs());
  for (int ci = 0; ci < lk.num_inputs(); ++ci) {
    const InputChannel& ch = lk.inputs[ci];
    if (ch.kind == InputChannel::Kind::JointWrench)
      B(lk.links[ch.joint_link].joint.q_start + ch.joint_axis, ci) = 1.0;
  }
  for (const auto& cab : lk.cables) {
    const CompiledLink& host = lk.links[cab.link];
    double total = 0;
    for (const auto& d : host.divisions) total += d.length;
    for (const auto& nd : cab.nodes) {
      const CompiledDivision& dv = host.divisions[nd.division];
      const Vec6 xi = lk.strain(cab.link, nd.division, nd.X_div, kin.q);
      const Vec3 d(0.0, cab.path_y(nd.X_link), cab.path_z(nd.X_link));
      const Vec3 dprime(0.0, cab.path_dy(nd.X_link) / total, cab.path_dz(nd.X_link) / total);
      const Vec3 t = xi.tail<3>() + xi.head<3>().cross(d) + dprime;
      const double tn = t.norm();
      if (tn < 1e-9) throw std::runtime_error("degenerate cable path");
      const Vec3 that = t / tn;
      Vec6 screw;
      screw.head<3>() = d.cross(that);
      screw.tail<3>() = that;
      // unit tension does work -d(length)/dq
      B.col(cab.input).segment(dv.q_start, dv.q_count).noalias() -=
          (nd.weight_phys / dv.coord_scale) * dv.basis.eval(nd.X_div).transpose() * screw;
    }
  }
  return B;
}

ContactForces contact_forces(const CompiledContact& pair, const KinematicsCache& kin) {
  ContactForces out;
  out.proxy_force.resize(pair.proxies.size(), Vec3::Zero());
  Vec3 ps_center, vs;
  double rs = pair.target_radius;
  if (pair.target_link >= 0) {
    const PointState& tp = kin.points[pair.target_point];
    ps_center = tp.g.r;
    vs = tp.g.R * tp.eta.tail<3>();
  } else {
    ps_center = pair.target_center;
    vs = Vec3::Zero();
  }
  for (size_t i = 0; i < pair.proxies.size(); ++i) {
    const PointState& pp = kin.points[pair.proxies[i].point];
    const Vec3 p_si = pp.g.r - ps_center;
    const double dist = p_si.norm();
    if (dist < 1e-9) throw std::runtime_error("coincident centers");
    const double gap = rs + pair.proxies[i].radius - dist;
    if (gap <= 0.0) continue;
    const Vec3 dir = p_si / dist;
    const Vec3 vi = pp.g.R * pp.eta.tail<3>();
    const double gap_rate = -dir.dot(vi - vs);
    const Vec3 f = (pair.stiffness * gap + pair.damping * gap_rate) * dir;
    out.proxy_force[i] = f;
    out.target_force -= f;
  }
  return out;
}

void accumulate_point_wrench(const KinematicsCache& kin, int point, const Vec6& body_wrench,
                             VecX& F) {
  F.noalias() += kin.points[point].J.transpose() * body_wrench;
}

VecX generalized_external_force(const Linkage& lk, const KinematicsCache& kin, double t,
                                const std::map<std::string, double>* force_overrides) {
  const int n = lk.dof();
  VecX F = VecX::Zero(n);

  if (lk.gravity.squaredNorm() > 0) {
    const Vec6 G = gravity_twist(lk.gravity);
    for (size_t pi = 0; pi < lk.points.size(); ++pi) {
      const EvalPoint& ep = lk.points[pi];
      const PointState& ps = kin.points[pi];
      if (ep.kind == PointKind::GaussNode) {
        const CompiledDivision& dv = lk.links[ep.link].divisions[ep.division];
        const Mat6 mbar = screw_inertia(dv.section, dv.material, ep.X);
        F.noalias() += (ep.weight * ep.arc_scale) * ps.J.transpose() *
                       (mbar * (adjoint_inverse(ps.g) * G));
      } else if (ep.kind == PointKind::RigidCom) {
        F.noalias() +=
            ps.J.transpose() * (lk.links[ep.link].body.inertia * (adjoint_inverse(ps.g) * G));
      }
    }
  }

  for (const auto& pf : lk.forces) {
    double mag = pf.profile.value(t);
    if (force_overrides) {
      auto it = force_overrides->find(pf.name);
      if (it != force_overrides->end()) mag = it->second;
    }
    if (mag == 0.0) continue;
    const PointState& ps = kin.points[pf.point];
    Vec6 w_body = mag * pf.wrench;
    if (!pf.follower) {
      w_body.head<3>() = ps.g.R.transpose() * w_body.head<3>();
      w_body.tail<3>() = ps.g.R.transpose() * w_body.tail<3>();
    }
    F.noalias() += ps.J.transpose() * w_body;
  }

  for (const auto& pair : lk.contacts) {
    const ContactForces cf = contact_forces(pair, kin);
    for (size_t i = 0; i < pair.proxies.size(); ++i) {
      if (cf.proxy_force[i].squaredNorm() == 0.0) continue;
      const PointState& pp = kin.points[pair.proxies[i].point];
      Vec6 w = Vec6::Zero();
      w.tail<3>() = pp.g.R.transpose() * cf.proxy_force[i];
      F.noalias() += pp.J.transpose() * w;
    }
    if (pair.target_link >= 0 && cf.target_force.squaredNorm() > 0.0) {
      const PointState& tp = kin.points[pair.target_point];
      Vec6 w = Vec6::Zero();
      w.tail<3>() = tp.g.R.transpose() * cf.target_force;
      F.noalias() += tp.J.transpose() * w;
    }
  }

  for (const auto& hook : lk.custom_forces) {
    hook(t, lk, kin, F);
    if (!F.allFinite()) throw std::runtime_error("custom force produced NaN");
  }
  return F;
}

}  // namespace strand
