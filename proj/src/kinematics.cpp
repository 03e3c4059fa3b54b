#include "strandsim/kinematics.hpp"

#include <cmath>
#include <stdexcept>

namespace strand {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

struct Frame {
  Pose g;
  MatX J;     // 6 x n
  MatX Jdot;  // 6 x n
};

struct Pass {
  const Linkage& lk;
  const VecX& q;
  const VecX& qd;
  bool with_j;
  bool with_jdot;
  KinematicsCache& out;

  void store(int point, const Frame& f, const Pose& extra_offset) const {
    PointState& ps = out.points[point];
    if (extra_offset.isApprox(Pose::Identity(), 0.0)) {
      ps.g = f.g;
      if (with_j) ps.J = f.J;
      if (with_jdot) ps.Jdot = f.Jdot;
    } else {
      const Mat6 Ai = adjoint_inverse(extra_offset);
      ps.g = f.g * extra_offset;
      if (with_j) ps.J = Ai * f.J;
      if (with_jdot) ps.Jdot = Ai * f.Jdot;
    }
    if (with_j) ps.eta = ps.J * qd;
  }

  // Advances the frame across one exponential segment with step twist `omega`
  // whose coordinate sensitivity is `P` on the coordinate block [c0, c0+nc).
  // Pdot is the time derivative of P (empty when zero).
  void advance(Frame& f, const Vec6& omega, const MatX& P, const MatX& Pdot, int c0,
               int nc) const {
    const Pose rel = exp_se3(omega);
    const Mat6 Ai = adjoint_inverse(rel);
    f.g = f.g * rel;
    if (!with_j) return;
    const Mat6 T = dexp_unchecked(omega);
    const VecX qd_loc = qd.segment(c0, nc);
    const Vec6 omega_dot = P * qd_loc;
    MatX Jt = Ai * f.J;
    if (with_jdot) {
      const Vec6 eta_rel = T * omega_dot;
      f.Jdot = Ai * f.Jdot - ad(eta_rel) * Jt;
      f.Jdot.middleCols(c0, nc) += dexp_deriv(omega, omega_dot) * P;
      if (Pdot.size() > 0) f.Jdot.middleCols(c0, nc) += T * Pdot;
    }
    f.J = std::move(Jt);
    f.J.middleCols(c0, nc) += T * P;
  }

  void fixed_offset(Frame& f, const Pose& off) const {
    if (off.isApprox(Pose::Identity(), 0.0)) return;
    const Mat6 Ai = adjoint_inverse(off);
    f.g = f.g * off;
    if (with_j) f.J = Ai * f.J;
    if (with_jdot) f.Jdot = Ai * f.Jdot;
  }

  // One Magnus interval [a, b] of a division: samples the internally scaled
  // strain field at the two Zanna collocation nodes.
  void advance_interval(Frame& f, const CompiledDivision& dv, double a, double b) const {
    const double h = b - a;
    if (h < 1e-14) return;
    const double x1 = a + h * (0.5 - kSqrt3 / 6.0);
    const double x2 = a + h * (0.5 + kSqrt3 / 6.0);
    const double bs = dv.length / dv.coord_scale;  // basis scale for normalized abscissa
    const VecX q_loc = q.segment(dv.q_start, dv.q_count);
    const Mat6X phi1 = bs * dv.basis.eval(x1);
    const Mat6X phi2 = bs * dv.basis.eval(x2);
    const Vec6 xi1 = phi1 * q_loc + dv.length * dv.basis.reference(x1);
    const Vec6 xi2 = phi2 * q_loc + dv.length * dv.basis.reference(x2);
    const Vec6 omega = magnus4(xi1, xi2, h);
    if (!with_j) {
      advance(f, omega, MatX(), MatX(), dv.q_start, dv.q_count);
      return;
    }
    const double cb = kSqrt3 * h * h / 12.0;
    const MatX P = 0.5 * h * (phi1 + phi2) + cb * (ad(xi1) * phi2 - ad(xi2) * phi1);
    MatX Pdot;
    if (with_jdot) {
      const VecX qd_loc = qd.segment(dv.q_start, dv.q_count);
      const Vec6 xid1 = phi1 * qd_loc;
      const Vec6 xid2 = phi2 * qd_loc;
      Pdot = cb * (ad(xid1) * phi2 - ad(xid2) * phi1);
    }
    advance(f, omega, P, Pdot, dv.q_start, dv.q_count);
  }

  void run() {
    const int n = lk.dof();
    std::vector<Frame> tips(lk.num_links());
    for (int li = 0; li < lk.num_links(); ++li) {
      const CompiledLink& cl = lk.links[li];
      Frame f;
      if (cl.parent >= 0) {
        f = tips[cl.parent];
      } else if (with_j) {
        f.J = MatX::Zero(6, n);
        if (with_jdot) f.Jdot = MatX::Zero(6, n);
      }
      fixed_offset(f, cl.mount);
      if (cl.joint.q_count > 0) {
        const VecX qj = q.segment(cl.joint.q_start, cl.joint.q_count);
        advance(f, cl.joint.phi * qj, cl.joint.phi, MatX(), cl.joint.q_start, cl.joint.q_count);
      }
      if (!cl.soft) {
        store(cl.com_point, f, cl.body.com);
        store(cl.tip_point, f, cl.body.tip);
        for (int pi = 0; pi < int(lk.points.size()); ++pi) {
          const EvalPoint& ep = lk.points[pi];
          if (ep.link == li && ep.kind == PointKind::Extra) store(pi, f, ep.offset);
        }
        fixed_offset(f, cl.body.tip);
        tips[li] = f;
        continue;
      }
      for (const auto& dv : cl.divisions) {
        store(dv.stations[0], f, {});
        for (size_t k = 0; k + 1 < dv.stations.size(); ++k) {
          // side points hanging off this station, one extra substep each
          for (const auto& sp : dv.side_points) {
            if (sp.anchor_station != int(k)) continue;
            Frame side = f;
            advance_interval(side, dv, lk.points[dv.stations[k]].X, sp.X);
            store(sp.point, side, lk.points[sp.point].offset);
          }
          advance_interval(f, dv, lk.points[dv.stations[k]].X, lk.points[dv.stations[k + 1]].X);
          store(dv.stations[k + 1], f, {});
        }
        for (const auto& sp : dv.side_points) {
          if (sp.anchor_station != int(dv.stations.size()) - 1) continue;
          Frame side = f;
          advance_interval(side, dv, 1.0, sp.X);
          store(sp.point, side, lk.points[sp.point].offset);
        }
      }
      tips[li] = f;
    }
    out.link_tips.resize(lk.num_links());
    for (int li = 0; li < lk.num_links(); ++li) {
      out.link_tips[li].g = tips[li].g;
      if (with_j) {
        out.link_tips[li].J = tips[li].J;
        out.link_tips[li].eta = tips[li].J * qd;
      }
      if (with_jdot) out.link_tips[li].Jdot = tips[li].Jdot;
    }
  }
};

}  // namespace

KinematicsCache compute_kinematics(const Linkage& linkage, const VecX& q_int, const VecX& qd_int,
                                   const KinematicsOptions& opts) {
  if (!q_int.allFinite()) throw std::invalid_argument("NaN in q");
  if (q_int.size() != linkage.dof() || qd_int.size() != linkage.dof())
    throw std::invalid_argument("coordinate size mismatch");
  KinematicsCache cache;
  cache.q = q_int;
  cache.qd = qd_int;
  cache.with_jacobian = opts.with_jacobian;
  cache.with_jdot = opts.with_jdot;
  cache.points.resize(linkage.points.size());
  Pass pass{linkage, cache.q, cache.qd, opts.with_jacobian, opts.with_jdot, cache};
  pass.run();
  return cache;
}

std::vector<Pose> forward_kinematics(const Linkage& linkage, const VecX& q_int) {
  KinematicsOptions opts;
  opts.with_jacobian = false;
  const KinematicsCache cache =
      compute_kinematics(linkage, q_int, VecX::Zero(linkage.dof()), opts);
  std::vector<Pose> g(cache.points.size());
  for (size_t i = 0; i < g.size(); ++i) g[i] = cache.points[i].g;
  return g;
}

}  // namespace strand
