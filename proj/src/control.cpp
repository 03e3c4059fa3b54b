#include "strandsim/control.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace strand {

VecX bounded_least_squares(const MatX& A, const VecX& b, const VecX& lo, const VecX& hi) {
  const int n = int(A.cols());
  enum Status { kFree, kLower, kUpper };
  std::vector<Status> st(n, kLower);
  VecX x(n);
  for (int j = 0; j < n; ++j) {
    x[j] = std::clamp(0.0, lo[j], hi[j]);
    st[j] = (x[j] <= lo[j]) ? kLower : kFree;
  }

  for (int iter = 0; iter < 30 * (n + 1); ++iter) {
    std::vector<int> free;
    for (int j = 0; j < n; ++j)
      if (st[j] == kFree) free.push_back(j);

    if (!free.empty()) {
      // least squares over the free set, bound variables held
      VecX rhs = b;
      for (int j = 0; j < n; ++j)
        if (st[j] != kFree) rhs -= A.col(j) * x[j];
      MatX Af(A.rows(), free.size());
      for (size_t k = 0; k < free.size(); ++k) Af.col(k) = A.col(free[k]);
      const VecX z = Af.colPivHouseholderQr().solve(rhs);

      bool inside = true;
      for (size_t k = 0; k < free.size(); ++k)
        if (z[k] < lo[free[k]] - 1e-14 || z[k] > hi[free[k]] + 1e-14) inside = false;

      if (!inside) {
        // step from x toward z until the first bound activates
        double alpha = 1.0;
        int hit = -1;
        Status hit_side = kLower;
        for (size_t k = 0; k < free.size(); ++k) {
          const int j = free[k];
          const double d = z[k] - x[j];
          if (d < -1e-300 && x[j] + alpha * d < lo[j]) {
            alpha = (lo[j] - x[j]) / d;
            hit = j;
            hit_side = kLower;
          } else if (d > 1e-300 && x[j] + alpha * d > hi[j]) {
            alpha = (hi[j] - x[j]) / d;
            hit = j;
            hit_side = kUpper;
          }
        }
        for (size_t k = 0; k < free.size(); ++k) x[free[k]] += alpha * (z[k] - x[free[k]]);
        if (hit >= 0) {
          st[hit] = hit_side;
          x[hit] = hit_side == kLower ? lo[hit] : hi[hit];
        }
        continue;
      }
      for (size_t k = 0; k < free.size(); ++k) x[free[k]] = z[k];
    }

    // KKT check on the bound variables
    const VecX g = A.transpose() * (A * x - b);  // gradient of 1/2|Ax-b|^2
    int worst = -1;
    double worst_v = 1e-10 * (1.0 + g.lpNorm<Eigen::Infinity>());
    for (int j = 0; j < n; ++j) {
      if (st[j] == kLower && -g[j] > worst_v && hi[j] > lo[j]) {
        worst_v = -g[j];
        worst = j;
      } else if (st[j] == kUpper && g[j] > worst_v) {
        worst_v = g[j];
        worst = j;
      }
    }
    if (worst < 0) break;
    st[worst] = kFree;
  }
  return x;
}

VecX pd_task_control(const Linkage& lk, const KinematicsCache& kin, const TaskTarget& target,
                     double t, int tip_point, bool bounded) {
  const PointState& tip = kin.points[tip_point];
  Pose g_des;
  Vec6 eta_des, etadot_des;
  target.eval(t, g_des, eta_des, etadot_des);

  const MatX M = generalized_mass(lk, kin);
  const VecX cvec = generalized_coriolis(lk, kin);
  const MatX B = actuation_matrix(lk, kin);
  const VecX F = generalized_external_force(lk, kin, t);

  const Vec6 pose_err = log_se3(tip.g.inverse() * g_des);
  const Eigen::LLT<MatX> llt(M);
  const VecX bias = cvec + lk.D * kin.qd + lk.K * kin.q - F;

  Vec6 w = etadot_des + target.kd * (eta_des - tip.eta) + target.kp * pose_err;
  w += tip.J * llt.solve(bias);
  w -= tip.Jdot * kin.qd;

  const MatX JMB = tip.J * llt.solve(B);
  if (!bounded) return JMB.completeOrthogonalDecomposition().solve(w);
  return bounded_least_squares(JMB, w, lk.input_lower(), lk.input_upper());
}

EnergySample compute_energy(const Linkage& lk, const VecX& q_int, const VecX& qd_int) {
  const KinematicsCache kin = compute_kinematics(lk, q_int, qd_int);
  const MatX M = generalized_mass(lk, kin);
  EnergySample e;
  e.kinetic = 0.5 * qd_int.dot(M * qd_int);
  e.elastic = 0.5 * q_int.dot(lk.K * q_int);
  if (lk.gravity.squaredNorm() > 0) {
    for (size_t pi = 0; pi < lk.points.size(); ++pi) {
      const EvalPoint& ep = lk.points[pi];
      if (ep.kind == PointKind::GaussNode) {
        const CompiledDivision& dv = lk.links[ep.link].divisions[ep.division];
        const double rho_a = dv.material.density * dv.section.properties(ep.X).area;
        e.gravitational -= ep.weight * ep.arc_scale * rho_a * lk.gravity.dot(kin.points[pi].g.r);
      } else if (ep.kind == PointKind::RigidCom) {
        e.gravitational -= lk.links[ep.link].body.mass * lk.gravity.dot(kin.points[pi].g.r);
      }
    }
  }
  e.total = e.kinetic + e.gravitational + e.elastic;
  return e;
}

std::pair<Vec3, Vec3> compute_momentum(const Linkage& lk, const VecX& q_int, const VecX& qd_int) {
  const KinematicsCache kin = compute_kinematics(lk, q_int, qd_int);
  Vec3 p = Vec3::Zero(), L = Vec3::Zero();
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
    const Vec6 h = mbar * ps.eta;  // body-frame momentum density
    const Vec3 f_w = ps.g.R * h.tail<3>();
    p += w * f_w;
    L += w * (ps.g.R * h.head<3>() + ps.g.r.cross(f_w));
  }
  return {p, L};
}

double placement_objective(const Linkage& lk, const VecX& u, int point_mid, int point_end,
                           const Vec3& target_mid, const Vec3& target_end,
                           const StaticOptions& opts) {
  StaticLoadCase load;
  load.u = u;
  load.q_template = VecX::Zero(lk.dof());
  StaticResult res;
  try {
    res = solve_static(lk, load, opts);
  } catch (const std::exception&) {
    return 1e6;
  }
  if (!res.converged) return 1e6 + res.residual;
  const auto g = forward_kinematics(lk, res.q);
  return (g[point_mid].r - target_mid).norm() + (g[point_end].r - target_end).norm();
}

namespace {

// One coordinate poll sweep at the current mesh; successful directions move
// to the front of the polling order (deterministic).
bool poll_sweep(const std::function<double(const VecX&)>& f, VecX& x, double& fx, double mesh,
                const VecX& lo, const VecX& hi, int& evals, int max_evals,
                std::vector<int>& order) {
  bool improved = false;
  for (int idx = 0; idx < int(order.size()) && evals < max_evals; ++idx) {
    const int j = order[idx];
    for (double s : {+1.0, -1.0}) {
      VecX xt = x;
      xt[j] += s * mesh;
      if (xt[j] < lo[j] || xt[j] > hi[j]) continue;
      const double ft = f(xt);
      ++evals;
      if (ft < fx) {
        x = xt;
        fx = ft;
        improved = true;
        if (idx != 0) std::rotate(order.begin(), order.begin() + idx, order.begin() + idx + 1);
        break;
      }
    }
  }
  return improved;
}

}  // namespace

PatternResult pattern_search(const std::function<double(const VecX&)>& f, const VecX& x0,
                             const VecX& lo, const VecX& hi, double mesh0, double tol,
                             int max_evals) {
  const int n = int(x0.size());
  PatternResult out;
  out.x = x0.cwiseMax(lo).cwiseMin(hi);
  out.f = f(out.x);
  out.evaluations = 1;
  double mesh = mesh0;
  std::vector<int> order(n);
  for (int j = 0; j < n; ++j) order[j] = j;

  while (mesh >= tol && out.evaluations < max_evals) {
    VecX x = out.x;
    double fx = out.f;
    if (poll_sweep(f, x, fx, mesh, lo, hi, out.evaluations, max_evals, order)) {
      // pattern moves: extrapolate along the last improvement while it pays
      while (out.evaluations < max_evals) {
        VecX xp = (2.0 * x - out.x).cwiseMax(lo).cwiseMin(hi);
        const double fp = f(xp);
        ++out.evaluations;
        VecX xs = xp;
        double fs = fp;
        poll_sweep(f, xs, fs, mesh, lo, hi, out.evaluations, max_evals, order);
        if (fs < fx) {
          out.x = x;
          out.f = fx;
          x = xs;
          fx = fs;
        } else {
          break;
        }
      }
      out.x = x;
      out.f = fx;
      mesh = std::min(2.0 * mesh, mesh0);
    } else {
      mesh *= 0.5;
    }
  }
  return out;
}

}  // namespace strand
