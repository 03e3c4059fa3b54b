#include "strandsim/solvers.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace strand {

ConstraintEval eval_constraints(const Linkage& lk, const KinematicsCache& kin) {
  ConstraintEval out;
  const int m = lk.num_constraints();
  const int n = lk.dof();
  out.phi = VecX::Zero(m);
  out.A = MatX::Zero(m, n);
  for (const auto& cc : lk.closures) {
    const PointState& pa = kin.points[cc.point_a];
    Pose gb;
    const MatX* Jb = nullptr;
    if (cc.link_b >= 0) {
      gb = kin.points[cc.point_b].g;
      Jb = &kin.points[cc.point_b].J;
    } else {
      gb = cc.world_b;
    }
    const Pose rel = pa.g.inverse() * gb;
    const Vec6 theta = log_se3(cc.ref_rel.inverse() * rel);
    out.phi.segment(cc.row_start, cc.rows) = cc.constrained_basis.transpose() * theta;
    if (kin.with_jacobian) {
      MatX Jh = -adjoint_inverse(rel) * pa.J;
      if (Jb) Jh += *Jb;
      const Mat6 Tinv_eval = dexp_unchecked(theta);
      const MatX dtheta = Tinv_eval.partialPivLu().solve(Jh);
      out.A.block(cc.row_start, 0, cc.rows, n) = cc.constrained_basis.transpose() * dtheta;
    }
  }
  return out;
}

namespace {

std::vector<int> free_indices(const Linkage& lk) {
  std::vector<int> idx;
  for (int i = 0; i < lk.dof(); ++i)
    if (!lk.prescribed[i]) idx.push_back(i);
  return idx;
}

// R(q) = K q - B u - F with q fixed at prescribed entries.
VecX static_residual_full(const Linkage& lk, const VecX& q, const StaticLoadCase& load) {
  const KinematicsCache kin = compute_kinematics(lk, q, VecX::Zero(lk.dof()));
  VecX r = lk.K * q - generalized_external_force(lk, kin, 0.0, &load.force_overrides);
  if (lk.num_inputs() > 0 && load.u.size() > 0) r -= actuation_matrix(lk, kin) * load.u;
  return r;
}

}  // namespace

StaticResult solve_static(const Linkage& lk, const StaticLoadCase& load,
                          const StaticOptions& opts) {
  const std::vector<int> fi = free_indices(lk);
  const int nf = int(fi.size());
  const int m = lk.num_constraints();
  const int nx = nf + m;

  VecX q = load.q_template.size() ? load.q_template : VecX::Zero(lk.dof());
  VecX lambda = load.lambda_guess.size() == m ? load.lambda_guess : VecX::Zero(m);

  auto pack = [&](const VecX& qfull, const VecX& lam) {
    VecX x(nx);
    for (int i = 0; i < nf; ++i) x[i] = qfull[fi[i]];
    x.tail(m) = lam;
    return x;
  };
  auto unpack_q = [&](const VecX& x) {
    VecX qfull = q;
    for (int i = 0; i < nf; ++i) qfull[fi[i]] = x[i];
    return qfull;
  };

  auto residual = [&](const VecX& x) -> VecX {
    const VecX qfull = unpack_q(x);
    VecX r = static_residual_full(lk, qfull, load);
    VecX res(nx);
    if (m > 0) {
      const KinematicsCache kin = compute_kinematics(lk, qfull, VecX::Zero(lk.dof()));
      const ConstraintEval ce = eval_constraints(lk, kin);
      r += ce.A.transpose() * x.tail(m);
      for (int i = 0; i < nf; ++i) res[i] = r[fi[i]];
      res.tail(m) = ce.phi;
    } else {
      for (int i = 0; i < nf; ++i) res[i] = r[fi[i]];
    }
    return res;
  };

  StaticResult out;
  VecX x = pack(q, lambda);
  VecX res = residual(x);
  double rn = res.lpNorm<Eigen::Infinity>();

  for (int it = 0; it < opts.max_iter; ++it) {
    if (rn < opts.tol) {
      out.converged = true;
      out.iterations = it;
      break;
    }
    // central-difference Jacobian
    MatX Jac(nx, nx);
    for (int j = 0; j < nx; ++j) {
      const double h = opts.fd_step * (1.0 + std::abs(x[j]));
      VecX xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      Jac.col(j) = (residual(xp) - residual(xm)) / (2 * h);
    }
    Eigen::FullPivLU<MatX> lu(Jac);
    // minimum-norm direction when the Jacobian is rank deficient (singular
    // reference configurations of inextensible loops)
    const VecX dx = lu.isInvertible()
                        ? VecX(lu.solve(-res))
                        : VecX(Jac.completeOrthogonalDecomposition().solve(-res));
    double alpha = 1.0;
    VecX x_new = x + dx;
    VecX res_new = residual(x_new);
    double rn_new = res_new.lpNorm<Eigen::Infinity>();
    for (int ls = 0; ls < 30 && !(rn_new < rn) ; ++ls) {
      alpha *= 0.5;
      x_new = x + alpha * dx;
      res_new = residual(x_new);
      rn_new = res_new.lpNorm<Eigen::Infinity>();
    }
    if (!(rn_new < rn)) {
      if (m > 0 && !lu.isInvertible()) {
        // distinguish genuine constraint redundancy from plain stagnation
        const KinematicsCache kin = compute_kinematics(lk, unpack_q(x), VecX::Zero(lk.dof()));
        const ConstraintEval ce = eval_constraints(lk, kin);
        Eigen::ColPivHouseholderQR<MatX> qr(ce.A.transpose());
        if (qr.rank() < m && res.tail(m).lpNorm<Eigen::Infinity>() > opts.tol)
          throw std::runtime_error("redundant constraints");
      }
      out.iterations = it + 1;
      break;  // stagnation: report best iterate
    }
    x = x_new;
    res = res_new;
    rn = rn_new;
    out.iterations = it + 1;
  }
  out.converged = out.converged || rn < opts.tol;
  out.q = unpack_q(x);
  out.lambda = x.tail(m);
  out.residual = rn;
  return out;
}

// ---------------------------------------------------------------------------
// Dynamics

namespace {

struct RhsContext {
  const Linkage& lk;
  const DynamicOptions& opts;
  long* rhs_evals = nullptr;
};

VecX rhs_impl(const RhsContext& ctx, double t, VecX q, VecX qd, const VecX& u) {
  const Linkage& lk = ctx.lk;
  if (ctx.rhs_evals) ++(*ctx.rhs_evals);
  lk.apply_drives(t, q, qd);
  KinematicsOptions kopts;
  kopts.with_jdot = true;
  const KinematicsCache kin = compute_kinematics(lk, q, qd, kopts);
  const MatX M = generalized_mass(lk, kin);
  VecX rhs = generalized_external_force(lk, kin, t) - generalized_coriolis(lk, kin) -
             lk.D * qd - lk.K * q;
  if (lk.num_inputs() > 0 && u.size() > 0) rhs += actuation_matrix(lk, kin) * u;

  const std::vector<int> fi = free_indices(lk);
  const int nf = int(fi.size());
  const VecX qdd_presc = lk.drive_accel(t);

  VecX qdd = qdd_presc;  // prescribed entries; free entries overwritten below
  const int m = lk.num_constraints();
  // move the prescribed-acceleration coupling to the right-hand side
  VecX rhs_f(nf);
  MatX Mff(nf, nf);
  for (int i = 0; i < nf; ++i) {
    double c = rhs[fi[i]];
    for (int j = 0; j < lk.dof(); ++j)
      if (lk.prescribed[j]) c -= M(fi[i], j) * qdd_presc[j];
    rhs_f[i] = c;
    for (int j = 0; j < nf; ++j) Mff(i, j) = M(fi[i], fi[j]);
  }

  if (m == 0) {
    Eigen::LLT<MatX> llt(Mff);
    if (llt.info() != Eigen::Success) throw std::runtime_error("singular mass matrix");
    const VecX a = llt.solve(rhs_f);
    for (int i = 0; i < nf; ++i) qdd[fi[i]] = a[i];
    return qdd;
  }

  // Baumgarte-stabilized KKT system
  const ConstraintEval ce = eval_constraints(lk, kin);
  const VecX phidot = ce.A * qd;
  VecX adot_qd = VecX::Zero(m);
  if (qd.lpNorm<Eigen::Infinity>() > 0) {
    const double eps = 1e-7 * (1.0 + q.norm());
    const KinematicsCache kp = compute_kinematics(lk, q + eps * qd, VecX::Zero(lk.dof()));
    const KinematicsCache km = compute_kinematics(lk, q - eps * qd, VecX::Zero(lk.dof()));
    adot_qd = (eval_constraints(lk, kp).A - eval_constraints(lk, km).A) * qd / (2 * eps);
  }
  const double a_g = ctx.opts.baumgarte_alpha, b_g = ctx.opts.baumgarte_beta;
  VecX crhs = -adot_qd - 2.0 * a_g * phidot - b_g * b_g * ce.phi;
  for (int j = 0; j < lk.dof(); ++j)
    if (lk.prescribed[j]) crhs -= ce.A.col(j) * qdd_presc[j];

  MatX Af(m, nf);
  for (int i = 0; i < nf; ++i) Af.col(i) = ce.A.col(fi[i]);
  MatX kkt = MatX::Zero(nf + m, nf + m);
  kkt.topLeftCorner(nf, nf) = Mff;
  kkt.topRightCorner(nf, m) = Af.transpose();
  kkt.bottomLeftCorner(m, nf) = Af;
  VecX krhs(nf + m);
  krhs.head(nf) = rhs_f;
  krhs.tail(m) = crhs;
  // Rank-revealing solve: constraint rows may degenerate at singular
  // configurations (e.g. axial rows of an inextensible loop at reference).
  Eigen::CompleteOrthogonalDecomposition<MatX> cod(kkt);
  const VecX sol = cod.solve(krhs);
  if ((kkt * sol - krhs).norm() > 1e-6 * (1.0 + krhs.norm()))
    throw std::runtime_error("redundant constraints");
  for (int i = 0; i < nf; ++i) qdd[fi[i]] = sol[i];
  return qdd;
}

}  // namespace

VecX dynamics_rhs(const Linkage& lk, double t, const VecX& q_int, const VecX& qd_int,
                  const VecX& u, const DynamicOptions& opts) {
  RhsContext ctx{lk, opts, nullptr};
  return rhs_impl(ctx, t, q_int, qd_int, u);
}

namespace {

struct State {
  VecX q, qd;
};

State axpy(const State& y, double h, const State& f) {
  return {y.q + h * f.q, y.qd + h * f.qd};
}

}  // namespace

Trajectory simulate(const Linkage& lk, const VecX& q0_int, const VecX& qd0_int, InputFn input,
                    const DynamicOptions& opts) {
  Trajectory traj;
  const int n = lk.dof();
  State y{q0_int, qd0_int};
  double t = 0.0;
  lk.apply_drives(t, y.q, y.qd);

  RhsContext ctx{lk, opts, &traj.rhs_evals};
  auto deriv = [&](double tt, const State& s, const VecX& u) -> State {
    return {s.qd, rhs_impl(ctx, tt, s.q, s.qd, u)};
  };

  const VecX u0 = input ? input(t, y.q, y.qd) : VecX::Zero(lk.num_inputs());
  auto record = [&](double tt, const State& s, const VecX& u) {
    traj.t.push_back(tt);
    traj.q.push_back(s.q);
    traj.qd.push_back(s.qd);
    traj.u.push_back(u);
  };
  record(t, y, u0);
  double next_sample = opts.sample_dt;

  const double t_end = opts.t_end;
  double h = opts.adaptive ? std::min(opts.sample_dt, 1e-3) : opts.dt;
  double err_prev = 1.0;

  while (t < t_end - 1e-12 && traj.steps < opts.max_steps) {
    h = std::min(h, t_end - t);
    const VecX u = input ? input(t, y.q, y.qd) : VecX::Zero(lk.num_inputs());
    State y_new;
    double t_new = t;
    State f0 = deriv(t, y, u);
    if (!opts.adaptive) {
      const State k1 = f0;
      const State k2 = deriv(t + 0.5 * h, axpy(y, 0.5 * h, k1), u);
      const State k3 = deriv(t + 0.5 * h, axpy(y, 0.5 * h, k2), u);
      const State k4 = deriv(t + h, axpy(y, h, k3), u);
      y_new.q = y.q + h / 6.0 * (k1.q + 2 * k2.q + 2 * k3.q + k4.q);
      y_new.qd = y.qd + h / 6.0 * (k1.qd + 2 * k2.qd + 2 * k3.qd + k4.qd);
      t_new = t + h;
    } else {
      // Fehlberg 4(5) pair, advanced on the fifth-order solution
      bool accepted = false;
      while (!accepted) {
        if (h < 1e-12) throw std::runtime_error("stiff system, integration stalled");
        const State k1 = f0;
        const State k2 = deriv(t + h / 4, axpy(y, h / 4, k1), u);
        State s3 = y;
        s3.q += h * (3.0 / 32 * k1.q + 9.0 / 32 * k2.q);
        s3.qd += h * (3.0 / 32 * k1.qd + 9.0 / 32 * k2.qd);
        const State k3 = deriv(t + 3 * h / 8, s3, u);
        State s4 = y;
        s4.q += h * (1932.0 / 2197 * k1.q - 7200.0 / 2197 * k2.q + 7296.0 / 2197 * k3.q);
        s4.qd += h * (1932.0 / 2197 * k1.qd - 7200.0 / 2197 * k2.qd + 7296.0 / 2197 * k3.qd);
        const State k4 = deriv(t + 12 * h / 13, s4, u);
        State s5 = y;
        s5.q += h * (439.0 / 216 * k1.q - 8.0 * k2.q + 3680.0 / 513 * k3.q - 845.0 / 4104 * k4.q);
        s5.qd +=
            h * (439.0 / 216 * k1.qd - 8.0 * k2.qd + 3680.0 / 513 * k3.qd - 845.0 / 4104 * k4.qd);
        const State k5 = deriv(t + h, s5, u);
        State s6 = y;
        s6.q += h * (-8.0 / 27 * k1.q + 2.0 * k2.q - 3544.0 / 2565 * k3.q +
                     1859.0 / 4104 * k4.q - 11.0 / 40 * k5.q);
        s6.qd += h * (-8.0 / 27 * k1.qd + 2.0 * k2.qd - 3544.0 / 2565 * k3.qd +
                      1859.0 / 4104 * k4.qd - 11.0 / 40 * k5.qd);
        const State k6 = deriv(t + h / 2, s6, u);

        State y4, y5;
        y4.q = y.q + h * (25.0 / 216 * k1.q + 1408.0 / 2565 * k3.q + 2197.0 / 4104 * k4.q -
                          1.0 / 5 * k5.q);
        y4.qd = y.qd + h * (25.0 / 216 * k1.qd + 1408.0 / 2565 * k3.qd + 2197.0 / 4104 * k4.qd -
                            1.0 / 5 * k5.qd);
        y5.q = y.q + h * (16.0 / 135 * k1.q + 6656.0 / 12825 * k3.q + 28561.0 / 56430 * k4.q -
                          9.0 / 50 * k5.q + 2.0 / 55 * k6.q);
        y5.qd = y.qd + h * (16.0 / 135 * k1.qd + 6656.0 / 12825 * k3.qd +
                            28561.0 / 56430 * k4.qd - 9.0 / 50 * k5.qd + 2.0 / 55 * k6.qd);

        double err = 0.0;
        for (int i = 0; i < n; ++i) {
          const double sq = opts.atol + opts.rtol * std::max(std::abs(y.q[i]), std::abs(y5.q[i]));
          const double sd =
              opts.atol + opts.rtol * std::max(std::abs(y.qd[i]), std::abs(y5.qd[i]));
          err += std::pow((y5.q[i] - y4.q[i]) / sq, 2) + std::pow((y5.qd[i] - y4.qd[i]) / sd, 2);
        }
        err = std::sqrt(err / (2 * n));
        if (!std::isfinite(err)) {
          h *= 0.25;
          continue;
        }
        if (err <= 1.0) {
          accepted = true;
          y_new = y5;
          t_new = t + h;
          const double fac =
              0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
          err_prev = std::max(err, 1e-10);
          h *= std::clamp(fac, 0.2, 5.0);
        } else {
          h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
        }
      }
    }

    if (!y_new.q.allFinite() || !y_new.qd.allFinite()) {
      traj.aborted = true;
      traj.abort_reason = "non-finite state";
      break;
    }

    // dense output at the sample grid (cubic Hermite on the accepted step)
    while (next_sample <= t_new + 1e-12 && next_sample <= t_end + 1e-12) {
      const double s = (next_sample - t) / (t_new - t);
      if (s > 1.0 - 1e-12) {
        record(next_sample, y_new, u);
      } else {
        const State f1 = deriv(t_new, y_new, u);
        const double hstep = t_new - t;
        auto hermite = [&](const VecX& a, const VecX& da, const VecX& b, const VecX& db) {
          const double s2 = s * s, s3 = s2 * s;
          return VecX((2 * s3 - 3 * s2 + 1) * a + (s3 - 2 * s2 + s) * hstep * da +
                      (-2 * s3 + 3 * s2) * b + (s3 - s2) * hstep * db);
        };
        State ys;
        ys.q = hermite(y.q, f0.q, y_new.q, f1.q);
        ys.qd = hermite(y.qd, f0.qd, y_new.qd, f1.qd);
        record(next_sample, ys, u);
      }
      next_sample += opts.sample_dt;
    }

    t = t_new;
    y = y_new;
    lk.apply_drives(t, y.q, y.qd);
    lk.rebase_joint_coordinates(y.q, y.qd);
    ++traj.steps;
  }
  return traj;
}

}  // namespace strand
