#include "strandsim/linkage.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "strandsim/kinematics.hpp"
#include "strandsim/quadrature.hpp"

namespace strand {

RigidBody RigidBody::uniform_rod(double mass, double length) {
  RigidBody b;
  b.mass = mass;
  b.length = length;
  b.com = Pose::Translation({0.5 * length, 0, 0});
  b.tip = Pose::Translation({length, 0, 0});
  const double it = mass * length * length / 12.0;
  Vec6 d;
  d << 0, it, it, mass, mass, mass;
  b.inertia = d.asDiagonal();
  return b;
}

RigidBody RigidBody::box(double mass, const Vec3& dims) {
  RigidBody b;
  b.mass = mass;
  b.length = dims.x();
  b.com = Pose::Translation({0.5 * dims.x(), 0, 0});
  b.tip = Pose::Translation({dims.x(), 0, 0});
  Vec6 d;
  d << mass / 12.0 * (dims.y() * dims.y() + dims.z() * dims.z()),
      mass / 12.0 * (dims.x() * dims.x() + dims.z() * dims.z()),
      mass / 12.0 * (dims.x() * dims.x() + dims.y() * dims.y()), mass, mass, mass;
  b.inertia = d.asDiagonal();
  return b;
}

RigidBody RigidBody::solid_sphere(double mass, double radius) {
  RigidBody b;
  b.mass = mass;
  b.length = 0.0;
  const double i = 0.4 * mass * radius * radius;
  Vec6 d;
  d << i, i, i, mass, mass, mass;
  b.inertia = d.asDiagonal();
  return b;
}

RigidBody RigidBody::disk(double mass, double radius, double thickness) {
  RigidBody b;
  b.mass = mass;
  b.length = thickness;
  b.com = Pose::Translation({0.5 * thickness, 0, 0});
  b.tip = Pose::Translation({thickness, 0, 0});
  const double ax = 0.5 * mass * radius * radius;
  const double tr = mass * (3 * radius * radius + thickness * thickness) / 12.0;
  Vec6 d;
  d << ax, tr, tr, mass, mass, mass;
  b.inertia = d.asDiagonal();
  return b;
}

double CompiledCable::path_y(double X) const {
  double v = 0, p = 1;
  for (int k = 0; k < y_coeffs.size(); ++k, p *= X) v += y_coeffs[k] * p;
  return v;
}

double CompiledCable::path_z(double X) const {
  double v = 0, p = 1;
  for (int k = 0; k < z_coeffs.size(); ++k, p *= X) v += z_coeffs[k] * p;
  return v;
}

double CompiledCable::path_dy(double X) const {
  double v = 0, p = 1;
  for (int k = 1; k < y_coeffs.size(); ++k, p *= X) v += k * y_coeffs[k] * p;
  return v;
}

double CompiledCable::path_dz(double X) const {
  double v = 0, p = 1;
  for (int k = 1; k < z_coeffs.size(); ++k, p *= X) v += k * z_coeffs[k] * p;
  return v;
}

// ---------------------------------------------------------------------------
// Linkage queries

int Linkage::num_constraints() const {
  int m = 0;
  for (const auto& c : closures) m += c.rows;
  return m;
}

int Linkage::num_free() const {
  int n = 0;
  for (bool p : prescribed)
    if (!p) ++n;
  return n;
}

int Linkage::link_index(const std::string& name) const {
  for (int i = 0; i < int(links.size()); ++i)
    if (links[i].name == name) return i;
  return -1;
}

int Linkage::tip_point(int link) const {
  const CompiledLink& lk = links.at(link);
  if (!lk.soft) return lk.tip_point;
  return lk.divisions.back().stations.back();
}

MatX Linkage::stiffness_physical() const {
  return coord_scale.asDiagonal() * K * coord_scale.asDiagonal();
}

MatX Linkage::damping_physical() const {
  return coord_scale.asDiagonal() * D * coord_scale.asDiagonal();
}

Vec6 Linkage::strain(int link, int division, double X, const VecX& q_int) const {
  const CompiledDivision& dv = links.at(link).divisions.at(division);
  const VecX q_loc = q_int.segment(dv.q_start, dv.q_count) / dv.coord_scale;
  return dv.basis.eval(X) * q_loc + dv.basis.reference(X);
}

void Linkage::apply_drives(double t, VecX& q, VecX& qd) const {
  for (const auto& [idx, prof] : drives) {
    q[idx] = prof.value(t);
    qd[idx] = prof.rate(t);
  }
}

VecX Linkage::drive_accel(double t) const {
  VecX a = VecX::Zero(ndof);
  for (const auto& [idx, prof] : drives) a[idx] = prof.accel(t);
  return a;
}

bool Linkage::rebase_joint_coordinates(VecX& q, VecX& qd) const {
  bool changed = false;
  for (const auto& lk : links) {
    const CompiledJoint& j = lk.joint;
    if (!j.spec.rebasable() || j.spec.control == JointControl::Coordinate) continue;
    const double angle = q.segment(j.q_start, 3).norm();
    if (angle <= M_PI + 0.1) continue;
    if (j.spec.kind == JointKind::Free) {
      const Vec6 w = q.segment<6>(j.q_start);
      const Vec6 w_new = log_se3(exp_se3(w));
      const Vec6 eta_rel = dexp_unchecked(w) * qd.segment<6>(j.q_start);
      q.segment<6>(j.q_start) = w_new;
      qd.segment<6>(j.q_start) = dexp_unchecked(w_new).partialPivLu().solve(eta_rel);
    } else {  // spherical
      const Vec3 w = q.segment<3>(j.q_start);
      const Vec3 w_new = (1.0 - 2.0 * M_PI / angle) * w;
      Vec6 tw = Vec6::Zero(), tw_new = Vec6::Zero();
      tw.head<3>() = w;
      tw_new.head<3>() = w_new;
      const Mat3 Jr = dexp_unchecked(tw).topLeftCorner<3, 3>();
      const Mat3 Jr_new = dexp_unchecked(tw_new).topLeftCorner<3, 3>();
      const Vec3 om = Jr * qd.segment<3>(j.q_start);
      q.segment<3>(j.q_start) = w_new;
      qd.segment<3>(j.q_start) = Jr_new.partialPivLu().solve(om);
    }
    changed = true;
  }
  return changed;
}

VecX Linkage::input_lower() const {
  VecX lo(num_inputs());
  for (int i = 0; i < num_inputs(); ++i) lo[i] = inputs[i].u_min;
  return lo;
}

VecX Linkage::input_upper() const {
  VecX hi(num_inputs());
  for (int i = 0; i < num_inputs(); ++i) hi[i] = inputs[i].u_max;
  return hi;
}

// ---------------------------------------------------------------------------
// Builder

int LinkageBuilder::check_parent(int parent) const {
  if (parent < -1 || parent >= int(links_.size()))
    throw std::invalid_argument("unknown parent link");
  return parent;
}

void LinkageBuilder::check_name(const std::string& name) const {
  if (name.empty()) throw std::invalid_argument("link name must not be empty");
  for (const auto& l : links_)
    if (l.name == name) throw std::invalid_argument("duplicate link name '" + name + "'");
}

int LinkageBuilder::add_rigid_link(const std::string& name, int parent, const Joint& joint,
                                   const RigidBody& body, const Pose& mount) {
  check_parent(parent);
  check_name(name);
  CompiledLink lk;
  lk.name = name;
  lk.parent = parent;
  lk.mount = mount;
  lk.joint.spec = joint;
  lk.joint.phi = joint.screw_basis();
  lk.joint.q_start = ndof_;
  lk.joint.q_count = joint.dof();
  ndof_ += joint.dof();
  lk.soft = false;
  lk.body = body;
  links_.push_back(std::move(lk));
  return int(links_.size()) - 1;
}

int LinkageBuilder::add_soft_link(const std::string& name, int parent, const Joint& joint,
                                  std::vector<SoftDivision> divisions, const Pose& mount) {
  check_parent(parent);
  check_name(name);
  if (divisions.empty()) throw std::invalid_argument("empty division list");
  CompiledLink lk;
  lk.name = name;
  lk.parent = parent;
  lk.mount = mount;
  lk.joint.spec = joint;
  lk.joint.phi = joint.screw_basis();
  lk.joint.q_start = ndof_;
  lk.joint.q_count = joint.dof();
  ndof_ += joint.dof();
  lk.soft = true;
  for (const auto& dv : divisions) {
    if (dv.length <= 0) throw std::invalid_argument("division length must be positive");
    if (dv.gauss_order < dv.basis.max_order() + 2)
      throw std::invalid_argument("gauss order must be >= basis order + 2");
    CompiledDivision cd;
    cd.length = dv.length;
    cd.section = dv.section;
    cd.material = dv.material;
    cd.basis = dv.basis;
    cd.shear = dv.shear;
    cd.stiffness_override = dv.stiffness_override;
    cd.gauss_order = dv.gauss_order;
    cd.q_start = ndof_;
    cd.q_count = dv.basis.dof();
    cd.coord_scale = normalize_lengths_ ? dv.length : 1.0;
    ndof_ += cd.q_count;
    lk.divisions.push_back(std::move(cd));
  }
  links_.push_back(std::move(lk));
  return int(links_.size()) - 1;
}

int LinkageBuilder::add_loop_closure(int link_a, double X_a, int link_b, double X_b,
                                     JointKind joint, const Pose& offset_a,
                                     const Pose& offset_b) {
  if (link_a < 0 || link_a >= int(links_.size())) throw std::invalid_argument("unknown link");
  if (link_b >= int(links_.size())) throw std::invalid_argument("unknown link");
  if (link_a == link_b && std::abs(X_a - X_b) < 1e-12)
    throw std::invalid_argument("closure between a link and itself at the same point");
  PendingClosure pc;
  pc.c.link_a = link_a;
  pc.c.link_b = link_b;
  pc.c.offset_a = offset_a;
  pc.c.offset_b = offset_b;
  pc.c.joint = joint;
  pc.X_a = X_a;
  pc.X_b = X_b;
  // constrained directions = orthonormal complement of the loop joint screws
  Joint j;
  j.kind = joint;
  const Mat6X phi = j.screw_basis();
  const int m = 6 - j.dof();
  if (j.dof() == 0) {
    pc.c.constrained_basis = MatX::Identity(6, 6);
  } else {
    Eigen::JacobiSVD<MatX> svd(phi, Eigen::ComputeFullU);
    pc.c.constrained_basis = svd.matrixU().rightCols(m);
  }
  pc.c.rows = m;
  closures_.push_back(std::move(pc));
  return int(closures_.size()) - 1;
}

void LinkageBuilder::add_cable(const std::string& name, int link, double X0, double X1,
                               const VecX& y_coeffs, const VecX& z_coeffs, double u_max,
                               const std::string& input, bool containment_strict) {
  if (link < 0 || link >= int(links_.size()) || !links_[link].soft)
    throw std::invalid_argument("cable host must be a soft link");
  if (!(X0 >= 0 && X1 <= 1 && X0 < X1)) throw std::invalid_argument("invalid cable span");
  PendingCable pc;
  pc.c.name = name;
  pc.c.link = link;
  pc.c.X0 = X0;
  pc.c.X1 = X1;
  pc.c.y_coeffs = y_coeffs;
  pc.c.z_coeffs = z_coeffs;
  pc.c.u_max = u_max;
  pc.c.containment_strict = containment_strict;
  pc.input_name = input.empty() ? name : input;
  cables_.push_back(std::move(pc));
}

void LinkageBuilder::add_point_force(const std::string& name, int link, double X,
                                     const Vec6& wrench, bool follower, const Profile& profile) {
  if (link < 0 || link >= int(links_.size())) throw std::invalid_argument("unknown link");
  if (!wrench.allFinite()) throw std::invalid_argument("non-finite wrench");
  PendingForce pf;
  pf.f.name = name;
  pf.f.link = link;
  pf.f.X = X;
  pf.f.wrench = wrench;
  pf.f.follower = follower;
  pf.f.profile = profile;
  forces_.push_back(std::move(pf));
}

void LinkageBuilder::add_contact(const CompiledContact& spec,
                                 const std::vector<std::pair<int, double>>& proxy_locations) {
  if (spec.proxies.size() != proxy_locations.size())
    throw std::invalid_argument("proxy list size mismatch");
  for (const auto& p : spec.proxies)
    if (p.radius <= 0) throw std::invalid_argument("proxy radius must be positive");
  if (spec.target_radius <= 0) throw std::invalid_argument("target radius must be positive");
  if (spec.stiffness < 0 || spec.damping < 0)
    throw std::invalid_argument("contact gains must be nonnegative");
  contacts_.push_back({spec, proxy_locations});
}

void LinkageBuilder::add_custom_force(CustomForceFn fn) { custom_.push_back(std::move(fn)); }

void LinkageBuilder::set_drive(int link, int dof_index, const Profile& p) {
  const CompiledJoint& j = links_.at(link).joint;
  if (j.spec.control != JointControl::Coordinate)
    throw std::invalid_argument("drive on a joint that is not coordinate-controlled");
  if (dof_index < 0 || dof_index >= j.q_count) throw std::invalid_argument("bad drive index");
  drives_[j.q_start + dof_index] = p;
}

namespace {

// Locates the division and local abscissa for a link-normalized position.
std::pair<int, double> locate_division(const CompiledLink& lk, double X_link) {
  double total = 0;
  for (const auto& d : lk.divisions) total += d.length;
  const double s = std::clamp(X_link, 0.0, 1.0) * total;
  double acc = 0;
  for (int j = 0; j < int(lk.divisions.size()); ++j) {
    const double L = lk.divisions[j].length;
    if (s <= acc + L + 1e-15 || j + 1 == int(lk.divisions.size()))
      return {j, std::clamp((s - acc) / L, 0.0, 1.0)};
    acc += L;
  }
  return {0, 0.0};
}

}  // namespace

Linkage LinkageBuilder::finalize() {
  if (finalized_) throw std::logic_error("builder already finalized");
  if (links_.empty()) throw std::invalid_argument("linkage has no links");
  finalized_ = true;

  Linkage out;
  out.links = links_;
  out.custom_forces = custom_;
  out.drives = drives_;
  out.gravity = gravity_;
  out.ndof = ndof_;

  out.coord_scale = VecX::Ones(ndof_);
  out.prescribed.assign(ndof_, false);
  for (auto& lk : out.links) {
    if (lk.joint.spec.control == JointControl::Coordinate)
      for (int k = 0; k < lk.joint.q_count; ++k) out.prescribed[lk.joint.q_start + k] = true;
    for (auto& dv : lk.divisions)
      out.coord_scale.segment(dv.q_start, dv.q_count).setConstant(dv.coord_scale);
  }

  // Evaluation points: rigid CoM/tip, division stations.
  auto& pts = out.points;
  for (int li = 0; li < int(out.links.size()); ++li) {
    CompiledLink& lk = out.links[li];
    if (!lk.soft) {
      lk.com_point = int(pts.size());
      pts.push_back({li, -1, PointKind::RigidCom, 0, 0, 0, lk.body.com});
      lk.tip_point = int(pts.size());
      pts.push_back({li, -1, PointKind::RigidTip, 0, 0, 0, lk.body.tip});
      continue;
    }
    for (int di = 0; di < int(lk.divisions.size()); ++di) {
      CompiledDivision& dv = lk.divisions[di];
      const GaussRule rule = gauss_legendre(dv.gauss_order);
      dv.stations.push_back(int(pts.size()));
      pts.push_back({li, di, PointKind::DivisionStart, 0.0, 0.0, dv.length, {}});
      for (int k = 0; k < dv.gauss_order; ++k) {
        dv.stations.push_back(int(pts.size()));
        pts.push_back({li, di, PointKind::GaussNode, rule.nodes[k], rule.weights[k], dv.length, {}});
      }
      dv.stations.push_back(int(pts.size()));
      pts.push_back({li, di, PointKind::DivisionEnd, 1.0, 0.0, dv.length, {}});
    }
  }

  // Side points for forces, cables, contacts and closures.
  auto station_abscissa = [&](const CompiledDivision& dv, int k) {
    return out.points[dv.stations[k]].X;
  };
  auto make_point = [&](int li, double X_link, const Pose& extra) -> int {
    CompiledLink& lk = out.links[li];
    const bool plain = extra.isApprox(Pose::Identity(), 0.0);
    if (!lk.soft) {
      if (plain && std::abs(X_link - 1.0) < 1e-12) return lk.tip_point;
      Pose off = Pose::Translation(X_link * lk.body.tip.r);
      if (std::abs(X_link - 1.0) < 1e-12) off = lk.body.tip;
      pts.push_back({li, -1, PointKind::Extra, X_link, 0, 0, off * extra});
      return int(pts.size()) - 1;
    }
    auto [di, Xd] = locate_division(lk, X_link);
    CompiledDivision& dv = lk.divisions[di];
    if (plain) {
      for (int k = 0; k < int(dv.stations.size()); ++k)
        if (std::abs(station_abscissa(dv, k) - Xd) < 1e-12) return dv.stations[k];
    }
    int anchor = 0;
    for (int k = 0; k < int(dv.stations.size()); ++k)
      if (station_abscissa(dv, k) <= Xd + 1e-15) anchor = k;
    pts.push_back({li, di, PointKind::Extra, Xd, 0, dv.length, extra});
    dv.side_points.push_back({Xd, anchor, int(pts.size()) - 1});
    return int(pts.size()) - 1;
  };

  for (auto& pf : forces_) {
    pf.f.point = make_point(pf.f.link, pf.f.X, Pose::Identity());
    out.forces.push_back(pf.f);
  }

  // Actuation channels: wrench-controlled joints first, then cables.
  for (int li = 0; li < int(out.links.size()); ++li) {
    const CompiledJoint& j = out.links[li].joint;
    if (j.spec.control != JointControl::Wrench) continue;
    for (int k = 0; k < j.q_count; ++k) {
      InputChannel ch;
      ch.kind = InputChannel::Kind::JointWrench;
      ch.name = out.links[li].name + ":" + std::to_string(k);
      ch.u_min = -1e30;
      ch.u_max = 1e30;
      ch.joint_link = li;
      ch.joint_axis = k;
      out.inputs.push_back(ch);
    }
  }
  for (auto& pc : cables_) {
    int channel = -1;
    for (int i = 0; i < int(out.inputs.size()); ++i)
      if (out.inputs[i].kind == InputChannel::Kind::Cable && out.inputs[i].name == pc.input_name)
        channel = i;
    if (channel < 0) {
      InputChannel ch;
      ch.kind = InputChannel::Kind::Cable;
      ch.name = pc.input_name;
      ch.u_min = 0.0;
      ch.u_max = pc.c.u_max;
      channel = int(out.inputs.size());
      out.inputs.push_back(ch);
    } else {
      out.inputs[channel].u_max = std::min(out.inputs[channel].u_max, pc.c.u_max);
    }
    pc.c.input = channel;

    // Quadrature nodes of the span, division by division.
    CompiledLink& lk = out.links[pc.c.link];
    double total = 0;
    for (const auto& d : lk.divisions) total += d.length;
    double acc = 0;
    for (int di = 0; di < int(lk.divisions.size()); ++di) {
      CompiledDivision& dv = lk.divisions[di];
      const double a_link = acc / total, b_link = (acc + dv.length) / total;
      acc += dv.length;
      const double lo = std::max(pc.c.X0, a_link), hi = std::min(pc.c.X1, b_link);
      if (hi - lo < 1e-12) continue;
      const double lo_d = (lo - a_link) / (b_link - a_link);
      const double hi_d = (hi - a_link) / (b_link - a_link);
      const GaussRule rule = gauss_legendre(dv.gauss_order);
      for (int k = 0; k < dv.gauss_order; ++k) {
        CompiledCable::Node nd;
        nd.division = di;
        nd.X_div = lo_d + rule.nodes[k] * (hi_d - lo_d);
        nd.X_link = lo + rule.nodes[k] * (hi - lo);
        nd.weight_phys = rule.weights[k] * (hi_d - lo_d) * dv.length;
        nd.point = make_point(pc.c.link, nd.X_link, Pose::Identity());
        pc.c.nodes.push_back(nd);
      }
    }
    // path must stay inside the section at every node; guided cables that
    // run outside thin flexure sections downgrade this to a warning
    for (const auto& nd : pc.c.nodes) {
      const CompiledDivision& dv = lk.divisions[nd.division];
      if (!dv.section.contains(nd.X_div, pc.c.path_y(nd.X_link), pc.c.path_z(nd.X_link))) {
        if (pc.c.containment_strict)
          throw std::invalid_argument("cable path outside the cross-section");
        warnings_.push_back("cable '" + pc.c.name + "' runs outside the section near X=" +
                            std::to_string(nd.X_link));
        break;
      }
    }
    out.cables.push_back(pc.c);
  }

  for (auto& pcn : contacts_) {
    CompiledContact cc = pcn.contact;
    for (int i = 0; i < int(cc.proxies.size()); ++i) {
      cc.proxies[i].link = pcn.proxy_loc[i].first;
      cc.proxies[i].point = make_point(pcn.proxy_loc[i].first, pcn.proxy_loc[i].second, {});
    }
    if (cc.target_link >= 0) {
      const CompiledLink& tl = out.links[cc.target_link];
      cc.target_point = tl.soft ? out.tip_point(cc.target_link) : tl.com_point;
    }
    out.contacts.push_back(cc);
  }

  int row = 0;
  for (auto& pcl : closures_) {
    CompiledClosure cc = pcl.c;
    cc.point_a = make_point(cc.link_a, pcl.X_a, cc.offset_a);
    if (cc.link_b >= 0) cc.point_b = make_point(cc.link_b, pcl.X_b, cc.offset_b);
    cc.row_start = row;
    row += cc.rows;
    out.closures.push_back(cc);
  }

  // Generalized stiffness and damping: exact Gauss quadrature of the
  // polynomial-times-section integrands, plus lumped joint springs.
  out.K = MatX::Zero(ndof_, ndof_);
  out.D = MatX::Zero(ndof_, ndof_);
  for (const auto& lk : out.links) {
    const CompiledJoint& j = lk.joint;
    for (int k = 0; k < int(j.spec.spring_stiffness.size()) && k < j.q_count; ++k)
      out.K(j.q_start + k, j.q_start + k) += j.spec.spring_stiffness[k];
    for (const auto& dv : lk.divisions) {
      const int order = std::max(dv.gauss_order, dv.basis.max_order() + 3) + 2;
      const GaussRule rule = gauss_legendre(order);
      const double s = dv.length / (dv.coord_scale * dv.coord_scale);
      MatX Kb = MatX::Zero(dv.q_count, dv.q_count);
      MatX Db = MatX::Zero(dv.q_count, dv.q_count);
      for (int k = 0; k < order; ++k) {
        const double X = rule.nodes[k];
        const Mat6X phi = dv.basis.eval(X);
        Mat6 sigma = screw_stiffness(dv.section, dv.material, X, dv.shear);
        if (dv.stiffness_override) sigma = dv.stiffness_override(X, sigma);
        const Mat6 upsilon =
            dv.material.viscous_modulus == 0.0
                ? Mat6::Zero()
                : (dv.material.viscous_modulus / dv.material.youngs_modulus * sigma).eval();
        Kb += rule.weights[k] * s * phi.transpose() * sigma * phi;
        Db += rule.weights[k] * s * phi.transpose() * upsilon * phi;
      }
      out.K.block(dv.q_start, dv.q_start, dv.q_count, dv.q_count) = Kb;
      out.D.block(dv.q_start, dv.q_start, dv.q_count, dv.q_count) = Db;
    }
  }

  // Reference relative poses of the closures, from the q = 0 configuration.
  if (!out.closures.empty()) {
    const std::vector<Pose> g0 = forward_kinematics(out, VecX::Zero(ndof_));
    for (auto& cc : out.closures) {
      const Pose ga = g0[cc.point_a];
      if (cc.link_b < 0) {
        cc.world_b = ga;
        cc.ref_rel = Pose::Identity();
      } else {
        cc.ref_rel = ga.inverse() * g0[cc.point_b];
      }
    }
  }
  return out;
}

}  // namespace strand
