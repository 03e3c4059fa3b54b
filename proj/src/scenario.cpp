#include "strandsim/scenario.hpp"

#include <json.hpp>

#include <Eigen/Dense>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

namespace strand {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ScenarioError(msg); }

// line/column of a byte offset, for parse errors
std::pair<int, int> line_col(const std::string& text, size_t byte) {
  int line = 1, col = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

struct KeyChecker {
  bool strict;
  std::vector<std::string>* warnings;
  void operator()(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) const {
    if (!obj.is_object()) return;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (allowed.count(it.key())) continue;
      const std::string msg = "unknown key '" + it.key() + "' in " + where;
      if (strict) fail(msg);
      warnings->push_back(msg);
    }
  }
};

double num(const json& j, const std::string& key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) fail("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Vec6 vec6(const json& j) {
  if (!j.is_array() || j.size() != 6) fail("expected a 6-vector");
  Vec6 v;
  for (int i = 0; i < 6; ++i) v[i] = j[i].get<double>();
  return v;
}

VecX vecx(const json& j) {
  VecX v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

Pose pose_of(const json& j, const KeyChecker& check, const std::string& where) {
  Pose p;
  if (j.is_null()) return p;
  check(j, where, {"xyz", "rpy"});
  if (j.contains("xyz")) p.r = vec3(j.at("xyz"));
  if (j.contains("rpy")) {
    const Vec3 e = vec3(j.at("rpy"));
    p.R = (Eigen::AngleAxisd(e[2], Vec3::UnitZ()) * Eigen::AngleAxisd(e[1], Vec3::UnitY()) *
           Eigen::AngleAxisd(e[0], Vec3::UnitX()))
              .toRotationMatrix();
  }
  return p;
}

Profile profile_of(const json& j, const KeyChecker& check) {
  if (j.is_number()) return Profile::constant(j.get<double>());
  check(j, "profile",
        {"kind", "value", "from", "to", "t0", "t1", "t_peak", "peak", "offset", "amp", "freq"});
  const std::string kind = j.value("kind", "constant");
  if (kind == "constant") return Profile::constant(num(j, "value", 0.0));
  if (kind == "ramp")
    return Profile::ramp(num(j, "from", 0), num(j, "to", 0), num(j, "t0", 0), num(j, "t1", 1));
  if (kind == "smooth")
    return Profile::smooth(num(j, "from", 0), num(j, "to", 0), num(j, "t0", 0), num(j, "t1", 1));
  if (kind == "triangle")
    return Profile::triangle(num(j, "peak", 0), num(j, "t0", 0), num(j, "t_peak", 0.5),
                             num(j, "t1", 1));
  if (kind == "sine")
    return Profile::sine(num(j, "offset", 0), num(j, "amp", 0), num(j, "freq", 1),
                         num(j, "t0", 0));
  fail("unknown profile kind '" + kind + "'");
}

int mode_index(const std::string& name) {
  if (name == "torsion_x") return kTorsionX;
  if (name == "bending_y") return kBendingY;
  if (name == "bending_z") return kBendingZ;
  if (name == "elongation_x") return kElongationX;
  if (name == "shear_y") return kShearY;
  if (name == "shear_z") return kShearZ;
  fail("unknown deformation mode '" + name + "'");
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

struct Scenario::Impl {
  json doc;
  bool strict = false;

  // resolved library objects
  std::map<std::string, Material> materials;
  std::map<std::string, CrossSection> sections;

  // optimization rebuild support: design substitutions by path
  Linkage build(const std::map<std::string, double>& design,
                std::vector<std::string>* warnings) const;
};

namespace {

struct HookSpec {
  std::string name;
  std::vector<std::string> links;
  double coefficient = 0.0;
};

CustomForceFn make_hook(const HookSpec& spec, const std::vector<int>& link_ids) {
  if (spec.name == "quadratic_drag") {
    const double c = spec.coefficient;
    return [c, link_ids](double, const Linkage& lk, const KinematicsCache& kin, VecX& F) {
      for (size_t pi = 0; pi < lk.points.size(); ++pi) {
        const EvalPoint& ep = lk.points[pi];
        if (ep.kind != PointKind::GaussNode) continue;
        if (std::find(link_ids.begin(), link_ids.end(), ep.link) == link_ids.end()) continue;
        const Vec3 v = kin.points[pi].eta.tail<3>();
        Vec6 w = Vec6::Zero();
        w.tail<3>() = -c * v.norm() * v;
        F.noalias() += (ep.weight * ep.arc_scale) * kin.points[pi].J.transpose() * w;
      }
    };
  }
  fail("unknown custom force hook '" + spec.name + "'");
}

}  // namespace

Linkage Scenario::Impl::build(const std::map<std::string, double>& design,
                              std::vector<std::string>* warnings) const {
  std::vector<std::string> scratch;
  KeyChecker check{strict, warnings ? warnings : &scratch};
  LinkageBuilder builder(true);

  std::map<std::string, int> link_ids;
  auto resolve_link = [&](const std::string& name) -> int {
    if (name == "ground") return -1;
    auto it = link_ids.find(name);
    if (it == link_ids.end()) fail("unknown link '" + name + "'");
    return it->second;
  };

  if (doc.contains("gravity")) builder.set_gravity(vec3(doc.at("gravity")));

  for (const auto& jl : doc.value("links", json::array())) {
    check(jl, "link",
          {"name", "parent", "mount", "joint", "rigid", "soft"});
    const std::string name = jl.at("name").get<std::string>();
    const int parent = resolve_link(jl.value("parent", "ground"));
    const Pose mount = pose_of(jl.value("mount", json()), check, "mount");

    Joint joint;
    std::vector<Profile> drives;
    if (jl.contains("joint")) {
      const json& jj = jl.at("joint");
      check(jj, "joint", {"kind", "axis", "axis2", "pitch", "stiffness", "control", "drive"});
      joint.kind = joint_kind_from_name(jj.value("kind", "fixed"));
      if (jj.contains("axis")) joint.axis = vec3(jj.at("axis"));
      if (jj.contains("axis2")) joint.axis2 = vec3(jj.at("axis2"));
      joint.pitch = num(jj, "pitch", 0.0);
      if (jj.contains("stiffness")) joint.spring_stiffness = vecx(jj.at("stiffness"));
      const std::string ctrl = jj.value("control", "passive");
      if (ctrl == "passive")
        joint.control = JointControl::Passive;
      else if (ctrl == "coordinate")
        joint.control = JointControl::Coordinate;
      else if (ctrl == "wrench")
        joint.control = JointControl::Wrench;
      else
        fail("unknown joint control mode '" + ctrl + "'");
      if (jj.contains("drive"))
        for (const auto& jd : jj.at("drive")) drives.push_back(profile_of(jd, check));
    }

    int id = -1;
    if (jl.contains("rigid")) {
      const json& jr = jl.at("rigid");
      check(jr, "rigid",
            {"shape", "mass", "length", "radius", "dims", "thickness", "com", "tip", "inertia",
             "screw_inertia"});
      RigidBody body;
      const std::string shape = jr.value("shape", "rod");
      const double mass = num(jr, "mass", 0.0);
      if (shape == "rod")
        body = RigidBody::uniform_rod(mass, num(jr, "length", 0.0));
      else if (shape == "box")
        body = RigidBody::box(mass, vec3(jr.at("dims")));
      else if (shape == "sphere")
        body = RigidBody::solid_sphere(mass, num(jr, "radius", 0.0));
      else if (shape == "disk")
        body = RigidBody::disk(mass, num(jr, "radius", 0.0), num(jr, "thickness", 0.0));
      else
        fail("unknown rigid shape '" + shape + "'");
      if (jr.contains("com")) body.com = pose_of(jr.at("com"), check, "com");
      if (jr.contains("tip")) body.tip = pose_of(jr.at("tip"), check, "tip");
      if (jr.contains("inertia")) {
        const Vec3 d = vec3(jr.at("inertia"));
        Vec6 diag;
        diag << d[0], d[1], d[2], mass, mass, mass;
        body.inertia = diag.asDiagonal();
      }
      if (jr.contains("screw_inertia")) {
        const VecX m = vecx(jr.at("screw_inertia"));
        if (m.size() != 36) fail("screw_inertia needs 36 entries");
        body.inertia = Eigen::Map<const Eigen::Matrix<double, 6, 6, Eigen::RowMajor>>(m.data());
      }
      id = builder.add_rigid_link(name, parent, joint, body, mount);
    } else if (jl.contains("soft")) {
      const json& js = jl.at("soft");
      check(js, "soft", {"divisions"});
      std::vector<SoftDivision> divisions;
      for (const auto& jd : js.at("divisions")) {
        check(jd, "division",
              {"length", "section", "material", "gauss", "modes", "ref_strain", "shear_ky",
               "shear_kz"});
        SoftDivision dv;
        dv.length = jd.at("length").get<double>();
        const std::string sec = jd.at("section").get<std::string>();
        if (!sections.count(sec)) fail("unknown section '" + sec + "'");
        dv.section = sections.at(sec);
        const std::string mat = jd.at("material").get<std::string>();
        if (!materials.count(mat)) fail("unknown material '" + mat + "'");
        dv.material = materials.at(mat);
        dv.basis.order.fill(-1);
        for (auto it = jd.at("modes").begin(); it != jd.at("modes").end(); ++it)
          dv.basis.enable(mode_index(it.key()), it.value().get<int>());
        if (jd.contains("ref_strain")) dv.basis.ref_strain = vec6(jd.at("ref_strain"));
        dv.gauss_order = int(num(jd, "gauss", 5));
        dv.shear.ky = num(jd, "shear_ky", 1.0);
        dv.shear.kz = num(jd, "shear_kz", 1.0);
        divisions.push_back(std::move(dv));
      }
      id = builder.add_soft_link(name, parent, joint, std::move(divisions), mount);
    } else {
      fail("link '" + name + "' is neither rigid nor soft");
    }
    for (int k = 0; k < int(drives.size()); ++k) builder.set_drive(id, k, drives[k]);
    link_ids[name] = id;
  }

  for (const auto& jc : doc.value("closures", json::array())) {
    check(jc, "closure", {"link_a", "X_a", "link_b", "X_b", "joint", "offset_a", "offset_b"});
    builder.add_loop_closure(resolve_link(jc.at("link_a").get<std::string>()),
                             num(jc, "X_a", 1.0),
                             resolve_link(jc.value("link_b", "ground")), num(jc, "X_b", 0.0),
                             joint_kind_from_name(jc.value("joint", "fixed")),
                             pose_of(jc.value("offset_a", json()), check, "offset_a"),
                             pose_of(jc.value("offset_b", json()), check, "offset_b"));
  }

  for (const auto& jc : doc.value("cables", json::array())) {
    check(jc, "cable", {"name", "link", "span", "y", "z", "max_tension", "input", "containment"});
    const std::string cname = jc.at("name").get<std::string>();
    VecX y = vecx(jc.at("y"));
    VecX z = vecx(jc.at("z"));
    for (int k = 0; k < y.size(); ++k) {
      auto it = design.find("cable:" + cname + ":y:" + std::to_string(k));
      if (it != design.end()) y[k] = it->second;
    }
    for (int k = 0; k < z.size(); ++k) {
      auto it = design.find("cable:" + cname + ":z:" + std::to_string(k));
      if (it != design.end()) z[k] = it->second;
    }
    const json& span = jc.at("span");
    builder.add_cable(cname, resolve_link(jc.at("link").get<std::string>()),
                      span[0].get<double>(), span[1].get<double>(), y, z,
                      num(jc, "max_tension", 1e30), jc.value("input", ""),
                      jc.value("containment", "strict") != "warn");
  }

  for (const auto& jf : doc.value("forces", json::array())) {
    check(jf, "force", {"name", "link", "X", "wrench", "frame", "profile"});
    const std::string frame = jf.value("frame", "follower");
    if (frame != "follower" && frame != "dead") fail("unknown force frame '" + frame + "'");
    builder.add_point_force(jf.at("name").get<std::string>(),
                            resolve_link(jf.at("link").get<std::string>()), num(jf, "X", 1.0),
                            vec6(jf.at("wrench")), frame == "follower",
                            jf.contains("profile") ? profile_of(jf.at("profile"), check)
                                                   : Profile::constant(1.0));
  }

  // probe side points for the optimization objective
  if (doc.contains("optimize")) {
    const json& jo = doc.at("optimize");
    const int link = resolve_link(jo.at("link").get<std::string>());
    builder.add_point_force("_probe_mid", link, num(jo, "mid_X", 0.5), Vec6::Zero(), true,
                            Profile::constant(0.0));
    builder.add_point_force("_probe_end", link, num(jo, "end_X", 1.0), Vec6::Zero(), true,
                            Profile::constant(0.0));
  }

  for (const auto& jc : doc.value("contacts", json::array())) {
    check(jc, "contact", {"stiffness", "damping", "proxies", "target"});
    CompiledContact spec;
    spec.stiffness = jc.at("stiffness").get<double>();
    spec.damping = num(jc, "damping", 0.0);
    std::vector<std::pair<int, double>> locations;
    for (const auto& jp : jc.at("proxies")) {
      check(jp, "proxy", {"link", "X", "radius"});
      spec.proxies.push_back({-1, -1, jp.at("radius").get<double>()});
      locations.push_back({resolve_link(jp.at("link").get<std::string>()), num(jp, "X", 0.5)});
    }
    const json& jt = jc.at("target");
    check(jt, "contact target", {"link", "center", "radius"});
    spec.target_radius = jt.at("radius").get<double>();
    if (jt.contains("link"))
      spec.target_link = resolve_link(jt.at("link").get<std::string>());
    else
      spec.target_center = vec3(jt.at("center"));
    builder.add_contact(spec, locations);
  }

  for (const auto& jh : doc.value("custom_forces", json::array())) {
    check(jh, "custom force", {"hook", "links", "coefficient"});
    HookSpec hs;
    hs.name = jh.at("hook").get<std::string>();
    hs.coefficient = num(jh, "coefficient", 0.0);
    std::vector<int> ids;
    for (const auto& jl : jh.value("links", json::array()))
      ids.push_back(resolve_link(jl.get<std::string>()));
    builder.add_custom_force(make_hook(hs, ids));
  }

  Linkage lk = builder.finalize();
  if (warnings)
    for (const auto& w : builder.build_warnings()) warnings->push_back(w);

  // design substitution of plain input efforts is handled by callers (they
  // own the u vector); verify the referenced channels exist
  for (const auto& [path, value] : design) {
    (void)value;
    if (path.rfind("input:", 0) == 0) {
      const std::string ch = path.substr(6);
      bool found = false;
      for (const auto& in : lk.inputs) found = found || in.name == ch;
      if (!found) fail("design variable references unknown input '" + ch + "'");
    }
  }
  return lk;
}

Scenario Scenario::load(const std::filesystem::path& file, bool strict) {
  std::ifstream in(file);
  if (!in) fail("cannot open scenario file '" + file.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), strict);
}

Scenario Scenario::parse(const std::string& text, bool strict) {
  Scenario sc;
  auto impl = std::make_shared<Impl>();
  impl->strict = strict;
  try {
    impl->doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte);
    fail("syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) +
         ": " + e.what());
  }
  const json& doc = impl->doc;
  KeyChecker check{strict, &sc.warnings_};
  check(doc, "scenario",
        {"name", "gravity", "materials", "sections", "links", "closures", "cables", "forces",
         "contacts", "custom_forces", "initial", "static", "dynamic", "control", "optimize"});

  sc.name_ = doc.value("name", "scenario");

  const json jmats = doc.value("materials", json::object());
  for (auto it = jmats.begin(); it != jmats.end(); ++it) {
    const json& jm = it.value();
    check(jm, "material '" + it.key() + "'", {"E", "nu", "rho", "eta"});
    Material m;
    m.youngs_modulus = jm.at("E").get<double>();
    m.poisson_ratio = num(jm, "nu", 0.0);
    m.density = num(jm, "rho", 0.0);
    m.viscous_modulus = num(jm, "eta", 0.0);
    if (m.youngs_modulus < 1e3)
      sc.warnings_.push_back("material '" + it.key() + "' has suspicious E < 1e3 Pa");
    if (m.poisson_ratio <= -1.0 || m.poisson_ratio > 0.5)
      fail("material '" + it.key() + "' has invalid Poisson ratio");
    impl->materials[it.key()] = m;
  }

  const json jsecs = doc.value("sections", json::object());
  for (auto it = jsecs.begin(); it != jsecs.end(); ++it) {
    const json& js = it.value();
    check(js, "section '" + it.key() + "'",
          {"kind", "radius", "width", "height", "semi_y", "semi_z"});
    const std::string kind = js.value("kind", "circular");
    auto ends = [&](const std::string& key) -> std::pair<double, double> {
      const json& v = js.at(key);
      if (v.is_number()) return {v.get<double>(), v.get<double>()};
      return {v[0].get<double>(), v[1].get<double>()};
    };
    CrossSection cs;
    if (kind == "circular") {
      auto [a, b] = ends("radius");
      cs = CrossSection::circular(a, b);
    } else if (kind == "rectangular") {
      auto [w0, w1] = ends("width");
      auto [h0, h1] = ends("height");
      cs = CrossSection::rectangular(w0, h0, w1, h1);
    } else if (kind == "ellipsoidal") {
      auto [y0, y1] = ends("semi_y");
      auto [z0, z1] = ends("semi_z");
      cs = CrossSection::ellipsoidal(y0, z0, y1, z1);
    } else {
      fail("unknown section kind '" + kind + "'");
    }
    if (cs.params_start.minCoeff() <= 0 || cs.params_end.minCoeff() <= 0)
      fail("section '" + it.key() + "' has nonpositive dimensions");
    impl->sections[it.key()] = cs;
  }

  sc.impl_ = impl;
  sc.linkage_ = impl->build({}, &sc.warnings_);
  sc.canonical_ = doc.dump();
  sc.hash_ = fnv1a(sc.canonical_);

  const Linkage& lk = sc.linkage_;
  sc.q0_ = VecX::Zero(lk.dof());
  sc.qd0_ = VecX::Zero(lk.dof());
  for (const auto& ji : doc.value("initial", json::array())) {
    check(ji, "initial", {"link", "division", "mode", "coeffs", "rate_coeffs", "joint", "joint_rate"});
    const int link = lk.link_index(ji.at("link").get<std::string>());
    if (link < 0) fail("initial condition on unknown link");
    if (ji.contains("joint") || ji.contains("joint_rate")) {
      const CompiledJoint& j = lk.links[link].joint;
      if (ji.contains("joint")) {
        const VecX v = vecx(ji.at("joint"));
        if (v.size() != j.q_count) fail("initial joint coordinate size mismatch");
        sc.q0_.segment(j.q_start, j.q_count) = v;
      }
      if (ji.contains("joint_rate")) {
        const VecX v = vecx(ji.at("joint_rate"));
        if (v.size() != j.q_count) fail("initial joint rate size mismatch");
        sc.qd0_.segment(j.q_start, j.q_count) = v;
      }
      continue;
    }
    const int di = int(num(ji, "division", 0));
    const CompiledDivision& dv = lk.links[link].divisions.at(di);
    const int mode = mode_index(ji.at("mode").get<std::string>());
    int col = 0;
    for (int m = 0; m < mode; ++m)
      if (dv.basis.order[m] >= 0) col += dv.basis.order[m] + 1;
    if (dv.basis.order[mode] < 0) fail("initial condition on a disabled mode");
    auto put = [&](const json& coeffs, VecX& target) {
      const VecX v = vecx(coeffs);
      if (v.size() > dv.basis.order[mode] + 1) fail("too many initial coefficients");
      // physical strain coefficients -> internal coordinates
      for (int k = 0; k < v.size(); ++k)
        target[dv.q_start + col + k] = dv.coord_scale * v[k];
    };
    if (ji.contains("coeffs")) put(ji.at("coeffs"), sc.q0_);
    if (ji.contains("rate_coeffs")) put(ji.at("rate_coeffs"), sc.qd0_);
  }

  // solver blocks
  if (doc.contains("static")) {
    const json& js = doc.at("static");
    check(js, "static",
          {"tol", "max_iter", "fd_step", "sweep", "stages", "inputs", "report"});
    StaticBlock blk;
    blk.options.tol = num(js, "tol", 1e-8);
    blk.options.max_iter = int(num(js, "max_iter", 80));
    blk.options.fd_step = num(js, "fd_step", 1e-6);
    if (js.contains("sweep")) {
      const json& jw = js.at("sweep");
      check(jw, "sweep", {"force", "input", "from", "to", "steps"});
      SweepSpec sw;
      sw.force = jw.value("force", "");
      sw.input = jw.value("input", "");
      sw.from = num(jw, "from", 0);
      sw.to = num(jw, "to", 0);
      sw.steps = int(num(jw, "steps", 1));
      blk.sweep = sw;
    }
    for (const auto& jt : js.value("stages", json::array())) {
      check(jt, "stage", {"drives", "inputs"});
      StageSpec st;
      const json jdr = jt.value("drives", json::object());
      for (auto it = jdr.begin(); it != jdr.end(); ++it)
        st.drives[it.key()] = it.value().get<std::vector<double>>();
      const json jin = jt.value("inputs", json::object());
      for (auto it = jin.begin(); it != jin.end(); ++it)
        st.inputs[it.key()] = it.value().get<double>();
      blk.stages.push_back(std::move(st));
    }
    const json jsi = js.value("inputs", json::object());
    for (auto it = jsi.begin(); it != jsi.end(); ++it)
      blk.inputs[it.key()] = it.value().get<double>();
    if (js.contains("report")) {
      check(js.at("report"), "report", {"tip_link"});
      blk.report_link = js.at("report").value("tip_link", "");
    }
    sc.static_ = std::move(blk);
  }

  auto dynamic_options = [&](const json& jd, DynamicOptions& o) {
    o.t_end = num(jd, "t_end", 1.0);
    o.dt = num(jd, "dt", 0.01);
    const std::string integ = jd.value("integrator", "rk4");
    if (integ == "rkf45")
      o.adaptive = true;
    else if (integ != "rk4")
      fail("unknown integrator '" + integ + "'");
    o.rtol = num(jd, "rtol", 1e-6);
    o.atol = num(jd, "atol", 1e-9);
    o.sample_dt = num(jd, "sample", 0.01);
    if (jd.contains("baumgarte")) {
      o.baumgarte_alpha = jd.at("baumgarte")[0].get<double>();
      o.baumgarte_beta = jd.at("baumgarte")[1].get<double>();
    }
  };

  if (doc.contains("dynamic")) {
    const json& jd = doc.at("dynamic");
    check(jd, "dynamic",
          {"t_end", "dt", "integrator", "rtol", "atol", "sample", "baumgarte", "inputs"});
    DynamicBlock blk;
    dynamic_options(jd, blk.options);
    const json jdi = jd.value("inputs", json::object());
    for (auto it = jdi.begin(); it != jdi.end(); ++it)
      blk.inputs[it.key()] = profile_of(it.value(), check);
    sc.dynamic_ = std::move(blk);
  }

  if (doc.contains("control")) {
    const json& jc = doc.at("control");
    check(jc, "control",
          {"t_end", "dt", "integrator", "rtol", "atol", "sample", "baumgarte", "tip_link", "kp",
           "kd", "target"});
    ControlBlock blk;
    dynamic_options(jc, blk.options);
    blk.tip_link = jc.at("tip_link").get<std::string>();
    if (jc.contains("kp")) blk.kp = num(jc, "kp", 100.0) * Mat6::Identity();
    if (jc.contains("kd")) blk.kd = num(jc, "kd", 20.0) * Mat6::Identity();
    const json& jt = jc.at("target");
    check(jt, "target",
          {"kind", "center", "radius", "rpm", "tilt_deg", "phase_deg", "inputs"});
    const std::string kind = jt.value("kind", "circle");
    if (kind == "circle") {
      CircleTarget ct;
      ct.center = vec3(jt.at("center"));
      ct.radius = num(jt, "radius", 0.0);
      ct.rpm = num(jt, "rpm", 0.0);
      ct.tilt_deg = num(jt, "tilt_deg", 0.0);
      ct.phase_deg = num(jt, "phase_deg", 0.0);
      blk.circle = ct;
    } else if (kind == "static_pose") {
      const json jti = jt.value("inputs", json::object());
      for (auto it = jti.begin(); it != jti.end(); ++it)
        blk.pose_from_inputs[it.key()] = it.value().get<double>();
    } else {
      fail("unknown control target kind '" + kind + "'");
    }
    sc.control_ = std::move(blk);
  }

  if (doc.contains("optimize")) {
    const json& jo = doc.at("optimize");
    check(jo, "optimize",
          {"link", "mid_X", "end_X", "target_mid", "target_end", "variables", "mesh0", "tol",
           "max_evals", "static"});
    OptimizeBlock blk;
    blk.link = jo.at("link").get<std::string>();
    blk.mid_X = num(jo, "mid_X", 0.5);
    blk.end_X = num(jo, "end_X", 1.0);
    blk.target_mid = vec3(jo.at("target_mid"));
    blk.target_end = vec3(jo.at("target_end"));
    blk.mesh0 = num(jo, "mesh0", 0.25);
    blk.tol = num(jo, "tol", 1e-4);
    blk.max_evals = int(num(jo, "max_evals", 5000));
    if (jo.contains("static")) {
      blk.static_options.tol = num(jo.at("static"), "tol", 1e-8);
      blk.static_options.max_iter = int(num(jo.at("static"), "max_iter", 80));
    }
    for (const auto& jv : jo.value("variables", json::array())) {
      check(jv, "design variable", {"path", "init", "lo", "hi"});
      DesignVariable dv;
      dv.path = jv.at("path").get<std::string>();
      dv.init = num(jv, "init", 0.0);
      dv.lo = num(jv, "lo", 0.0);
      dv.hi = num(jv, "hi", 1.0);
      blk.variables.push_back(std::move(dv));
    }
    sc.optimize_ = std::move(blk);
  }

  return sc;
}

Linkage Scenario::build_with_design(const VecX& values) const {
  const auto& vars = optimize_->variables;
  std::map<std::string, double> design;
  for (size_t i = 0; i < vars.size(); ++i) design[vars[i].path] = values[int(i)];
  std::vector<std::string> scratch;
  return impl_->build(design, &scratch);
}

TaskTarget Scenario::make_target(const Linkage& lk) const {
  const ControlBlock& blk = *control_;
  TaskTarget target;
  target.kp = blk.kp;
  target.kd = blk.kd;
  if (blk.circle) {
    const CircleTarget ct = *blk.circle;
    const double omega = ct.rpm * 2.0 * M_PI / 60.0;
    const double phase = ct.phase_deg * M_PI / 180.0;
    const double tilt = ct.tilt_deg * M_PI / 180.0;
    Pose B;
    B.r = Vec3(0, ct.radius, 0);
    B.R = Eigen::AngleAxisd(tilt, Vec3::UnitZ()).toRotationMatrix();
    const Pose C = Pose::Translation(ct.center);
    Vec6 spin = Vec6::Zero();
    spin[0] = omega;
    const Vec6 eta = adjoint_inverse(B) * spin;
    target.eval = [C, B, omega, phase, eta](double t, Pose& g, Vec6& eta_d, Vec6& etadot_d) {
      Vec6 ax = Vec6::Zero();
      ax[0] = omega * t + phase;
      g = C * exp_se3(ax) * B;
      eta_d = eta;
      etadot_d = Vec6::Zero();
    };
    return target;
  }
  // regulation to the equilibrium pose of given inputs
  VecX u = VecX::Zero(lk.num_inputs());
  for (const auto& [name, value] : blk.pose_from_inputs) {
    bool found = false;
    for (int i = 0; i < lk.num_inputs(); ++i)
      if (lk.inputs[i].name == name) {
        u[i] = value;
        found = true;
      }
    if (!found) fail("control target references unknown input '" + name + "'");
  }
  StaticLoadCase load;
  load.u = u;
  load.q_template = VecX::Zero(lk.dof());
  StaticOptions sopts;
  sopts.tol = 1e-9;
  const StaticResult res = solve_static(lk, load, sopts);
  if (!res.converged) fail("control target equilibrium did not converge");
  const Pose g_des = forward_kinematics(lk, res.q)[lk.tip_point(lk.link_index(blk.tip_link))];
  target.eval = [g_des](double, Pose& g, Vec6& eta_d, Vec6& etadot_d) {
    g = g_des;
    eta_d = Vec6::Zero();
    etadot_d = Vec6::Zero();
  };
  return target;
}

// ---------------------------------------------------------------------------
// Result bundle writers

void write_timeseries_csv(const std::filesystem::path& file, const Linkage& lk,
                          const Trajectory& traj,
                          const std::vector<std::pair<std::string, std::vector<double>>>& extras) {
  std::ofstream out(file);
  const int n = lk.dof();
  out << "t";
  for (int i = 0; i < n; ++i) out << ",q_" << i;
  for (int i = 0; i < n; ++i) out << ",qd_" << i;
  for (const auto& [name, vals] : extras) {
    (void)vals;
    out << "," << name;
  }
  out << "\n";
  for (size_t k = 0; k < traj.t.size(); ++k) {
    out << format_double(traj.t[k]);
    const VecX q = lk.to_physical(traj.q[k]);
    const VecX qd = lk.to_physical(traj.qd[k]);
    for (int i = 0; i < n; ++i) out << "," << format_double(q[i]);
    for (int i = 0; i < n; ++i) out << "," << format_double(qd[i]);
    for (const auto& [name, vals] : extras) {
      (void)name;
      out << "," << format_double(vals[k]);
    }
    out << "\n";
  }
}

void write_frames(const std::filesystem::path& file, const Linkage& lk,
                  const std::vector<double>& times, const std::vector<VecX>& qs) {
  std::ofstream out(file);
  for (size_t k = 0; k < times.size(); ++k) {
    const auto g = forward_kinematics(lk, qs[k]);
    for (size_t p = 0; p < g.size(); ++p) {
      out << format_double(times[k]) << " " << p;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out << " " << format_double(g[p].R(i, j));
      for (int i = 0; i < 3; ++i) out << " " << format_double(g[p].r[i]);
      out << "\n";
    }
  }
}

namespace {

VecX inputs_from_map(const Linkage& lk, const std::map<std::string, double>& m) {
  VecX u = VecX::Zero(lk.num_inputs());
  for (const auto& [name, value] : m) {
    bool found = false;
    for (int i = 0; i < lk.num_inputs(); ++i)
      if (lk.inputs[i].name == name) {
        u[i] = value;
        found = true;
      }
    if (!found) fail("unknown input channel '" + name + "'");
  }
  return u;
}

void write_meta(const std::filesystem::path& dir, const Scenario& sc, const std::string& command,
                double wall_s, const json& extra) {
  json meta;
  meta["scenario"] = sc.name();
  meta["command"] = command;
  meta["hash"] = format_double(double(sc.hash()));  // stable decimal form
  char hex[20];
  std::snprintf(hex, sizeof hex, "%016llx", (unsigned long long)sc.hash());
  meta["hash_hex"] = hex;
  meta["n_dof"] = sc.linkage().dof();
  meta["n_links"] = sc.linkage().num_links();
  meta["n_inputs"] = sc.linkage().num_inputs();
  meta["n_constraints"] = sc.linkage().num_constraints();
  meta["wall_clock_s"] = wall_s;
  meta["warnings"] = sc.warnings();
  for (auto it = extra.begin(); it != extra.end(); ++it) meta[it.key()] = it.value();
  std::ofstream(dir / "meta.json") << meta.dump(2) << "\n";
}

int run_validate(const Scenario& sc, const std::filesystem::path& dir, unsigned seed) {
  const Linkage& lk = sc.linkage();
  std::ofstream log(dir / "log.txt");
  log << "links=" << lk.num_links() << " dof=" << lk.dof() << " inputs=" << lk.num_inputs()
      << " constraints=" << lk.num_constraints() << " points=" << lk.points.size() << "\n";
  // invariant audit: K, D symmetric PSD; M SPD at random configurations
  const double ksym = (lk.K - lk.K.transpose()).norm();
  if (ksym > 1e-9 * (1.0 + lk.K.norm())) fail("stiffness matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<MatX> es(lk.K);
  if (es.eigenvalues().minCoeff() < -1e-9 * (1.0 + lk.K.norm()))
    fail("stiffness matrix not positive semidefinite");
  std::mt19937 rng(seed ? seed : 7);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (int trial = 0; trial < 3; ++trial) {
    VecX q(lk.dof());
    for (int i = 0; i < q.size(); ++i) q[i] = u(rng);
    const KinematicsCache kin = compute_kinematics(lk, q, VecX::Zero(lk.dof()));
    const MatX M = generalized_mass(lk, kin);
    Eigen::LLT<MatX> llt(M);
    if (llt.info() != Eigen::Success) fail("mass matrix not positive definite");
  }
  log << "audit ok\n";
  for (const auto& w : sc.warnings()) log << "warning: " << w << "\n";
  return 0;
}

int run_static(const Scenario& sc, const std::filesystem::path& dir) {
  const Linkage& lk = sc.linkage();
  if (!sc.static_block()) fail("scenario has no static block");
  const StaticBlock& blk = *sc.static_block();
  std::ofstream log(dir / "log.txt");

  if (blk.sweep) {
    const SweepSpec& sw = *blk.sweep;
    const int report_link =
        blk.report_link.empty() ? lk.num_links() - 1 : lk.link_index(blk.report_link);
    const int tip = lk.tip_point(report_link);
    std::ofstream table(dir / "sweep.csv");
    table << "step,load";
    for (int i = 0; i < lk.dof(); ++i) table << ",q_" << i;
    table << ",tip_x,tip_y,tip_z\n";
    std::ofstream plot(dir / "plot_tip_load.csv");
    plot << "load,tip_horizontal,tip_vertical\n";

    StaticLoadCase load;
    load.u = VecX::Zero(lk.num_inputs());
    load.q_template = sc.initial_q();
    const Pose tip0 = forward_kinematics(lk, VecX::Zero(lk.dof()))[tip];
    std::vector<double> times;
    std::vector<VecX> qs;
    bool all_ok = true;
    for (int step = 1; step <= sw.steps; ++step) {
      const double value = sw.from + (sw.to - sw.from) * step / double(sw.steps);
      if (!sw.force.empty()) load.force_overrides[sw.force] = value;
      if (!sw.input.empty()) load.u = inputs_from_map(lk, {{sw.input, value}});
      const StaticResult res = solve_static(lk, load, blk.options);
      all_ok = all_ok && res.converged;
      log << "step " << step << " load " << value << (res.converged ? " ok " : " FAIL ")
          << "iters " << res.iterations << " res " << res.residual << "\n";
      load.q_template = res.q;
      load.lambda_guess = res.lambda;
      const Pose tipg = forward_kinematics(lk, res.q)[tip];
      table << step << "," << format_double(value);
      const VecX qp = lk.to_physical(res.q);
      for (int i = 0; i < lk.dof(); ++i) table << "," << format_double(qp[i]);
      table << "," << format_double(tipg.r.x()) << "," << format_double(tipg.r.y()) << ","
            << format_double(tipg.r.z()) << "\n";
      // displacement components against the reference tip
      plot << format_double(value) << "," << format_double(tip0.r.x() - tipg.r.x()) << ","
           << format_double(tipg.r.z() - tip0.r.z()) << "\n";
      times.push_back(value);
      qs.push_back(res.q);
    }
    write_frames(dir / "frames.txt", lk, {times.back()}, {qs.back()});
    return all_ok ? 0 : 3;
  }

  // stages (or a single plain solve)
  std::vector<StageSpec> stages = blk.stages;
  if (stages.empty()) {
    StageSpec st;
    st.inputs = blk.inputs;
    stages.push_back(st);
  }
  std::ofstream table(dir / "stages.csv");
  table << "stage";
  for (int i = 0; i < lk.dof(); ++i) table << ",q_" << i;
  table << ",residual,converged\n";
  StaticLoadCase load;
  load.q_template = sc.initial_q();
  std::vector<double> times;
  std::vector<VecX> qs;
  bool all_ok = true;
  for (size_t si = 0; si < stages.size(); ++si) {
    const StageSpec& st = stages[si];
    for (const auto& [link_name, values] : st.drives) {
      const int li = lk.link_index(link_name);
      if (li < 0) fail("stage drives unknown link '" + link_name + "'");
      const CompiledJoint& j = lk.links[li].joint;
      if (int(values.size()) != j.q_count) fail("stage drive size mismatch on '" + link_name + "'");
      for (int k = 0; k < j.q_count; ++k) load.q_template[j.q_start + k] = values[k];
    }
    load.u = inputs_from_map(lk, st.inputs);
    const StaticResult res = solve_static(lk, load, blk.options);
    all_ok = all_ok && res.converged;
    log << "stage " << si << (res.converged ? " ok " : " FAIL ") << "iters " << res.iterations
        << " res " << res.residual << "\n";
    load.q_template = res.q;
    load.lambda_guess = res.lambda;
    table << si;
    const VecX qp = lk.to_physical(res.q);
    for (int i = 0; i < lk.dof(); ++i) table << "," << format_double(qp[i]);
    table << "," << format_double(res.residual) << "," << (res.converged ? 1 : 0) << "\n";
    times.push_back(double(si));
    qs.push_back(res.q);
  }
  write_frames(dir / "frames.txt", lk, times, qs);
  return all_ok ? 0 : 3;
}

InputFn open_loop_inputs(const Linkage& lk, const std::map<std::string, Profile>& profiles) {
  std::vector<std::pair<int, Profile>> channels;
  for (const auto& [name, prof] : profiles) {
    int idx = -1;
    for (int i = 0; i < lk.num_inputs(); ++i)
      if (lk.inputs[i].name == name) idx = i;
    if (idx < 0) fail("unknown input channel '" + name + "'");
    channels.push_back({idx, prof});
  }
  const int nu = lk.num_inputs();
  return [channels, nu](double t, const VecX&, const VecX&) {
    VecX u = VecX::Zero(nu);
    for (const auto& [idx, prof] : channels) u[idx] = prof.value(t);
    return u;
  };
}

int run_dynamic(const Scenario& sc, const std::filesystem::path& dir, bool with_energy) {
  const Linkage& lk = sc.linkage();
  if (!sc.dynamic_block()) fail("scenario has no dynamic block");
  const DynamicBlock& blk = *sc.dynamic_block();
  const Trajectory traj = simulate(lk, sc.initial_q(), sc.initial_qd(),
                                   open_loop_inputs(lk, blk.inputs), blk.options);
  write_timeseries_csv(dir / "timeseries.csv", lk, traj);
  write_frames(dir / "frames.txt", lk, traj.t, traj.q);
  std::ofstream log(dir / "log.txt");
  log << "steps=" << traj.steps << " rhs_evals=" << traj.rhs_evals
      << " samples=" << traj.t.size() << "\n";
  if (traj.aborted) log << "aborted: " << traj.abort_reason << "\n";

  if (with_energy) {
    std::ofstream out(dir / "energy.csv");
    out << "t,kinetic,gravitational,elastic,total,px,py,pz,Lx,Ly,Lz\n";
    for (size_t k = 0; k < traj.t.size(); ++k) {
      const EnergySample e = compute_energy(lk, traj.q[k], traj.qd[k]);
      const auto [p, L] = compute_momentum(lk, traj.q[k], traj.qd[k]);
      out << format_double(traj.t[k]) << "," << format_double(e.kinetic) << ","
          << format_double(e.gravitational) << "," << format_double(e.elastic) << ","
          << format_double(e.total);
      for (int i = 0; i < 3; ++i) out << "," << format_double(p[i]);
      for (int i = 0; i < 3; ++i) out << "," << format_double(L[i]);
      out << "\n";
    }
  }
  return traj.aborted ? 3 : 0;
}

int run_control(const Scenario& sc, const std::filesystem::path& dir) {
  const Linkage& lk = sc.linkage();
  if (!sc.control_block()) fail("scenario has no control block");
  const ControlBlock& blk = *sc.control_block();
  const TaskTarget target = sc.make_target(lk);
  const int tip = lk.tip_point(lk.link_index(blk.tip_link));

  InputFn controller = [&lk, target, tip](double t, const VecX& q, const VecX& qd) {
    KinematicsOptions kopts;
    kopts.with_jdot = true;
    const KinematicsCache kin = compute_kinematics(lk, q, qd, kopts);
    return pd_task_control(lk, kin, target, t, tip);
  };
  const Trajectory traj = simulate(lk, sc.initial_q(), sc.initial_qd(), controller, blk.options);

  // tracking errors and inputs per sample
  std::vector<std::pair<std::string, std::vector<double>>> extras;
  std::vector<double> perr(traj.t.size()), rerr(traj.t.size());
  for (size_t k = 0; k < traj.t.size(); ++k) {
    Pose g_des;
    Vec6 eta_des, etadot_des;
    target.eval(traj.t[k], g_des, eta_des, etadot_des);
    const Pose g = forward_kinematics(lk, traj.q[k])[tip];
    perr[k] = (g.r - g_des.r).norm();
    rerr[k] = rotation_angle(Mat3(g.R.transpose() * g_des.R));
  }
  extras.push_back({"pos_err", perr});
  extras.push_back({"rot_err", rerr});
  for (int i = 0; i < lk.num_inputs(); ++i) {
    std::vector<double> ui(traj.t.size());
    for (size_t k = 0; k < traj.t.size(); ++k) ui[k] = traj.u[k][i];
    extras.push_back({"u_" + lk.inputs[i].name, ui});
  }
  write_timeseries_csv(dir / "timeseries.csv", lk, traj, extras);
  write_frames(dir / "frames.txt", lk, traj.t, traj.q);
  std::ofstream log(dir / "log.txt");
  log << "steps=" << traj.steps << " samples=" << traj.t.size() << "\n";
  return traj.aborted ? 3 : 0;
}

int run_optimize(const Scenario& sc, const std::filesystem::path& dir) {
  if (!sc.optimize_block()) fail("scenario has no optimize block");
  const OptimizeBlock& blk = *sc.optimize_block();
  const int nv = int(blk.variables.size());

  // the objective works on box-normalized variables
  auto denorm = [&](const VecX& z) {
    VecX x(nv);
    for (int i = 0; i < nv; ++i)
      x[i] = blk.variables[i].lo + z[i] * (blk.variables[i].hi - blk.variables[i].lo);
    return x;
  };
  auto objective = [&](const VecX& z) -> double {
    const VecX x = denorm(z);
    Linkage cand;
    try {
      cand = sc.build_with_design(x);
    } catch (const std::exception&) {
      return 1e6;  // cable left the section or similar
    }
    VecX u = VecX::Zero(cand.num_inputs());
    for (int i = 0; i < nv; ++i) {
      if (blk.variables[i].path.rfind("input:", 0) != 0) continue;
      const std::string ch = blk.variables[i].path.substr(6);
      for (int k = 0; k < cand.num_inputs(); ++k)
        if (cand.inputs[k].name == ch) u[k] = x[i];
    }
    int mid = -1, end = -1;
    for (const auto& f : cand.forces) {
      if (f.name == "_probe_mid") mid = f.point;
      if (f.name == "_probe_end") end = f.point;
    }
    return placement_objective(cand, u, mid, end, blk.target_mid, blk.target_end,
                               blk.static_options);
  };

  VecX z0(nv);
  for (int i = 0; i < nv; ++i)
    z0[i] = (blk.variables[i].init - blk.variables[i].lo) /
            (blk.variables[i].hi - blk.variables[i].lo);
  const PatternResult res = pattern_search(objective, z0, VecX::Zero(nv), VecX::Ones(nv),
                                           blk.mesh0, blk.tol, blk.max_evals);
  const VecX x = denorm(res.x);

  json out;
  out["objective"] = res.f;
  out["evaluations"] = res.evaluations;
  for (int i = 0; i < nv; ++i) out["variables"][blk.variables[i].path] = x[i];
  std::ofstream(dir / "optimum.json") << out.dump(2) << "\n";

  std::ofstream log(dir / "log.txt");
  log << "objective=" << res.f << " evaluations=" << res.evaluations << "\n";
  return 0;
}

}  // namespace

int run_command(const std::string& command, const Scenario& scenario,
                const std::filesystem::path& out_dir, unsigned seed) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail("output dir not writable: " + out_dir.string());
  {
    std::ofstream probe(out_dir / ".writable");
    if (!probe) fail("output dir not writable: " + out_dir.string());
  }
  std::filesystem::remove(out_dir / ".writable");

  const auto t0 = std::chrono::steady_clock::now();
  int code = 0;
  json extra;
  if (command == "validate")
    code = run_validate(scenario, out_dir, seed);
  else if (command == "static")
    code = run_static(scenario, out_dir);
  else if (command == "dyn")
    code = run_dynamic(scenario, out_dir, false);
  else if (command == "energy")
    code = run_dynamic(scenario, out_dir, true);
  else if (command == "control")
    code = run_control(scenario, out_dir);
  else if (command == "optimize")
    code = run_optimize(scenario, out_dir);
  else
    fail("unknown command '" + command + "'");
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_meta(out_dir, scenario, command, wall, extra);
  return code;
}

}  // namespace strand
