#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "strandsim/basis.hpp"
#include "strandsim/joint.hpp"
#include "strandsim/lie.hpp"
#include "strandsim/profile.hpp"
#include "strandsim/section.hpp"

namespace strand {

struct KinematicsCache;
class Linkage;

/// Rigid-link mass properties, frames relative to the joint frame.
struct RigidBody {
  double mass = 0.0;
  Mat6 inertia = Mat6::Zero();  // 6x6 screw inertia about the CoM frame
  Pose com;
  Pose tip;
  double length = 0.0;

  static RigidBody uniform_rod(double mass, double length);
  static RigidBody box(double mass, const Vec3& dims);  // along x, dims = (lx, ly, lz)
  static RigidBody solid_sphere(double mass, double radius);
  static RigidBody disk(double mass, double radius, double thickness);  // axis = x
};

/// One soft division as supplied to the builder.
struct SoftDivision {
  double length = 0.0;
  CrossSection section;
  Material material;
  StrainBasisSpec basis;
  int gauss_order = 5;
  ShearCorrection shear;
  std::function<Mat6(double, const Mat6&)> stiffness_override;
};

enum class PointKind { GaussNode, DivisionStart, DivisionEnd, RigidCom, RigidTip, Extra };

/// One frame the kinematics pass evaluates: Gauss nodes carry quadrature
/// weights, everything else has weight 0.
struct EvalPoint {
  int link = -1;
  int division = -1;  // -1 on rigid links
  PointKind kind = PointKind::Extra;
  double X = 0.0;       // division abscissa (soft)
  double weight = 0.0;  // Gauss weight on [0,1]
  double arc_scale = 0.0;  // physical length factor for integrals
  Pose offset;          // fixed offset applied after the centerline frame
};

struct CompiledJoint {
  Joint spec;
  Mat6X phi;  // 6 x dof
  int q_start = 0, q_count = 0;
};

struct CompiledDivision {
  double length = 0.0;
  CrossSection section;
  Material material;
  StrainBasisSpec basis;
  ShearCorrection shear;
  std::function<Mat6(double, const Mat6&)> stiffness_override;
  int gauss_order = 5;
  int q_start = 0, q_count = 0;
  double coord_scale = 1.0;  // internal coordinate = scale * physical strain coordinate
  std::vector<int> stations;  // point ids in march order: X=0, nodes, X=1
  struct SidePoint {
    double X = 0.0;
    int anchor_station = 0;  // station index the substep starts from
    int point = -1;
  };
  std::vector<SidePoint> side_points;
};

struct CompiledLink {
  std::string name;
  int parent = -1;  // -1 = ground
  Pose mount;       // parent tip frame -> joint frame
  CompiledJoint joint;
  bool soft = false;
  RigidBody body;                     // rigid only
  int com_point = -1, tip_point = -1; // rigid only
  std::vector<CompiledDivision> divisions;  // soft only
};

struct CompiledCable {
  std::string name;
  int input = -1;
  int link = -1;
  double X0 = 0.0, X1 = 1.0;  // link-normalized span
  VecX y_coeffs, z_coeffs;    // path polynomials in link-normalized X (m)
  double u_max = 1e30;
  bool containment_strict = true;
  struct Node {
    int division = 0;
    double X_div = 0.0;   // division abscissa
    double X_link = 0.0;  // link-normalized abscissa
    int point = -1;
    double weight_phys = 0.0;  // Gauss weight times physical sub-span length
  };
  std::vector<Node> nodes;

  double path_y(double X_link) const;
  double path_z(double X_link) const;
  double path_dy(double X_link) const;  // d/dX_link
  double path_dz(double X_link) const;
};

struct CompiledForce {
  std::string name;
  int link = -1;
  double X = 1.0;
  int point = -1;
  Vec6 wrench = Vec6::Zero();  // unit wrench, scaled by profile value
  bool follower = true;
  Profile profile = Profile::constant(1.0);
};

struct CompiledContact {
  struct Proxy {
    int link = -1;
    int point = -1;
    double radius = 0.0;
  };
  std::vector<Proxy> proxies;
  int target_link = -1;   // -1 = world-fixed sphere
  int target_point = -1;  // eval point when target is a link
  Vec3 target_center = Vec3::Zero();  // world center when target is fixed
  double target_radius = 0.0;
  double stiffness = 0.0;
  double damping = 0.0;
};

struct CompiledClosure {
  int link_a = -1, link_b = -1;  // b may be -1 (ground)
  int point_a = -1, point_b = -1;
  Pose offset_a, offset_b;  // fixed offsets at the attachment frames
  Pose world_b;             // ground-side pose when link_b < 0
  JointKind joint = JointKind::Fixed;
  MatX constrained_basis;   // 6 x m, orthonormal complement of the joint screws
  Pose ref_rel;             // relative pose a->b at q = 0
  int row_start = 0, rows = 0;
};

struct InputChannel {
  enum class Kind { JointWrench, Cable };
  Kind kind = Kind::Cable;
  std::string name;
  double u_min = 0.0, u_max = 1e30;
  int joint_link = -1, joint_axis = -1;  // JointWrench only
};

using CustomForceFn =
    std::function<void(double t, const Linkage&, const KinematicsCache&, VecX& generalized)>;

/// Compiled, immutable robot model. All mutable simulation state lives in
/// (q, qdot) vectors owned by callers; internal coordinates carry the
/// per-division length normalization.
class Linkage {
 public:
  std::vector<CompiledLink> links;
  std::vector<EvalPoint> points;
  std::vector<CompiledClosure> closures;
  std::vector<CompiledCable> cables;
  std::vector<CompiledForce> forces;
  std::vector<CompiledContact> contacts;
  std::vector<InputChannel> inputs;
  std::vector<CustomForceFn> custom_forces;
  std::map<int, Profile> drives;  // prescribed coordinate -> profile
  Vec3 gravity = Vec3::Zero();

  int ndof = 0;
  VecX coord_scale;             // internal = scale .* physical
  std::vector<bool> prescribed;  // per coordinate
  MatX K;  // generalized stiffness, internal coordinates
  MatX D;  // generalized damping, internal coordinates

  int dof() const { return ndof; }
  int num_links() const { return int(links.size()); }
  int num_inputs() const { return int(inputs.size()); }
  int num_constraints() const;
  int num_free() const;

  int link_index(const std::string& name) const;  // -1 if absent
  int tip_point(int link) const;

  VecX to_internal(const VecX& q_phys) const { return coord_scale.cwiseProduct(q_phys); }
  VecX to_physical(const VecX& q_int) const { return q_int.cwiseQuotient(coord_scale); }
  MatX stiffness_physical() const;
  MatX damping_physical() const;

  /// Physical strain twist of a division at abscissa X for internal q.
  Vec6 strain(int link, int division, double X, const VecX& q_int) const;

  /// Prescribed coordinate values/rates/accelerations at time t, written
  /// into full-size vectors (free entries untouched).
  void apply_drives(double t, VecX& q, VecX& qd) const;
  VecX drive_accel(double t) const;

  /// Fold spherical/free joint coordinates back onto the principal branch
  /// (pose and body velocity preserved). Returns true if anything changed.
  bool rebase_joint_coordinates(VecX& q, VecX& qd) const;

  /// Input bound vectors (u_min, u_max per channel).
  VecX input_lower() const;
  VecX input_upper() const;
};

class LinkageBuilder {
 public:
  explicit LinkageBuilder(bool normalize_lengths = true)
      : normalize_lengths_(normalize_lengths) {}

  int add_rigid_link(const std::string& name, int parent, const Joint& joint,
                     const RigidBody& body, const Pose& mount = {});
  int add_soft_link(const std::string& name, int parent, const Joint& joint,
                    std::vector<SoftDivision> divisions, const Pose& mount = {});

  /// Registers 6 - dof(joint) scalar constraints between two attachment
  /// frames. link_b = -1 pins to the ground at the reference pose of side a.
  int add_loop_closure(int link_a, double X_a, int link_b, double X_b, JointKind joint,
                       const Pose& offset_a = {}, const Pose& offset_b = {});

  /// Cable over [X0, X1] of a soft link; cables sharing `input` share one
  /// actuation channel.
  void add_cable(const std::string& name, int link, double X0, double X1, const VecX& y_coeffs,
                 const VecX& z_coeffs, double u_max, const std::string& input = "",
                 bool containment_strict = true);

  void add_point_force(const std::string& name, int link, double X, const Vec6& wrench,
                       bool follower, const Profile& profile = Profile::constant(1.0));

  void add_contact(const CompiledContact& spec_with_link_X,
                   const std::vector<std::pair<int, double>>& proxy_locations);

  void add_custom_force(CustomForceFn fn);
  void set_gravity(const Vec3& g) { gravity_ = g; }
  void set_drive(int link, int dof_index, const Profile& p);

  int current_dof() const { return ndof_; }
  const std::vector<std::string>& build_warnings() const { return warnings_; }

  Linkage finalize();

 private:
  struct PendingContact {
    CompiledContact contact;
    std::vector<std::pair<int, double>> proxy_loc;  // (link, X_link)
  };
  struct PendingForce {
    CompiledForce f;
  };
  struct PendingCable {
    CompiledCable c;
    std::string input_name;
  };
  struct PendingClosure {
    CompiledClosure c;
    double X_a, X_b;
  };

  int check_parent(int parent) const;
  void check_name(const std::string& name) const;

  bool normalize_lengths_;
  std::vector<CompiledLink> links_;
  std::vector<PendingClosure> closures_;
  std::vector<PendingCable> cables_;
  std::vector<PendingForce> forces_;
  std::vector<PendingContact> contacts_;
  std::vector<CustomForceFn> custom_;
  std::map<int, Profile> drives_;
  std::vector<std::string> warnings_;
  Vec3 gravity_ = Vec3::Zero();
  int ndof_ = 0;
  bool finalized_ = false;
};

}  // namespace strand
