#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "strandsim/control.hpp"
#include "strandsim/solvers.hpp"

namespace strand {

/// Parse/validation failure with location information when available.
struct ScenarioError : std::runtime_error {
  explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

struct SweepSpec {
  std::string force;  // name of the swept point force (or empty)
  std::string input;  // or name of the swept input channel
  double from = 0.0, to = 0.0;
  int steps = 1;
};

struct StageSpec {
  std::map<std::string, std::vector<double>> drives;  // link name -> joint coordinate values
  std::map<std::string, double> inputs;               // channel name -> effort
};

struct StaticBlock {
  StaticOptions options;
  std::optional<SweepSpec> sweep;
  std::vector<StageSpec> stages;
  std::map<std::string, double> inputs;  // plain single solve
  std::string report_link;               // tip reported in sweep tables
};

struct DynamicBlock {
  DynamicOptions options;
  std::map<std::string, Profile> inputs;  // open-loop input profiles per channel
};

struct CircleTarget {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  double rpm = 0.0;
  double tilt_deg = 0.0;
  double phase_deg = 0.0;
};

struct ControlBlock {
  DynamicOptions options;
  std::string tip_link;
  Mat6 kp = 100.0 * Mat6::Identity();
  Mat6 kd = 20.0 * Mat6::Identity();
  std::optional<CircleTarget> circle;
  std::map<std::string, double> pose_from_inputs;  // static regulation target
};

struct DesignVariable {
  std::string path;  // "cable:<name>:y:<k>" / "cable:<name>:z:<k>" / "input:<channel>"
  double init = 0.0, lo = 0.0, hi = 1.0;
};

struct OptimizeBlock {
  std::vector<DesignVariable> variables;
  Vec3 target_mid = Vec3::Zero(), target_end = Vec3::Zero();
  double mid_X = 0.5, end_X = 1.0;
  std::string link;
  double mesh0 = 0.25, tol = 1e-4;
  int max_evals = 5000;
  StaticOptions static_options;
};

/// A parsed scenario: the validated document plus the compiled model and
/// solver blocks. The document is retained so design-variable substitution
/// can rebuild the linkage.
class Scenario {
 public:
  static Scenario load(const std::filesystem::path& file, bool strict = false);
  static Scenario parse(const std::string& text, bool strict = false);

  const std::string& name() const { return name_; }
  const Linkage& linkage() const { return linkage_; }
  const std::string& canonical() const { return canonical_; }
  uint64_t hash() const { return hash_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  const std::optional<StaticBlock>& static_block() const { return static_; }
  const std::optional<DynamicBlock>& dynamic_block() const { return dynamic_; }
  const std::optional<ControlBlock>& control_block() const { return control_; }
  const std::optional<OptimizeBlock>& optimize_block() const { return optimize_; }

  /// Initial internal coordinates from the "initial" section.
  VecX initial_q() const { return q0_; }
  VecX initial_qd() const { return qd0_; }

  /// Rebuilds the model with design-variable values substituted
  /// (optimization candidates).
  Linkage build_with_design(const VecX& values) const;

  /// Desired-motion callback of the control block.
  TaskTarget make_target(const Linkage& lk) const;

 private:
  Scenario() = default;
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  std::string name_;
  std::string canonical_;
  uint64_t hash_ = 0;
  Linkage linkage_;
  VecX q0_, qd0_;
  std::vector<std::string> warnings_;
  std::optional<StaticBlock> static_;
  std::optional<DynamicBlock> dynamic_;
  std::optional<ControlBlock> control_;
  std::optional<OptimizeBlock> optimize_;
};

/// Executes one CLI command on a scenario, writing the result bundle into
/// out_dir. Returns the process exit code (0 success, 3 solver failure).
int run_command(const std::string& command, const Scenario& scenario,
                const std::filesystem::path& out_dir, unsigned seed = 0);

/// Bit-exact serialization helpers (17 significant digits).
std::string format_double(double v);
void write_timeseries_csv(const std::filesystem::path& file, const Linkage& lk,
                          const Trajectory& traj,
                          const std::vector<std::pair<std::string, std::vector<double>>>& extras =
                              {});
void write_frames(const std::filesystem::path& file, const Linkage& lk,
                  const std::vector<double>& times, const std::vector<VecX>& qs);

}  // namespace strand
