#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kinemesh/articulation.hpp"
#include "kinemesh/synth.hpp"

namespace kinemesh {

struct AxisAngleError {
    double signed_deg = 0.0;  // angle between the oriented axes, in [0, 180]
    double folded_deg = 0.0;  // min(signed, 180 - signed)
};

AxisAngleError axis_angle_error(const Vec3& pred_axis, const Vec3& gt_axis);

struct AxisLine {
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3::UnitZ();
};

enum class AxisPosMode { PointToLine, OriginToOrigin };

// Distance in units of 0.1 m. PointToLine measures the GT origin against the
// predicted line, so the prediction's choice of pivot along the axis does
// not matter.
double axis_pos_error(const AxisLine& pred, const AxisLine& gt, double units_to_meters = 1.0,
                      AxisPosMode mode = AxisPosMode::PointToLine);

// Rotation axis and pivot of a predicted revolute joint, with the axis
// oriented so the rotation angle is non-negative.
AxisLine joint_axis_line(const PartJoint& joint);

struct PartMotionError {
    double value = 0.0;          // degrees (revolute) or meters (prismatic)
    bool type_mismatch = false;
    double pred_magnitude = 0.0;
    double gt_magnitude = 0.0;
};

PartMotionError part_motion_error(const JointParams& pred, const GroundTruth& gt, int part);

// Area-weighted uniform sample of a triangle soup, seeded.
std::vector<Vec3> sample_surface(const std::vector<Vec3>& positions, const std::vector<Triangle>& faces,
                                 int n_samples, unsigned seed);

// Symmetric mean nearest-neighbour distance between two point sets, in the
// input units.
double point_set_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// Chamfer distance in millimetres; both meshes sampled with the same seed.
double chamfer(const std::vector<Vec3>& pred_positions, const std::vector<Triangle>& pred_faces,
               const std::vector<Vec3>& gt_positions, const std::vector<Triangle>& gt_faces, int n_samples,
               unsigned seed = 0, double units_to_meters = 1.0);

std::string part_bucket(int num_parts);

struct JointReport {
    int part = 1;
    JointType gt_type = JointType::Revolute;
    JointType pred_type = JointType::Undecided;
    bool type_correct = false;
    double axis_ang_deg = 0.0;
    double axis_ang_folded_deg = 0.0;
    std::optional<double> axis_pos;  // 0.1 m units, revolute only
    double part_motion = 0.0;
    double pred_motion = 0.0;
    double gt_motion = 0.0;
};

struct EvalReport {
    std::string name;
    int num_parts = 0;
    std::string bucket;
    std::vector<JointReport> joints;
    std::vector<double> part_cd_mm;  // per part, index = part id
    double cd_s = 0.0;
    double cd_m = 0.0;

    std::string to_csv() const;
    std::string to_json() const;
};

struct EvalOptions {
    int chamfer_samples = 2000;
    unsigned seed = 0;
    AxisPosMode axis_pos_mode = AxisPosMode::PointToLine;
    int state = 0;  // which state's meshes to compare
};

// `pred_mesh` must be hardened; its part ids correspond to GT part ids.
EvalReport evaluate_object(const PartAwareMesh& pred_mesh, const JointParams& pred_joints, const GroundTruth& gt,
                           const EvalOptions& opt = {});

// Per-bucket and overall means of every metric, as JSON.
std::string summarize_reports(const std::vector<EvalReport>& reports);
std::string reports_to_csv(const std::vector<EvalReport>& reports);

}  // namespace kinemesh
