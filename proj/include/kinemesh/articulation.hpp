#pragma once

#include <span>
#include <string>
#include <vector>

#include "kinemesh/mesh_field.hpp"

namespace kinemesh {

enum class JointType { Undecided, Revolute, Prismatic, Static };

std::string to_string(JointType t);
JointType joint_type_from_string(const std::string& s);

// Forward rigid motion of one part from state t1 to t2, pivot form:
//   g(x) = R (x - P) + P + T
struct PartJoint {
    UnitQuaternion rotation;
    Vec3 pivot = Vec3::Zero();
    Vec3 translation = Vec3::Zero();
    JointType type = JointType::Undecided;
};

struct JointParams {
    std::vector<PartJoint> parts;  // parts[0] is the static base

    static JointParams identity(int num_parts);
    int num_parts() const { return static_cast<int>(parts.size()); }
    // Enforces the base-is-identity and per-type constraints in place.
    void apply_type_constraints();
};

struct AffineMotion {
    Mat3 linear = Mat3::Identity();
    Vec3 offset = Vec3::Zero();

    Vec3 apply(const Vec3& x) const { return linear * x + offset; }
    Mat4 homogeneous() const;
};

enum class Direction { Forward, Backward };

AffineMotion to_affine(const JointParams& joints, int part);
AffineMotion analytic_inverse(const AffineMotion& m);
// Pivot-form inverse translation with P- = P+: T- = -R^T T.
Vec3 inverse_pivot_translation(const PartJoint& joint);

std::vector<Vec3> transport_vertices(const PartAwareMesh& mesh, const JointParams& joints, Direction dir);
PartAwareMesh articulate_mesh(const PartAwareMesh& mesh, const JointParams& joints, Direction dir);

// Gradient of a scalar w.r.t. one part's optimization variables: rotation
// vector (exponential map), pivot and translation.
struct JointGrad {
    Vec3 rotvec = Vec3::Zero();
    Vec3 pivot = Vec3::Zero();
    Vec3 translation = Vec3::Zero();

    JointGrad& operator+=(const JointGrad& o) {
        rotvec += o.rotvec;
        pivot += o.pivot;
        translation += o.translation;
        return *this;
    }
    JointGrad operator*(double s) const { return {rotvec * s, pivot * s, translation * s}; }
};

// Chains per-vertex dL/d(transported position) through the transport map.
// `rotvecs[k]` is the exponential-map parameter of part k (defaults to the
// log of each stored rotation).
std::vector<JointGrad> transport_backward(const PartAwareMesh& mesh, const JointParams& joints, Direction dir,
                                          std::span<const Vec3> grad_positions,
                                          std::span<const Vec3> rotvecs = {});

// Reporting helpers: unit axis and non-negative magnitude.
struct JointAxis {
    Vec3 axis = Vec3::UnitZ();
    double angle_deg = 0.0;     // revolute magnitude
    double displacement = 0.0;  // prismatic magnitude (scene units)
};

JointAxis joint_axis(const PartJoint& joint);

}  // namespace kinemesh
