#include "kinemesh/articulation.hpp"

#include <cmath>
#include <numbers>

#include "kinemesh/error.hpp"

namespace kinemesh {

std::string to_string(JointType t) {
    switch (t) {
        case JointType::Undecided: return "undecided";
        case JointType::Revolute: return "revolute";
        case JointType::Prismatic: return "prismatic";
        case JointType::Static: return "static";
    }
    return "undecided";
}

JointType joint_type_from_string(const std::string& s) {
    if (s == "undecided") return JointType::Undecided;
    if (s == "revolute") return JointType::Revolute;
    if (s == "prismatic") return JointType::Prismatic;
    if (s == "static" || s == "fixed") return JointType::Static;
    throw Error("bad-joint-type", "unknown joint type '" + s + "'");
}

JointParams JointParams::identity(int num_parts) {
    JointParams j;
    j.parts.resize(static_cast<size_t>(std::max(num_parts, 1)));
    j.parts[0].type = JointType::Static;
    return j;
}

void JointParams::apply_type_constraints() {
    if (parts.empty()) return;
    parts[0] = PartJoint{};
    parts[0].type = JointType::Static;
    for (PartJoint& p : parts) {
        switch (p.type) {
            case JointType::Revolute: p.translation.setZero(); break;
            case JointType::Prismatic:
                p.rotation = UnitQuaternion::identity();
                p.pivot.setZero();
                break;
            case JointType::Static:
                p.rotation = UnitQuaternion::identity();
                p.pivot.setZero();
                p.translation.setZero();
                break;
            case JointType::Undecided: break;
        }
    }
}

Mat4 AffineMotion::homogeneous() const {
    Mat4 g = Mat4::Identity();
    g.topLeftCorner<3, 3>() = linear;
    g.topRightCorner<3, 1>() = offset;
    return g;
}

AffineMotion to_affine(const JointParams& joints, int part) {
    if (part < 0 || part >= joints.num_parts()) throw Error("bad-part", "part index " + std::to_string(part) + " out of range");
    const PartJoint& j = joints.parts[static_cast<size_t>(part)];
    AffineMotion m;
    m.linear = j.rotation.matrix();
    m.offset = -m.linear * j.pivot + j.pivot + j.translation;
    return m;
}

AffineMotion analytic_inverse(const AffineMotion& m) {
    AffineMotion inv;
    inv.linear = m.linear.transpose();
    inv.offset = -inv.linear * m.offset;
    return inv;
}

Vec3 inverse_pivot_translation(const PartJoint& joint) {
    return -joint.rotation.matrix().transpose() * joint.translation;
}

namespace {

void require_hardened(const PartAwareMesh& mesh, const JointParams& joints) {
    if (!mesh.hardened()) throw Error("not-hardened", "mesh not hardened");
    for (int l : mesh.labels)
        if (l < 0 || l >= joints.num_parts())
            throw Error("part-count-mismatch", "vertex label " + std::to_string(l) + " has no joint");
}

std::vector<AffineMotion> motions(const JointParams& joints, Direction dir) {
    std::vector<AffineMotion> out;
    out.reserve(joints.parts.size());
    for (int k = 0; k < joints.num_parts(); ++k) {
        const AffineMotion fwd = to_affine(joints, k);
        out.push_back(dir == Direction::Forward ? fwd : analytic_inverse(fwd));
    }
    return out;
}

}  // namespace

std::vector<Vec3> transport_vertices(const PartAwareMesh& mesh, const JointParams& joints, Direction dir) {
    require_hardened(mesh, joints);
    const std::vector<AffineMotion> m = motions(joints, dir);
    std::vector<Vec3> out(mesh.vertex_count());
    for (size_t i = 0; i < mesh.vertex_count(); ++i) {
        const int k = mesh.labels[i];
        // Part 0 is the static base: copy so it stays bitwise unchanged.
        out[i] = k == 0 ? mesh.positions[i] : m[static_cast<size_t>(k)].apply(mesh.positions[i]);
    }
    return out;
}

PartAwareMesh articulate_mesh(const PartAwareMesh& mesh, const JointParams& joints, Direction dir) {
    PartAwareMesh out = mesh;
    out.positions = transport_vertices(mesh, joints, dir);
    return out;
}

std::vector<JointGrad> transport_backward(const PartAwareMesh& mesh, const JointParams& joints, Direction dir,
                                          std::span<const Vec3> grad_positions, std::span<const Vec3> rotvecs) {
    require_hardened(mesh, joints);
    const size_t parts = joints.parts.size();
    std::vector<Vec3> w(parts);
    std::vector<Mat3> r(parts);
    for (size_t k = 0; k < parts; ++k) {
        w[k] = k < rotvecs.size() ? rotvecs[k] : joints.parts[k].rotation.rotvec();
        r[k] = exp_so3(w[k]);
    }
    std::vector<JointGrad> grads(parts);
    for (size_t i = 0; i < mesh.vertex_count(); ++i) {
        const size_t k = static_cast<size_t>(mesh.labels[i]);
        if (k == 0) continue;
        const Vec3& g = grad_positions[i];
        const PartJoint& j = joints.parts[k];
        const Vec3& x = mesh.positions[i];
        if (dir == Direction::Forward) {
            // x' = R (x - P) + P + T
            grads[k].rotvec += rotate_jacobian(w[k], x - j.pivot).transpose() * g;
            grads[k].pivot += (Mat3::Identity() - r[k]).transpose() * g;
            grads[k].translation += g;
        } else {
            // x' = R^T (y - P - T) + P ; d(R^T v)/dw = d(exp(-w) v)/dw
            const Vec3 v = x - j.pivot - j.translation;
            const Mat3 d_rot = -rotate_jacobian(-w[k], v);
            grads[k].rotvec += d_rot.transpose() * g;
            grads[k].pivot += (Mat3::Identity() - r[k].transpose()).transpose() * g;
            grads[k].translation += -r[k] * g;
        }
    }
    return grads;
}

JointAxis joint_axis(const PartJoint& joint) {
    JointAxis out;
    if (joint.type == JointType::Prismatic) {
        const double d = joint.translation.norm();
        out.displacement = d;
        out.axis = d > 0.0 ? Vec3(joint.translation / d) : Vec3::UnitZ();
        return out;
    }
    const Vec3 w = joint.rotation.rotvec();
    const double angle = w.norm();
    out.angle_deg = angle * 180.0 / std::numbers::pi;
    out.axis = angle > 0.0 ? Vec3(w / angle) : Vec3::UnitZ();
    out.displacement = joint.translation.norm();
    return out;
}

}  // namespace kinemesh
