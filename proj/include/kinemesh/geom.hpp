#pragma once

#include <array>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace kinemesh {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Rotation stored as (w, x, y, z) with unit norm. Every constructor and
// mutator renormalizes.
class UnitQuaternion {
public:
    UnitQuaternion() = default;
    UnitQuaternion(double w, double x, double y, double z);
    explicit UnitQuaternion(const Eigen::Quaterniond& q);

    static UnitQuaternion identity() { return {}; }
    static UnitQuaternion from_rotvec(const Vec3& rotvec);
    static UnitQuaternion from_axis_angle(const Vec3& axis, double angle_rad);
    static UnitQuaternion from_matrix(const Mat3& r);

    Mat3 matrix() const { return q_.toRotationMatrix(); }
    Vec3 rotate(const Vec3& v) const { return q_ * v; }
    Vec3 rotvec() const;
    UnitQuaternion inverse() const { return UnitQuaternion(q_.conjugate()); }
    UnitQuaternion operator*(const UnitQuaternion& o) const { return UnitQuaternion(q_ * o.q_); }

    double w() const { return q_.w(); }
    double x() const { return q_.x(); }
    double y() const { return q_.y(); }
    double z() const { return q_.z(); }
    const Eigen::Quaterniond& eigen() const { return q_; }

    void renormalize() { q_.normalize(); }

private:
    Eigen::Quaterniond q_ = Eigen::Quaterniond::Identity();
};

Mat3 skew(const Vec3& v);
Mat3 exp_so3(const Vec3& rotvec);
Vec3 log_so3(const Mat3& r);
// d(exp(w) v)/dw = -exp(w) [v]x Jr(w).
Mat3 right_jacobian_so3(const Vec3& rotvec);
Mat3 rotate_jacobian(const Vec3& rotvec, const Vec3& v);

struct Triangle {
    std::array<int, 3> v{0, 0, 0};

    int operator[](int i) const { return v[static_cast<size_t>(i)]; }
    int& operator[](int i) { return v[static_cast<size_t>(i)]; }
    bool operator==(const Triangle&) const = default;
    bool valid(size_t vertex_count) const;
};

struct ClosestPoint {
    Vec3 point = Vec3::Zero();
    std::array<double, 3> barycentric{1.0, 0.0, 0.0};
    double distance = 0.0;
};

ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);
ClosestPoint closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b);

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);
Vec3 triangle_normal(const Vec3& a, const Vec3& b, const Vec3& c);
Vec3 triangle_incenter(const Vec3& a, const Vec3& b, const Vec3& c);

struct Aabb {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void extend(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void extend(const Aabb& o) {
        lo = lo.cwiseMin(o.lo);
        hi = hi.cwiseMax(o.hi);
    }
    bool empty() const { return lo.x() > hi.x(); }
    bool contains(const Aabb& o) const {
        return (lo.array() <= o.lo.array()).all() && (hi.array() >= o.hi.array()).all();
    }
    Vec3 center() const { return 0.5 * (lo + hi); }
    Vec3 extent() const { return hi - lo; }
    double diagonal() const { return empty() ? 0.0 : extent().norm(); }
    double squared_distance(const Vec3& p) const {
        Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(Vec3::Zero());
        return d.squaredNorm();
    }
};

Aabb bounds_of(std::span<const Vec3> points);

}  // namespace kinemesh
