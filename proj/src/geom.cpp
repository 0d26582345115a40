#include "kinemesh/geom.hpp"

#include <algorithm>
#include <cmath>

namespace kinemesh {

UnitQuaternion::UnitQuaternion(double w, double x, double y, double z) : q_(w, x, y, z) {
    q_.normalize();
}

UnitQuaternion::UnitQuaternion(const Eigen::Quaterniond& q) : q_(q) { q_.normalize(); }

UnitQuaternion UnitQuaternion::from_rotvec(const Vec3& rotvec) {
    const double theta = rotvec.norm();
    if (theta < 1e-12) {
        // first-order expansion keeps the map smooth through zero
        return UnitQuaternion(1.0, 0.5 * rotvec.x(), 0.5 * rotvec.y(), 0.5 * rotvec.z());
    }
    return from_axis_angle(rotvec / theta, theta);
}

UnitQuaternion UnitQuaternion::from_axis_angle(const Vec3& axis, double angle_rad) {
    return UnitQuaternion(Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis.normalized())));
}

UnitQuaternion UnitQuaternion::from_matrix(const Mat3& r) {
    return UnitQuaternion(Eigen::Quaterniond(r));
}

Vec3 UnitQuaternion::rotvec() const {
    Eigen::Quaterniond q = q_;
    if (q.w() < 0.0) q.coeffs() *= -1.0;
    const Vec3 xyz(q.x(), q.y(), q.z());
    const double s = xyz.norm();
    if (s < 1e-12) return 2.0 * xyz;
    const double angle = 2.0 * std::atan2(s, q.w());
    return xyz * (angle / s);
}

Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

Mat3 exp_so3(const Vec3& rotvec) {
    const double theta = rotvec.norm();
    const Mat3 k = skew(rotvec);
    if (theta < 1e-8) return Mat3::Identity() + k + 0.5 * k * k;
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    return Mat3::Identity() + a * k + b * k * k;
}

Vec3 log_so3(const Mat3& r) {
    return UnitQuaternion::from_matrix(r).rotvec();
}

Mat3 right_jacobian_so3(const Vec3& rotvec) {
    const double theta = rotvec.norm();
    const Mat3 k = skew(rotvec);
    if (theta < 1e-5) return Mat3::Identity() - 0.5 * k + (1.0 / 6.0) * k * k;
    const double t2 = theta * theta;
    const double a = (1.0 - std::cos(theta)) / t2;
    const double b = (theta - std::sin(theta)) / (t2 * theta);
    return Mat3::Identity() - a * k + b * k * k;
}

Mat3 rotate_jacobian(const Vec3& rotvec, const Vec3& v) {
    return -exp_so3(rotvec) * skew(v) * right_jacobian_so3(rotvec);
}

bool Triangle::valid(size_t vertex_count) const {
    for (int i : v)
        if (i < 0 || static_cast<size_t>(i) >= vertex_count) return false;
    return v[0] != v[1] && v[1] != v[2] && v[0] != v[2];
}

ClosestPoint closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    ClosestPoint out;
    out.point = a + t * ab;
    out.barycentric = {1.0 - t, t, 0.0};
    out.distance = (p - out.point).norm();
    return out;
}

namespace {

ClosestPoint degenerate_closest(const Vec3& p, const std::array<Vec3, 3>& v) {
    // Longest edge spans the collinear set.
    int best = 0;
    double best_len = -1.0;
    for (int e = 0; e < 3; ++e) {
        const double len = (v[(e + 1) % 3] - v[e]).squaredNorm();
        if (len > best_len) {
            best_len = len;
            best = e;
        }
    }
    const int i = best;
    const int j = (best + 1) % 3;
    ClosestPoint seg = closest_point_on_segment(p, v[i], v[j]);
    ClosestPoint out;
    out.point = seg.point;
    out.distance = seg.distance;
    out.barycentric = {0.0, 0.0, 0.0};
    out.barycentric[i] = seg.barycentric[0];
    out.barycentric[j] = seg.barycentric[1];
    return out;
}

ClosestPoint make(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, double u, double v, double w) {
    ClosestPoint out;
    out.barycentric = {u, v, w};
    out.point = u * a + v * b + w * c;
    out.distance = (p - out.point).norm();
    return out;
}

}  // namespace

// Region-based closest point (Ericson, Real-Time Collision Detection 5.1.5).
ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const double scale2 = std::max({ab.squaredNorm(), ac.squaredNorm(), (c - b).squaredNorm()});
    if (scale2 == 0.0) return make(p, a, b, c, 1.0, 0.0, 0.0);
    if (ab.cross(ac).squaredNorm() <= 1e-24 * scale2 * scale2) return degenerate_closest(p, {a, b, c});

    const Vec3 ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return make(p, a, b, c, 1.0, 0.0, 0.0);

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return make(p, a, b, c, 0.0, 1.0, 0.0);

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return make(p, a, b, c, 1.0 - v, v, 0.0);
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return make(p, a, b, c, 0.0, 0.0, 1.0);

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return make(p, a, b, c, 1.0 - w, 0.0, w);
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return make(p, a, b, c, 0.0, 1.0 - w, w);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return make(p, a, b, c, 1.0 - v - w, v, w);
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * (b - a).cross(c - a).norm();
}

Vec3 triangle_normal(const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 n = (b - a).cross(c - a);
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

Vec3 triangle_incenter(const Vec3& a, const Vec3& b, const Vec3& c) {
    const double la = (b - c).norm();
    const double lb = (c - a).norm();
    const double lc = (a - b).norm();
    const double sum = la + lb + lc;
    if (sum <= 0.0) return a;
    return (la * a + lb * b + lc * c) / sum;
}

Aabb bounds_of(std::span<const Vec3> points) {
    Aabb box;
    for (const Vec3& p : points) box.extend(p);
    return box;
}

}  // namespace kinemesh
