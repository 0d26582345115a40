#pragma once

#include "kinemesh/geom.hpp"

namespace kinemesh {

// Pinhole camera, OpenCV convention: +x right, +y down, +z forward.
// world_to_camera maps x_world to R * x_world + t.
struct PinholeCamera {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;
    double near = 1e-3;
    double far = 1e3;

    Vec3 to_camera(const Vec3& x_world) const { return rotation * x_world + translation; }
    Vec3 center() const { return -rotation.transpose() * translation; }
    // Throws kinemesh::Error("invalid-camera") when an invariant is broken.
    void validate() const;

    static PinholeCamera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy,
                                 int width, int height, double near, double far);
};

struct Projection {
    Vec2 pixel = Vec2::Zero();
    double depth = 0.0;
    bool valid = false;
};

Projection project_point(const PinholeCamera& cam, const Vec3& x_world);

}  // namespace kinemesh
