#include "kinemesh/camera.hpp"

#include <cmath>

#include "kinemesh/error.hpp"

namespace kinemesh {

void PinholeCamera::validate() const {
    if (!(fx > 0.0 && fy > 0.0)) throw Error("invalid-camera", "focal lengths must be positive");
    if (!(near < far)) throw Error("invalid-camera", "near must be smaller than far");
    if (width <= 0 || height <= 0) throw Error("invalid-camera", "image size must be positive");
    const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-9 || rotation.determinant() < 0.0)
        throw Error("invalid-camera", "pose rotation is not orthonormal");
}

PinholeCamera PinholeCamera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx,
                                     double fy, int width, int height, double near, double far) {
    const Vec3 z = (target - eye).normalized();
    Vec3 x = z.cross(up);
    if (x.norm() < 1e-9) x = z.cross(Vec3::UnitX());
    if (x.norm() < 1e-9) x = z.cross(Vec3::UnitY());
    x.normalize();
    const Vec3 y = z.cross(x);
    PinholeCamera cam;
    cam.rotation.row(0) = x.transpose();
    cam.rotation.row(1) = y.transpose();
    cam.rotation.row(2) = z.transpose();
    cam.translation = -cam.rotation * eye;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.width = width;
    cam.height = height;
    cam.near = near;
    cam.far = far;
    return cam;
}

Projection project_point(const PinholeCamera& cam, const Vec3& x_world) {
    const Vec3 xc = cam.to_camera(x_world);
    Projection out;
    out.depth = xc.z();
    if (xc.z() <= 0.0) return out;
    out.pixel = Vec2(cam.fx * xc.x() / xc.z() + cam.cx, cam.fy * xc.y() / xc.z() + cam.cy);
    out.valid = true;
    return out;
}

}  // namespace kinemesh
