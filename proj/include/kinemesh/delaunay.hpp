#pragma once

#include <array>
#include <span>
#include <vector>

#include "kinemesh/geom.hpp"

namespace kinemesh {

struct Tetrahedron {
    std::array<int, 4> v{};
};

// Bowyer-Watson tetrahedralization. Points are expected to be in general
// position (callers jitter degenerate inputs). Returned tetrahedra index the
// input points and are positively oriented.
std::vector<Tetrahedron> delaunay_tetrahedralize(std::span<const Vec3> points);

// All distinct triangles appearing as a face of any Delaunay tetrahedron,
// including convex-hull faces. Indices sorted ascending within a triangle,
// list sorted lexicographically.
std::vector<Triangle> delaunay_faces(std::span<const Vec3> points);

double orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);
double triangle_circumradius(const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace kinemesh
