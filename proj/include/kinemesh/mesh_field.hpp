#pragma once

#include <span>
#include <string>
#include <vector>

#include "kinemesh/geom.hpp"

namespace kinemesh {

// Number of spherical-harmonic coefficients per color channel.
inline int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

struct VertexAttr {
    Vec3 position = Vec3::Zero();
    std::vector<double> sh;      // sh_coeff_count(degree) * 3, coefficient-major (k0.rgb, k1.rgb, ...)
    double opacity = 1.0;
    std::vector<double> logits;  // num_parts
};

// Part-aware triangle mesh for one articulation state. Vertex attributes are
// stored structure-of-arrays so optimizers can treat each group as a flat
// parameter block. Part 0 is the static base; parts 1..K are movable.
struct PartAwareMesh {
    int state = 0;
    int num_parts = 1;  // K + 1
    int sh_degree = 0;

    std::vector<Vec3> positions;
    std::vector<double> sh;       // vertex_count * sh_stride()
    std::vector<double> opacity;  // clamped to [0, 1]
    std::vector<double> logits;   // vertex_count * num_parts
    std::vector<Triangle> faces;

    std::vector<int> labels;                   // hardened labels; empty until harden_parts
    std::vector<std::vector<int>> part_faces;  // per-part face index lists into faces

    size_t vertex_count() const { return positions.size(); }
    int sh_stride() const { return 3 * sh_coeff_count(sh_degree); }
    bool hardened() const { return !labels.empty() && labels.size() == positions.size(); }

    std::span<const double> vertex_logits(size_t i) const {
        return {logits.data() + i * static_cast<size_t>(num_parts), static_cast<size_t>(num_parts)};
    }
    std::span<const double> vertex_sh(size_t i) const {
        return {sh.data() + i * static_cast<size_t>(sh_stride()), static_cast<size_t>(sh_stride())};
    }
    Vec3 base_color(size_t i) const {
        const double* c = sh.data() + i * static_cast<size_t>(sh_stride());
        return {c[0], c[1], c[2]};
    }

    VertexAttr vertex(size_t i) const;
    void push_vertex(const VertexAttr& v);
    // Resizes every attribute array to n vertices with neutral defaults.
    void resize_vertices(size_t n);

    // Throws kinemesh::Error on size mismatches, bad face indices or
    // non-finite attributes.
    void validate() const;
    Aabb bounds() const { return bounds_of(positions); }
    // Faces of part k as a standalone mesh (positions compacted).
    void extract_part(int k, std::vector<Vec3>& out_positions, std::vector<Triangle>& out_faces) const;
};

// Evaluates the SH color of vertex i seen along view_dir (unit, camera to
// vertex). Degree 0 stores RGB directly.
Vec3 eval_vertex_color(const PartAwareMesh& mesh, size_t i, const Vec3& view_dir);
// Basis values matching eval_vertex_color; size sh_coeff_count(degree).
std::vector<double> sh_basis(int degree, const Vec3& view_dir);

std::vector<double> part_weights(std::span<const double> logits);
int argmax_part(std::span<const double> values);

PartAwareMesh harden_parts(const PartAwareMesh& mesh);

struct FacePartition {
    std::vector<std::vector<int>> per_part;
    std::vector<int> dropped;
};

FacePartition partition_faces(const PartAwareMesh& mesh);

// Sets logits so that argmax is the given label with margin `scale`.
void set_one_hot_logits(PartAwareMesh& mesh, std::span<const int> labels, double scale);

}  // namespace kinemesh
