#pragma once

#include <span>
#include <string>
#include <vector>

#include "kinemesh/mesh_field.hpp"

namespace kinemesh {

struct RemeshConfig {
    double radius_multiplier = 1.5;   // x median seed-edge length
    int max_faces_per_part = 200000;
    bool enforce_manifold = true;
    double min_normal_cos = 0.5;      // |cos| between candidate and nearest seed normal
    int min_vertices_for_delaunay = 30;
    double jitter = 1e-9;             // x bounding-box diagonal
    unsigned seed = 7;

    void validate() const;
};

struct PartRemeshResult {
    std::vector<Triangle> faces;  // global vertex indices
    std::vector<std::string> warnings;
    bool used_seed_fallback = false;
};

// Rebuilds connectivity of one part. `part_vertices` are global indices of
// V_k; `seed_faces` are faces over those vertices (global indices).
PartRemeshResult restricted_delaunay_part(std::span<const Vec3> positions, std::span<const int> part_vertices,
                                          std::span<const Triangle> seed_faces, const RemeshConfig& cfg);

struct RemeshReport {
    std::vector<std::string> warnings;
    std::vector<int> faces_per_part;
    int dropped_cross_part = 0;
};

// Hardened mesh in, same vertex arrays out, faces replaced by the disjoint
// union of per-part results.
PartAwareMesh remesh_all(const PartAwareMesh& mesh, const RemeshConfig& cfg, RemeshReport* report = nullptr);

// Number of edge-connected components among the given faces.
int edge_connected_components(std::span<const Triangle> faces);
// Boundary edges (used by exactly one face), as sorted vertex pairs.
std::vector<std::pair<int, int>> boundary_edges(std::span<const Triangle> faces);

}  // namespace kinemesh
