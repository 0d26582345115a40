#pragma once

#include <span>
#include <string>
#include <vector>

#include "kinemesh/io.hpp"
#include "kinemesh/mesh_field.hpp"
#include "kinemesh/remesh.hpp"
#include "kinemesh/trainer.hpp"
#include "kinemesh/view.hpp"

namespace kinemesh {

struct DepthInitConfig {
    double voxel_fraction = 0.03;  // merge cell, x bounding-box diagonal of the back-projected points
    double max_depth_jump = 0.05;  // relative depth step that breaks a pixel-grid triangle
    double logit_scale = 2.0;
    RemeshConfig remesh;

    void validate() const;
};

// Back-projects every labelled pixel with valid depth, merges the points per
// part on a voxel grid and triangulates each part. Pixel-grid triangles of the
// depth maps seed the per-part restricted Delaunay pass. Colors are voxel
// means of the observed RGB. The result is hardened.
PartAwareMesh mesh_from_depth(std::span<const CameraView> views, int num_parts, const DepthInitConfig& cfg = {},
                              std::vector<std::string>* warnings = nullptr);

// Starting meshes for fit: built from the training views when
// cfg.init_from_depth is set, else the dataset's init meshes (missing-init
// when it has none).
std::array<PartAwareMesh, 2> starting_meshes(const Dataset& data, const TrainConfig& cfg,
                                             std::vector<std::string>* warnings = nullptr);

// World-space point seen at the center of pixel (x, y) at camera depth z.
Vec3 back_project(const PinholeCamera& cam, int x, int y, double z);

}  // namespace kinemesh
