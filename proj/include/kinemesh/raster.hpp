#pragma once

#include <array>
#include <memory>
#include <vector>

#include "kinemesh/camera.hpp"
#include "kinemesh/image.hpp"
#include "kinemesh/mesh_field.hpp"

namespace kinemesh {

struct RasterConfig {
    double gamma = 2.0;                       // window sharpness exponent
    Vec3 background = Vec3::Zero();
    int max_faces_per_pixel = 32;
    double min_transmittance = 1e-4;          // early stop
    double depth_min_opacity = 0.05;          // below this the depth pixel is invalid
    double min_projected_area = 1e-10;        // pixels^2; smaller faces are skipped

    void validate() const;
};

// One face's contribution at one pixel, kept for the backward pass.
struct PixelRecord {
    int face = -1;
    double phi = 0.0;
    double sigma = 0.0;
    double alpha = 0.0;
    double transmittance = 1.0;  // product of (1 - alpha) over faces in front
    std::array<double, 3> weights{};  // perspective-correct barycentrics
    double depth = 0.0;
    Vec3 color = Vec3::Zero();
};

struct RenderBuffers {
    int width = 0;
    int height = 0;
    int num_parts = 1;
    Image rgb;       // 3 channels
    Image depth;     // opacity-normalized camera depth, 0 where invalid
    Image logits;    // num_parts channels, transmittance-weighted
    Image opacity;   // accumulated opacity 1 - prod(1 - alpha)

    // Backward-pass state (present when rendered with want_grads).
    bool has_records = false;
    std::vector<size_t> record_offsets;  // pixel_count + 1
    std::vector<PixelRecord> records;
    std::vector<double> raw_depth;       // sum of w_n d_n per pixel
    std::shared_ptr<const PartAwareMesh> mesh;
    std::vector<Vec3> view_colors;       // per-vertex color for this camera
    PinholeCamera camera;
    RasterConfig config;

    size_t pixel_count() const { return static_cast<size_t>(width) * static_cast<size_t>(height); }
    // Front-most contributing face per pixel (-1 if none). Requires records.
    std::vector<int> front_faces() const;
};

// Window function of a projected triangle at a pixel; 1 at the incenter,
// 0 on and outside the boundary. Returns 0 for degenerate triangles.
double face_window(const Vec2& pixel, const std::array<Vec2, 3>& tri, double gamma);

RenderBuffers render(const PartAwareMesh& mesh, const PinholeCamera& cam, const RasterConfig& cfg, bool want_grads);

// Upstream gradients per pixel. Empty vectors mean zero.
struct PixelGradients {
    std::vector<double> rgb;     // pixel_count * 3
    std::vector<double> depth;   // pixel_count, w.r.t. the normalized depth
    std::vector<double> logits;  // pixel_count * num_parts
};

struct MeshGradients {
    std::vector<Vec3> positions;
    std::vector<double> sh;
    std::vector<double> opacity;
    std::vector<double> logits;

    void resize_like(const PartAwareMesh& mesh);
    MeshGradients& operator+=(const MeshGradients& o);
};

MeshGradients render_backward(const RenderBuffers& buffers, const PixelGradients& grads);

}  // namespace kinemesh
