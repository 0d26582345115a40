#pragma once

#include <span>
#include <vector>

#include "kinemesh/articulation.hpp"
#include "kinemesh/bvh.hpp"
#include "kinemesh/raster.hpp"
#include "kinemesh/view.hpp"

namespace kinemesh {

struct LossWeights {
    double rgb = 0.8;
    double ssim = 0.2;
    double depth = 0.5;
    double part = 0.1;
    double vtx_color = 1.0;
    double vtx_opacity = 1.0;
    double vmc = 5e-2;
    double pmc = 5e-2;
    double tau = 0.0;            // scene units; <= 0 selects tau_fraction of the bbox diagonal
    double tau_fraction = 0.05;

    void validate() const;
    double resolve_tau(double bbox_diagonal) const { return tau > 0.0 ? tau : tau_fraction * bbox_diagonal; }
};

// Independent switches mirroring the ablation study columns.
struct AblationFlags {
    bool vertex_color = true;
    bool vertex_opacity = true;
    bool backward = true;
    bool part_aware = true;
};

// Mean SSIM over pixels and channels (11x11 Gaussian window, sigma 1.5,
// zero padding, dynamic range 1). When grad_a is given it receives dSSIM/da.
double ssim(const Image& a, const Image& b, std::vector<double>* grad_a = nullptr);
// Per-pixel SSIM averaged over channels.
std::vector<double> ssim_map(const Image& a, const Image& b);

// l = w_rgb * mean|a - b| + w_ssim * (1 - SSIM(a, b)). grad receives dl/da.
double photometric_loss(const Image& pred, const Image& gt, double w_rgb, double w_ssim,
                        std::vector<double>* grad = nullptr);
// Photometric loss restricted to pixels where mask is nonzero; both the L1
// and the SSIM map are averaged over the mask. Returns -1 for an empty mask.
double masked_photometric_loss(const Image& pred, const Image& gt, std::span<const unsigned char> mask, double w_rgb,
                               double w_ssim);

struct ReconstructionTerms {
    double rgb_l1 = 0.0;
    double ssim = 1.0;
    double depth_l1 = 0.0;
    double part_ce = 0.0;
    double total = 0.0;
};

ReconstructionTerms reconstruction_loss(const RenderBuffers& pred, const CameraView& gt, const LossWeights& w,
                                        PixelGradients* grads = nullptr);

struct VertexMatch {
    int source = -1;
    int face = -1;  // index into target faces, -1 if the part has no faces
    std::array<double, 3> barycentric{1.0, 0.0, 0.0};
    Vec3 point = Vec3::Zero();
    double distance = 0.0;
    bool valid = false;
};

// Per-part BVHs over a frozen target mesh plus a global one for the
// part-agnostic ablation.
class SurfaceIndex {
public:
    explicit SurfaceIndex(const PartAwareMesh& target);
    const TriangleBvh& part(int k) const { return parts_[static_cast<size_t>(k)]; }
    const TriangleBvh& global() const { return global_; }
    int num_parts() const { return static_cast<int>(parts_.size()); }

private:
    std::vector<TriangleBvh> parts_;
    TriangleBvh global_;
};

std::vector<VertexMatch> match_vertices(const PartAwareMesh& source, const SurfaceIndex& target_index,
                                        std::span<const Vec3> transported, double tau, bool part_aware = true);

// Mean over all source vertices of eta * [lc |c - c~|^2 + ls |s - s~|^2].
// grad_positions receives dL/d(transported position) with the matched faces
// held fixed.
double vertex_consistency_loss(std::span<const VertexMatch> matches, const PartAwareMesh& source,
                               const PartAwareMesh& target, const LossWeights& w, const AblationFlags& flags,
                               std::vector<Vec3>* grad_positions = nullptr);

// Transport + match + loss + chain rule to the joint variables of every part.
double vertex_motion_loss(const PartAwareMesh& source, const PartAwareMesh& target, const SurfaceIndex& target_index,
                          const JointParams& joints, Direction dir, const LossWeights& w, const AblationFlags& flags,
                          double tau, std::vector<JointGrad>* grads = nullptr, std::span<const Vec3> rotvecs = {});

// Articulates source, renders it from every target view and averages the
// photometric loss. grads (per part) chain through the rasterizer.
double pixel_consistency_loss(const PartAwareMesh& source, const JointParams& joints, Direction dir,
                              std::span<const CameraView> target_views, const RasterConfig& cfg,
                              const LossWeights& w, std::vector<JointGrad>* grads = nullptr,
                              std::span<const Vec3> rotvecs = {});

double motion_total(double vtx_fwd, double vtx_bwd, double pix_fwd, double pix_bwd, const LossWeights& w);

}  // namespace kinemesh
