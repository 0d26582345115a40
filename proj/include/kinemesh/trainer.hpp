#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kinemesh/articulation.hpp"
#include "kinemesh/losses.hpp"
#include "kinemesh/remesh.hpp"
#include "kinemesh/view.hpp"

namespace kinemesh {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam over one flat parameter group.
class Adam {
public:
    Adam() = default;
    Adam(size_t size, double lr, AdamConfig cfg = {});

    void step(std::span<double> params, std::span<const double> grads);
    void reset();
    void resize(size_t size);

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    long steps() const { return t_; }
    const std::vector<double>& first_moment() const { return m_; }
    const std::vector<double>& second_moment() const { return v_; }

private:
    double lr_ = 1e-3;
    AdamConfig cfg_;
    long t_ = 0;
    std::vector<double> m_, v_;
};

struct TrainConfig {
    int iterations = 4000;       // T
    int recon_split = -1;        // s1; -1 = T / 2
    int remesh_iter = -1;        // -1 = 0.9 * s1; remeshing happens once, then fixed-topology recovery
    bool remesh = true;
    int backward_start = -1;     // -1 = s1 + (T - s1) / 4
    int vertex_start = -1;       // -1 = s1 + (T - s1) / 2
    int bakeoff_iter = -1;       // -1 = s1 + (T - s1) / 2

    double lr_rotation = 8e-3;
    double lr_translation = 1e-3;
    double lr_pivot = 1e-4;
    double lr_logits = 5e-3;
    double lr_color = 1.6e-3;
    double lr_opacity = 3e-2;
    double lr_position_start = 2e-4;
    double lr_position_end = 2e-6;

    double ema_decay = 0.95;
    int views_per_step = 1;  // articulation phase; 0 = every view
    bool geometric_seed = true;     // angle sweep refinement of the revolute seed
    double seed_sweep_deg = 2.0;    // coarse sweep step
    double seed_max_angle_deg = 120.0;

    bool init_from_depth = false;      // build the starting meshes from the training depth maps
    double init_voxel_fraction = 0.03;

    LossWeights weights;
    AblationFlags ablation;
    RasterConfig raster;
    RemeshConfig remesh_config;
    unsigned seed = 0;
    int log_every = 50;

    void validate() const;
    // Copy with every -1 schedule entry replaced by its default.
    TrainConfig resolved() const;
};

struct JointCandidates {
    JointParams revolute;   // R, P free; T = 0
    JointParams prismatic;  // T free; R = I
    std::vector<Vec3> revolute_rotvec;  // exponential-map parameters of the revolute set
    std::vector<double> ema_revolute;   // per part
    std::vector<double> ema_prismatic;
    long revolute_steps = 0;
    long prismatic_steps = 0;
};

struct JointSeed {
    JointParams joints;
    JointCandidates candidates;
    std::vector<Vec3> principal_axes;  // per part (unit, +hemisphere); base entry unused
};

// PCA axis (zero angle), centroid pivot and centroid-difference translation
// for every movable part.
JointSeed seed_articulation(const PartAwareMesh& m1, const PartAwareMesh& m2,
                            std::vector<std::string>* warnings = nullptr);

// Replaces a revolute candidate by the best rotation about one of the part's
// principal axes (angle sweep, pivot solved from the centroid chord), scored
// by the mean distance of transported vertices to the same part in state 2.
// Returns the score.
double refine_revolute_seed(const PartAwareMesh& m1, const PartAwareMesh& m2, const SurfaceIndex& index2, int part,
                            double step_deg, double max_angle_deg, PartJoint& candidate, Vec3& rotvec);

// Mean distance from transported part vertices to the same part of the other
// state (subsampled to at most max_points vertices).
double transport_fit_score(const PartAwareMesh& m1, const SurfaceIndex& index2, int part, const PartJoint& joint,
                           int max_points = 400);

struct BakeOffEntry {
    int part = 0;
    double loss_revolute = 0.0;
    double loss_prismatic = 0.0;
    int masked_views = 0;
    bool fallback = false;
    JointType decision = JointType::Undecided;
};

struct BakeOffResult {
    std::vector<BakeOffEntry> entries;
    JointParams merged;
};

BakeOffResult bake_off(const PartAwareMesh& m1, const JointCandidates& candidates,
                       std::span<const CameraView> end_views, const TrainConfig& cfg);

// Zeroes the gradient entries a joint type is not allowed to change.
void mask_joint_gradients(const JointParams& joints, std::vector<JointGrad>& grads);

struct TrainLogRow {
    int iteration = 0;
    std::string phase;
    double loss = 0.0;
    double pix_fwd = 0.0;
    double pix_bwd = 0.0;
    double vtx_fwd = 0.0;
    double vtx_bwd = 0.0;
    double lr_position = 0.0;
};

std::string train_log_csv(std::span<const TrainLogRow> rows);

// FNV-1a over every mesh attribute and the connectivity.
std::uint64_t mesh_hash(const PartAwareMesh& mesh);

double psnr(const Image& pred, const Image& gt);
// Mean PSNR of renders of `mesh` against the given views.
double mean_psnr(const PartAwareMesh& mesh, std::span<const CameraView> views, const RasterConfig& cfg);

struct ReconstructionResult {
    std::array<PartAwareMesh, 2> meshes;  // hardened
    std::array<double, 2> initial_loss{};
    std::array<double, 2> final_loss{};
    std::vector<TrainLogRow> log;
    std::vector<std::string> warnings;
};

ReconstructionResult run_reconstruction_phase(const std::array<PartAwareMesh, 2>& init,
                                              const std::array<std::vector<CameraView>, 2>& views,
                                              const TrainConfig& cfg);

// Candidate alternation for `iterations` steps starting at `first_iter`;
// even iterations step revolute candidates, odd ones prismatic.
void run_candidate_alternation(JointCandidates& candidates, const std::array<PartAwareMesh, 2>& meshes,
                               const std::array<std::vector<CameraView>, 2>& views, const TrainConfig& cfg,
                               int first_iter, int iterations, std::vector<TrainLogRow>* log = nullptr);

struct ArticulationResult {
    JointParams joints;  // typed, forward t1 -> t2
    JointSeed seed;
    JointCandidates candidates;  // after alternation
    BakeOffResult bakeoff;
    std::vector<TrainLogRow> log;
    std::uint64_t mesh_hash = 0;
    int hash_violations = 0;  // iterations where a mesh hash changed
    // First iteration at which each term contributed a gradient (-1 = never).
    int first_pix_fwd = -1, first_pix_bwd = -1, first_vtx = -1;
    std::vector<std::string> warnings;
};

// Runs iterations [s1, T). When `typed_init` is given its types are kept,
// seeding and the bake-off are skipped and joints start from it.
ArticulationResult run_articulation_phase(const std::array<PartAwareMesh, 2>& meshes,
                                          const std::array<std::vector<CameraView>, 2>& views, const TrainConfig& cfg,
                                          const JointParams* typed_init = nullptr);

struct FitResult {
    ReconstructionResult reconstruction;
    ArticulationResult articulation;
    double seconds = 0.0;
};

FitResult fit(const std::array<PartAwareMesh, 2>& init, const std::array<std::vector<CameraView>, 2>& views,
              const TrainConfig& cfg);

}  // namespace kinemesh
