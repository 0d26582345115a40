#pragma once

#include <array>
#include <string>
#include <vector>

#include "kinemesh/articulation.hpp"
#include "kinemesh/raster.hpp"
#include "kinemesh/view.hpp"

namespace kinemesh {

enum class SceneTemplate { HingedBox, DrawerCabinet, MultiDrawer, DoorDrawer };

std::string to_string(SceneTemplate t);
SceneTemplate scene_template_from_string(const std::string& s);
int template_part_count(SceneTemplate t);

// Ground truth of one movable part. The joint state q in [0, 1] maps
// linearly to q * range (degrees for revolute, scene units for prismatic).
struct JointTruth {
    int part = 1;
    JointType type = JointType::Revolute;
    Vec3 axis = Vec3::UnitZ();
    Vec3 pivot = Vec3::Zero();
    double range = 0.0;
    double q_start = 0.7;
    double q_end = 0.3;

    PartJoint at(double q) const;      // motion from the closed configuration
    PartJoint relative() const;        // motion from q_start to q_end
    double motion() const { return (q_end - q_start) * range; }  // signed
};

struct SceneSpec {
    SceneTemplate tmpl = SceneTemplate::HingedBox;
    int num_parts = 0;  // 0 = template default; otherwise must match
    unsigned seed = 0;
    int train_views = 16;
    int test_views = 4;
    int image_size = 64;
    double camera_radius = 2.6;
    double fov_deg = 42.0;
    double edge_length = 0.15;      // target mesh edge length
    double albedo_contrast = 1.0;   // amplitude of the per-vertex albedo pattern
    double hinge_range_deg = 60.0;
    double drawer_range = 0.4;
    double q_start_lo = 0.6, q_start_hi = 0.8;
    double q_end_lo = 0.2, q_end_hi = 0.4;
    RasterConfig raster;

    void validate() const;
};

struct GroundTruth {
    int num_parts = 1;
    std::vector<JointTruth> joints;   // one per movable part, ordered by part
    std::array<PartAwareMesh, 2> mesh; // hardened, per state
    double units_to_meters = 1.0;

    JointParams joint_params() const;  // forward t1 -> t2
};

struct Scene {
    SceneSpec spec;
    GroundTruth gt;
    std::array<std::vector<CameraView>, 2> train;
    std::array<std::vector<CameraView>, 2> test;
};

Scene generate_scene(const SceneSpec& spec);

// Renders one view of a hardened mesh: RGB, depth and the label of the
// front-most contributing face.
CameraView render_view(const PartAwareMesh& mesh, const PinholeCamera& cam, const RasterConfig& cfg, int state);

// Seeded Gaussian jitter of vertex positions; every other attribute is kept.
PartAwareMesh perturb_for_init(const PartAwareMesh& mesh, double noise_sigma, unsigned seed);

// Training initialization for both states: positions jittered by
// noise_fraction of the bounding-box diagonal, colors reset to gray,
// part logits kept.
std::array<PartAwareMesh, 2> initial_meshes(const GroundTruth& gt, double noise_fraction = 0.01, unsigned seed = 0);

// Closed box surface with approximately uniform edge length, outward
// winding, shared vertices welded.
void box_surface(const Vec3& lo, const Vec3& hi, double edge_length, std::vector<Vec3>& positions,
                 std::vector<Triangle>& faces);

}  // namespace kinemesh
