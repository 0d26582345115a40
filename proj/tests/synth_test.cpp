#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "kinemesh/error.hpp"
#include "kinemesh/synth.hpp"
#include "test_util.hpp"

namespace kinemesh {
namespace {

SceneSpec small_spec(SceneTemplate t, unsigned seed) {
    SceneSpec s;
    s.tmpl = t;
    s.seed = seed;
    s.train_views = 3;
    s.test_views = 1;
    s.image_size = 24;
    return s;
}

TEST(Synth, HingeRelativeRotation) {
    JointTruth j{1, JointType::Revolute, Vec3::UnitX(), Vec3(0, 0.3, 0.4), 60.0, 0.7, 0.3};
    const PartJoint rel = j.relative();
    const Vec3 rv = rel.rotation.rotvec();
    EXPECT_NEAR(rv.norm() * 180.0 / std::numbers::pi, 24.0, 1e-9);
    EXPECT_NEAR(rv.normalized().dot(-Vec3::UnitX()), 1.0, 1e-12);
    EXPECT_NEAR(j.motion(), -24.0, 1e-12);
}

TEST(Synth, DrawerTranslationMagnitude) {
    JointTruth j{1, JointType::Prismatic, -Vec3::UnitY(), Vec3::Zero(), 0.4, 0.75, 0.25};
    EXPECT_NEAR(j.relative().translation.norm(), 0.4 * 0.5, 1e-12);
    EXPECT_NEAR(j.relative().translation.dot(Vec3::UnitY()), 0.2, 1e-12);
}

TEST(Synth, TemplateNames) {
    for (SceneTemplate t : {SceneTemplate::HingedBox, SceneTemplate::DrawerCabinet, SceneTemplate::MultiDrawer,
                            SceneTemplate::DoorDrawer})
        EXPECT_EQ(scene_template_from_string(to_string(t)), t);
    EXPECT_THROW(scene_template_from_string("lamp"), Error);
    EXPECT_EQ(template_part_count(SceneTemplate::DoorDrawer), 4);
}

TEST(Synth, PartCountMismatchThrows) {
    SceneSpec s = small_spec(SceneTemplate::HingedBox, 0);
    s.num_parts = 3;
    try {
        generate_scene(s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "template-mismatch");
    }
}

TEST(Synth, BoxSurfaceClosedAndOutward) {
    std::vector<Vec3> pos;
    std::vector<Triangle> faces;
    box_surface(Vec3(-0.4, -0.3, 0), Vec3(0.4, 0.3, 0.45), 0.15, pos, faces);
    double area = 0, volume = 0;
    for (const Triangle& f : faces) {
        const Vec3 &a = pos[static_cast<size_t>(f[0])], &b = pos[static_cast<size_t>(f[1])],
                   &c = pos[static_cast<size_t>(f[2])];
        area += triangle_area(a, b, c);
        volume += a.dot(b.cross(c)) / 6.0;
    }
    EXPECT_NEAR(area, 2 * (0.8 * 0.6 + 0.8 * 0.45 + 0.6 * 0.45), 1e-12);
    EXPECT_NEAR(volume, 0.8 * 0.6 * 0.45, 1e-12);  // positive: outward winding
    // Euler characteristic of a welded closed surface
    EXPECT_EQ(static_cast<long>(pos.size()) - static_cast<long>(faces.size()) / 2, 2);
}

class SynthTemplates : public ::testing::TestWithParam<SceneTemplate> {};

TEST_P(SynthTemplates, CrossStateExactness) {
    const Scene sc = generate_scene(small_spec(GetParam(), 5));
    const auto& gt = sc.gt;
    ASSERT_EQ(static_cast<int>(gt.joints.size()), gt.num_parts - 1);
    const auto moved = transport_vertices(gt.mesh[0], gt.joint_params(), Direction::Forward);
    double worst = 0;
    for (size_t i = 0; i < moved.size(); ++i) worst = std::max(worst, (moved[i] - gt.mesh[1].positions[i]).norm());
    EXPECT_LT(worst, 1e-12);
    for (const JointTruth& j : gt.joints) {
        EXPECT_NEAR(j.axis.norm(), 1.0, 1e-12);
        EXPECT_GE(j.q_start, 0.6);
        EXPECT_LE(j.q_start, 0.8);
        EXPECT_GE(j.q_end, 0.2);
        EXPECT_LE(j.q_end, 0.4);
    }
}

TEST_P(SynthTemplates, SegmentationMatchesFrontFace) {
    const Scene sc = generate_scene(small_spec(GetParam(), 2));
    for (int s = 0; s < 2; ++s) {
        const auto& mesh = sc.gt.mesh[static_cast<size_t>(s)];
        for (const CameraView& v : sc.train[static_cast<size_t>(s)]) {
            const RenderBuffers b = render(mesh, v.camera, sc.spec.raster, true);
            const auto front = b.front_faces();
            int covered = 0;
            for (size_t p = 0; p < front.size(); ++p) {
                const int expect = front[p] < 0 ? -1 : mesh.labels[static_cast<size_t>(mesh.faces[static_cast<size_t>(front[p])][1])];
                ASSERT_EQ(v.labels.labels[p], expect);
                covered += expect >= 0;
            }
            EXPECT_GT(covered, 0);
        }
    }
}

INSTANTIATE_TEST_SUITE_P(All, SynthTemplates,
                         ::testing::Values(SceneTemplate::HingedBox, SceneTemplate::DrawerCabinet,
                                           SceneTemplate::MultiDrawer, SceneTemplate::DoorDrawer));

TEST(Synth, DeterministicBitwise) {
    const Scene a = generate_scene(small_spec(SceneTemplate::DoorDrawer, 11));
    const Scene b = generate_scene(small_spec(SceneTemplate::DoorDrawer, 11));
    for (int s = 0; s < 2; ++s) {
        EXPECT_EQ(a.gt.mesh[static_cast<size_t>(s)].positions, b.gt.mesh[static_cast<size_t>(s)].positions);
        for (size_t v = 0; v < a.train[static_cast<size_t>(s)].size(); ++v) {
            EXPECT_EQ(a.train[static_cast<size_t>(s)][v].rgb.data, b.train[static_cast<size_t>(s)][v].rgb.data);
            EXPECT_EQ(a.train[static_cast<size_t>(s)][v].depth.data, b.train[static_cast<size_t>(s)][v].depth.data);
        }
    }
    const Scene c = generate_scene(small_spec(SceneTemplate::DoorDrawer, 12));
    EXPECT_NE(a.gt.mesh[0].positions, c.gt.mesh[0].positions);
}

TEST(Synth, PlaneDepthMatchesRayIntersection) {
    std::vector<Vec3> pos;
    std::vector<Triangle> faces;
    testing::append_grid(pos, faces, 4, 2.0, Vec3(-1, -1, 0));
    PartAwareMesh m = testing::make_mesh(pos, faces, 1, std::vector<int>(pos.size(), 0));
    m = harden_parts(m);
    const PinholeCamera cam =
        PinholeCamera::look_at(Vec3(0.3, -0.8, 1.5), Vec3::Zero(), Vec3::UnitZ(), 30, 30, 32, 32, 0.05, 20);
    const CameraView v = render_view(m, cam, RasterConfig{}, 0);
    const Vec3 n = cam.rotation * Vec3::UnitZ();  // plane normal in camera frame
    const double d = n.dot(cam.translation);       // plane: n . x = d
    int checked = 0;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const double depth = v.depth.at(x, y, 0);
            if (depth <= 0) continue;
            const Vec3 ray((x + 0.5 - cam.cx) / cam.fx, (y + 0.5 - cam.cy) / cam.fy, 1.0);
            EXPECT_NEAR(depth, d / n.dot(ray), 1e-4) << x << "," << y;
            ++checked;
        }
    EXPECT_GT(checked, 100);
}

TEST(Synth, PerturbZeroIsIdentity) {
    const Scene sc = generate_scene(small_spec(SceneTemplate::HingedBox, 1));
    const PartAwareMesh p = perturb_for_init(sc.gt.mesh[0], 0.0, 3);
    EXPECT_EQ(p.positions, sc.gt.mesh[0].positions);
    EXPECT_EQ(p.sh, sc.gt.mesh[0].sh);
}

TEST(Synth, PerturbMeanDisplacement) {
    std::vector<Vec3> pos(20000, Vec3::Zero());
    PartAwareMesh m = testing::make_mesh(pos, {});
    const double sigma = 0.01 * 1.3;
    const PartAwareMesh p = perturb_for_init(m, sigma, 9);
    double mean = 0;
    for (const Vec3& q : p.positions) mean += q.norm();
    mean /= static_cast<double>(pos.size());
    // Maxwell mean: 2 sigma sqrt(2 / pi)
    const double expected = 2.0 * sigma * std::sqrt(2.0 / std::numbers::pi);
    EXPECT_NEAR(mean / expected, 1.0, 0.05);
    EXPECT_EQ(p.opacity, m.opacity);
}

TEST(Synth, PerturbNegativeSigmaThrows) {
    PartAwareMesh m = testing::make_mesh({Vec3::Zero()}, {});
    EXPECT_THROW(perturb_for_init(m, -0.1, 0), Error);
}

}  // namespace
}  // namespace kinemesh
