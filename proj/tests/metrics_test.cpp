#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "kinemesh/error.hpp"
#include "kinemesh/metrics.hpp"
#include "test_util.hpp"

namespace kinemesh {
namespace {

double brute_force_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    auto directed = [](const std::vector<Vec3>& q, const std::vector<Vec3>& r) {
        double sum = 0;
        for (const Vec3& p : q) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3& s : r) best = std::min(best, (p - s).norm());
            sum += best;
        }
        return sum / static_cast<double>(q.size());
    };
    return 0.5 * (directed(a, b) + directed(b, a));
}

void unit_square(std::vector<Vec3>& pos, std::vector<Triangle>& faces, double z) {
    pos = {{0, 0, z}, {1, 0, z}, {1, 1, z}, {0, 1, z}};
    faces = {{{0, 1, 2}}, {{0, 2, 3}}};
}

TEST(AxisAngle, Examples) {
    EXPECT_NEAR(axis_angle_error(Vec3(0, 0, 1), Vec3(0, 0, 2)).signed_deg, 0.0, 1e-12);
    EXPECT_NEAR(axis_angle_error(Vec3(1, 0, 0), Vec3(0, 1, 0)).signed_deg, 90.0, 1e-12);
    const AxisAngleError anti = axis_angle_error(Vec3(0, 1, 0), Vec3(0, -1, 0));
    EXPECT_NEAR(anti.signed_deg, 180.0, 1e-12);
    EXPECT_NEAR(anti.folded_deg, 0.0, 1e-12);
    EXPECT_THROW(axis_angle_error(Vec3::Zero(), Vec3::UnitX()), Error);
}

TEST(AxisAngle, SymmetricAndNonNegative) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        const Vec3 a = testing::random_vec(rng), b = testing::random_vec(rng);
        const auto ab = axis_angle_error(a, b), ba = axis_angle_error(b, a);
        EXPECT_DOUBLE_EQ(ab.signed_deg, ba.signed_deg);
        EXPECT_GE(ab.folded_deg, 0.0);
        EXPECT_LE(ab.folded_deg, 90.0);
    }
}

TEST(AxisPos, Examples) {
    const AxisLine a{Vec3(0, 0, 0), Vec3(0, 0, 1)};
    EXPECT_NEAR(axis_pos_error(a, AxisLine{Vec3(0, 0, 5), Vec3(0, 0, -1)}), 0.0, 1e-12);
    const AxisLine shifted{Vec3(0.03, 0.04, 1.0), Vec3(0, 0, 1)};
    EXPECT_NEAR(axis_pos_error(a, shifted), 0.5, 1e-12);  // 0.05 / 0.1
    EXPECT_NEAR(axis_pos_error(shifted, a), 0.5, 1e-12);
    EXPECT_NEAR(axis_pos_error(a, shifted, 1.0, AxisPosMode::OriginToOrigin), std::sqrt(1.0025) / 0.1, 1e-12);
    EXPECT_NEAR(axis_pos_error(a, shifted, 2.0), 1.0, 1e-12);
}

TEST(AxisPos, SkewLineMatchesDenseSampling) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const AxisLine pred{testing::random_vec(rng), testing::random_vec(rng)};
        const AxisLine gt{testing::random_vec(rng), testing::random_vec(rng)};
        const Vec3 u = pred.direction.normalized();
        double best = std::numeric_limits<double>::infinity();
        for (int i = -200000; i <= 200000; ++i)
            best = std::min(best, (pred.origin + (i * 1e-5) * u - gt.origin).norm());
        EXPECT_NEAR(axis_pos_error(pred, gt), best / 0.1, 1e-7);
    }
}

TEST(JointAxisLine, ScrewAxisOfPivotForm) {
    PartJoint j;
    j.type = JointType::Revolute;
    j.rotation = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), 0.6);
    j.pivot = Vec3(1, 2, 0);
    const AxisLine line = joint_axis_line(j);
    EXPECT_NEAR(axis_pos_error(line, AxisLine{Vec3(1, 2, 7), Vec3::UnitZ()}), 0.0, 1e-12);
    // same motion expressed with a different pivot plus a translation
    PartJoint k = j;
    k.pivot = Vec3(-1, 0.5, 3);
    k.translation = j.rotation.rotate(k.pivot - j.pivot) + j.pivot - k.pivot;
    EXPECT_NEAR(axis_pos_error(joint_axis_line(k), AxisLine{Vec3(1, 2, 0), Vec3::UnitZ()}), 0.0, 1e-9);
}

GroundTruth hinge_truth() {
    GroundTruth gt;
    gt.num_parts = 2;
    gt.joints = {{1, JointType::Revolute, Vec3::UnitX(), Vec3(0, 0.3, 0.4), 60.0, 0.7, 0.3}};
    return gt;
}

TEST(PartMotion, Examples) {
    const GroundTruth gt = hinge_truth();
    JointParams pred = gt.joint_params();
    pred.parts[1].type = JointType::Revolute;
    EXPECT_NEAR(part_motion_error(pred, gt, 1).value, 0.0, 1e-10);
    pred.parts[1].rotation = UnitQuaternion::from_axis_angle(-Vec3::UnitX(), 30.0 * std::numbers::pi / 180.0);
    EXPECT_NEAR(part_motion_error(pred, gt, 1).value, 6.0, 1e-10);
    pred.parts[1].type = JointType::Prismatic;
    const PartMotionError m = part_motion_error(pred, gt, 1);
    EXPECT_TRUE(m.type_mismatch);
    EXPECT_NEAR(m.value, 24.0, 1e-10);
    EXPECT_THROW(part_motion_error(pred, gt, 2), Error);
    EXPECT_THROW(part_motion_error(pred, gt, 0), Error);
}

TEST(PartMotion, PrismaticInMeters) {
    GroundTruth gt;
    gt.num_parts = 2;
    gt.units_to_meters = 0.5;
    gt.joints = {{1, JointType::Prismatic, -Vec3::UnitY(), Vec3::Zero(), 0.4, 0.7, 0.2}};
    JointParams pred = gt.joint_params();
    pred.parts[1].translation += Vec3(0.02, 0, 0);
    EXPECT_NEAR(part_motion_error(pred, gt, 1).value, 0.01, 1e-12);
}

TEST(Chamfer, MatchesBruteForce) {
    std::vector<Vec3> pos;
    std::vector<Triangle> faces;
    testing::append_box(pos, faces, Vec3(0, 0, 0), Vec3(1, 0.5, 0.3));
    std::vector<Vec3> pos2;
    std::vector<Triangle> faces2;
    testing::append_grid(pos2, faces2, 5, 1.2, Vec3(-0.1, -0.2, 0.1));
    for (unsigned seed = 0; seed < 3; ++seed) {
        const auto a = sample_surface(pos, faces, 500, seed);
        const auto b = sample_surface(pos2, faces2, 500, seed + 10);
        EXPECT_NEAR(point_set_chamfer(a, b), brute_force_chamfer(a, b), 1e-12);
    }
}

TEST(Chamfer, OffsetSquaresIsTenMillimetres) {
    std::vector<Vec3> a, b;
    std::vector<Triangle> fa, fb;
    unit_square(a, fa, 0.0);
    unit_square(b, fb, 0.01);
    EXPECT_NEAR(chamfer(a, fa, b, fb, 2000), 10.0, 1e-9);
}

TEST(Chamfer, IdenticalMeshesAndConvergence) {
    std::vector<Vec3> pos;
    std::vector<Triangle> faces;
    testing::append_box(pos, faces, Vec3(0, 0, 0), Vec3(1, 1, 1));
    EXPECT_EQ(chamfer(pos, faces, pos, faces, 2000), 0.0);
    // independent samples of the same surface shrink like 1/sqrt(n)
    const double coarse = point_set_chamfer(sample_surface(pos, faces, 2000, 1), sample_surface(pos, faces, 2000, 2));
    const double fine = point_set_chamfer(sample_surface(pos, faces, 8000, 1), sample_surface(pos, faces, 8000, 2));
    EXPECT_LT(fine, 0.6 * coarse);
}

TEST(Chamfer, SymmetricAndScales) {
    std::vector<Vec3> a, b;
    std::vector<Triangle> fa, fb;
    testing::append_box(a, fa, Vec3(0, 0, 0), Vec3(1, 1, 1));
    testing::append_box(b, fb, Vec3(0.1, 0, -0.05), Vec3(1.2, 0.9, 1));
    EXPECT_EQ(chamfer(a, fa, b, fb, 800, 4), chamfer(b, fb, a, fa, 800, 4));
    auto scale = [](std::vector<Vec3> p) {
        for (Vec3& v : p) v *= 2.0;
        return p;
    };
    EXPECT_NEAR(chamfer(scale(a), fa, scale(b), fb, 800, 4), 2.0 * chamfer(a, fa, b, fb, 800, 4), 1e-9);
}

TEST(Chamfer, EmptyThrows) {
    std::vector<Vec3> a;
    std::vector<Triangle> fa, fb;
    std::vector<Vec3> b;
    unit_square(b, fb, 0);
    EXPECT_THROW(chamfer(a, fa, b, fb, 100), Error);
    EXPECT_THROW(chamfer(b, fb, b, fb, 0), Error);
}

TEST(Buckets, Labels) {
    EXPECT_EQ(part_bucket(2), "2 Parts");
    EXPECT_EQ(part_bucket(3), "3 Parts");
    EXPECT_EQ(part_bucket(4), "4-5 Parts");
    EXPECT_EQ(part_bucket(5), "4-5 Parts");
    EXPECT_EQ(part_bucket(9), "6+ Parts");
}

Scene eval_scene() {
    SceneSpec s;
    s.tmpl = SceneTemplate::DoorDrawer;
    s.seed = 4;
    s.train_views = 0 + 1;
    s.test_views = 0;
    s.image_size = 8;
    return generate_scene(s);
}

JointParams typed(const GroundTruth& gt) {
    JointParams p = gt.joint_params();
    for (const JointTruth& j : gt.joints) p.parts[static_cast<size_t>(j.part)].type = j.type;
    return p;
}

TEST(Evaluate, GroundTruthScoresZero) {
    const Scene sc = eval_scene();
    const EvalReport r = evaluate_object(sc.gt.mesh[0], typed(sc.gt), sc.gt);
    EXPECT_EQ(r.bucket, "4-5 Parts");
    ASSERT_EQ(r.joints.size(), 3u);
    for (const JointReport& j : r.joints) {
        EXPECT_TRUE(j.type_correct);
        EXPECT_NEAR(j.axis_ang_deg, 0.0, 1e-5);
        EXPECT_NEAR(j.part_motion, 0.0, 1e-9);
        if (j.gt_type == JointType::Revolute) {
            ASSERT_TRUE(j.axis_pos.has_value());
            EXPECT_NEAR(*j.axis_pos, 0.0, 1e-9);
        } else {
            EXPECT_FALSE(j.axis_pos.has_value());
        }
    }
    EXPECT_EQ(r.cd_s, 0.0);
    EXPECT_EQ(r.cd_m, 0.0);
}

TEST(Evaluate, OnePartWrongOnlyTouchesThatPart) {
    const Scene sc = eval_scene();
    JointParams pred = typed(sc.gt);
    pred.parts[2].translation += Vec3(0.05, 0, 0);
    PartAwareMesh mesh = sc.gt.mesh[0];
    for (size_t i = 0; i < mesh.positions.size(); ++i)
        if (mesh.labels[i] == 2) mesh.positions[i] += Vec3(0.05, 0, 0);
    const EvalReport r = evaluate_object(mesh, pred, sc.gt);
    for (const JointReport& j : r.joints) {
        if (j.part == 2) {
            EXPECT_GT(j.part_motion, 0.0);
            EXPECT_GT(j.axis_ang_deg, 0.0);
        } else {
            EXPECT_NEAR(j.part_motion, 0.0, 1e-9);
            EXPECT_NEAR(j.axis_ang_deg, 0.0, 1e-5);
        }
    }
    for (int k = 0; k < 4; ++k) {
        if (k == 2)
            EXPECT_GT(r.part_cd_mm[static_cast<size_t>(k)], 1.0);
        else
            EXPECT_EQ(r.part_cd_mm[static_cast<size_t>(k)], 0.0);
    }
}

TEST(Evaluate, JointCountMismatch) {
    const Scene sc = eval_scene();
    try {
        evaluate_object(sc.gt.mesh[0], JointParams::identity(2), sc.gt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "joint-count-mismatch");
    }
}

// Recomputes CD-m from the per-part CSV rows.
TEST(Evaluate, CsvRecountMatchesReport) {
    const Scene sc = eval_scene();
    JointParams pred = typed(sc.gt);
    PartAwareMesh mesh = sc.gt.mesh[0];
    for (size_t i = 0; i < mesh.positions.size(); ++i) mesh.positions[i] += Vec3(0.001 * mesh.labels[i], 0, 0.002);
    EvalReport r = evaluate_object(mesh, pred, sc.gt);
    r.name = "obj";
    std::istringstream in(r.to_csv());
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    double cd_m = 0, cd_s = -1;
    int movable = 0;
    while (std::getline(in, line)) {
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
        ASSERT_EQ(cols.size(), 13u);
        const double cd = std::stod(cols[12]);
        if (cols[2] == "0") {
            cd_s = cd;
        } else {
            cd_m += cd;
            ++movable;
        }
    }
    EXPECT_EQ(movable, 3);
    EXPECT_NEAR(cd_s, r.cd_s, 1e-8 * (1 + r.cd_s));
    EXPECT_NEAR(cd_m / movable, r.cd_m, 1e-8 * (1 + r.cd_m));
    const std::string summary = summarize_reports({r, r});
    EXPECT_NE(summary.find("\"4-5 Parts\""), std::string::npos);
}

}  // namespace
}  // namespace kinemesh
