#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "kinemesh/articulation.hpp"
#include "kinemesh/error.hpp"
#include "test_util.hpp"

namespace kinemesh {
namespace {

using testing::random_unit;
using testing::random_vec;

PartJoint random_joint(std::mt19937_64& rng) {
    PartJoint j;
    j.rotation = UnitQuaternion::from_axis_angle(random_unit(rng), std::uniform_real_distribution<>(-3.0, 3.0)(rng));
    j.pivot = random_vec(rng);
    j.translation = random_vec(rng);
    return j;
}

PartAwareMesh two_part_mesh(std::mt19937_64& rng, int n = 40) {
    std::vector<Vec3> pos;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
        pos.push_back(random_vec(rng));
        labels.push_back(i % 2);
    }
    return harden_parts(testing::make_mesh(pos, {}, 2, labels));
}

TEST(Affine, PivotCancelsWithoutRotation) {
    JointParams j = JointParams::identity(2);
    j.parts[1].pivot = Vec3(3, -1, 2);
    j.parts[1].translation = Vec3(0.1, 0.2, 0.3);
    const AffineMotion m = to_affine(j, 1);
    EXPECT_EQ(m.offset, Vec3(0.1, 0.2, 0.3));
    j.parts[1].translation.setZero();
    j.parts[1].pivot.setZero();
    EXPECT_EQ(to_affine(j, 1).offset, Vec3::Zero());
}

TEST(Affine, QuarterTurnAboutOffsetPivot) {
    JointParams j = JointParams::identity(2);
    j.parts[1].rotation = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), std::numbers::pi / 2);
    j.parts[1].pivot = Vec3(1, 0, 0);
    const AffineMotion m = to_affine(j, 1);
    // matrix-product oracle: translate by -P, rotate, translate by +P
    Mat4 to_origin = Mat4::Identity(), back = Mat4::Identity(), rot = Mat4::Identity();
    to_origin.block<3, 1>(0, 3) = -Vec3(1, 0, 0);
    back.block<3, 1>(0, 3) = Vec3(1, 0, 0);
    rot.block<3, 3>(0, 0) << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    const Eigen::Vector4d x(2, 0, 0, 1);
    const Eigen::Vector4d oracle = back * rot * to_origin * x;
    EXPECT_LT((oracle.head<3>() - Vec3(1, 1, 0)).norm(), 1e-12);
    EXPECT_LT((m.apply(Vec3(2, 0, 0)) - Vec3(1, 1, 0)).norm(), 1e-12);
    EXPECT_LT((m.homogeneous() * x - oracle).norm(), 1e-12);
}

TEST(Affine, AnalyticInverseExamples) {
    const AffineMotion id;
    const AffineMotion inv = analytic_inverse(id);
    EXPECT_EQ(inv.linear, Mat3::Identity());
    EXPECT_EQ(inv.offset, Vec3::Zero());
    AffineMotion t;
    t.offset = Vec3(1, 2, 3);
    EXPECT_EQ(analytic_inverse(t).offset, Vec3(-1, -2, -3));
}

TEST(Affine, InverseRoundTripRandom) {
    std::mt19937_64 rng(21);
    double worst = 0, worst_h = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        JointParams j = JointParams::identity(2);
        j.parts[1] = random_joint(rng);
        const AffineMotion g = to_affine(j, 1);
        const AffineMotion gi = analytic_inverse(g);
        worst_h = std::max(worst_h, (gi.homogeneous() * g.homogeneous() - Mat4::Identity()).cwiseAbs().maxCoeff());
        for (int i = 0; i < 100; ++i) {
            const Vec3 x = random_vec(rng);
            worst = std::max(worst, (gi.apply(g.apply(x)) - x).cwiseAbs().maxCoeff());
        }
        // pivot-form inverse with the same pivot
        const PartJoint& pj = j.parts[1];
        const Vec3 tinv = inverse_pivot_translation(pj);
        const Mat3 rt = pj.rotation.matrix().transpose();
        const Vec3 x = random_vec(rng);
        const Vec3 pivot_form = rt * (g.apply(x) - pj.pivot) + pj.pivot + tinv;
        EXPECT_LT((pivot_form - x).norm(), 1e-12);
        EXPECT_LT((tinv + rt * pj.translation).norm(), 1e-12);
    }
    EXPECT_LT(worst, 1e-12);
    EXPECT_LT(worst_h, 1e-12);
}

TEST(Transport, IdentityAndRoundTrip) {
    std::mt19937_64 rng(5);
    PartAwareMesh m = two_part_mesh(rng);
    const JointParams id = JointParams::identity(2);
    EXPECT_EQ(transport_vertices(m, id, Direction::Forward), m.positions);

    JointParams j = JointParams::identity(2);
    j.parts[1] = random_joint(rng);
    PartAwareMesh moved = articulate_mesh(m, j, Direction::Forward);
    EXPECT_EQ(moved.faces, m.faces);
    const auto back = transport_vertices(moved, j, Direction::Backward);
    for (size_t i = 0; i < back.size(); ++i) EXPECT_LT((back[i] - m.positions[i]).norm(), 1e-10);
}

TEST(Transport, DrawerShift) {
    std::mt19937_64 rng(6);
    const PartAwareMesh m = two_part_mesh(rng);
    JointParams j = JointParams::identity(2);
    j.parts[1].translation = Vec3(0, 0, 0.3);
    j.parts[1].type = JointType::Prismatic;
    const auto out = transport_vertices(m, j, Direction::Forward);
    for (size_t i = 0; i < out.size(); ++i) {
        if (m.labels[i] == 0)
            EXPECT_EQ(out[i], m.positions[i]);
        else
            EXPECT_LT((out[i] - m.positions[i] - Vec3(0, 0, 0.3)).norm(), 1e-15);
    }
}

TEST(Transport, RigidityAndIsolation) {
    std::mt19937_64 rng(7);
    std::vector<Vec3> pos;
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) {
        pos.push_back(random_vec(rng));
        labels.push_back(i % 3);
    }
    const PartAwareMesh m = harden_parts(testing::make_mesh(pos, {}, 3, labels));
    for (int trial = 0; trial < 20; ++trial) {
        JointParams j = JointParams::identity(3);
        j.parts[2] = random_joint(rng);
        const auto out = transport_vertices(m, j, Direction::Forward);
        for (size_t a = 0; a < pos.size(); ++a) {
            if (labels[a] != 2) {
                EXPECT_EQ(out[a], pos[a]);
                continue;
            }
            for (size_t b = 0; b < pos.size(); ++b)
                if (labels[b] == 2)
                    EXPECT_NEAR((out[a] - out[b]).norm(), (pos[a] - pos[b]).norm(), 1e-10);
        }
    }
}

TEST(Transport, RequiresHardenedMesh) {
    const PartAwareMesh m = testing::make_mesh({{0, 0, 0}}, {}, 2);
    EXPECT_THROW(transport_vertices(m, JointParams::identity(2), Direction::Forward), Error);
}

TEST(Transport, TypeConstraints) {
    std::mt19937_64 rng(8);
    JointParams j = JointParams::identity(3);
    j.parts[0] = random_joint(rng);
    j.parts[1] = random_joint(rng);
    j.parts[1].type = JointType::Revolute;
    j.parts[2] = random_joint(rng);
    j.parts[2].type = JointType::Prismatic;
    j.apply_type_constraints();
    EXPECT_EQ(j.parts[0].translation, Vec3::Zero());
    EXPECT_EQ(j.parts[0].rotation.matrix(), Mat3::Identity());
    EXPECT_EQ(j.parts[1].translation, Vec3::Zero());
    EXPECT_EQ(j.parts[2].rotation.matrix(), Mat3::Identity());
    EXPECT_EQ(j.parts[2].pivot, Vec3::Zero());
}

// Finite-difference check of the transport chain rule on L = sum_i <a_i, y_i>.
TEST(Transport, BackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(9);
    const PartAwareMesh m = two_part_mesh(rng, 20);
    std::vector<Vec3> a(m.vertex_count());
    for (Vec3& v : a) v = random_vec(rng);
    for (Direction dir : {Direction::Forward, Direction::Backward}) {
        for (int trial = 0; trial < 10; ++trial) {
            JointParams j = JointParams::identity(2);
            j.parts[1] = random_joint(rng);
            const Vec3 w = j.parts[1].rotation.rotvec();
            const std::vector<Vec3> rotvecs{Vec3::Zero(), w};
            const auto grads = transport_backward(m, j, dir, a, rotvecs);
            auto loss = [&](const Vec3& ww, const Vec3& p, const Vec3& t) {
                JointParams jj = j;
                jj.parts[1].rotation = UnitQuaternion::from_rotvec(ww);
                jj.parts[1].pivot = p;
                jj.parts[1].translation = t;
                const auto y = transport_vertices(m, jj, dir);
                double s = 0;
                for (size_t i = 0; i < y.size(); ++i) s += a[i].dot(y[i]);
                return s;
            };
            const double h = 1e-6;
            const Vec3 p = j.parts[1].pivot, t = j.parts[1].translation;
            for (int k = 0; k < 3; ++k) {
                Vec3 e = Vec3::Zero();
                e[k] = h;
                EXPECT_NEAR(grads[1].rotvec[k], (loss(w + e, p, t) - loss(w - e, p, t)) / (2 * h), 1e-6);
                EXPECT_NEAR(grads[1].pivot[k], (loss(w, p + e, t) - loss(w, p - e, t)) / (2 * h), 1e-6);
                EXPECT_NEAR(grads[1].translation[k], (loss(w, p, t + e) - loss(w, p, t - e)) / (2 * h), 1e-6);
            }
        }
    }
}

TEST(JointAxis, Reporting) {
    PartJoint j;
    j.rotation = UnitQuaternion::from_axis_angle(Vec3(0, 1, 0), 0.5);
    const JointAxis ax = joint_axis(j);
    EXPECT_LT((ax.axis - Vec3(0, 1, 0)).norm(), 1e-12);
    EXPECT_NEAR(ax.angle_deg, 0.5 * 180 / std::numbers::pi, 1e-10);
    PartJoint p;
    p.translation = Vec3(0, 0, -0.3);
    p.type = JointType::Prismatic;
    const JointAxis pa = joint_axis(p);
    EXPECT_NEAR(pa.displacement, 0.3, 1e-15);
    EXPECT_LT((pa.axis - Vec3(0, 0, -1)).norm(), 1e-15);
}

TEST(JointType, StringRoundTrip) {
    for (JointType t : {JointType::Undecided, JointType::Revolute, JointType::Prismatic, JointType::Static})
        EXPECT_EQ(joint_type_from_string(to_string(t)), t);
    EXPECT_THROW(joint_type_from_string("helical"), Error);
}

}  // namespace
}  // namespace kinemesh
