#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "kinemesh/error.hpp"
#include "kinemesh/raster.hpp"
#include "raster_gradcheck.hpp"
#include "test_util.hpp"

namespace kinemesh {
namespace {

PinholeCamera front_camera(int size = 32) {
    PinholeCamera cam;
    cam.fx = cam.fy = size;
    cam.cx = cam.cy = size / 2.0;
    cam.width = cam.height = size;
    cam.near = 0.1;
    cam.far = 100;
    return cam;
}

// Back-projects screen points to camera depth z (identity pose).
Vec3 unproject(const PinholeCamera& cam, const Vec2& px, double z) {
    return {(px.x() - cam.cx) * z / cam.fx, (px.y() - cam.cy) * z / cam.fy, z};
}

// Equilateral screen triangle with its incenter on the center of pixel (x, y).
std::array<Vec2, 3> equilateral_around(int x, int y, double radius) {
    std::array<Vec2, 3> t;
    for (int k = 0; k < 3; ++k) {
        const double a = 2.0 * M_PI * k / 3.0 + 0.3;
        t[static_cast<size_t>(k)] = Vec2(x + 0.5, y + 0.5) + radius * Vec2(std::cos(a), std::sin(a));
    }
    return t;
}

TEST(FaceWindow, IncenterEdgeAndOutside) {
    const std::array<Vec2, 3> tri{Vec2(0, 0), Vec2(4, 0), Vec2(0, 3)};
    // 3-4-5 triangle: inradius 1, incenter (1, 1)
    EXPECT_NEAR(face_window(Vec2(1, 1), tri, 2.0), 1.0, 1e-12);
    EXPECT_EQ(face_window(Vec2(2, 0), tri, 2.0), 0.0);
    EXPECT_EQ(face_window(Vec2(-1, 1), tri, 2.0), 0.0);
    const std::array<Vec2, 3> flat{Vec2(0, 0), Vec2(1, 0), Vec2(2, 0)};
    EXPECT_EQ(face_window(Vec2(1, 0), flat, 2.0), 0.0);
}

TEST(FaceWindow, EquilateralMidwayMatchesSignedDistance) {
    const double s = 2.0;
    const std::array<Vec2, 3> tri{Vec2(0, 0), Vec2(s, 0), Vec2(s / 2, s * std::sqrt(3.0) / 2)};
    const Vec2 incenter = (tri[0] + tri[1] + tri[2]) / 3.0;
    const Vec2 p = 0.5 * (incenter + Vec2(incenter.x(), 0.0));
    // numeric signed distance: minimum over edges of the distance to the edge line
    double psi_p = 1e300, psi_s = 1e300;
    for (int i = 0; i < 3; ++i) {
        const Vec2 a = tri[static_cast<size_t>(i)], b = tri[static_cast<size_t>((i + 1) % 3)];
        const Vec2 n = Vec2(-(b - a).y(), (b - a).x()).normalized();
        psi_p = std::min(psi_p, n.dot(p - a));
        psi_s = std::min(psi_s, n.dot(incenter - a));
    }
    const double oracle = std::pow(psi_p / psi_s, 2.0);
    EXPECT_NEAR(oracle, 0.25, 1e-12);
    EXPECT_NEAR(face_window(p, tri, 2.0), oracle, 1e-12);
}

TEST(FaceWindow, BoundedInside) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 10);
    for (int t = 0; t < 200; ++t) {
        const std::array<Vec2, 3> tri{Vec2(u(rng), u(rng)), Vec2(u(rng), u(rng)), Vec2(u(rng), u(rng))};
        const double w = face_window(Vec2(u(rng), u(rng)), tri, 2.0);
        EXPECT_GE(w, 0.0);
        EXPECT_LE(w, 1.0 + 1e-12);
    }
}

PartAwareMesh single_face(const PinholeCamera& cam, const std::array<Vec2, 3>& tri, double z, const Vec3& color,
                          double sigma) {
    std::vector<Vec3> pos;
    for (const Vec2& v : tri) pos.push_back(unproject(cam, v, z));
    PartAwareMesh m = testing::make_mesh(pos, {{{0, 1, 2}}});
    for (size_t i = 0; i < 3; ++i) {
        m.sh[3 * i] = color.x();
        m.sh[3 * i + 1] = color.y();
        m.sh[3 * i + 2] = color.z();
        m.opacity[i] = sigma;
    }
    return m;
}

TEST(Render, OpaqueFaceAtIncenter) {
    const PinholeCamera cam = front_camera();
    const Vec3 c(0.2, 0.6, 0.9);
    const PartAwareMesh m = single_face(cam, equilateral_around(10, 12, 6.0), 2.0, c, 1.0);
    const RenderBuffers b = render(m, cam, RasterConfig{}, true);
    for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(b.rgb.at(10, 12, ch), c[ch], 1e-6);
    EXPECT_NEAR(b.opacity.at(10, 12), 1.0, 1e-6);
    EXPECT_NEAR(b.depth.at(10, 12), 2.0, 1e-6);

    // pass-through color gradient
    PixelGradients g;
    g.rgb.assign(b.pixel_count() * 3, 0.0);
    const size_t p = 12 * 32 + 10;
    g.rgb[p * 3 + 1] = 1.0;
    const MeshGradients mg = render_backward(b, g);
    double sum = 0;
    for (size_t i = 0; i < 3; ++i) sum += mg.sh[3 * i + 1];
    EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(Render, TwoStackedHalfTransparentFaces) {
    const PinholeCamera cam = front_camera();
    RasterConfig cfg;
    cfg.background = Vec3(0.1, 0.1, 0.1);
    const auto tri = equilateral_around(16, 16, 8.0);
    const Vec3 c1(1, 0, 0), c2(0, 0, 1);
    PartAwareMesh front = single_face(cam, tri, 1.0, c1, 0.5);
    const PartAwareMesh back = single_face(cam, tri, 2.0, c2, 0.5);
    for (size_t i = 0; i < 3; ++i) {
        VertexAttr v = back.vertex(i);
        front.push_vertex(v);
    }
    front.faces.push_back({{3, 4, 5}});
    const RenderBuffers b = render(front, cam, cfg, true);
    const Vec3 expect = 0.5 * c1 + 0.25 * c2 + 0.25 * cfg.background;
    for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(b.rgb.at(16, 16, ch), expect[ch], 1e-6);
    EXPECT_NEAR(b.opacity.at(16, 16), 0.75, 1e-6);

    // dL/dsigma_front = phi * (g.c1 - g.(behind)) where behind = 0.5 c2 + 0.5 bg
    PixelGradients g;
    g.rgb.assign(b.pixel_count() * 3, 0.0);
    const size_t p = 16 * 32 + 16;
    const Vec3 up(0.3, -0.7, 1.1);
    for (int ch = 0; ch < 3; ++ch) g.rgb[p * 3 + static_cast<size_t>(ch)] = up[ch];
    const MeshGradients mg = render_backward(b, g);
    const double d_sigma = mg.opacity[0] + mg.opacity[1] + mg.opacity[2];
    const double hand = up.dot(c1 - (0.5 * c2 + 0.5 * cfg.background));
    EXPECT_NEAR(d_sigma, hand, 1e-6);
    // finite differences on a uniform opacity shift of the front face
    auto objective = [&](double d) {
        PartAwareMesh m = front;
        for (size_t i = 0; i < 3; ++i) m.opacity[i] += d;
        const RenderBuffers r = render(m, cam, cfg, true);
        return testing::pixel_objective(r, p, {up.x(), up.y(), up.z(), 0.0, 0.0});
    };
    EXPECT_NEAR((objective(1e-4) - objective(-1e-4)) / 2e-4, hand, 1e-6);
}

TEST(Render, EmptyMeshIsBackground) {
    PartAwareMesh m;
    RasterConfig cfg;
    cfg.background = Vec3(0.25, 0.5, 0.75);
    const RenderBuffers b = render(m, front_camera(8), cfg, false);
    for (size_t p = 0; p < b.pixel_count(); ++p) {
        EXPECT_EQ(b.opacity.data[p], 0.0f);
        EXPECT_EQ(b.depth.data[p], 0.0f);
        for (int c = 0; c < 3; ++c) EXPECT_EQ(b.rgb.data[p * 3 + static_cast<size_t>(c)], static_cast<float>(cfg.background[c]));
    }
}

TEST(Render, FaceOrderDoesNotMatter) {
    std::mt19937_64 rng(12);
    PartAwareMesh m = testing::random_raster_scene(rng, 30, 3);
    const PinholeCamera cam = testing::random_raster_camera(rng, 32);
    const RenderBuffers a = render(m, cam, RasterConfig{}, false);
    std::shuffle(m.faces.begin(), m.faces.end(), rng);
    const RenderBuffers b = render(m, cam, RasterConfig{}, false);
    EXPECT_EQ(a.rgb.data, b.rgb.data);
    EXPECT_EQ(a.depth.data, b.depth.data);
    EXPECT_EQ(a.logits.data, b.logits.data);
    EXPECT_EQ(a.opacity.data, b.opacity.data);
}

TEST(Render, OpacityEqualsOneMinusTransmittance) {
    std::mt19937_64 rng(13);
    const PartAwareMesh m = testing::random_raster_scene(rng, 30, 2);
    const RenderBuffers b = render(m, testing::random_raster_camera(rng, 32), RasterConfig{}, true);
    for (size_t p = 0; p < b.pixel_count(); ++p) {
        double t = 1.0, prev = 1.0;
        for (size_t r = b.record_offsets[p]; r < b.record_offsets[p + 1]; ++r) {
            EXPECT_NEAR(b.records[r].transmittance, t, 1e-12);
            EXPECT_LE(b.records[r].transmittance, prev);
            prev = b.records[r].transmittance;
            t *= 1.0 - b.records[r].alpha;
        }
        EXPECT_LE(b.opacity.data[p], 1.0f);
        EXPECT_NEAR(b.opacity.data[p], 1.0 - t, 1e-6);
    }
}

TEST(Render, NanAttributeNamesVertex) {
    const PinholeCamera cam = front_camera();
    PartAwareMesh m = single_face(cam, equilateral_around(10, 10, 5.0), 2.0, Vec3(1, 1, 1), 1.0);
    m.opacity[1] = std::nan("");
    try {
        render(m, cam, RasterConfig{}, false);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("vertex 1"), std::string::npos);
    }
}

TEST(Render, BackwardWithoutRecordsFails) {
    const PinholeCamera cam = front_camera();
    const PartAwareMesh m = single_face(cam, equilateral_around(10, 10, 5.0), 2.0, Vec3(1, 1, 1), 1.0);
    const RenderBuffers b = render(m, cam, RasterConfig{}, false);
    try {
        render_backward(b, PixelGradients{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "gradients-unavailable");
    }
}

TEST(Render, UntouchedVertexHasZeroGradient) {
    const PinholeCamera cam = front_camera();
    PartAwareMesh m = single_face(cam, equilateral_around(8, 8, 4.0), 2.0, Vec3(1, 0.5, 0), 0.8);
    const PartAwareMesh far = single_face(cam, equilateral_around(24, 24, 4.0), 2.0, Vec3(0, 1, 0), 0.8);
    for (size_t i = 0; i < 3; ++i) m.push_vertex(far.vertex(i));
    m.faces.push_back({{3, 4, 5}});
    const RenderBuffers b = render(m, cam, RasterConfig{}, true);
    PixelGradients g;
    g.rgb.assign(b.pixel_count() * 3, 0.0);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) g.rgb[(static_cast<size_t>(y) * 32 + static_cast<size_t>(x)) * 3] = 1.0;
    const MeshGradients mg = render_backward(b, g);
    for (size_t i = 3; i < 6; ++i) {
        EXPECT_EQ(mg.positions[i], Vec3::Zero());
        EXPECT_EQ(mg.opacity[i], 0.0);
    }
    EXPECT_NE(mg.positions[0], Vec3::Zero());
}

TEST(RenderBackward, FiniteDifferenceOracle) {
    testing::GradCheckStats total;
    for (unsigned seed = 100; seed < 104; ++seed) total.merge(testing::gradient_check_scene(seed, 20, 32, 6));
    std::printf("gradient check: %d/%d samples within 1e-2 (worst %.3g)\n", total.passed, total.checked, total.worst);
    ASSERT_GT(total.checked, 30);
    EXPECT_GE(static_cast<double>(total.passed) / total.checked, 0.95) << "worst " << total.worst;
}

}  // namespace
}  // namespace kinemesh
