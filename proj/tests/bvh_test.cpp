#include <random>
#include <set>

#include <gtest/gtest.h>

#include "kinemesh/bvh.hpp"
#include "test_util.hpp"

namespace kinemesh {
namespace {

using testing::random_vec;

void random_soup(std::mt19937_64& rng, int nfaces, std::vector<Vec3>& pos, std::vector<Triangle>& faces) {
    for (int f = 0; f < nfaces; ++f) {
        const Vec3 c = random_vec(rng, -2.0, 2.0);
        const int base = static_cast<int>(pos.size());
        for (int k = 0; k < 3; ++k) pos.push_back(c + 0.2 * random_vec(rng));
        faces.push_back({{base, base + 1, base + 2}});
    }
}

TEST(Bvh, EmptyTreeHasNoCandidate) {
    const std::vector<Vec3> pos;
    const std::vector<Triangle> faces;
    const TriangleBvh bvh(pos, faces);
    EXPECT_TRUE(bvh.empty());
    EXPECT_FALSE(bvh.nearest(Vec3(0, 0, 0)).has_value());
}

TEST(Bvh, SingleFaceAlwaysReturned) {
    const std::vector<Vec3> pos{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    const std::vector<Triangle> faces{{{0, 1, 2}}};
    const TriangleBvh bvh(pos, faces);
    ASSERT_EQ(bvh.nodes().size(), 1u);
    EXPECT_TRUE(bvh.nodes()[0].leaf());
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) {
        const auto hit = bvh.nearest(random_vec(rng, -5, 5));
        ASSERT_TRUE(hit.has_value());
        EXPECT_EQ(hit->face, 0);
    }
}

TEST(Bvh, MatchesBruteForce) {
    std::mt19937_64 rng(42);
    std::vector<Vec3> pos;
    std::vector<Triangle> faces;
    random_soup(rng, 500, pos, faces);
    const TriangleBvh bvh(pos, faces);
    for (int q = 0; q < 1000; ++q) {
        const Vec3 p = random_vec(rng, -3.0, 3.0);
        const auto a = bvh.nearest(p);
        const auto b = nearest_face_brute_force(pos, faces, p);
        ASSERT_TRUE(a && b);
        EXPECT_NEAR(a->closest.distance, b->closest.distance, 1e-9);
    }
}

TEST(Bvh, StructureInvariants) {
    std::mt19937_64 rng(7);
    std::vector<Vec3> pos;
    std::vector<Triangle> faces;
    random_soup(rng, 300, pos, faces);
    const TriangleBvh bvh(pos, faces);
    std::multiset<int> seen;
    for (const auto& node : bvh.nodes()) {
        if (node.leaf()) {
            const auto ids = bvh.leaf_faces(node);
            EXPECT_LE(static_cast<int>(ids.size()), TriangleBvh::kLeafSize);
            seen.insert(ids.begin(), ids.end());
        } else {
            EXPECT_TRUE(node.box.contains(bvh.nodes()[static_cast<size_t>(node.left)].box));
            EXPECT_TRUE(node.box.contains(bvh.nodes()[static_cast<size_t>(node.right)].box));
        }
    }
    ASSERT_EQ(seen.size(), faces.size());
    for (int f = 0; f < static_cast<int>(faces.size()); ++f) EXPECT_EQ(seen.count(f), 1u);
}

TEST(Bvh, TiesBreakToLowestFaceIndex) {
    // Two copies of the same triangle; the lower index must win.
    std::vector<Vec3> pos{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    std::vector<Triangle> faces;
    for (int i = 0; i < 20; ++i) faces.push_back({{0, 1, 2}});
    const TriangleBvh bvh(pos, faces);
    EXPECT_EQ(bvh.nearest(Vec3(0.2, 0.2, 1.0))->face, 0);
}

TEST(Bvh, SubsetReportsOriginalIds) {
    std::mt19937_64 rng(3);
    std::vector<Vec3> pos;
    std::vector<Triangle> faces;
    random_soup(rng, 100, pos, faces);
    std::vector<int> subset;
    for (int f = 1; f < 100; f += 3) subset.push_back(f);
    const TriangleBvh bvh(pos, faces, subset);
    for (int q = 0; q < 200; ++q) {
        const Vec3 p = random_vec(rng, -3.0, 3.0);
        const auto a = bvh.nearest(p);
        const auto b = nearest_face_brute_force(pos, faces, subset, p);
        ASSERT_TRUE(a && b);
        EXPECT_EQ(a->face % 3, 1);
        EXPECT_EQ(a->face, b->face);
    }
}

}  // namespace
}  // namespace kinemesh
