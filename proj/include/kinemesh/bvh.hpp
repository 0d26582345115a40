#pragma once

#include <optional>
#include <span>
#include <vector>

#include "kinemesh/geom.hpp"

namespace kinemesh {

struct NearestFace {
    int face = -1;  // index into the face list the tree was built from
    ClosestPoint closest;
};

// Axis-aligned bounding-box tree over a triangle list. Median split on the
// longest axis of the centroid bounds; leaves hold at most kLeafSize faces.
// The tree copies the triangle corners it needs and is immutable after
// construction.
class TriangleBvh {
public:
    static constexpr int kLeafSize = 8;

    struct Node {
        Aabb box;
        int left = -1;   // child node indices; -1 for leaves
        int right = -1;
        int begin = 0;   // range into face_order_ for leaves
        int end = 0;
        bool leaf() const { return left < 0; }
    };

    TriangleBvh() = default;
    TriangleBvh(std::span<const Vec3> vertices, std::span<const Triangle> faces);
    // Subset constructor: only faces[subset[i]] are indexed; results report
    // the original face index.
    TriangleBvh(std::span<const Vec3> vertices, std::span<const Triangle> faces, std::span<const int> subset);

    bool empty() const { return face_ids_.empty(); }
    size_t face_count() const { return face_ids_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }
    // Face ids stored in leaf order.
    std::vector<int> leaf_faces(const Node& node) const;

    // Nearest face to p; ties break toward the lowest face index.
    // Returns nullopt ("no candidate") when the tree is empty.
    std::optional<NearestFace> nearest(const Vec3& p) const;

private:
    int build(int begin, int end);

    std::vector<int> face_ids_;
    std::vector<std::array<Vec3, 3>> corners_;
    std::vector<Vec3> centroids_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

// O(F) reference used by tests and small inputs.
std::optional<NearestFace> nearest_face_brute_force(std::span<const Vec3> vertices, std::span<const Triangle> faces,
                                                    std::span<const int> subset, const Vec3& p);
std::optional<NearestFace> nearest_face_brute_force(std::span<const Vec3> vertices, std::span<const Triangle> faces,
                                                    const Vec3& p);

}  // namespace kinemesh
