#include "kinemesh/bvh.hpp"

#include <algorithm>
#include <numeric>

namespace kinemesh {

namespace {

bool better(double d2, int face, double best_d2, int best_face) {
    return d2 < best_d2 || (d2 == best_d2 && face < best_face);
}

}  // namespace

TriangleBvh::TriangleBvh(std::span<const Vec3> vertices, std::span<const Triangle> faces) {
    std::vector<int> all(faces.size());
    std::iota(all.begin(), all.end(), 0);
    *this = TriangleBvh(vertices, faces, all);
}

TriangleBvh::TriangleBvh(std::span<const Vec3> vertices, std::span<const Triangle> faces,
                         std::span<const int> subset) {
    face_ids_.assign(subset.begin(), subset.end());
    corners_.reserve(face_ids_.size());
    centroids_.reserve(face_ids_.size());
    for (int f : face_ids_) {
        const Triangle& t = faces[static_cast<size_t>(f)];
        corners_.push_back({vertices[static_cast<size_t>(t[0])], vertices[static_cast<size_t>(t[1])],
                            vertices[static_cast<size_t>(t[2])]});
        centroids_.push_back((corners_.back()[0] + corners_.back()[1] + corners_.back()[2]) / 3.0);
    }
    order_.resize(face_ids_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!face_ids_.empty()) {
        nodes_.reserve(2 * face_ids_.size() / kLeafSize + 2);
        build(0, static_cast<int>(order_.size()));
    }
}

int TriangleBvh::build(int begin, int end) {
    const int index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Aabb box;
    Aabb centroid_box;
    for (int i = begin; i < end; ++i) {
        const auto& c = corners_[static_cast<size_t>(order_[static_cast<size_t>(i)])];
        box.extend(c[0]);
        box.extend(c[1]);
        box.extend(c[2]);
        centroid_box.extend(centroids_[static_cast<size_t>(order_[static_cast<size_t>(i)])]);
    }
    nodes_[static_cast<size_t>(index)].box = box;
    if (end - begin <= kLeafSize) {
        nodes_[static_cast<size_t>(index)].begin = begin;
        nodes_[static_cast<size_t>(index)].end = end;
        return index;
    }
    int axis = 0;
    centroid_box.extent().maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
        const double ca = centroids_[static_cast<size_t>(a)][axis];
        const double cb = centroids_[static_cast<size_t>(b)][axis];
        return ca < cb || (ca == cb && a < b);
    });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[static_cast<size_t>(index)].left = left;
    nodes_[static_cast<size_t>(index)].right = right;
    return index;
}

std::vector<int> TriangleBvh::leaf_faces(const Node& node) const {
    std::vector<int> out;
    for (int i = node.begin; i < node.end; ++i) out.push_back(face_ids_[static_cast<size_t>(order_[static_cast<size_t>(i)])]);
    return out;
}

std::optional<NearestFace> TriangleBvh::nearest(const Vec3& p) const {
    if (nodes_.empty()) return std::nullopt;
    double best_d2 = std::numeric_limits<double>::infinity();
    int best_face = std::numeric_limits<int>::max();
    ClosestPoint best_cp;

    std::vector<int> stack{0};
    stack.reserve(64);
    while (!stack.empty()) {
        const Node& node = nodes_[static_cast<size_t>(stack.back())];
        stack.pop_back();
        if (node.box.squared_distance(p) > best_d2) continue;
        if (node.leaf()) {
            for (int i = node.begin; i < node.end; ++i) {
                const int local = order_[static_cast<size_t>(i)];
                const auto& c = corners_[static_cast<size_t>(local)];
                const ClosestPoint cp = closest_point_on_triangle(p, c[0], c[1], c[2]);
                const double d2 = (p - cp.point).squaredNorm();
                const int face = face_ids_[static_cast<size_t>(local)];
                if (better(d2, face, best_d2, best_face)) {
                    best_d2 = d2;
                    best_face = face;
                    best_cp = cp;
                }
            }
            continue;
        }
        // Visit the nearer child first.
        const double dl = nodes_[static_cast<size_t>(node.left)].box.squared_distance(p);
        const double dr = nodes_[static_cast<size_t>(node.right)].box.squared_distance(p);
        if (dl <= dr) {
            stack.push_back(node.right);
            stack.push_back(node.left);
        } else {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
    return NearestFace{best_face, best_cp};
}

std::optional<NearestFace> nearest_face_brute_force(std::span<const Vec3> vertices, std::span<const Triangle> faces,
                                                    std::span<const int> subset, const Vec3& p) {
    std::optional<NearestFace> best;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int f : subset) {
        const Triangle& t = faces[static_cast<size_t>(f)];
        const ClosestPoint cp = closest_point_on_triangle(p, vertices[static_cast<size_t>(t[0])],
                                                          vertices[static_cast<size_t>(t[1])],
                                                          vertices[static_cast<size_t>(t[2])]);
        const double d2 = (p - cp.point).squaredNorm();
        if (!best || better(d2, f, best_d2, best->face)) {
            best_d2 = d2;
            best = NearestFace{f, cp};
        }
    }
    return best;
}

std::optional<NearestFace> nearest_face_brute_force(std::span<const Vec3> vertices, std::span<const Triangle> faces,
                                                    const Vec3& p) {
    std::vector<int> all(faces.size());
    std::iota(all.begin(), all.end(), 0);
    return nearest_face_brute_force(vertices, faces, all, p);
}

}  // namespace kinemesh
