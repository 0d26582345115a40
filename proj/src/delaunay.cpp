#include "kinemesh/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "kinemesh/error.hpp"

namespace kinemesh {

double orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    return (b - a).dot((c - a).cross(d - a));
}

double triangle_circumradius(const Vec3& a, const Vec3& b, const Vec3& c) {
    const double la = (b - c).norm();
    const double lb = (c - a).norm();
    const double lc = (a - b).norm();
    const double area2 = (b - a).cross(c - a).norm();  // twice the area
    if (area2 <= 0.0) return std::numeric_limits<double>::infinity();
    return la * lb * lc / (2.0 * area2);
}

namespace {

struct Tet {
    std::array<int, 4> v{};
    Vec3 center = Vec3::Zero();
    double radius2 = 0.0;
    bool alive = true;
};

bool circumsphere(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, Vec3& center, double& r2) {
    Mat3 m;
    m.row(0) = (b - a).transpose();
    m.row(1) = (c - a).transpose();
    m.row(2) = (d - a).transpose();
    const Vec3 rhs(0.5 * (b - a).squaredNorm(), 0.5 * (c - a).squaredNorm(), 0.5 * (d - a).squaredNorm());
    const double det = m.determinant();
    if (std::abs(det) < 1e-300) return false;
    const Vec3 x = m.partialPivLu().solve(rhs);
    center = a + x;
    r2 = x.squaredNorm();
    return true;
}

using FaceKey = std::array<int, 3>;

FaceKey sorted_face(int a, int b, int c) {
    FaceKey k{a, b, c};
    std::sort(k.begin(), k.end());
    return k;
}

constexpr std::array<std::array<int, 4>, 4> kFaces{{{1, 2, 3, 0}, {0, 3, 2, 1}, {0, 1, 3, 2}, {0, 2, 1, 3}}};

}  // namespace

namespace {

// Tetrahedra may reference the four super vertices n..n+3.
std::vector<Tetrahedron> bowyer_watson(std::span<const Vec3> points) {
    const int n = static_cast<int>(points.size());
    if (n < 4) return {};

    std::vector<Vec3> pts(points.begin(), points.end());
    const Aabb box = bounds_of(points);
    const Vec3 c = box.center();
    const double r = std::max(box.diagonal(), 1e-9) * 20.0;
    pts.push_back(c + r * Vec3(1, 1, 1));
    pts.push_back(c + r * Vec3(1, -1, -1));
    pts.push_back(c + r * Vec3(-1, 1, -1));
    pts.push_back(c + r * Vec3(-1, -1, 1));

    std::vector<Tet> tets;
    auto add_tet = [&](std::array<int, 4> v) {
        if (orient3d(pts[static_cast<size_t>(v[0])], pts[static_cast<size_t>(v[1])], pts[static_cast<size_t>(v[2])],
                     pts[static_cast<size_t>(v[3])]) < 0.0)
            std::swap(v[2], v[3]);
        Tet t;
        t.v = v;
        if (!circumsphere(pts[static_cast<size_t>(v[0])], pts[static_cast<size_t>(v[1])],
                          pts[static_cast<size_t>(v[2])], pts[static_cast<size_t>(v[3])], t.center, t.radius2)) {
            t.center = pts[static_cast<size_t>(v[0])];
            t.radius2 = std::numeric_limits<double>::infinity();
        }
        tets.push_back(t);
    };
    add_tet({n, n + 1, n + 2, n + 3});

    std::vector<int> cavity;
    std::vector<char> in_cavity;
    for (int p = 0; p < n; ++p) {
        const Vec3& x = pts[static_cast<size_t>(p)];
        cavity.clear();
        in_cavity.assign(tets.size(), 0);
        for (size_t t = 0; t < tets.size(); ++t) {
            if (!tets[t].alive) continue;
            if ((x - tets[t].center).squaredNorm() < tets[t].radius2) {
                cavity.push_back(static_cast<int>(t));
                in_cavity[t] = 1;
            }
        }
        if (cavity.empty()) continue;  // duplicate point

        // Shrink the cavity until the new point sees every boundary face from
        // the inside; this keeps new tetrahedra positively oriented.
        std::map<FaceKey, std::pair<int, int>> boundary;  // face -> (tet, local opposite) or count
        bool changed = true;
        while (changed) {
            changed = false;
            std::map<FaceKey, std::vector<std::pair<int, int>>> faces;
            for (int t : cavity) {
                if (!in_cavity[static_cast<size_t>(t)]) continue;
                const auto& v = tets[static_cast<size_t>(t)].v;
                for (int f = 0; f < 4; ++f) {
                    const auto& fi = kFaces[static_cast<size_t>(f)];
                    faces[sorted_face(v[static_cast<size_t>(fi[0])], v[static_cast<size_t>(fi[1])],
                                      v[static_cast<size_t>(fi[2])])]
                        .push_back({t, f});
                }
            }
            boundary.clear();
            for (const auto& [key, owners] : faces) {
                if (owners.size() != 1) continue;
                const auto [t, f] = owners.front();
                const auto& v = tets[static_cast<size_t>(t)].v;
                const auto& fi = kFaces[static_cast<size_t>(f)];
                const Vec3& a = pts[static_cast<size_t>(v[static_cast<size_t>(fi[0])])];
                const Vec3& b = pts[static_cast<size_t>(v[static_cast<size_t>(fi[1])])];
                const Vec3& cc = pts[static_cast<size_t>(v[static_cast<size_t>(fi[2])])];
                const Vec3& opp = pts[static_cast<size_t>(v[static_cast<size_t>(fi[3])])];
                const double s_opp = orient3d(a, b, cc, opp);
                const double s_new = orient3d(a, b, cc, x);
                if (s_opp * s_new <= 0.0) {
                    in_cavity[static_cast<size_t>(t)] = 0;
                    changed = true;
                } else {
                    boundary[key] = {t, f};
                }
            }
            if (changed) {
                std::erase_if(cavity, [&](int t) { return !in_cavity[static_cast<size_t>(t)]; });
                if (cavity.empty()) break;
            }
        }
        if (cavity.empty()) continue;

        for (int t : cavity) tets[static_cast<size_t>(t)].alive = false;
        for (const auto& [key, owner] : boundary) {
            const auto& v = tets[static_cast<size_t>(owner.first)].v;
            const auto& fi = kFaces[static_cast<size_t>(owner.second)];
            add_tet({v[static_cast<size_t>(fi[0])], v[static_cast<size_t>(fi[1])], v[static_cast<size_t>(fi[2])], p});
        }
        // Compact dead tetrahedra periodically.
        if (tets.size() > 64 && std::count_if(tets.begin(), tets.end(), [](const Tet& t) { return !t.alive; }) >
                                    static_cast<long>(tets.size() / 2)) {
            std::erase_if(tets, [](const Tet& t) { return !t.alive; });
        }
    }

    std::vector<Tetrahedron> out;
    for (const Tet& t : tets) {
        if (!t.alive) continue;
        Tetrahedron tt;
        tt.v = t.v;
        out.push_back(tt);
    }
    return out;
}

}  // namespace

std::vector<Tetrahedron> delaunay_tetrahedralize(std::span<const Vec3> points) {
    const int n = static_cast<int>(points.size());
    std::vector<Tetrahedron> out = bowyer_watson(points);
    std::erase_if(out, [n](const Tetrahedron& t) { return std::any_of(t.v.begin(), t.v.end(), [n](int v) { return v >= n; }); });
    return out;
}

std::vector<Triangle> delaunay_faces(std::span<const Vec3> points) {
    const int n = static_cast<int>(points.size());
    std::vector<Triangle> out;
    if (n < 3) return out;
    if (n == 3) {
        out.push_back(Triangle{{0, 1, 2}});
        return out;
    }
    std::vector<FaceKey> keys;
    for (const Tetrahedron& t : bowyer_watson(points)) {
        for (const auto& fi : kFaces) {
            const int a = t.v[static_cast<size_t>(fi[0])];
            const int b = t.v[static_cast<size_t>(fi[1])];
            const int c = t.v[static_cast<size_t>(fi[2])];
            if (a >= n || b >= n || c >= n) continue;
            keys.push_back(sorted_face(a, b, c));
        }
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    out.reserve(keys.size());
    for (const auto& k : keys) out.push_back(Triangle{k});
    return out;
}

}  // namespace kinemesh
