#include "kinemesh/remesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

#include "kinemesh/bvh.hpp"
#include "kinemesh/delaunay.hpp"
#include "kinemesh/error.hpp"

namespace kinemesh {

void RemeshConfig::validate() const {
    if (!(radius_multiplier > 0.0)) throw Error("invalid-config", "remesh radius multiplier must be positive");
    if (max_faces_per_part < 1) throw Error("invalid-config", "max_faces_per_part must be positive");
}

namespace {

using Edge = std::pair<int, int>;

Edge make_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

std::array<int, 3> sorted_triple(const Triangle& t) {
    std::array<int, 3> k = t.v;
    std::sort(k.begin(), k.end());
    return k;
}

struct Candidate {
    Triangle tri;  // local indices, oriented
    bool seed = false;
    double distance = 0.0;
    std::array<int, 3> key{};
};

class UnionFind {
public:
    explicit UnionFind(size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    size_t find(size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    void unite(size_t a, size_t b) { parent_[find(a)] = find(b); }

private:
    std::vector<size_t> parent_;
};

// Accepted-face bookkeeping for the manifold fan pruning.
class FanBuilder {
public:
    FanBuilder(std::span<const Vec3> pts, bool enforce) : pts_(pts), enforce_(enforce) {}

    bool try_add(const Triangle& t) {
        if (enforce_) {
            for (int e = 0; e < 3; ++e) {
                const int a = t[e];
                const int b = t[(e + 1) % 3];
                const int c = t[(e + 2) % 3];
                auto it = edges_.find(make_edge(a, b));
                if (it == edges_.end()) continue;
                if (it->second.size() >= 2) return false;
                for (int opp : it->second)
                    if (folds(a, b, c, opp)) return false;
            }
        }
        for (int e = 0; e < 3; ++e) {
            const int a = t[e];
            const int b = t[(e + 1) % 3];
            edges_[make_edge(a, b)].push_back(t[(e + 2) % 3]);
        }
        faces_.push_back(t);
        return true;
    }

    const std::vector<Triangle>& faces() const { return faces_; }

private:
    // Two faces on edge (a,b) with apexes c and d fold onto each other when
    // their half-planes around the edge nearly coincide.
    bool folds(int a, int b, int c, int d) const {
        const Vec3& pa = pts_[static_cast<size_t>(a)];
        const Vec3 e = (pts_[static_cast<size_t>(b)] - pa).normalized();
        Vec3 u = pts_[static_cast<size_t>(c)] - pa;
        Vec3 v = pts_[static_cast<size_t>(d)] - pa;
        u -= u.dot(e) * e;
        v -= v.dot(e) * e;
        const double nu = u.norm();
        const double nv = v.norm();
        if (nu <= 0.0 || nv <= 0.0) return true;
        return u.dot(v) / (nu * nv) > 0.9;
    }

    std::span<const Vec3> pts_;
    bool enforce_;
    std::map<Edge, std::vector<int>> edges_;
    std::vector<Triangle> faces_;
};

}  // namespace

int edge_connected_components(std::span<const Triangle> faces) {
    if (faces.empty()) return 0;
    UnionFind uf(faces.size());
    std::map<Edge, size_t> first_owner;
    for (size_t f = 0; f < faces.size(); ++f) {
        for (int e = 0; e < 3; ++e) {
            const Edge key = make_edge(faces[f][e], faces[f][(e + 1) % 3]);
            auto [it, inserted] = first_owner.emplace(key, f);
            if (!inserted) uf.unite(f, it->second);
        }
    }
    std::set<size_t> roots;
    for (size_t f = 0; f < faces.size(); ++f) roots.insert(uf.find(f));
    return static_cast<int>(roots.size());
}

std::vector<std::pair<int, int>> boundary_edges(std::span<const Triangle> faces) {
    std::map<Edge, int> count;
    for (const Triangle& t : faces)
        for (int e = 0; e < 3; ++e) ++count[make_edge(t[e], t[(e + 1) % 3])];
    std::vector<std::pair<int, int>> out;
    for (const auto& [e, c] : count)
        if (c == 1) out.push_back(e);
    return out;
}

PartRemeshResult restricted_delaunay_part(std::span<const Vec3> positions, std::span<const int> part_vertices,
                                          std::span<const Triangle> seed_faces, const RemeshConfig& cfg) {
    cfg.validate();
    PartRemeshResult result;
    const size_t n = part_vertices.size();
    if (n < 3) {
        result.warnings.push_back("part with " + std::to_string(n) + " vertices emitted without faces");
        return result;
    }

    std::map<int, int> to_local;
    std::vector<Vec3> pts(n);
    for (size_t i = 0; i < n; ++i) {
        to_local[part_vertices[i]] = static_cast<int>(i);
        pts[i] = positions[static_cast<size_t>(part_vertices[i])];
    }
    std::vector<Triangle> seeds;
    seeds.reserve(seed_faces.size());
    for (const Triangle& t : seed_faces) {
        Triangle local;
        for (int c = 0; c < 3; ++c) {
            auto it = to_local.find(t[c]);
            if (it == to_local.end()) throw Error("invalid-mesh", "seed face references a vertex outside the part");
            local[c] = it->second;
        }
        seeds.push_back(local);
    }
    auto to_global = [&](const std::vector<Triangle>& local) {
        std::vector<Triangle> out;
        out.reserve(local.size());
        for (const Triangle& t : local)
            out.push_back(Triangle{{part_vertices[static_cast<size_t>(t[0])], part_vertices[static_cast<size_t>(t[1])],
                                    part_vertices[static_cast<size_t>(t[2])]}});
        return out;
    };

    if (n == 3 && seeds.empty()) {
        result.faces = to_global({Triangle{{0, 1, 2}}});
        return result;
    }
    if (static_cast<int>(n) < cfg.min_vertices_for_delaunay || seeds.empty()) {
        result.faces = to_global(seeds);
        return result;
    }

    // Median seed edge length.
    std::vector<double> lengths;
    for (const Triangle& t : seeds)
        for (int e = 0; e < 3; ++e) lengths.push_back((pts[static_cast<size_t>(t[e])] - pts[static_cast<size_t>(t[(e + 1) % 3])]).norm());
    std::nth_element(lengths.begin(), lengths.begin() + static_cast<long>(lengths.size() / 2), lengths.end());
    const double median_edge = lengths[lengths.size() / 2];
    const double max_radius = cfg.radius_multiplier * median_edge;

    // Jitter only for the tetrahedralization.
    const double diag = bounds_of(pts).diagonal();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<Vec3> jittered = pts;
    for (Vec3& p : jittered) p += cfg.jitter * diag * Vec3(unit(rng), unit(rng), unit(rng));

    const TriangleBvh seed_tree(pts, seeds);
    std::set<std::array<int, 3>> seed_keys;
    std::map<std::array<int, 3>, Triangle> seed_by_key;
    for (const Triangle& t : seeds) {
        seed_keys.insert(sorted_triple(t));
        seed_by_key.emplace(sorted_triple(t), t);
    }

    std::vector<Candidate> candidates;
    for (const Triangle& raw : delaunay_faces(jittered)) {
        const Vec3& a = pts[static_cast<size_t>(raw[0])];
        const Vec3& b = pts[static_cast<size_t>(raw[1])];
        const Vec3& c = pts[static_cast<size_t>(raw[2])];
        Candidate cand;
        cand.key = sorted_triple(raw);
        cand.seed = seed_keys.count(cand.key) > 0;
        if (cand.seed) {
            cand.tri = seed_by_key.at(cand.key);
            candidates.push_back(cand);
            continue;
        }
        if (triangle_circumradius(a, b, c) > max_radius) continue;
        const Vec3 centroid = (a + b + c) / 3.0;
        const auto near = seed_tree.nearest(centroid);
        if (!near) continue;
        const Triangle& s = seeds[static_cast<size_t>(near->face)];
        const Vec3 seed_n = triangle_normal(pts[static_cast<size_t>(s[0])], pts[static_cast<size_t>(s[1])],
                                            pts[static_cast<size_t>(s[2])]);
        const Vec3 cand_n = triangle_normal(a, b, c);
        const double cosine = seed_n.dot(cand_n);
        if (std::abs(cosine) < cfg.min_normal_cos) continue;
        cand.tri = cosine >= 0.0 ? raw : Triangle{{raw[0], raw[2], raw[1]}};
        double dist = near->closest.distance;
        for (int e = 0; e < 3; ++e) {
            const Vec3 mid = 0.5 * (pts[static_cast<size_t>(raw[e])] + pts[static_cast<size_t>(raw[(e + 1) % 3])]);
            dist = std::max(dist, seed_tree.nearest(mid)->closest.distance);
        }
        cand.distance = dist;
        candidates.push_back(cand);
    }

    std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
        return std::tie(y.seed, x.distance, x.key) < std::tie(x.seed, y.distance, y.key);
    });

    FanBuilder fan(pts, cfg.enforce_manifold);
    for (const Candidate& c : candidates) {
        if (static_cast<int>(fan.faces().size()) >= cfg.max_faces_per_part) break;
        fan.try_add(c.tri);
    }

    std::vector<Triangle> out = fan.faces();
    const int seed_components = edge_connected_components(seeds);
    if (edge_connected_components(out) > seed_components) {
        // Re-admit seed faces that the Delaunay structure lacked.
        FanBuilder repair(pts, cfg.enforce_manifold);
        for (const Triangle& t : out) repair.try_add(t);
        std::set<std::array<int, 3>> have;
        for (const Triangle& t : out) have.insert(sorted_triple(t));
        for (const Triangle& t : seeds)
            if (!have.count(sorted_triple(t))) repair.try_add(t);
        out = repair.faces();
        if (edge_connected_components(out) > seed_components) {
            result.warnings.push_back("restricted Delaunay split a connected part; kept seed faces");
            result.used_seed_fallback = true;
            out = seeds;
        }
    }

    std::sort(out.begin(), out.end(), [](const Triangle& x, const Triangle& y) { return sorted_triple(x) < sorted_triple(y); });
    result.faces = to_global(out);
    return result;
}

PartAwareMesh remesh_all(const PartAwareMesh& mesh, const RemeshConfig& cfg, RemeshReport* report) {
    if (!mesh.hardened()) throw Error("not-hardened", "mesh not hardened");
    const FacePartition partition = partition_faces(mesh);

    std::vector<std::vector<int>> part_vertices(static_cast<size_t>(mesh.num_parts));
    for (size_t i = 0; i < mesh.vertex_count(); ++i) part_vertices[static_cast<size_t>(mesh.labels[i])].push_back(static_cast<int>(i));

    PartAwareMesh out = mesh;
    out.faces.clear();
    out.part_faces.assign(static_cast<size_t>(mesh.num_parts), {});
    RemeshReport local_report;
    local_report.dropped_cross_part = static_cast<int>(partition.dropped.size());

    for (int k = 0; k < mesh.num_parts; ++k) {
        std::vector<Triangle> seeds;
        for (int f : partition.per_part[static_cast<size_t>(k)]) seeds.push_back(mesh.faces[static_cast<size_t>(f)]);
        const auto& verts = part_vertices[static_cast<size_t>(k)];
        PartRemeshResult part;
        if (!verts.empty()) part = restricted_delaunay_part(mesh.positions, verts, seeds, cfg);
        for (const std::string& w : part.warnings) local_report.warnings.push_back("part " + std::to_string(k) + ": " + w);
        for (const Triangle& t : part.faces) {
            out.part_faces[static_cast<size_t>(k)].push_back(static_cast<int>(out.faces.size()));
            out.faces.push_back(t);
        }
        local_report.faces_per_part.push_back(static_cast<int>(part.faces.size()));
    }
    if (report) *report = std::move(local_report);
    return out;
}

}  // namespace kinemesh
