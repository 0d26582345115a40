#include "kinemesh/depth_init.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "kinemesh/error.hpp"

namespace kinemesh {

void DepthInitConfig::validate() const {
    if (!(voxel_fraction > 0.0)) throw Error("invalid-config", "depth init voxel fraction must be positive");
    if (!(max_depth_jump > 0.0)) throw Error("invalid-config", "depth init max depth jump must be positive");
    if (!(logit_scale > 0.0)) throw Error("invalid-config", "depth init logit scale must be positive");
    remesh.validate();
}

Vec3 back_project(const PinholeCamera& cam, int x, int y, double z) {
    const Vec3 q((x + 0.5 - cam.cx) / cam.fx * z, (y + 0.5 - cam.cy) / cam.fy * z, z);
    return cam.rotation.transpose() * (q - cam.translation);
}

namespace {

struct PixelPoint {
    Vec3 position = Vec3::Zero();
    Vec3 color = Vec3::Zero();
    int label = -1;  // -1: nothing usable at this pixel
    double depth = 0.0;
};

struct Voxel {
    Vec3 position_sum = Vec3::Zero();
    Vec3 color_sum = Vec3::Zero();
    int count = 0;
    int label = 0;
};

}  // namespace

PartAwareMesh mesh_from_depth(std::span<const CameraView> views, int num_parts, const DepthInitConfig& cfg,
                              std::vector<std::string>* warnings) {
    cfg.validate();
    if (views.empty()) throw Error("empty-views", "depth initialization needs at least one view");
    if (num_parts < 1) throw Error("invalid-config", "part count must be at least 1");

    std::vector<std::vector<PixelPoint>> grids(views.size());
    Aabb box;
    for (size_t v = 0; v < views.size(); ++v) {
        const CameraView& view = views[v];
        const int w = view.depth.width, h = view.depth.height;
        if (view.labels.width != w || view.labels.height != h || view.rgb.width != w || view.rgb.height != h)
            throw Error("shape-mismatch", "view " + std::to_string(v) + " has mismatched rgb/depth/label sizes");
        std::vector<PixelPoint>& grid = grids[v];
        grid.resize(static_cast<size_t>(w) * static_cast<size_t>(h));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int label = view.labels.at(x, y);
                if (label >= num_parts)
                    throw Error("invalid-label", "label " + std::to_string(label) + " in view " + std::to_string(v) +
                                                     " exceeds the part count " + std::to_string(num_parts));
                const double z = view.depth.at(x, y);
                if (label < 0 || !(z > 0.0)) continue;
                PixelPoint& p = grid[static_cast<size_t>(y) * static_cast<size_t>(w) + static_cast<size_t>(x)];
                p.position = back_project(view.camera, x, y, z);
                p.color = Vec3(view.rgb.at(x, y, 0), view.rgb.at(x, y, 1), view.rgb.at(x, y, 2));
                p.label = label;
                p.depth = z;
                box.extend(p.position);
            }
    }
    if (box.empty()) throw Error("empty-views", "no labelled pixel with valid depth");

    const double cell = cfg.voxel_fraction * std::max(box.diagonal(), 1e-12);
    std::map<std::tuple<int, long, long, long>, int> voxel_id;
    std::vector<Voxel> voxels;
    std::vector<std::vector<int>> owner(views.size());  // pixel -> voxel
    for (size_t v = 0; v < views.size(); ++v) {
        owner[v].assign(grids[v].size(), -1);
        for (size_t i = 0; i < grids[v].size(); ++i) {
            const PixelPoint& p = grids[v][i];
            if (p.label < 0) continue;
            const Vec3 c = (p.position - box.lo) / cell;
            const auto key = std::make_tuple(p.label, std::lround(std::floor(c.x())), std::lround(std::floor(c.y())),
                                             std::lround(std::floor(c.z())));
            auto [it, inserted] = voxel_id.emplace(key, static_cast<int>(voxels.size()));
            if (inserted) {
                voxels.emplace_back();
                voxels.back().label = p.label;
            }
            Voxel& vx = voxels[static_cast<size_t>(it->second)];
            vx.position_sum += p.position;
            vx.color_sum += p.color;
            ++vx.count;
            owner[v][i] = it->second;
        }
    }

    std::vector<Vec3> positions(voxels.size());
    for (size_t i = 0; i < voxels.size(); ++i) positions[i] = voxels[i].position_sum / voxels[i].count;

    // Pixel-grid triangles, wound to face the camera that saw them.
    std::vector<std::vector<Triangle>> seeds(static_cast<size_t>(num_parts));
    std::set<std::array<int, 3>> seen;
    for (size_t v = 0; v < views.size(); ++v) {
        const int w = views[v].depth.width, h = views[v].depth.height;
        const Vec3 eye = views[v].camera.center();
        auto at = [w](int x, int y) { return static_cast<size_t>(y) * static_cast<size_t>(w) + static_cast<size_t>(x); };
        auto emit = [&](size_t a, size_t b, size_t c) {
            const PixelPoint &pa = grids[v][a], &pb = grids[v][b], &pc = grids[v][c];
            if (pa.label < 0 || pa.label != pb.label || pa.label != pc.label) return;
            const double lo = std::min({pa.depth, pb.depth, pc.depth}), hi = std::max({pa.depth, pb.depth, pc.depth});
            if (hi - lo > cfg.max_depth_jump * lo) return;
            Triangle t{{owner[v][a], owner[v][b], owner[v][c]}};
            if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) return;
            std::array<int, 3> key = t.v;
            std::sort(key.begin(), key.end());
            if (!seen.insert(key).second) return;
            const Vec3& p0 = positions[static_cast<size_t>(t[0])];
            const Vec3 n = (positions[static_cast<size_t>(t[1])] - p0).cross(positions[static_cast<size_t>(t[2])] - p0);
            if (n.dot(eye - p0) < 0.0) std::swap(t.v[1], t.v[2]);
            seeds[static_cast<size_t>(pa.label)].push_back(t);
        };
        for (int y = 0; y + 1 < h; ++y)
            for (int x = 0; x + 1 < w; ++x) {
                emit(at(x, y), at(x + 1, y), at(x + 1, y + 1));
                emit(at(x, y), at(x + 1, y + 1), at(x, y + 1));
            }
    }

    PartAwareMesh mesh;
    mesh.state = views[0].state;
    mesh.num_parts = num_parts;
    mesh.resize_vertices(voxels.size());
    mesh.positions = positions;
    std::vector<int> labels(voxels.size());
    for (size_t i = 0; i < voxels.size(); ++i) {
        const Vec3 c = (voxels[i].color_sum / voxels[i].count).cwiseMax(Vec3::Zero()).cwiseMin(Vec3::Ones());
        for (int a = 0; a < 3; ++a) mesh.sh[i * static_cast<size_t>(mesh.sh_stride()) + static_cast<size_t>(a)] = c[a];
        mesh.opacity[i] = 1.0;
        labels[i] = voxels[i].label;
    }
    set_one_hot_logits(mesh, labels, cfg.logit_scale);

    for (int k = 0; k < num_parts; ++k) {
        std::vector<int> part_vertices;
        for (size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == k) part_vertices.push_back(static_cast<int>(i));
        if (part_vertices.empty())
            throw Error("empty-part", "part " + std::to_string(k) + " has no labelled pixel with valid depth");
        const PartRemeshResult r =
            restricted_delaunay_part(mesh.positions, part_vertices, seeds[static_cast<size_t>(k)], cfg.remesh);
        mesh.faces.insert(mesh.faces.end(), r.faces.begin(), r.faces.end());
        if (warnings)
            for (const std::string& w : r.warnings) warnings->push_back("depth init part " + std::to_string(k) + ": " + w);
    }
    return harden_parts(mesh);
}

std::array<PartAwareMesh, 2> starting_meshes(const Dataset& data, const TrainConfig& cfg,
                                             std::vector<std::string>* warnings) {
    if (!cfg.init_from_depth) {
        if (!data.init) throw Error("missing-init", "dataset " + data.name + " has no initial meshes");
        return *data.init;
    }
    DepthInitConfig dc;
    dc.voxel_fraction = cfg.init_voxel_fraction;
    dc.remesh = cfg.remesh_config;
    std::array<PartAwareMesh, 2> out;
    for (int s = 0; s < 2; ++s) {
        out[static_cast<size_t>(s)] = mesh_from_depth(data.train[static_cast<size_t>(s)], data.num_parts, dc, warnings);
        out[static_cast<size_t>(s)].state = s;
    }
    return out;
}

}  // namespace kinemesh
