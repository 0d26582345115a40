#include "kinemesh/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <tuple>

#include "kinemesh/error.hpp"

namespace kinemesh {

std::string to_string(SceneTemplate t) {
    switch (t) {
        case SceneTemplate::HingedBox: return "hinged-box";
        case SceneTemplate::DrawerCabinet: return "drawer-cabinet";
        case SceneTemplate::MultiDrawer: return "multi-drawer";
        case SceneTemplate::DoorDrawer: return "door-drawer";
    }
    return "hinged-box";
}

SceneTemplate scene_template_from_string(const std::string& s) {
    if (s == "hinged-box") return SceneTemplate::HingedBox;
    if (s == "drawer-cabinet") return SceneTemplate::DrawerCabinet;
    if (s == "multi-drawer") return SceneTemplate::MultiDrawer;
    if (s == "door-drawer" || s == "door+drawer") return SceneTemplate::DoorDrawer;
    throw Error("bad-template", "unknown template '" + s + "' (hinged-box, drawer-cabinet, multi-drawer, door-drawer)");
}

int template_part_count(SceneTemplate t) {
    switch (t) {
        case SceneTemplate::HingedBox:
        case SceneTemplate::DrawerCabinet: return 2;
        case SceneTemplate::MultiDrawer: return 3;
        case SceneTemplate::DoorDrawer: return 4;
    }
    return 2;
}

void SceneSpec::validate() const {
    if (num_parts != 0 && num_parts != template_part_count(tmpl))
        throw Error("template-mismatch", to_string(tmpl) + " has " + std::to_string(template_part_count(tmpl)) +
                                             " parts, spec asks for " + std::to_string(num_parts));
    if (train_views < 1 || test_views < 0) throw Error("invalid-config", "view counts");
    if (image_size < 4) throw Error("invalid-config", "image size too small");
    if (!(edge_length > 0.0)) throw Error("invalid-config", "edge length must be positive");
    if (!(q_start_lo <= q_start_hi && q_end_lo <= q_end_hi)) throw Error("invalid-config", "joint state ranges");
}

PartJoint JointTruth::at(double q) const {
    PartJoint j;
    j.type = type;
    if (type == JointType::Revolute) {
        j.rotation = UnitQuaternion::from_axis_angle(axis, q * range * std::numbers::pi / 180.0);
        j.pivot = pivot;
    } else {
        j.translation = q * range * axis;
    }
    return j;
}

PartJoint JointTruth::relative() const { return at(q_end - q_start); }

JointParams GroundTruth::joint_params() const {
    JointParams out = JointParams::identity(num_parts);
    for (const JointTruth& j : joints) out.parts[static_cast<size_t>(j.part)] = j.relative();
    return out;
}

void box_surface(const Vec3& lo, const Vec3& hi, double edge_length, std::vector<Vec3>& positions,
                 std::vector<Triangle>& faces) {
    std::array<int, 3> n{};
    for (int a = 0; a < 3; ++a) n[static_cast<size_t>(a)] = std::max(1, static_cast<int>(std::lround((hi[a] - lo[a]) / edge_length)));
    std::map<std::array<int, 3>, int> index;
    auto vertex = [&](std::array<int, 3> ijk) {
        auto it = index.find(ijk);
        if (it != index.end()) return it->second;
        Vec3 p;
        for (int a = 0; a < 3; ++a)
            p[a] = lo[a] + (hi[a] - lo[a]) * ijk[static_cast<size_t>(a)] / n[static_cast<size_t>(a)];
        const int id = static_cast<int>(positions.size());
        positions.push_back(p);
        index.emplace(ijk, id);
        return id;
    };
    for (int axis = 0; axis < 3; ++axis)
        for (int side = 0; side < 2; ++side) {
            // (u, v) spans the side with u x v along the outward normal
            int u = (axis + 1) % 3, v = (axis + 2) % 3;
            if (side == 0) std::swap(u, v);
            for (int j = 0; j < n[static_cast<size_t>(v)]; ++j)
                for (int i = 0; i < n[static_cast<size_t>(u)]; ++i) {
                    auto at = [&](int di, int dj) {
                        std::array<int, 3> ijk{};
                        ijk[static_cast<size_t>(axis)] = side * n[static_cast<size_t>(axis)];
                        ijk[static_cast<size_t>(u)] = i + di;
                        ijk[static_cast<size_t>(v)] = j + dj;
                        return vertex(ijk);
                    };
                    const int p00 = at(0, 0), p10 = at(1, 0), p11 = at(1, 1), p01 = at(0, 1);
                    faces.push_back({{p00, p10, p11}});
                    faces.push_back({{p00, p11, p01}});
                }
        }
}

namespace {

struct PartBox {
    Vec3 lo, hi;
};

struct TemplateLayout {
    std::vector<PartBox> boxes;   // index = part
    std::vector<JointTruth> joints;
};

TemplateLayout layout_for(const SceneSpec& spec) {
    TemplateLayout t;
    const double hinge = spec.hinge_range_deg;
    const double slide = spec.drawer_range;
    switch (spec.tmpl) {
        case SceneTemplate::HingedBox:
            t.boxes = {{{-0.4, -0.3, 0.0}, {0.4, 0.3, 0.4}}, {{-0.4, -0.3, 0.4}, {0.4, 0.3, 0.46}}};
            // lid hinged along its back edge, opens upward
            t.joints = {{1, JointType::Revolute, -Vec3::UnitX(), Vec3(0, 0.3, 0.4), hinge}};
            break;
        case SceneTemplate::DrawerCabinet:
            t.boxes = {{{-0.4, -0.3, 0.0}, {0.4, 0.3, 0.6}}, {{-0.3, -0.36, 0.15}, {0.3, 0.2, 0.45}}};
            t.joints = {{1, JointType::Prismatic, -Vec3::UnitY(), Vec3::Zero(), slide}};
            break;
        case SceneTemplate::MultiDrawer:
            t.boxes = {{{-0.4, -0.3, 0.0}, {0.4, 0.3, 0.72}},
                       {{-0.3, -0.36, 0.06}, {0.3, 0.2, 0.32}},
                       {{-0.3, -0.36, 0.40}, {0.3, 0.2, 0.66}}};
            t.joints = {{1, JointType::Prismatic, -Vec3::UnitY(), Vec3::Zero(), slide},
                        {2, JointType::Prismatic, -Vec3::UnitY(), Vec3::Zero(), slide}};
            break;
        case SceneTemplate::DoorDrawer:
            t.boxes = {{{-0.45, -0.3, 0.0}, {0.45, 0.3, 0.62}},
                       {{-0.42, -0.36, 0.05}, {-0.02, -0.3, 0.57}},
                       {{0.05, -0.36, 0.2}, {0.4, 0.2, 0.45}},
                       {{-0.45, -0.3, 0.62}, {0.45, 0.3, 0.68}}};
            t.joints = {{1, JointType::Revolute, -Vec3::UnitZ(), Vec3(-0.42, -0.33, 0.0), hinge},
                        {2, JointType::Prismatic, -Vec3::UnitY(), Vec3::Zero(), slide},
                        {3, JointType::Revolute, -Vec3::UnitX(), Vec3(0, 0.3, 0.62), hinge}};
            break;
    }
    return t;
}

Vec3 hsv(double h, double s, double v) {
    const double c = v * s;
    const double hp = std::fmod(h * 6.0, 6.0);
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    Vec3 rgb = hp < 1 ? Vec3(c, x, 0) : hp < 2 ? Vec3(x, c, 0) : hp < 3 ? Vec3(0, c, x)
             : hp < 4 ? Vec3(0, x, c) : hp < 5 ? Vec3(x, 0, c) : Vec3(c, 0, x);
    return rgb + Vec3::Constant(v - c);
}

std::vector<PinholeCamera> sample_cameras(std::mt19937_64& rng, int count, const SceneSpec& spec, const Vec3& target,
                                          double yaw) {
    std::uniform_real_distribution<double> az(-110.0, 110.0), el(12.0, 60.0);
    const double f = 0.5 * spec.image_size / std::tan(0.5 * spec.fov_deg * std::numbers::pi / 180.0);
    std::vector<PinholeCamera> cams;
    for (int i = 0; i < count; ++i) {
        const double a = (az(rng) - 90.0) * std::numbers::pi / 180.0 + yaw;
        const double e = el(rng) * std::numbers::pi / 180.0;
        const Vec3 dir(std::cos(e) * std::cos(a), std::cos(e) * std::sin(a), std::sin(e));
        cams.push_back(PinholeCamera::look_at(target + spec.camera_radius * dir, target, Vec3::UnitZ(), f, f,
                                              spec.image_size, spec.image_size, 0.05, 20.0));
    }
    return cams;
}

}  // namespace

CameraView render_view(const PartAwareMesh& mesh, const PinholeCamera& cam, const RasterConfig& cfg, int state) {
    const RenderBuffers b = render(mesh, cam, cfg, true);
    CameraView v;
    v.camera = cam;
    v.rgb = b.rgb;
    v.depth = b.depth;
    v.state = state;
    v.labels = LabelMap(cam.width, cam.height, -1);
    const std::vector<int> front = b.front_faces();
    for (size_t p = 0; p < front.size(); ++p)
        if (front[p] >= 0) v.labels.labels[p] = mesh.labels[static_cast<size_t>(mesh.faces[static_cast<size_t>(front[p])][0])];
    return v;
}

Scene generate_scene(const SceneSpec& spec) {
    spec.validate();
    Scene scene;
    scene.spec = spec;
    std::mt19937_64 rng(0x5eedULL * 1000003ULL + spec.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    TemplateLayout layout = layout_for(spec);
    const int parts = static_cast<int>(layout.boxes.size());
    const double scale = 0.9 + 0.2 * u01(rng);
    const double yaw = (-25.0 + 50.0 * u01(rng)) * std::numbers::pi / 180.0;
    const Mat3 yaw_r = exp_so3(Vec3(0, 0, yaw));

    // canonical (closed) geometry, part by part
    std::vector<Vec3> canonical;
    std::vector<Triangle> faces;
    std::vector<int> labels;
    for (int k = 0; k < parts; ++k) {
        const size_t begin = canonical.size();
        box_surface(layout.boxes[static_cast<size_t>(k)].lo * scale, layout.boxes[static_cast<size_t>(k)].hi * scale,
                    spec.edge_length, canonical, faces);
        labels.resize(canonical.size(), k);
        for (size_t i = begin; i < canonical.size(); ++i) canonical[i] = yaw_r * canonical[i];
    }
    for (JointTruth& j : layout.joints) {
        j.axis = yaw_r * j.axis;
        j.pivot = yaw_r * (j.pivot * scale);
        if (j.type == JointType::Prismatic) j.range *= scale;
        j.q_start = spec.q_start_lo + (spec.q_start_hi - spec.q_start_lo) * u01(rng);
        j.q_end = spec.q_end_lo + (spec.q_end_hi - spec.q_end_lo) * u01(rng);
    }

    // per-vertex albedo: distinct part hues plus a smooth pattern fixed to the part
    PartAwareMesh base;
    base.num_parts = parts;
    base.resize_vertices(canonical.size());
    base.faces = faces;
    const double hue0 = u01(rng);
    std::vector<Vec3> part_color(static_cast<size_t>(parts));
    for (int k = 0; k < parts; ++k)
        part_color[static_cast<size_t>(k)] = hsv(std::fmod(hue0 + 0.618034 * k, 1.0), 0.55, 0.45 + 0.3 * u01(rng));
    const Vec3 phase(u01(rng), u01(rng), u01(rng));
    for (size_t i = 0; i < canonical.size(); ++i) {
        const Vec3& p = canonical[i];
        Vec3 c = part_color[static_cast<size_t>(labels[i])];
        for (int a = 0; a < 3; ++a)
            c[a] += spec.albedo_contrast * 0.2 *
                    std::sin(2.0 * std::numbers::pi * (1.7 * p[(a + 1) % 3] + 1.3 * p[(a + 2) % 3] + phase[a]));
        c = c.cwiseMax(Vec3::Zero()).cwiseMin(Vec3::Ones());
        for (int a = 0; a < 3; ++a) base.sh[3 * i + static_cast<size_t>(a)] = c[a];
    }
    set_one_hot_logits(base, labels, 2.0);

    GroundTruth& gt = scene.gt;
    gt.num_parts = parts;
    gt.joints = layout.joints;
    for (int s = 0; s < 2; ++s) {
        PartAwareMesh m = base;
        m.state = s;
        for (const JointTruth& j : gt.joints) {
            JointParams jp = JointParams::identity(parts);
            jp.parts[static_cast<size_t>(j.part)] = j.at(s == 0 ? j.q_start : j.q_end);
            const AffineMotion g = to_affine(jp, j.part);
            for (size_t i = 0; i < canonical.size(); ++i)
                if (labels[i] == j.part) m.positions[i] = g.apply(canonical[i]);
        }
        for (size_t i = 0; i < canonical.size(); ++i)
            if (labels[i] == 0) m.positions[i] = canonical[i];
        gt.mesh[static_cast<size_t>(s)] = harden_parts(m);
    }

    const Vec3 target = gt.mesh[0].bounds().center();
    for (int s = 0; s < 2; ++s) {
        std::mt19937_64 cam_rng(spec.seed * 7919ULL + 17ULL * static_cast<unsigned long long>(s) + 1ULL);
        const auto train = sample_cameras(cam_rng, spec.train_views, spec, target, yaw);
        const auto test = sample_cameras(cam_rng, spec.test_views, spec, target, yaw);
        for (const auto& cam : train) scene.train[static_cast<size_t>(s)].push_back(render_view(gt.mesh[static_cast<size_t>(s)], cam, spec.raster, s));
        for (const auto& cam : test) scene.test[static_cast<size_t>(s)].push_back(render_view(gt.mesh[static_cast<size_t>(s)], cam, spec.raster, s));
    }
    return scene;
}

PartAwareMesh perturb_for_init(const PartAwareMesh& mesh, double noise_sigma, unsigned seed) {
    if (!(noise_sigma >= 0.0)) throw Error("invalid-config", "noise sigma must be non-negative");
    PartAwareMesh out = mesh;
    if (noise_sigma == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, noise_sigma);
    for (Vec3& p : out.positions) p += Vec3(n(rng), n(rng), n(rng));
    return out;
}

std::array<PartAwareMesh, 2> initial_meshes(const GroundTruth& gt, double noise_fraction, unsigned seed) {
    if (!(noise_fraction >= 0.0)) throw Error("invalid-config", "noise fraction must be non-negative");
    std::array<PartAwareMesh, 2> out;
    for (int s = 0; s < 2; ++s) {
        const PartAwareMesh& m = gt.mesh[static_cast<size_t>(s)];
        PartAwareMesh& o = out[static_cast<size_t>(s)];
        o = perturb_for_init(m, noise_fraction * m.bounds().diagonal(), seed * 2U + static_cast<unsigned>(s));
        std::fill(o.sh.begin(), o.sh.end(), 0.5);
    }
    return out;
}

}  // namespace kinemesh
