#include "kinemesh/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "kinemesh/error.hpp"

namespace kinemesh {

Adam::Adam(size_t size, double lr, AdamConfig cfg) : lr_(lr), cfg_(cfg), m_(size, 0.0), v_(size, 0.0) {}

void Adam::resize(size_t size) {
    m_.assign(size, 0.0);
    v_.assign(size, 0.0);
    t_ = 0;
}

void Adam::reset() {
    std::fill(m_.begin(), m_.end(), 0.0);
    std::fill(v_.begin(), v_.end(), 0.0);
    t_ = 0;
}

void Adam::step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw Error("shape-mismatch", "adam group has " + std::to_string(m_.size()) + " entries, got " +
                                          std::to_string(params.size()) + " params and " +
                                          std::to_string(grads.size()) + " grads");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
        params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
    }
}

void TrainConfig::validate() const {
    const TrainConfig r = resolved();
    if (r.iterations < 2) throw Error("invalid-config", "iterations must be at least 2");
    if (!(r.init_voxel_fraction > 0.0)) throw Error("invalid-config", "init_voxel_fraction must be positive");
    if (r.recon_split < 1 || r.recon_split >= r.iterations)
        throw Error("invalid-config", "recon_split must lie in [1, iterations)");
    auto in_articulation = [&](int it, const char* name) {
        if (it < r.recon_split || it > r.iterations)
            throw Error("invalid-config", std::string(name) + " must lie in the articulation phase");
    };
    in_articulation(r.backward_start, "backward_start");
    in_articulation(r.vertex_start, "vertex_start");
    in_articulation(r.bakeoff_iter, "bakeoff_iter");
    if (r.remesh_iter < 0 || r.remesh_iter > r.recon_split)
        throw Error("invalid-config", "remesh_iter must lie in the reconstruction phase");
    for (double lr : {lr_rotation, lr_translation, lr_pivot, lr_logits, lr_color, lr_opacity, lr_position_start,
                      lr_position_end})
        if (!(lr >= 0.0)) throw Error("invalid-config", "learning rates must be non-negative");
    if (views_per_step < 0) throw Error("invalid-config", "views_per_step must be >= 0");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw Error("invalid-config", "ema_decay must lie in [0, 1)");
    if (!(seed_sweep_deg > 0.0)) throw Error("invalid-config", "seed_sweep_deg must be positive");
    weights.validate();
    raster.validate();
    remesh_config.validate();
}

TrainConfig TrainConfig::resolved() const {
    TrainConfig r = *this;
    if (r.recon_split < 0) r.recon_split = r.iterations / 2;
    const int a = r.iterations - r.recon_split;
    if (r.remesh_iter < 0) r.remesh_iter = static_cast<int>(std::lround(0.9 * r.recon_split));
    if (r.backward_start < 0) r.backward_start = r.recon_split + a / 4;
    if (r.vertex_start < 0) r.vertex_start = r.recon_split + a / 2;
    if (r.bakeoff_iter < 0) r.bakeoff_iter = r.recon_split + a / 2;
    return r;
}

std::uint64_t mesh_hash(const PartAwareMesh& mesh) {
    std::uint64_t h = 1469598103934665603ULL;
    auto bytes = [&](const void* data, size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    };
    const int header[3] = {mesh.state, mesh.num_parts, mesh.sh_degree};
    bytes(header, sizeof(header));
    for (const Vec3& p : mesh.positions) bytes(p.data(), 3 * sizeof(double));
    bytes(mesh.sh.data(), mesh.sh.size() * sizeof(double));
    bytes(mesh.opacity.data(), mesh.opacity.size() * sizeof(double));
    bytes(mesh.logits.data(), mesh.logits.size() * sizeof(double));
    for (const Triangle& f : mesh.faces) bytes(f.v.data(), 3 * sizeof(int));
    bytes(mesh.labels.data(), mesh.labels.size() * sizeof(int));
    return h;
}

double psnr(const Image& pred, const Image& gt) {
    if (pred.data.size() != gt.data.size()) throw Error("shape-mismatch", "psnr needs equal image sizes");
    double mse = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - gt.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(std::max<size_t>(1, pred.data.size()));
    return mse > 0.0 ? -10.0 * std::log10(mse) : 100.0;
}

double mean_psnr(const PartAwareMesh& mesh, std::span<const CameraView> views, const RasterConfig& cfg) {
    if (views.empty()) throw Error("empty-views", "psnr needs at least one view");
    double sum = 0.0;
    for (const CameraView& v : views) sum += psnr(render(mesh, v.camera, cfg, false).rgb, v.rgb);
    return sum / static_cast<double>(views.size());
}

std::string train_log_csv(std::span<const TrainLogRow> rows) {
    std::ostringstream out;
    out << "iteration,phase,loss,pix_fwd,pix_bwd,vtx_fwd,vtx_bwd,lr_position\n";
    out.precision(10);
    for (const TrainLogRow& r : rows)
        out << r.iteration << ',' << r.phase << ',' << r.loss << ',' << r.pix_fwd << ',' << r.pix_bwd << ','
            << r.vtx_fwd << ',' << r.vtx_bwd << ',' << r.lr_position << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Reconstruction phase

namespace {

struct MeshOptimizer {
    Adam positions, sh, opacity, logits;

    MeshOptimizer(const PartAwareMesh& m, const TrainConfig& cfg)
        : positions(3 * m.vertex_count(), cfg.lr_position_start),
          sh(m.sh.size(), cfg.lr_color),
          opacity(m.opacity.size(), cfg.lr_opacity),
          logits(m.logits.size(), cfg.lr_logits) {}

    void step(PartAwareMesh& m, const MeshGradients& g, bool soft) {
        std::vector<double> gp(3 * m.vertex_count());
        for (size_t i = 0; i < m.vertex_count(); ++i)
            for (int a = 0; a < 3; ++a) gp[3 * i + static_cast<size_t>(a)] = g.positions[i][a];
        positions.step(std::span<double>(m.positions.front().data(), 3 * m.vertex_count()), gp);
        sh.step(m.sh, g.sh);
        opacity.step(m.opacity, g.opacity);
        for (double& o : m.opacity) o = std::clamp(o, 0.0, 1.0);
        if (soft) logits.step(m.logits, g.logits);
    }
};

bool finite(const MeshGradients& g) {
    for (const Vec3& p : g.positions)
        if (!p.allFinite()) return false;
    for (const auto* v : {&g.sh, &g.opacity, &g.logits})
        for (double x : *v)
            if (!std::isfinite(x)) return false;
    return true;
}

double average_loss(const PartAwareMesh& m, std::span<const CameraView> views, const TrainConfig& cfg) {
    double sum = 0.0;
    for (const CameraView& v : views) sum += reconstruction_loss(render(m, v.camera, cfg.raster, false), v, cfg.weights).total;
    return sum / static_cast<double>(views.size());
}

}  // namespace

ReconstructionResult run_reconstruction_phase(const std::array<PartAwareMesh, 2>& init,
                                              const std::array<std::vector<CameraView>, 2>& views,
                                              const TrainConfig& config) {
    config.validate();
    const TrainConfig cfg = config.resolved();
    for (int s = 0; s < 2; ++s)
        if (views[static_cast<size_t>(s)].empty())
            throw Error("empty-views", "state " + std::to_string(s) + " has no training views");

    ReconstructionResult out;
    out.meshes = init;
    std::mt19937_64 rng(cfg.seed * 2654435761ULL + 1ULL);
    std::array<MeshOptimizer, 2> opt{MeshOptimizer(init[0], cfg), MeshOptimizer(init[1], cfg)};
    for (int s = 0; s < 2; ++s) {
        out.meshes[static_cast<size_t>(s)].validate();
        out.initial_loss[static_cast<size_t>(s)] = average_loss(init[static_cast<size_t>(s)], views[static_cast<size_t>(s)], cfg);
    }

    const int s1 = cfg.recon_split;
    const double decay = s1 > 1 && cfg.lr_position_start > 0.0 ? std::log(cfg.lr_position_end / cfg.lr_position_start) / (s1 - 1) : 0.0;
    for (int it = 0; it < s1; ++it) {
        if (it == cfg.remesh_iter && cfg.remesh) {
            for (int s = 0; s < 2; ++s) {
                RemeshReport report;
                PartAwareMesh& m = out.meshes[static_cast<size_t>(s)];
                m = remesh_all(harden_parts(m), cfg.remesh_config, &report);
                for (const std::string& w : report.warnings)
                    out.warnings.push_back("state " + std::to_string(s) + " remesh: " + w);
            }
        }
        const double lr_pos = cfg.lr_position_start * std::exp(decay * it);
        TrainLogRow row{it, "recon", 0.0, 0.0, 0.0, 0.0, 0.0, lr_pos};
        for (int s = 0; s < 2; ++s) {
            PartAwareMesh& m = out.meshes[static_cast<size_t>(s)];
            const auto& vs = views[static_cast<size_t>(s)];
            const CameraView& view = vs[std::uniform_int_distribution<size_t>(0, vs.size() - 1)(rng)];
            const RenderBuffers buf = render(m, view.camera, cfg.raster, true);
            PixelGradients pg;
            const ReconstructionTerms terms = reconstruction_loss(buf, view, cfg.weights, &pg);
            if (!std::isfinite(terms.total))
                throw Error("diverged", "reconstruction loss is not finite at iteration " + std::to_string(it) +
                                            " (state " + std::to_string(s) + ")");
            const MeshGradients g = render_backward(buf, pg);
            if (!finite(g))
                throw Error("diverged", "non-finite mesh gradient at iteration " + std::to_string(it) + " (state " +
                                            std::to_string(s) + ")");
            MeshOptimizer& o = opt[static_cast<size_t>(s)];
            o.positions.set_lr(lr_pos);
            o.step(m, g, !m.hardened());
            row.loss += 0.5 * terms.total;
        }
        if (cfg.log_every > 0 && it % cfg.log_every == 0) out.log.push_back(row);
    }
    for (int s = 0; s < 2; ++s) {
        PartAwareMesh& m = out.meshes[static_cast<size_t>(s)];
        if (!m.hardened()) m = harden_parts(m);
        out.final_loss[static_cast<size_t>(s)] = average_loss(m, views[static_cast<size_t>(s)], cfg);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Seeding

namespace {

std::vector<Vec3> part_points(const PartAwareMesh& m, int k) {
    std::vector<Vec3> pts;
    for (size_t i = 0; i < m.vertex_count(); ++i)
        if (m.labels[i] == k) pts.push_back(m.positions[i]);
    return pts;
}

Vec3 centroid(const std::vector<Vec3>& pts) {
    Vec3 c = Vec3::Zero();
    for (const Vec3& p : pts) c += p;
    return pts.empty() ? c : Vec3(c / static_cast<double>(pts.size()));
}

// Principal axes sorted by decreasing variance, each flipped into the
// hemisphere where its largest component is positive.
std::array<Vec3, 3> principal_axes(const std::vector<Vec3>& pts) {
    const Vec3 c = centroid(pts);
    Mat3 cov = Mat3::Zero();
    for (const Vec3& p : pts) cov += (p - c) * (p - c).transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    std::array<Vec3, 3> axes;
    for (int i = 0; i < 3; ++i) {
        Vec3 a = es.eigenvectors().col(2 - i);
        Eigen::Index big = 0;
        a.cwiseAbs().maxCoeff(&big);
        if (a[big] < 0.0) a = -a;
        axes[static_cast<size_t>(i)] = a;
    }
    return axes;
}

}  // namespace

JointSeed seed_articulation(const PartAwareMesh& m1, const PartAwareMesh& m2, std::vector<std::string>* warnings) {
    if (!m1.hardened() || !m2.hardened()) throw Error("not-hardened", "seeding needs hardened meshes");
    if (m1.num_parts != m2.num_parts)
        throw Error("part-count-mismatch", "states have " + std::to_string(m1.num_parts) + " and " +
                                               std::to_string(m2.num_parts) + " parts");
    const int parts = m1.num_parts;
    JointSeed seed;
    seed.joints = JointParams::identity(parts);
    seed.principal_axes.assign(static_cast<size_t>(parts), Vec3::UnitZ());
    for (int k = 1; k < parts; ++k) {
        const auto p1 = part_points(m1, k), p2 = part_points(m2, k);
        PartJoint& j = seed.joints.parts[static_cast<size_t>(k)];
        if (p1.empty() || p2.empty()) {
            if (warnings)
                warnings->push_back("part " + std::to_string(k) + " missing in state " + (p1.empty() ? "1" : "2") +
                                    "; seeded as static");
            j.type = JointType::Static;
            continue;
        }
        const Vec3 c1 = centroid(p1);
        seed.principal_axes[static_cast<size_t>(k)] = p1.size() >= 3 ? principal_axes(p1)[0] : Vec3::UnitZ();
        j.pivot = c1;
        j.translation = centroid(p2) - c1;
    }
    JointCandidates& c = seed.candidates;
    c.revolute = seed.joints;
    c.prismatic = seed.joints;
    c.revolute_rotvec.assign(static_cast<size_t>(parts), Vec3::Zero());
    for (int k = 1; k < parts; ++k) {
        PartJoint& r = c.revolute.parts[static_cast<size_t>(k)];
        PartJoint& p = c.prismatic.parts[static_cast<size_t>(k)];
        if (r.type == JointType::Static) continue;
        r.type = JointType::Revolute;
        r.translation = Vec3::Zero();
        p.type = JointType::Prismatic;
        p.rotation = UnitQuaternion::identity();
    }
    c.ema_revolute.assign(static_cast<size_t>(parts), 0.0);
    c.ema_prismatic.assign(static_cast<size_t>(parts), 0.0);
    return seed;
}

double transport_fit_score(const PartAwareMesh& m1, const SurfaceIndex& index2, int part, const PartJoint& joint,
                           int max_points) {
    std::vector<size_t> ids;
    for (size_t i = 0; i < m1.vertex_count(); ++i)
        if (m1.labels[i] == part) ids.push_back(i);
    if (ids.empty() || index2.part(part).empty()) return std::numeric_limits<double>::infinity();
    const size_t stride = std::max<size_t>(1, ids.size() / static_cast<size_t>(std::max(1, max_points)));
    const Mat3 r = joint.rotation.matrix();
    double sum = 0.0;
    int n = 0;
    for (size_t j = 0; j < ids.size(); j += stride) {
        const Vec3& x = m1.positions[ids[j]];
        const Vec3 y = r * (x - joint.pivot) + joint.pivot + joint.translation;
        sum += index2.part(part).nearest(y)->closest.distance;
        ++n;
    }
    return sum / n;
}

double refine_revolute_seed(const PartAwareMesh& m1, const PartAwareMesh& m2, const SurfaceIndex& index2, int part,
                            double step_deg, double max_angle_deg, PartJoint& candidate, Vec3& rotvec) {
    const auto p1 = part_points(m1, part), p2 = part_points(m2, part);
    if (p1.size() < 3 || p2.empty()) return std::numeric_limits<double>::infinity();
    const Vec3 c1 = centroid(p1), c2 = centroid(p2);
    const auto axes = principal_axes(p1);

    auto make = [&](const Vec3& axis, double deg) {
        PartJoint j;
        j.type = JointType::Revolute;
        j.rotation = UnitQuaternion::from_axis_angle(axis, deg * std::numbers::pi / 180.0);
        // pivot from the chord: (I - R) P = c2 - R c1 in the plane normal to the axis
        const Mat3 r = j.rotation.matrix();
        const Vec3 rhs = c2 - r * c1;
        const Vec3 rhs_perp = rhs - rhs.dot(axis) * axis;
        const Vec3 p = (Mat3::Identity() - r).completeOrthogonalDecomposition().solve(rhs_perp);
        j.pivot = p - (p - c1).dot(axis) * axis;
        return j;
    };

    double best = std::numeric_limits<double>::infinity();
    PartJoint best_joint = candidate;
    Vec3 best_axis = Vec3::UnitZ();
    double best_deg = 0.0;
    const int steps = static_cast<int>(std::floor(max_angle_deg / step_deg));
    for (const Vec3& axis : axes)
        for (int i = -steps; i <= steps; ++i) {
            if (i == 0) continue;
            const double deg = i * step_deg;
            const PartJoint j = make(axis, deg);
            const double score = transport_fit_score(m1, index2, part, j, 150);
            if (score < best) {
                best = score;
                best_joint = j;
                best_axis = axis;
                best_deg = deg;
            }
        }
    // finer sweep around the winner, scored on more vertices
    best = transport_fit_score(m1, index2, part, best_joint);
    const double fine = step_deg / 8.0;
    for (int i = -8; i <= 8; ++i) {
        const double deg = best_deg + i * fine;
        if (i == 0 || std::abs(deg) < 1e-9) continue;
        const PartJoint j = make(best_axis, deg);
        const double score = transport_fit_score(m1, index2, part, j);
        if (score < best) {
            best = score;
            best_joint = j;
        }
    }
    candidate = best_joint;
    rotvec = best_joint.rotation.rotvec();
    return best;
}

// ---------------------------------------------------------------------------
// Joint-parameter optimization helpers

namespace {

// Flat views of per-part (rotvec, pivot, translation) for Adam.
struct JointAdam {
    Adam rot, piv, trans;

    JointAdam(int parts, const TrainConfig& cfg)
        : rot(3 * static_cast<size_t>(parts), cfg.lr_rotation),
          piv(3 * static_cast<size_t>(parts), cfg.lr_pivot),
          trans(3 * static_cast<size_t>(parts), cfg.lr_translation) {}

    void reset() {
        rot.reset();
        piv.reset();
        trans.reset();
    }
};

std::vector<double> flatten(const std::vector<Vec3>& v) {
    std::vector<double> out(3 * v.size());
    for (size_t i = 0; i < v.size(); ++i)
        for (int a = 0; a < 3; ++a) out[3 * i + static_cast<size_t>(a)] = v[i][a];
    return out;
}

void unflatten(const std::vector<double>& flat, std::vector<Vec3>& v) {
    for (size_t i = 0; i < v.size(); ++i) v[i] = Vec3(flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]);
}

// Applies one Adam step to the selected groups of a joint set.
void step_joints(JointAdam& adam, JointParams& joints, std::vector<Vec3>& rotvecs, const std::vector<JointGrad>& g,
                 bool rotation, bool pivot, bool translation, const std::string& where) {
    const size_t n = joints.parts.size();
    std::vector<Vec3> gr(n), gp(n), gt(n), piv(n), tr(n);
    for (size_t k = 0; k < n; ++k) {
        gr[k] = g[k].rotvec;
        gp[k] = g[k].pivot;
        gt[k] = g[k].translation;
        piv[k] = joints.parts[k].pivot;
        tr[k] = joints.parts[k].translation;
        auto check = [&](const Vec3& v, const char* group) {
            if (!v.allFinite())
                throw Error("nan-gradient", std::string(group) + " gradient of part " + std::to_string(k) + " " + where);
        };
        check(gr[k], "rotation");
        check(gp[k], "pivot");
        check(gt[k], "translation");
    }
    if (rotation) {
        auto flat = flatten(rotvecs);
        adam.rot.step(flat, flatten(gr));
        unflatten(flat, rotvecs);
        for (size_t k = 0; k < n; ++k) joints.parts[k].rotation = UnitQuaternion::from_rotvec(rotvecs[k]);
    }
    if (pivot) {
        auto flat = flatten(piv);
        adam.piv.step(flat, flatten(gp));
        unflatten(flat, piv);
        for (size_t k = 0; k < n; ++k) joints.parts[k].pivot = piv[k];
    }
    if (translation) {
        auto flat = flatten(tr);
        adam.trans.step(flat, flatten(gt));
        unflatten(flat, tr);
        for (size_t k = 0; k < n; ++k) joints.parts[k].translation = tr[k];
    }
}

void add_scaled(std::vector<JointGrad>& acc, const std::vector<JointGrad>& g, double s) {
    if (acc.empty()) acc.assign(g.size(), JointGrad{});
    for (size_t k = 0; k < g.size(); ++k) acc[k] += g[k] * s;
}

// Contiguous window of n views at a random offset; n <= 0 means all views.
std::span<const CameraView> batch(std::mt19937_64& rng, const std::vector<CameraView>& views, int n) {
    if (n <= 0 || static_cast<size_t>(n) >= views.size()) return views;
    const size_t off = std::uniform_int_distribution<size_t>(0, views.size() - static_cast<size_t>(n))(rng);
    return std::span<const CameraView>(views).subspan(off, static_cast<size_t>(n));
}

}  // namespace

void mask_joint_gradients(const JointParams& joints, std::vector<JointGrad>& grads) {
    for (size_t k = 0; k < grads.size() && k < joints.parts.size(); ++k) {
        const JointType t = k == 0 ? JointType::Static : joints.parts[k].type;
        if (t == JointType::Revolute) {
            grads[k].translation.setZero();
        } else if (t == JointType::Prismatic) {
            grads[k].rotvec.setZero();
            grads[k].pivot.setZero();
        } else if (t == JointType::Static) {
            grads[k] = JointGrad{};
        }
    }
}

void run_candidate_alternation(JointCandidates& c, const std::array<PartAwareMesh, 2>& meshes,
                               const std::array<std::vector<CameraView>, 2>& views, const TrainConfig& config,
                               int first_iter, int iterations, std::vector<TrainLogRow>* log) {
    const TrainConfig cfg = config.resolved();
    const int parts = c.revolute.num_parts();
    JointAdam rev_adam(parts, cfg), pri_adam(parts, cfg);
    std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<unsigned long long>(first_iter) + 7ULL);
    std::vector<Vec3> zero_rot(static_cast<size_t>(parts), Vec3::Zero());
    for (int i = 0; i < iterations; ++i) {
        const int it = first_iter + i;
        const bool revolute = (it - first_iter) % 2 == 0;
        JointParams& joints = revolute ? c.revolute : c.prismatic;
        std::vector<Vec3>& rotvecs = revolute ? c.revolute_rotvec : zero_rot;
        const auto fwd_views = batch(rng, views[1], cfg.views_per_step);
        std::vector<JointGrad> grads, g;
        const double fwd = pixel_consistency_loss(meshes[0], joints, Direction::Forward, fwd_views,
                                                  cfg.raster, cfg.weights, &g, rotvecs);
        add_scaled(grads, g, cfg.weights.pmc);
        double bwd = 0.0;
        if (cfg.ablation.backward && it >= cfg.backward_start) {
            const auto bwd_views = batch(rng, views[0], cfg.views_per_step);
            bwd = pixel_consistency_loss(meshes[1], joints, Direction::Backward, bwd_views, cfg.raster,
                                         cfg.weights, &g, rotvecs);
            add_scaled(grads, g, cfg.weights.pmc);
        }
        mask_joint_gradients(joints, grads);
        step_joints(revolute ? rev_adam : pri_adam, joints, rotvecs, grads, revolute, revolute, !revolute,
                    "at iteration " + std::to_string(it));
        auto& ema = revolute ? c.ema_revolute : c.ema_prismatic;
        long& steps = revolute ? c.revolute_steps : c.prismatic_steps;
        for (int k = 1; k < parts; ++k)
            ema[static_cast<size_t>(k)] = steps == 0 ? fwd : cfg.ema_decay * ema[static_cast<size_t>(k)] + (1.0 - cfg.ema_decay) * fwd;
        ++steps;
        if (log && cfg.log_every > 0 && it % cfg.log_every == 0)
            log->push_back({it, revolute ? "alternate-revolute" : "alternate-prismatic",
                            cfg.weights.pmc * (fwd + bwd), fwd, bwd, 0.0, 0.0, 0.0});
    }
}

BakeOffResult bake_off(const PartAwareMesh& m1, const JointCandidates& c, std::span<const CameraView> end_views,
                       const TrainConfig& cfg) {
    const int parts = c.revolute.num_parts();
    BakeOffResult out;
    out.merged = JointParams::identity(parts);
    for (int k = 1; k < parts; ++k) {
        BakeOffEntry e;
        e.part = k;
        const PartJoint& rev = c.revolute.parts[static_cast<size_t>(k)];
        const PartJoint& pri = c.prismatic.parts[static_cast<size_t>(k)];
        if (rev.type == JointType::Static) {
            e.decision = JointType::Static;
            out.merged.parts[static_cast<size_t>(k)].type = JointType::Static;
            out.entries.push_back(e);
            continue;
        }
        auto masked_loss = [&](const PartJoint& cand, int& counted) {
            JointParams only = JointParams::identity(parts);
            only.parts[static_cast<size_t>(k)] = cand;
            const PartAwareMesh moved = articulate_mesh(m1, only, Direction::Forward);
            double sum = 0.0;
            counted = 0;
            for (const CameraView& v : end_views) {
                std::vector<unsigned char> mask(v.labels.labels.size());
                for (size_t p = 0; p < mask.size(); ++p) mask[p] = v.labels.labels[p] == k;
                const RenderBuffers buf = render(moved, v.camera, cfg.raster, false);
                const double l = masked_photometric_loss(buf.rgb, v.rgb, mask, cfg.weights.rgb, cfg.weights.ssim);
                if (l < 0.0) continue;
                sum += l;
                ++counted;
            }
            return counted > 0 ? sum / counted : 0.0;
        };
        int n_rev = 0, n_pri = 0;
        e.loss_revolute = masked_loss(rev, n_rev);
        e.loss_prismatic = masked_loss(pri, n_pri);
        e.masked_views = n_rev;
        if (n_rev == 0) {
            // no pixels of this part anywhere: compare motion magnitudes, rotation as arc length
            e.fallback = true;
            double radius = 0.0;
            for (const Vec3& p : part_points(m1, k)) radius = std::max(radius, (p - rev.pivot).norm());
            const double arc = rev.rotation.rotvec().norm() * radius;
            e.decision = arc >= pri.translation.norm() ? JointType::Revolute : JointType::Prismatic;
        } else {
            e.decision = e.loss_revolute <= e.loss_prismatic ? JointType::Revolute : JointType::Prismatic;
        }
        out.merged.parts[static_cast<size_t>(k)] = e.decision == JointType::Revolute ? rev : pri;
        out.entries.push_back(e);
    }
    out.merged.apply_type_constraints();
    return out;
}

ArticulationResult run_articulation_phase(const std::array<PartAwareMesh, 2>& meshes,
                                          const std::array<std::vector<CameraView>, 2>& views,
                                          const TrainConfig& config, const JointParams* typed_init) {
    config.validate();
    const TrainConfig cfg = config.resolved();
    for (int s = 0; s < 2; ++s) {
        if (!meshes[static_cast<size_t>(s)].hardened())
            throw Error("not-hardened", "articulation phase needs hardened meshes");
        if (views[static_cast<size_t>(s)].empty())
            throw Error("empty-views", "state " + std::to_string(s) + " has no training views");
    }
    ArticulationResult out;
    const std::array<std::uint64_t, 2> hashes{mesh_hash(meshes[0]), mesh_hash(meshes[1])};
    out.mesh_hash = hashes[0] ^ (hashes[1] * 1099511628211ULL);
    const SurfaceIndex index1(meshes[0]), index2(meshes[1]);
    const double tau = cfg.weights.resolve_tau(std::max(meshes[0].bounds().diagonal(), meshes[1].bounds().diagonal()));
    const int parts = meshes[0].num_parts;

    JointParams joints;
    int start = cfg.recon_split;
    if (typed_init) {
        if (typed_init->num_parts() != parts)
            throw Error("joint-count-mismatch", "initial joints have " + std::to_string(typed_init->num_parts()) +
                                                    " parts, meshes have " + std::to_string(parts));
        joints = *typed_init;
        joints.apply_type_constraints();
    } else {
        out.seed = seed_articulation(meshes[0], meshes[1], &out.warnings);
        out.candidates = out.seed.candidates;
        if (cfg.geometric_seed)
            for (int k = 1; k < parts; ++k) {
                PartJoint& cand = out.candidates.revolute.parts[static_cast<size_t>(k)];
                if (cand.type == JointType::Static) continue;
                refine_revolute_seed(meshes[0], meshes[1], index2, k, cfg.seed_sweep_deg, cfg.seed_max_angle_deg, cand,
                                     out.candidates.revolute_rotvec[static_cast<size_t>(k)]);
            }
        run_candidate_alternation(out.candidates, meshes, views, cfg, start, cfg.bakeoff_iter - start, &out.log);
        // the candidate loss includes the backward term once it is active
        if (cfg.ablation.backward && cfg.backward_start < cfg.bakeoff_iter) out.first_pix_bwd = cfg.backward_start;
        if (cfg.bakeoff_iter > start) out.first_pix_fwd = start;
        out.bakeoff = bake_off(meshes[0], out.candidates, views[1], cfg);
        joints = out.bakeoff.merged;
        start = cfg.bakeoff_iter;
    }

    std::vector<Vec3> rotvecs(static_cast<size_t>(parts));
    for (int k = 0; k < parts; ++k) rotvecs[static_cast<size_t>(k)] = joints.parts[static_cast<size_t>(k)].rotation.rotvec();
    JointAdam adam(parts, cfg);  // fresh moments after the bake-off
    std::mt19937_64 rng(cfg.seed * 0xD1B54A32D192ED03ULL + 11ULL);

    for (int it = start; it < cfg.iterations; ++it) {
        if (mesh_hash(meshes[0]) != hashes[0] || mesh_hash(meshes[1]) != hashes[1]) ++out.hash_violations;
        std::vector<JointGrad> grads, g;
        TrainLogRow row{it, "articulate", 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
        const auto fwd_views = batch(rng, views[1], cfg.views_per_step);
        row.pix_fwd = pixel_consistency_loss(meshes[0], joints, Direction::Forward, fwd_views,
                                             cfg.raster, cfg.weights, &g, rotvecs);
        add_scaled(grads, g, cfg.weights.pmc);
        if (out.first_pix_fwd < 0) out.first_pix_fwd = it;
        if (cfg.ablation.backward && it >= cfg.backward_start) {
            const auto bwd_views = batch(rng, views[0], cfg.views_per_step);
            row.pix_bwd = pixel_consistency_loss(meshes[1], joints, Direction::Backward, bwd_views,
                                                 cfg.raster, cfg.weights, &g, rotvecs);
            add_scaled(grads, g, cfg.weights.pmc);
            if (out.first_pix_bwd < 0) out.first_pix_bwd = it;
        }
        if (it >= cfg.vertex_start) {
            row.vtx_fwd = vertex_motion_loss(meshes[0], meshes[1], index2, joints, Direction::Forward, cfg.weights,
                                             cfg.ablation, tau, &g, rotvecs);
            add_scaled(grads, g, cfg.weights.vmc);
            if (cfg.ablation.backward) {
                row.vtx_bwd = vertex_motion_loss(meshes[1], meshes[0], index1, joints, Direction::Backward,
                                                 cfg.weights, cfg.ablation, tau, &g, rotvecs);
                add_scaled(grads, g, cfg.weights.vmc);
            }
            if (out.first_vtx < 0) out.first_vtx = it;
        }
        row.loss = motion_total(row.vtx_fwd, row.vtx_bwd, row.pix_fwd, row.pix_bwd, cfg.weights);
        if (!std::isfinite(row.loss))
            throw Error("diverged", "motion loss is not finite at iteration " + std::to_string(it));
        mask_joint_gradients(joints, grads);
        step_joints(adam, joints, rotvecs, grads, true, true, true, "at iteration " + std::to_string(it));
        joints.apply_type_constraints();
        for (int k = 0; k < parts; ++k)
            if (joints.parts[static_cast<size_t>(k)].type != JointType::Revolute)
                rotvecs[static_cast<size_t>(k)] = joints.parts[static_cast<size_t>(k)].rotation.rotvec();
        if (cfg.log_every > 0 && it % cfg.log_every == 0) out.log.push_back(row);
    }
    out.joints = joints;
    return out;
}

FitResult fit(const std::array<PartAwareMesh, 2>& init, const std::array<std::vector<CameraView>, 2>& views,
              const TrainConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    FitResult r;
    r.reconstruction = run_reconstruction_phase(init, views, cfg);
    r.articulation = run_articulation_phase(r.reconstruction.meshes, views, cfg);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace kinemesh
