#include "kinemesh/losses.hpp"

#include <algorithm>
#include <cmath>

#include "kinemesh/error.hpp"

namespace kinemesh {

void LossWeights::validate() const {
    for (double v : {rgb, ssim, depth, part, vtx_color, vtx_opacity, vmc, pmc, tau_fraction})
        if (!(v >= 0.0)) throw Error("invalid-config", "loss weights must be non-negative");
}

namespace {

// Targets are stored as float32; smaller differences are treated as zero.
constexpr double kResolution = 1e-6;

double l1_slope(double d) { return d > kResolution ? 1.0 : (d < -kResolution ? -1.0 : 0.0); }

constexpr int kRadius = 5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, 2 * kRadius + 1>& gaussian_kernel() {
    static const auto kernel = [] {
        std::array<double, 2 * kRadius + 1> k{};
        double sum = 0.0;
        for (int i = -kRadius; i <= kRadius; ++i) {
            k[static_cast<size_t>(i + kRadius)] = std::exp(-(i * i) / (2.0 * 1.5 * 1.5));
            sum += k[static_cast<size_t>(i + kRadius)];
        }
        for (double& v : k) v /= sum;
        return k;
    }();
    return kernel;
}

// Separable Gaussian filter with zero padding. Symmetric, so it is its own
// adjoint.
std::vector<double> blur(const std::vector<double>& in, int w, int h) {
    const auto& k = gaussian_kernel();
    std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int d = -kRadius; d <= kRadius; ++d) {
                const int xx = x + d;
                if (xx >= 0 && xx < w) s += k[static_cast<size_t>(d + kRadius)] * in[static_cast<size_t>(y * w + xx)];
            }
            tmp[static_cast<size_t>(y * w + x)] = s;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int d = -kRadius; d <= kRadius; ++d) {
                const int yy = y + d;
                if (yy >= 0 && yy < h) s += k[static_cast<size_t>(d + kRadius)] * tmp[static_cast<size_t>(yy * w + x)];
            }
            out[static_cast<size_t>(y * w + x)] = s;
        }
    return out;
}

std::vector<double> channel(const Image& img, int c) {
    std::vector<double> out(img.pixel_count());
    for (size_t p = 0; p < out.size(); ++p) out[p] = img.data[p * static_cast<size_t>(img.channels) + static_cast<size_t>(c)];
    return out;
}

void check_same(const Image& a, const Image& b) {
    if (!a.same_shape(b))
        throw Error("shape-mismatch", std::to_string(a.width) + "x" + std::to_string(a.height) + "x" +
                                          std::to_string(a.channels) + " vs " + std::to_string(b.width) + "x" +
                                          std::to_string(b.height) + "x" + std::to_string(b.channels));
}

// SSIM map of one channel; optionally the gradient of sum(map) * scale w.r.t. x.
std::vector<double> ssim_channel(const std::vector<double>& x, const std::vector<double>& y, int w, int h,
                                 std::vector<double>* grad, double scale) {
    const size_t n = x.size();
    std::vector<double> xx(n), yy(n), xy(n);
    for (size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mx = blur(x, w, h), my = blur(y, w, h);
    const auto exx = blur(xx, w, h), eyy = blur(yy, w, h), exy = blur(xy, w, h);
    std::vector<double> s(n), da, dxx, dxy;
    if (grad) {
        da.resize(n);
        dxx.resize(n);
        dxy.resize(n);
    }
    for (size_t i = 0; i < n; ++i) {
        const double sxx = exx[i] - mx[i] * mx[i];
        const double syy = eyy[i] - my[i] * my[i];
        const double sxy = exy[i] - mx[i] * my[i];
        const double n1 = 2.0 * mx[i] * my[i] + kC1;
        const double n2 = 2.0 * sxy + kC2;
        const double d1 = mx[i] * mx[i] + my[i] * my[i] + kC1;
        const double d2 = sxx + syy + kC2;
        s[i] = n1 * n2 / (d1 * d2);
        if (grad) {
            da[i] = scale * (2.0 * my[i] * (n2 - n1) / (d1 * d2) - 2.0 * mx[i] * s[i] * (1.0 / d1 - 1.0 / d2));
            dxx[i] = scale * (-s[i] / d2);
            dxy[i] = scale * (2.0 * n1 / (d1 * d2));
        }
    }
    if (grad) {
        const auto ga = blur(da, w, h), gxx = blur(dxx, w, h), gxy = blur(dxy, w, h);
        grad->resize(n);
        for (size_t i = 0; i < n; ++i) (*grad)[i] = ga[i] + 2.0 * x[i] * gxx[i] + y[i] * gxy[i];
    }
    return s;
}

}  // namespace

double ssim(const Image& a, const Image& b, std::vector<double>* grad_a) {
    check_same(a, b);
    const size_t n = a.pixel_count();
    if (n == 0 || a.channels == 0) throw Error("shape-mismatch", "empty image");
    const double scale = 1.0 / (static_cast<double>(n) * a.channels);
    if (grad_a) grad_a->assign(a.data.size(), 0.0);
    double total = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        std::vector<double> g;
        const auto s = ssim_channel(channel(a, c), channel(b, c), a.width, a.height, grad_a ? &g : nullptr, scale);
        for (double v : s) total += v;
        if (grad_a)
            for (size_t p = 0; p < n; ++p) (*grad_a)[p * static_cast<size_t>(a.channels) + static_cast<size_t>(c)] = g[p];
    }
    return total / (static_cast<double>(n) * a.channels);
}

std::vector<double> ssim_map(const Image& a, const Image& b) {
    check_same(a, b);
    std::vector<double> out(a.pixel_count(), 0.0);
    for (int c = 0; c < a.channels; ++c) {
        const auto s = ssim_channel(channel(a, c), channel(b, c), a.width, a.height, nullptr, 1.0);
        for (size_t p = 0; p < out.size(); ++p) out[p] += s[p] / a.channels;
    }
    return out;
}

double photometric_loss(const Image& pred_in, const Image& gt, double w_rgb, double w_ssim,
                        std::vector<double>* grad) {
    check_same(pred_in, gt);
    const size_t n = pred_in.data.size();
    // pixels within target resolution count as equal for both terms
    Image pred = pred_in;
    for (size_t i = 0; i < n; ++i)
        if (std::abs(static_cast<double>(pred.data[i]) - gt.data[i]) <= kResolution) pred.data[i] = gt.data[i];
    double l1 = 0.0;
    for (size_t i = 0; i < n; ++i) l1 += std::abs(static_cast<double>(pred.data[i]) - gt.data[i]);
    l1 /= static_cast<double>(n);
    std::vector<double> gs;
    const double s = w_ssim > 0.0 ? ssim(pred, gt, grad ? &gs : nullptr) : 1.0;
    if (grad) {
        grad->assign(n, 0.0);
        for (size_t i = 0; i < n; ++i) {
            const double d = static_cast<double>(pred.data[i]) - gt.data[i];
            (*grad)[i] = w_rgb * l1_slope(d) / static_cast<double>(n);
            if (w_ssim > 0.0) (*grad)[i] -= w_ssim * gs[i];
        }
    }
    return w_rgb * l1 + w_ssim * (1.0 - s);
}

double masked_photometric_loss(const Image& pred, const Image& gt, std::span<const unsigned char> mask, double w_rgb,
                               double w_ssim) {
    check_same(pred, gt);
    if (mask.size() != pred.pixel_count()) throw Error("shape-mismatch", "mask size");
    const auto smap = ssim_map(pred, gt);
    double l1 = 0.0, s = 0.0;
    size_t count = 0;
    for (size_t p = 0; p < mask.size(); ++p) {
        if (!mask[p]) continue;
        ++count;
        for (int c = 0; c < pred.channels; ++c) {
            const size_t i = p * static_cast<size_t>(pred.channels) + static_cast<size_t>(c);
            l1 += std::abs(static_cast<double>(pred.data[i]) - gt.data[i]);
        }
        s += smap[p];
    }
    if (count == 0) return -1.0;
    l1 /= static_cast<double>(count * static_cast<size_t>(pred.channels));
    s /= static_cast<double>(count);
    return w_rgb * l1 + w_ssim * (1.0 - s);
}

ReconstructionTerms reconstruction_loss(const RenderBuffers& pred, const CameraView& gt, const LossWeights& w,
                                        PixelGradients* grads) {
    check_same(pred.rgb, gt.rgb);
    if (gt.depth.width != pred.width || gt.depth.height != pred.height || gt.labels.width != pred.width ||
        gt.labels.height != pred.height)
        throw Error("shape-mismatch", "ground-truth depth/labels resolution");
    const size_t npix = pred.pixel_count();
    const size_t parts = static_cast<size_t>(pred.num_parts);
    ReconstructionTerms t;

    std::vector<double> g_rgb;
    const double photo = photometric_loss(pred.rgb, gt.rgb, w.rgb, w.ssim, grads ? &g_rgb : nullptr);
    {
        double l1 = 0.0;
        for (size_t i = 0; i < pred.rgb.data.size(); ++i)
            l1 += std::abs(static_cast<double>(pred.rgb.data[i]) - gt.rgb.data[i]);
        t.rgb_l1 = l1 / static_cast<double>(pred.rgb.data.size());
        t.ssim = w.ssim > 0.0 ? 1.0 - (photo - w.rgb * t.rgb_l1) / w.ssim : ssim(pred.rgb, gt.rgb);
    }

    size_t n_depth = 0;
    for (size_t p = 0; p < npix; ++p)
        if (gt.depth.data[p] > 0.0f && pred.depth.data[p] > 0.0f) ++n_depth;
    std::vector<double> g_depth;
    if (grads) g_depth.assign(npix, 0.0);
    if (n_depth > 0) {
        double l1 = 0.0;
        for (size_t p = 0; p < npix; ++p) {
            if (!(gt.depth.data[p] > 0.0f && pred.depth.data[p] > 0.0f)) continue;
            const double d = static_cast<double>(pred.depth.data[p]) - gt.depth.data[p];
            l1 += std::abs(d);
            if (grads) g_depth[p] = w.depth * l1_slope(d) / static_cast<double>(n_depth);
        }
        t.depth_l1 = l1 / static_cast<double>(n_depth);
    }

    size_t n_fg = 0;
    for (int l : gt.labels.labels) {
        if (l >= static_cast<int>(parts)) throw Error("bad-label", "label " + std::to_string(l) + " out of range");
        if (l >= 0) ++n_fg;
    }
    std::vector<double> g_logits;
    if (grads) g_logits.assign(npix * parts, 0.0);
    if (n_fg > 0 && w.part > 0.0) {
        double ce = 0.0;
        for (size_t p = 0; p < npix; ++p) {
            const int l = gt.labels.labels[p];
            if (l < 0) continue;
            std::vector<double> s(parts);
            for (size_t k = 0; k < parts; ++k) s[k] = pred.logits.data[p * parts + k];
            const auto prob = part_weights(s);
            ce -= std::log(std::max(prob[static_cast<size_t>(l)], 1e-300));
            if (grads)
                for (size_t k = 0; k < parts; ++k)
                    g_logits[p * parts + k] =
                        w.part * (prob[k] - (static_cast<int>(k) == l ? 1.0 : 0.0)) / static_cast<double>(n_fg);
        }
        t.part_ce = ce / static_cast<double>(n_fg);
    }

    t.total = photo + w.depth * t.depth_l1 + w.part * t.part_ce;
    if (grads) {
        grads->rgb = std::move(g_rgb);
        grads->depth = std::move(g_depth);
        grads->logits = std::move(g_logits);
    }
    return t;
}

SurfaceIndex::SurfaceIndex(const PartAwareMesh& target) {
    if (!target.hardened()) throw Error("not-hardened", "mesh not hardened");
    const auto partition = target.part_faces.size() == static_cast<size_t>(target.num_parts)
                               ? target.part_faces
                               : partition_faces(target).per_part;
    std::vector<int> all;
    for (int k = 0; k < target.num_parts; ++k) {
        parts_.emplace_back(target.positions, target.faces, partition[static_cast<size_t>(k)]);
        all.insert(all.end(), partition[static_cast<size_t>(k)].begin(), partition[static_cast<size_t>(k)].end());
    }
    std::sort(all.begin(), all.end());
    global_ = TriangleBvh(target.positions, target.faces, all);
}

std::vector<VertexMatch> match_vertices(const PartAwareMesh& source, const SurfaceIndex& target_index,
                                        std::span<const Vec3> transported, double tau, bool part_aware) {
    if (!source.hardened()) throw Error("not-hardened", "mesh not hardened");
    std::vector<VertexMatch> out(transported.size());
    for (size_t i = 0; i < transported.size(); ++i) {
        VertexMatch& m = out[i];
        m.source = static_cast<int>(i);
        const int label = source.labels[i];
        const TriangleBvh* bvh = nullptr;
        if (!part_aware)
            bvh = &target_index.global();
        else if (label >= 0 && label < target_index.num_parts())
            bvh = &target_index.part(label);
        if (!bvh) continue;
        const auto hit = bvh->nearest(transported[i]);
        if (!hit) continue;
        m.face = hit->face;
        m.barycentric = hit->closest.barycentric;
        m.point = hit->closest.point;
        m.distance = hit->closest.distance;
        m.valid = m.distance <= tau;
    }
    return out;
}

namespace {

// d(beta)/dy for the closest point of y on triangle (a, b, c), given the
// region encoded by which barycentric weights vanish.
std::array<Vec3, 3> barycentric_jacobian(const std::array<double, 3>& beta, const std::array<Vec3, 3>& v) {
    std::array<Vec3, 3> j{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
    constexpr double eps = 1e-12;
    int zero = 0;
    for (double b : beta) zero += b <= eps ? 1 : 0;
    if (zero == 0) {
        const Vec3 e1 = v[1] - v[0], e2 = v[2] - v[0];
        Eigen::Matrix2d m;
        m << e1.dot(e1), e1.dot(e2), e1.dot(e2), e2.dot(e2);
        if (std::abs(m.determinant()) < 1e-300) return j;
        const Eigen::Matrix2d mi = m.inverse();
        j[1] = mi(0, 0) * e1 + mi(0, 1) * e2;
        j[2] = mi(1, 0) * e1 + mi(1, 1) * e2;
        j[0] = -j[1] - j[2];
    } else if (zero == 1) {
        int u = -1, w = -1;
        for (int k = 0; k < 3; ++k)
            if (beta[static_cast<size_t>(k)] > eps) (u < 0 ? u : w) = k;
        const Vec3 e = v[static_cast<size_t>(w)] - v[static_cast<size_t>(u)];
        const double len2 = e.squaredNorm();
        if (len2 < 1e-300) return j;
        j[static_cast<size_t>(w)] = e / len2;
        j[static_cast<size_t>(u)] = -e / len2;
    }
    return j;
}

}  // namespace

double vertex_consistency_loss(std::span<const VertexMatch> matches, const PartAwareMesh& source,
                               const PartAwareMesh& target, const LossWeights& w, const AblationFlags& flags,
                               std::vector<Vec3>* grad_positions) {
    const size_t nv = source.vertex_count();
    if (grad_positions) grad_positions->assign(matches.size(), Vec3::Zero());
    if (nv == 0) return 0.0;
    const double lc = flags.vertex_color ? w.vtx_color : 0.0;
    const double ls = flags.vertex_opacity ? w.vtx_opacity : 0.0;
    const int stride = source.sh_stride();
    if (target.sh_stride() != stride) throw Error("shape-mismatch", "color coefficient count differs between states");
    double total = 0.0;
    const double inv_n = 1.0 / static_cast<double>(nv);
    std::vector<double> diff(static_cast<size_t>(stride));
    for (size_t m = 0; m < matches.size(); ++m) {
        const VertexMatch& vm = matches[m];
        if (!vm.valid || vm.face < 0) continue;
        const Triangle& t = target.faces[static_cast<size_t>(vm.face)];
        const size_t i = static_cast<size_t>(vm.source);
        double e = 0.0;
        for (int c = 0; c < stride; ++c) {
            double interp = 0.0;
            for (int k = 0; k < 3; ++k)
                interp += vm.barycentric[static_cast<size_t>(k)] * target.vertex_sh(static_cast<size_t>(t[k]))[static_cast<size_t>(c)];
            diff[static_cast<size_t>(c)] = source.vertex_sh(i)[static_cast<size_t>(c)] - interp;
            e += lc * diff[static_cast<size_t>(c)] * diff[static_cast<size_t>(c)];
        }
        double sigma_interp = 0.0;
        for (int k = 0; k < 3; ++k) sigma_interp += vm.barycentric[static_cast<size_t>(k)] * target.opacity[static_cast<size_t>(t[k])];
        const double ds = source.opacity[i] - sigma_interp;
        e += ls * ds * ds;
        total += e;
        if (grad_positions) {
            std::array<double, 3> de_dbeta{};
            for (int k = 0; k < 3; ++k) {
                const size_t vk = static_cast<size_t>(t[k]);
                double g = -2.0 * ls * ds * target.opacity[vk];
                for (int c = 0; c < stride; ++c)
                    g -= 2.0 * lc * diff[static_cast<size_t>(c)] * target.vertex_sh(vk)[static_cast<size_t>(c)];
                de_dbeta[static_cast<size_t>(k)] = g;
            }
            const std::array<Vec3, 3> corners{target.positions[static_cast<size_t>(t[0])],
                                              target.positions[static_cast<size_t>(t[1])],
                                              target.positions[static_cast<size_t>(t[2])]};
            const auto jac = barycentric_jacobian(vm.barycentric, corners);
            Vec3 g = Vec3::Zero();
            for (int k = 0; k < 3; ++k) g += de_dbeta[static_cast<size_t>(k)] * jac[static_cast<size_t>(k)];
            (*grad_positions)[m] = g * inv_n;
        }
    }
    return total * inv_n;
}

double vertex_motion_loss(const PartAwareMesh& source, const PartAwareMesh& target, const SurfaceIndex& target_index,
                          const JointParams& joints, Direction dir, const LossWeights& w, const AblationFlags& flags,
                          double tau, std::vector<JointGrad>* grads, std::span<const Vec3> rotvecs) {
    const std::vector<Vec3> moved = transport_vertices(source, joints, dir);
    const auto matches = match_vertices(source, target_index, moved, tau, flags.part_aware);
    std::vector<Vec3> gpos;
    const double loss = vertex_consistency_loss(matches, source, target, w, flags, grads ? &gpos : nullptr);
    if (grads) *grads = transport_backward(source, joints, dir, gpos, rotvecs);
    return loss;
}

double pixel_consistency_loss(const PartAwareMesh& source, const JointParams& joints, Direction dir,
                              std::span<const CameraView> target_views, const RasterConfig& cfg,
                              const LossWeights& w, std::vector<JointGrad>* grads, std::span<const Vec3> rotvecs) {
    if (target_views.empty()) throw Error("empty-views", "pixel consistency needs at least one view");
    const PartAwareMesh moved = articulate_mesh(source, joints, dir);
    const double inv_views = 1.0 / static_cast<double>(target_views.size());
    std::vector<Vec3> gpos(source.vertex_count(), Vec3::Zero());
    double total = 0.0;
    for (const CameraView& view : target_views) {
        const RenderBuffers buf = render(moved, view.camera, cfg, grads != nullptr);
        std::vector<double> g;
        total += photometric_loss(buf.rgb, view.rgb, w.rgb, w.ssim, grads ? &g : nullptr);
        if (!grads) continue;
        PixelGradients pg;
        pg.rgb = std::move(g);
        for (double& v : pg.rgb) v *= inv_views;
        const MeshGradients mg = render_backward(buf, pg);
        for (size_t i = 0; i < gpos.size(); ++i) gpos[i] += mg.positions[i];
    }
    if (grads) *grads = transport_backward(source, joints, dir, gpos, rotvecs);
    return total * inv_views;
}

double motion_total(double vtx_fwd, double vtx_bwd, double pix_fwd, double pix_bwd, const LossWeights& w) {
    return w.vmc * (vtx_fwd + vtx_bwd) + w.pmc * (pix_fwd + pix_bwd);
}

}  // namespace kinemesh
