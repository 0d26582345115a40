#include "kinemesh/raster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kinemesh/dual.hpp"
#include "kinemesh/error.hpp"

namespace kinemesh {

void RasterConfig::validate() const {
    if (!(gamma > 0.0)) throw Error("invalid-config", "raster gamma must be positive");
    if (max_faces_per_pixel < 1) throw Error("invalid-config", "max_faces_per_pixel must be at least 1");
}

namespace {

template <class T>
struct FaceSample {
    T phi;
    std::array<T, 3> mu;
    T depth;
};

// Window, perspective-correct barycentrics and depth of a projected face at
// pixel (px, py). uv holds screen coordinates, z camera depths. Returns false
// when the pixel is not strictly inside.
template <class T>
bool eval_face(const std::array<T, 3>& u, const std::array<T, 3>& v, const std::array<T, 3>& z, double px,
               double py, double gamma, FaceSample<T>& out) {
    using std::pow;
    using std::sqrt;
    const T area2 = (u[1] - u[0]) * (v[2] - v[0]) - (v[1] - v[0]) * (u[2] - u[0]);
    const double s = value_of(area2) > 0.0 ? 1.0 : -1.0;
    const T abs_area2 = area2 * s;
    T perimeter(0.0);
    std::array<T, 3> lam;
    std::array<T, 3> dist;
    for (int i = 0; i < 3; ++i) {
        const int j = (i + 1) % 3;
        const int k = (i + 2) % 3;
        const T eu = u[k] - u[j];
        const T ev = v[k] - v[j];
        const T len = sqrt(eu * eu + ev * ev);
        const T cr = (eu * (T(py) - v[j]) - ev * (T(px) - u[j])) * s;
        lam[i] = cr / abs_area2;
        dist[i] = cr / len;
        perimeter = perimeter + len;
    }
    int m = 0;
    for (int i = 1; i < 3; ++i)
        if (value_of(dist[i]) < value_of(dist[m])) m = i;
    if (!(value_of(dist[m]) > 0.0)) return false;
    const T inradius = abs_area2 / perimeter;
    out.phi = pow(dist[m] / inradius, gamma);
    T q(0.0);
    std::array<T, 3> lz;
    for (int i = 0; i < 3; ++i) {
        lz[i] = lam[i] / z[i];
        q = q + lz[i];
    }
    out.depth = T(1.0) / q;
    for (int i = 0; i < 3; ++i) out.mu[i] = lz[i] / q;
    return true;
}

struct ScreenFace {
    std::array<double, 3> u{};
    std::array<double, 3> v{};
    std::array<double, 3> z{};
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
    double key = 0.0;
    std::array<int, 3> sorted{};
    bool visible = false;
};

}  // namespace

double face_window(const Vec2& pixel, const std::array<Vec2, 3>& tri, double gamma) {
    const std::array<double, 3> u{tri[0].x(), tri[1].x(), tri[2].x()};
    const std::array<double, 3> v{tri[0].y(), tri[1].y(), tri[2].y()};
    const double area2 = (u[1] - u[0]) * (v[2] - v[0]) - (v[1] - v[0]) * (u[2] - u[0]);
    if (std::abs(area2) < 1e-300) return 0.0;
    FaceSample<double> s{};
    if (!eval_face(u, v, {1.0, 1.0, 1.0}, pixel.x(), pixel.y(), gamma, s)) return 0.0;
    return s.phi;
}

std::vector<int> RenderBuffers::front_faces() const {
    if (!has_records) throw Error("gradients-unavailable", "render was not recorded");
    std::vector<int> out(pixel_count(), -1);
    for (size_t p = 0; p < pixel_count(); ++p)
        if (record_offsets[p + 1] > record_offsets[p]) out[p] = records[record_offsets[p]].face;
    return out;
}

void MeshGradients::resize_like(const PartAwareMesh& mesh) {
    positions.assign(mesh.vertex_count(), Vec3::Zero());
    sh.assign(mesh.sh.size(), 0.0);
    opacity.assign(mesh.opacity.size(), 0.0);
    logits.assign(mesh.logits.size(), 0.0);
}

MeshGradients& MeshGradients::operator+=(const MeshGradients& o) {
    if (positions.empty()) {
        *this = o;
        return *this;
    }
    for (size_t i = 0; i < positions.size(); ++i) positions[i] += o.positions[i];
    for (size_t i = 0; i < sh.size(); ++i) sh[i] += o.sh[i];
    for (size_t i = 0; i < opacity.size(); ++i) opacity[i] += o.opacity[i];
    for (size_t i = 0; i < logits.size(); ++i) logits[i] += o.logits[i];
    return *this;
}

RenderBuffers render(const PartAwareMesh& mesh, const PinholeCamera& cam, const RasterConfig& cfg, bool want_grads) {
    cfg.validate();
    mesh.validate();
    const int w = cam.width;
    const int h = cam.height;
    const int parts = mesh.num_parts;
    const size_t npix = static_cast<size_t>(w) * static_cast<size_t>(h);

    RenderBuffers out;
    out.width = w;
    out.height = h;
    out.num_parts = parts;
    out.rgb = Image(w, h, 3);
    out.depth = Image(w, h, 1);
    out.logits = Image(w, h, parts);
    out.opacity = Image(w, h, 1);
    out.camera = cam;
    out.config = cfg;

    // Per-vertex camera-space data and view-dependent color.
    const size_t nv = mesh.vertex_count();
    std::vector<Vec3> cam_pts(nv);
    std::vector<Vec3> colors(nv);
    const Vec3 eye = cam.center();
    for (size_t i = 0; i < nv; ++i) {
        cam_pts[i] = cam.to_camera(mesh.positions[i]);
        const Vec3 dir = (mesh.positions[i] - eye).normalized();
        colors[i] = eval_vertex_color(mesh, i, dir);
    }

    std::vector<ScreenFace> screen(mesh.faces.size());
    std::vector<int> order;
    order.reserve(mesh.faces.size());
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        ScreenFace& sf = screen[f];
        const Triangle& t = mesh.faces[f];
        bool ok = true;
        double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
        for (int c = 0; c < 3; ++c) {
            const Vec3& pc = cam_pts[static_cast<size_t>(t[c])];
            if (pc.z() < cam.near || pc.z() > cam.far) {
                ok = false;
                break;
            }
            sf.u[c] = cam.fx * pc.x() / pc.z() + cam.cx;
            sf.v[c] = cam.fy * pc.y() / pc.z() + cam.cy;
            sf.z[c] = pc.z();
            umin = std::min(umin, sf.u[c]);
            umax = std::max(umax, sf.u[c]);
            vmin = std::min(vmin, sf.v[c]);
            vmax = std::max(vmax, sf.v[c]);
        }
        if (!ok) continue;
        const double area2 = (sf.u[1] - sf.u[0]) * (sf.v[2] - sf.v[0]) - (sf.v[1] - sf.v[0]) * (sf.u[2] - sf.u[0]);
        if (std::abs(area2) * 0.5 < cfg.min_projected_area) continue;
        // Pixel centers at (i + 0.5, j + 0.5).
        sf.x0 = std::max(0, static_cast<int>(std::ceil(umin - 0.5)));
        sf.x1 = std::min(w - 1, static_cast<int>(std::floor(umax - 0.5)));
        sf.y0 = std::max(0, static_cast<int>(std::ceil(vmin - 0.5)));
        sf.y1 = std::min(h - 1, static_cast<int>(std::floor(vmax - 0.5)));
        if (sf.x0 > sf.x1 || sf.y0 > sf.y1) continue;
        const Vec3 inc = triangle_incenter(cam_pts[static_cast<size_t>(t[0])], cam_pts[static_cast<size_t>(t[1])],
                                           cam_pts[static_cast<size_t>(t[2])]);
        sf.key = inc.z();
        sf.sorted = t.v;
        std::sort(sf.sorted.begin(), sf.sorted.end());
        sf.visible = true;
        order.push_back(static_cast<int>(f));
    }
    // Depth order depends only on geometry, never on the face array order.
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const ScreenFace& fa = screen[static_cast<size_t>(a)];
        const ScreenFace& fb = screen[static_cast<size_t>(b)];
        if (fa.key != fb.key) return fa.key < fb.key;
        return fa.sorted < fb.sorted;
    });

    std::vector<double> trans(npix, 1.0);
    std::vector<int> count(npix, 0);
    std::vector<double> acc_rgb(npix * 3, 0.0);
    std::vector<double> acc_depth(npix, 0.0);
    std::vector<double> acc_logits(npix * static_cast<size_t>(parts), 0.0);
    std::vector<std::vector<PixelRecord>> per_pixel;
    if (want_grads) per_pixel.resize(npix);

    for (int f : order) {
        const ScreenFace& sf = screen[static_cast<size_t>(f)];
        const Triangle& t = mesh.faces[static_cast<size_t>(f)];
        for (int y = sf.y0; y <= sf.y1; ++y) {
            for (int x = sf.x0; x <= sf.x1; ++x) {
                const size_t p = static_cast<size_t>(y) * static_cast<size_t>(w) + static_cast<size_t>(x);
                if (trans[p] < cfg.min_transmittance || count[p] >= cfg.max_faces_per_pixel) continue;
                FaceSample<double> s{};
                if (!eval_face(sf.u, sf.v, sf.z, x + 0.5, y + 0.5, cfg.gamma, s)) continue;
                double sigma = 0.0;
                Vec3 color = Vec3::Zero();
                for (int c = 0; c < 3; ++c) {
                    sigma += s.mu[static_cast<size_t>(c)] * mesh.opacity[static_cast<size_t>(t[c])];
                    color += s.mu[static_cast<size_t>(c)] * colors[static_cast<size_t>(t[c])];
                }
                const double alpha = std::clamp(sigma * s.phi, 0.0, 1.0);
                const double wgt = alpha * trans[p];
                for (int c = 0; c < 3; ++c) acc_rgb[p * 3 + static_cast<size_t>(c)] += wgt * color[c];
                acc_depth[p] += wgt * s.depth;
                for (int k = 0; k < parts; ++k) {
                    double lk = 0.0;
                    for (int c = 0; c < 3; ++c)
                        lk += s.mu[static_cast<size_t>(c)] * mesh.logits[static_cast<size_t>(t[c]) * static_cast<size_t>(parts) + static_cast<size_t>(k)];
                    acc_logits[p * static_cast<size_t>(parts) + static_cast<size_t>(k)] += wgt * lk;
                }
                if (want_grads) {
                    PixelRecord r;
                    r.face = f;
                    r.phi = s.phi;
                    r.sigma = sigma;
                    r.alpha = alpha;
                    r.transmittance = trans[p];
                    r.weights = s.mu;
                    r.depth = s.depth;
                    r.color = color;
                    per_pixel[p].push_back(r);
                }
                trans[p] *= (1.0 - alpha);
                ++count[p];
            }
        }
    }

    for (size_t p = 0; p < npix; ++p) {
        const double a = 1.0 - trans[p];
        for (int c = 0; c < 3; ++c)
            out.rgb.data[p * 3 + static_cast<size_t>(c)] = static_cast<float>(acc_rgb[p * 3 + static_cast<size_t>(c)] + trans[p] * cfg.background[c]);
        out.opacity.data[p] = static_cast<float>(a);
        out.depth.data[p] = a >= cfg.depth_min_opacity ? static_cast<float>(acc_depth[p] / a) : 0.0f;
        for (int k = 0; k < parts; ++k)
            out.logits.data[p * static_cast<size_t>(parts) + static_cast<size_t>(k)] =
                static_cast<float>(acc_logits[p * static_cast<size_t>(parts) + static_cast<size_t>(k)]);
    }

    if (want_grads) {
        out.has_records = true;
        out.record_offsets.resize(npix + 1, 0);
        for (size_t p = 0; p < npix; ++p) out.record_offsets[p + 1] = out.record_offsets[p] + per_pixel[p].size();
        out.records.reserve(out.record_offsets.back());
        for (auto& list : per_pixel) out.records.insert(out.records.end(), list.begin(), list.end());
        out.raw_depth = std::move(acc_depth);
        out.mesh = std::make_shared<PartAwareMesh>(mesh);
        out.view_colors = std::move(colors);
    }
    return out;
}

MeshGradients render_backward(const RenderBuffers& buffers, const PixelGradients& grads) {
    if (!buffers.has_records || !buffers.mesh) throw Error("gradients-unavailable", "gradients unavailable");
    const PartAwareMesh& mesh = *buffers.mesh;
    const PinholeCamera& cam = buffers.camera;
    const RasterConfig& cfg = buffers.config;
    const size_t npix = buffers.pixel_count();
    const size_t parts = static_cast<size_t>(mesh.num_parts);
    const int sh_n = sh_coeff_count(mesh.sh_degree);

    MeshGradients out;
    out.resize_like(mesh);

    // Per-vertex accumulators in screen space (u, v, z).
    std::vector<Vec3> screen_grad(mesh.vertex_count(), Vec3::Zero());
    std::vector<Vec3> color_grad(mesh.vertex_count(), Vec3::Zero());
    std::vector<double> g_ch(3 + 1 + parts + 1);
    std::vector<double> v_ch(g_ch.size());

    for (size_t p = 0; p < npix; ++p) {
        const size_t begin = buffers.record_offsets[p];
        const size_t end = buffers.record_offsets[p + 1];
        if (begin == end) continue;

        // Upstream gradient on every composited channel: rgb, raw depth, logits, opacity.
        std::fill(g_ch.begin(), g_ch.end(), 0.0);
        if (!grads.rgb.empty())
            for (int c = 0; c < 3; ++c) g_ch[static_cast<size_t>(c)] = grads.rgb[p * 3 + static_cast<size_t>(c)];
        if (!grads.depth.empty() && grads.depth[p] != 0.0 && buffers.depth.data[p] != 0.0) {
            const double a_exact = 1.0 - [&] {
                double t = 1.0;
                for (size_t r = begin; r < end; ++r) t *= 1.0 - buffers.records[r].alpha;
                return t;
            }();
            g_ch[3] = grads.depth[p] / a_exact;
            g_ch[4 + parts] = -grads.depth[p] * buffers.raw_depth[p] / (a_exact * a_exact);
        }
        if (!grads.logits.empty())
            for (size_t k = 0; k < parts; ++k) g_ch[4 + k] = grads.logits[p * parts + k];

        double tail = 0.0;  // g . Acc_{n+1}, starting from the background layer
        for (int c = 0; c < 3; ++c) tail += g_ch[static_cast<size_t>(c)] * cfg.background[c];

        const int py = static_cast<int>(p / static_cast<size_t>(buffers.width));
        const int px = static_cast<int>(p % static_cast<size_t>(buffers.width));

        for (size_t r = end; r-- > begin;) {
            const PixelRecord& rec = buffers.records[r];
            const Triangle& t = mesh.faces[static_cast<size_t>(rec.face)];
            double logit_dot = 0.0;
            std::array<double, 3> logit_vert_dot{};
            for (int c = 0; c < 3; ++c) {
                const size_t vi = static_cast<size_t>(t[c]);
                for (size_t k = 0; k < parts; ++k) logit_vert_dot[static_cast<size_t>(c)] += g_ch[4 + k] * mesh.logits[vi * parts + k];
                logit_dot += rec.weights[static_cast<size_t>(c)] * logit_vert_dot[static_cast<size_t>(c)];
            }
            const double g_dot_v = g_ch[0] * rec.color[0] + g_ch[1] * rec.color[1] + g_ch[2] * rec.color[2] +
                                   g_ch[3] * rec.depth + logit_dot + g_ch[4 + parts];
            const double d_alpha = rec.transmittance * (g_dot_v - tail);
            tail = rec.alpha * g_dot_v + (1.0 - rec.alpha) * tail;

            const double wgt = rec.alpha * rec.transmittance;
            const double d_sigma = d_alpha * rec.phi;
            const double d_phi = d_alpha * rec.sigma;
            const Vec3 d_color(wgt * g_ch[0], wgt * g_ch[1], wgt * g_ch[2]);
            const double d_depth = wgt * g_ch[3];

            std::array<double, 3> d_mu{};
            for (int c = 0; c < 3; ++c) {
                const size_t vi = static_cast<size_t>(t[c]);
                const double mu = rec.weights[static_cast<size_t>(c)];
                color_grad[vi] += mu * d_color;
                out.opacity[vi] += mu * d_sigma;
                for (size_t k = 0; k < parts; ++k) out.logits[vi * parts + k] += mu * wgt * g_ch[4 + k];
                d_mu[static_cast<size_t>(c)] = d_color.dot(buffers.view_colors[vi]) + d_sigma * mesh.opacity[vi] +
                                               wgt * logit_vert_dot[static_cast<size_t>(c)];
            }

            // Geometry: re-evaluate the face kernel with 9 tangent directions.
            using D = Dual<9>;
            std::array<D, 3> u, v, z;
            for (int c = 0; c < 3; ++c) {
                const Vec3 pc = cam.to_camera(mesh.positions[static_cast<size_t>(t[c])]);
                u[static_cast<size_t>(c)] = D::variable(cam.fx * pc.x() / pc.z() + cam.cx, 3 * c);
                v[static_cast<size_t>(c)] = D::variable(cam.fy * pc.y() / pc.z() + cam.cy, 3 * c + 1);
                z[static_cast<size_t>(c)] = D::variable(pc.z(), 3 * c + 2);
            }
            FaceSample<D> s{};
            if (!eval_face(u, v, z, px + 0.5, py + 0.5, cfg.gamma, s)) continue;
            for (int c = 0; c < 3; ++c) {
                Vec3 g = Vec3::Zero();
                for (int j = 0; j < 3; ++j) {
                    const size_t idx = static_cast<size_t>(3 * c + j);
                    double total = d_phi * s.phi.d[idx] + d_depth * s.depth.d[idx];
                    for (int m = 0; m < 3; ++m) total += d_mu[static_cast<size_t>(m)] * s.mu[static_cast<size_t>(m)].d[idx];
                    g[j] = total;
                }
                screen_grad[static_cast<size_t>(t[c])] += g;
            }
        }
    }

    // Screen space -> camera -> world.
    const Vec3 eye = cam.center();
    for (size_t i = 0; i < mesh.vertex_count(); ++i) {
        const Vec3& g = screen_grad[i];
        if (g.x() != 0.0 || g.y() != 0.0 || g.z() != 0.0) {
            const Vec3 pc = cam.to_camera(mesh.positions[i]);
            const double iz = 1.0 / pc.z();
            Vec3 g_cam;
            g_cam.x() = g.x() * cam.fx * iz;
            g_cam.y() = g.y() * cam.fy * iz;
            g_cam.z() = -g.x() * cam.fx * pc.x() * iz * iz - g.y() * cam.fy * pc.y() * iz * iz + g.z();
            out.positions[i] = cam.rotation.transpose() * g_cam;
        }
        const Vec3& gc = color_grad[i];
        if (gc.isZero(0.0)) continue;
        const std::vector<double> basis = sh_basis(mesh.sh_degree, (mesh.positions[i] - eye).normalized());
        for (int k = 0; k < sh_n; ++k)
            for (int c = 0; c < 3; ++c)
                out.sh[i * static_cast<size_t>(mesh.sh_stride()) + static_cast<size_t>(3 * k + c)] += basis[static_cast<size_t>(k)] * gc[c];
    }
    return out;
}

}  // namespace kinemesh
