#include "kinemesh/mesh_field.hpp"

#include <algorithm>
#include <cmath>

#include "kinemesh/error.hpp"

namespace kinemesh {

namespace {

constexpr double kShC1 = 0.4886025119029199;

}  // namespace

VertexAttr PartAwareMesh::vertex(size_t i) const {
    VertexAttr v;
    v.position = positions[i];
    auto s = vertex_sh(i);
    v.sh.assign(s.begin(), s.end());
    v.opacity = opacity[i];
    auto l = vertex_logits(i);
    v.logits.assign(l.begin(), l.end());
    return v;
}

void PartAwareMesh::push_vertex(const VertexAttr& v) {
    if (static_cast<int>(v.sh.size()) != sh_stride() || static_cast<int>(v.logits.size()) != num_parts)
        throw Error("invalid-mesh", "vertex attribute sizes do not match the mesh layout");
    positions.push_back(v.position);
    sh.insert(sh.end(), v.sh.begin(), v.sh.end());
    opacity.push_back(v.opacity);
    logits.insert(logits.end(), v.logits.begin(), v.logits.end());
}

void PartAwareMesh::resize_vertices(size_t n) {
    positions.resize(n, Vec3::Zero());
    sh.resize(n * static_cast<size_t>(sh_stride()), 0.5);
    opacity.resize(n, 1.0);
    logits.resize(n * static_cast<size_t>(num_parts), 0.0);
}

void PartAwareMesh::validate() const {
    const size_t n = positions.size();
    if (num_parts < 1) throw Error("invalid-mesh", "num_parts must be at least 1");
    if (sh.size() != n * static_cast<size_t>(sh_stride()) || opacity.size() != n ||
        logits.size() != n * static_cast<size_t>(num_parts))
        throw Error("invalid-mesh", "attribute array sizes do not match vertex count");
    if (!labels.empty() && labels.size() != n) throw Error("invalid-mesh", "label count does not match vertex count");
    for (size_t f = 0; f < faces.size(); ++f)
        if (!faces[f].valid(n)) throw Error("invalid-mesh", "face " + std::to_string(f) + " has invalid indices");
    for (size_t i = 0; i < n; ++i) {
        if (!positions[i].allFinite()) throw Error("non-finite", "vertex " + std::to_string(i) + " position");
        if (!std::isfinite(opacity[i])) throw Error("non-finite", "vertex " + std::to_string(i) + " opacity");
        for (double v : vertex_sh(i))
            if (!std::isfinite(v)) throw Error("non-finite", "vertex " + std::to_string(i) + " color");
        for (double v : vertex_logits(i))
            if (!std::isfinite(v)) throw Error("non-finite", "vertex " + std::to_string(i) + " logits");
    }
}

void PartAwareMesh::extract_part(int k, std::vector<Vec3>& out_positions, std::vector<Triangle>& out_faces) const {
    out_positions.clear();
    out_faces.clear();
    if (k < 0 || k >= static_cast<int>(part_faces.size())) return;
    std::vector<int> remap(positions.size(), -1);
    for (int f : part_faces[static_cast<size_t>(k)]) {
        Triangle t;
        for (int c = 0; c < 3; ++c) {
            const int v = faces[static_cast<size_t>(f)][c];
            if (remap[static_cast<size_t>(v)] < 0) {
                remap[static_cast<size_t>(v)] = static_cast<int>(out_positions.size());
                out_positions.push_back(positions[static_cast<size_t>(v)]);
            }
            t[c] = remap[static_cast<size_t>(v)];
        }
        out_faces.push_back(t);
    }
}

std::vector<double> sh_basis(int degree, const Vec3& d) {
    std::vector<double> basis(static_cast<size_t>(sh_coeff_count(degree)), 0.0);
    basis[0] = 1.0;
    if (degree >= 1) {
        basis[1] = -kShC1 * d.y();
        basis[2] = kShC1 * d.z();
        basis[3] = -kShC1 * d.x();
    }
    return basis;
}

Vec3 eval_vertex_color(const PartAwareMesh& mesh, size_t i, const Vec3& view_dir) {
    const double* c = mesh.sh.data() + i * static_cast<size_t>(mesh.sh_stride());
    Vec3 rgb(c[0], c[1], c[2]);
    if (mesh.sh_degree >= 1) {
        const std::vector<double> basis = sh_basis(mesh.sh_degree, view_dir);
        for (size_t k = 1; k < basis.size(); ++k) rgb += basis[k] * Vec3(c[3 * k], c[3 * k + 1], c[3 * k + 2]);
    }
    return rgb;
}

std::vector<double> part_weights(std::span<const double> logits) {
    std::vector<double> w(logits.size());
    if (logits.empty()) return w;
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        w[i] = std::exp(logits[i] - m);
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

int argmax_part(std::span<const double> values) {
    int best = 0;
    for (size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[static_cast<size_t>(best)]) best = static_cast<int>(i);
    return best;
}

PartAwareMesh harden_parts(const PartAwareMesh& mesh) {
    PartAwareMesh out = mesh;
    const size_t n = mesh.vertex_count();
    out.labels.assign(n, 0);
    // softmax is monotone, so the argmax of the raw logits is exact and
    // immune to underflow ties in the weights
    for (size_t i = 0; i < n; ++i) out.labels[i] = argmax_part(mesh.vertex_logits(i));
    out.part_faces = partition_faces(out).per_part;
    return out;
}

FacePartition partition_faces(const PartAwareMesh& mesh) {
    if (!mesh.hardened()) throw Error("not-hardened", "mesh not hardened");
    FacePartition out;
    out.per_part.resize(static_cast<size_t>(mesh.num_parts));
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const Triangle& t = mesh.faces[f];
        const int a = mesh.labels[static_cast<size_t>(t[0])];
        const int b = mesh.labels[static_cast<size_t>(t[1])];
        const int c = mesh.labels[static_cast<size_t>(t[2])];
        if (a == b && b == c && a >= 0 && a < mesh.num_parts)
            out.per_part[static_cast<size_t>(a)].push_back(static_cast<int>(f));
        else
            out.dropped.push_back(static_cast<int>(f));
    }
    return out;
}

void set_one_hot_logits(PartAwareMesh& mesh, std::span<const int> labels, double scale) {
    const size_t k = static_cast<size_t>(mesh.num_parts);
    mesh.logits.assign(mesh.vertex_count() * k, 0.0);
    for (size_t i = 0; i < labels.size() && i < mesh.vertex_count(); ++i)
        mesh.logits[i * k + static_cast<size_t>(labels[i])] = scale;
}

}  // namespace kinemesh
