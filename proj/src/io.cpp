#include "kinemesh/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>
#include <png.h>

#include "kinemesh/error.hpp"

namespace kinemesh {

static_assert(std::endian::native == std::endian::little, "raw image I/O assumes a little-endian host");

using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& s, const std::string& where) {
    const char* end = s.data() + s.size();
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end) throw Error("parse-error", where + ": expected a number, got '" + s + "'");
    return v;
}

long parse_long(const std::string& s, const std::string& where) {
    const char* end = s.data() + s.size();
    long v = 0;
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end) throw Error("parse-error", where + ": expected an integer, got '" + s + "'");
    return v;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3) throw Error("bad-manifest", what + " must be a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw Error("bad-manifest", what + ": " + e.what());
    }
}

void write_binary(const fs::path& path, const std::string& header, const void* data, size_t bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io-error", "cannot write " + path.string());
    out << header;
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out) throw Error("io-error", "failed writing " + path.string());
}

}  // namespace

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("missing-file", path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
    write_binary(path, text, nullptr, 0);
}

// ---------------------------------------------------------------- meshes

fs::path attribute_sidecar(const fs::path& obj_path) { return fs::path(obj_path.string() + ".attr"); }

void save_obj(const fs::path& path, std::span<const Vec3> positions, std::span<const Triangle> faces) {
    std::string s;
    s.reserve(positions.size() * 64 + faces.size() * 24);
    for (const Vec3& p : positions) s += "v " + fmt(p.x()) + " " + fmt(p.y()) + " " + fmt(p.z()) + "\n";
    for (const Triangle& t : faces)
        s += "f " + std::to_string(t[0] + 1) + " " + std::to_string(t[1] + 1) + " " + std::to_string(t[2] + 1) + "\n";
    write_text_file(path, s);
}

namespace {

// Parses positions, optional per-vertex colors and faces (polygons are fanned).
void parse_obj(const fs::path& path, std::vector<Vec3>& positions, std::vector<Vec3>* colors,
               std::vector<Triangle>& faces) {
    const std::string text = read_text_file(path);
    positions.clear();
    faces.clear();
    if (colors) colors->clear();
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool all_colored = true;
    while (std::getline(in, line)) {
        ++lineno;
        const std::vector<std::string> tok = split_ws(line);
        if (tok.empty() || tok[0][0] == '#') continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (tok[0] == "v") {
            if (tok.size() < 4) throw Error("parse-error", where + ": vertex needs 3 coordinates");
            positions.emplace_back(parse_double(tok[1], where), parse_double(tok[2], where), parse_double(tok[3], where));
            if (tok.size() >= 7 && colors)
                colors->emplace_back(parse_double(tok[4], where), parse_double(tok[5], where), parse_double(tok[6], where));
            else
                all_colored = false;
        } else if (tok[0] == "f") {
            if (tok.size() < 4) throw Error("parse-error", where + ": face needs at least 3 vertices");
            std::vector<int> idx;
            for (size_t i = 1; i < tok.size(); ++i) {
                long v = parse_long(tok[i].substr(0, tok[i].find('/')), where);
                if (v < 0) v += static_cast<long>(positions.size()) + 1;
                if (v < 1) throw Error("parse-error", where + ": bad vertex index");
                idx.push_back(static_cast<int>(v - 1));
            }
            for (size_t i = 1; i + 1 < idx.size(); ++i) faces.push_back(Triangle{{idx[0], idx[i], idx[i + 1]}});
        }
    }
    for (const Triangle& t : faces)
        if (!t.valid(positions.size())) throw Error("parse-error", path.string() + ": face index out of range");
    if (colors && !all_colored) colors->clear();
}

}  // namespace

void load_obj(const fs::path& path, std::vector<Vec3>& positions, std::vector<Triangle>& faces) {
    parse_obj(path, positions, nullptr, faces);
}

void save_mesh(const PartAwareMesh& mesh, const fs::path& obj_path) {
    mesh.validate();
    std::string obj;
    obj.reserve(mesh.vertex_count() * 120 + mesh.faces.size() * 24);
    for (size_t i = 0; i < mesh.vertex_count(); ++i) {
        const Vec3& p = mesh.positions[i];
        const Vec3 c = mesh.base_color(i);
        obj += "v " + fmt(p.x()) + " " + fmt(p.y()) + " " + fmt(p.z()) + " " + fmt(c.x()) + " " + fmt(c.y()) + " " +
               fmt(c.z()) + "\n";
    }
    for (const Triangle& t : mesh.faces)
        obj += "f " + std::to_string(t[0] + 1) + " " + std::to_string(t[1] + 1) + " " + std::to_string(t[2] + 1) + "\n";
    write_text_file(obj_path, obj);

    std::string a = "kinemesh-attr 1\n";
    a += "state " + std::to_string(mesh.state) + "\n";
    a += "num_parts " + std::to_string(mesh.num_parts) + "\n";
    a += "sh_degree " + std::to_string(mesh.sh_degree) + "\n";
    a += "vertices " + std::to_string(mesh.vertex_count()) + "\n";
    const size_t stride = static_cast<size_t>(mesh.sh_stride());
    const size_t np = static_cast<size_t>(mesh.num_parts);
    for (size_t i = 0; i < mesh.vertex_count(); ++i) {
        a += "a";
        for (size_t c = 0; c < stride; ++c) a += " " + fmt(mesh.sh[i * stride + c]);
        a += " " + fmt(mesh.opacity[i]);
        for (size_t k = 0; k < np; ++k) a += " " + fmt(mesh.logits[i * np + k]);
        a += "\n";
    }
    if (mesh.hardened()) {
        a += "labels";
        for (int l : mesh.labels) a += " " + std::to_string(l);
        a += "\n";
    }
    for (size_t k = 0; k < mesh.part_faces.size(); ++k) {
        a += "part_faces " + std::to_string(k) + " " + std::to_string(mesh.part_faces[k].size());
        for (int f : mesh.part_faces[k]) a += " " + std::to_string(f);
        a += "\n";
    }
    write_text_file(attribute_sidecar(obj_path), a);
}

PartAwareMesh load_mesh(const fs::path& obj_path) {
    PartAwareMesh m;
    std::vector<Vec3> colors;
    parse_obj(obj_path, m.positions, &colors, m.faces);
    const fs::path side = attribute_sidecar(obj_path);
    if (!fs::exists(side)) {
        m.num_parts = 1;
        m.sh_degree = 0;
        m.sh.assign(m.positions.size() * 3, 0.5);
        for (size_t i = 0; i < colors.size(); ++i)
            for (int c = 0; c < 3; ++c) m.sh[i * 3 + static_cast<size_t>(c)] = colors[i][c];
        m.opacity.assign(m.positions.size(), 1.0);
        m.logits.assign(m.positions.size(), 0.0);
        m.validate();
        return m;
    }
    std::istringstream in(read_text_file(side));
    std::string line;
    int lineno = 0;
    size_t nverts = 0, read_verts = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::vector<std::string> tok = split_ws(line);
        if (tok.empty()) continue;
        const std::string where = side.string() + ":" + std::to_string(lineno);
        const std::string& key = tok[0];
        if (key == "kinemesh-attr") {
            if (tok.size() != 2 || tok[1] != "1") throw Error("parse-error", where + ": unsupported sidecar version");
        } else if (key == "state") {
            m.state = static_cast<int>(parse_long(tok.at(1), where));
        } else if (key == "num_parts") {
            m.num_parts = static_cast<int>(parse_long(tok.at(1), where));
        } else if (key == "sh_degree") {
            m.sh_degree = static_cast<int>(parse_long(tok.at(1), where));
        } else if (key == "vertices") {
            nverts = static_cast<size_t>(parse_long(tok.at(1), where));
            if (nverts != m.positions.size())
                throw Error("parse-error", where + ": sidecar has " + std::to_string(nverts) + " vertices, OBJ has " +
                                               std::to_string(m.positions.size()));
            m.sh.reserve(nverts * static_cast<size_t>(m.sh_stride()));
        } else if (key == "a") {
            const size_t stride = static_cast<size_t>(m.sh_stride()), np = static_cast<size_t>(m.num_parts);
            if (tok.size() != 1 + stride + 1 + np) throw Error("parse-error", where + ": wrong attribute count");
            for (size_t c = 0; c < stride; ++c) m.sh.push_back(parse_double(tok[1 + c], where));
            m.opacity.push_back(parse_double(tok[1 + stride], where));
            for (size_t k = 0; k < np; ++k) m.logits.push_back(parse_double(tok[2 + stride + k], where));
            ++read_verts;
        } else if (key == "labels") {
            if (tok.size() != 1 + m.positions.size()) throw Error("parse-error", where + ": wrong label count");
            m.labels.resize(m.positions.size());
            for (size_t i = 0; i < m.labels.size(); ++i) m.labels[i] = static_cast<int>(parse_long(tok[1 + i], where));
        } else if (key == "part_faces") {
            const size_t k = static_cast<size_t>(parse_long(tok.at(1), where));
            const size_t n = static_cast<size_t>(parse_long(tok.at(2), where));
            if (tok.size() != 3 + n) throw Error("parse-error", where + ": wrong face count");
            if (m.part_faces.size() <= k) m.part_faces.resize(k + 1);
            for (size_t i = 0; i < n; ++i) m.part_faces[k].push_back(static_cast<int>(parse_long(tok[3 + i], where)));
        } else {
            throw Error("parse-error", where + ": unknown record '" + key + "'");
        }
    }
    if (read_verts != m.positions.size())
        throw Error("parse-error", side.string() + ": expected " + std::to_string(m.positions.size()) +
                                       " attribute rows, found " + std::to_string(read_verts));
    m.validate();
    return m;
}

// ---------------------------------------------------------------- joints

namespace {

json joint_json(const PartJoint& j, int part) {
    const JointAxis ax = joint_axis(j);
    return {{"part", part},
            {"type", to_string(j.type)},
            {"rotation", json::array({j.rotation.w(), j.rotation.x(), j.rotation.y(), j.rotation.z()})},
            {"pivot", vec_json(j.pivot)},
            {"translation", vec_json(j.translation)},
            {"axis", vec_json(ax.axis)},
            {"angle_deg", ax.angle_deg},
            {"displacement", ax.displacement}};
}

PartJoint json_joint(const json& j) {
    PartJoint out;
    out.type = joint_type_from_string(j.at("type").get<std::string>());
    const json& q = j.at("rotation");
    if (!q.is_array() || q.size() != 4) throw Error("bad-manifest", "rotation must be a quaternion [w, x, y, z]");
    out.rotation = UnitQuaternion(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
    out.pivot = json_vec(j.at("pivot"), "pivot");
    out.translation = json_vec(j.at("translation"), "translation");
    return out;
}

}  // namespace

std::string joints_to_json(const JointParams& joints) {
    json parts = json::array();
    for (int k = 0; k < joints.num_parts(); ++k) parts.push_back(joint_json(joints.parts[static_cast<size_t>(k)], k));
    json doc{{"format", "kinemesh-joints"}, {"version", 1}, {"parts", parts}};
    return doc.dump(2) + "\n";
}

JointParams joints_from_json(const std::string& text) {
    const json doc = parse_json(text, "joint manifest");
    try {
        if (doc.at("format") != "kinemesh-joints") throw Error("bad-manifest", "not a joint manifest");
        JointParams out;
        for (const json& p : doc.at("parts")) {
            const size_t k = p.at("part").get<size_t>();
            if (k != out.parts.size()) throw Error("bad-manifest", "parts must be listed in order");
            out.parts.push_back(json_joint(p));
        }
        if (out.parts.empty()) throw Error("bad-manifest", "joint manifest lists no parts");
        return out;
    } catch (const json::exception& e) {
        throw Error("bad-manifest", std::string("joint manifest: ") + e.what());
    }
}

void save_joints(const JointParams& joints, const fs::path& path) { write_text_file(path, joints_to_json(joints)); }

JointParams load_joints(const fs::path& path) { return joints_from_json(read_text_file(path)); }

// ---------------------------------------------------------------- images

void write_png(const Image& image, const fs::path& path) {
    if (image.channels != 1 && image.channels != 3)
        throw Error("invalid-image", "PNG export needs 1 or 3 channels, got " + std::to_string(image.channels));
    std::vector<png_byte> bytes(image.data.size());
    for (size_t i = 0; i < bytes.size(); ++i)
        bytes[i] = static_cast<png_byte>(std::lround(std::clamp(static_cast<double>(image.data[i]), 0.0, 1.0) * 255.0));
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr))
        throw Error("io-error", "cannot write " + path.string() + ": " + png.message);
}

namespace {

std::vector<png_byte> read_png_bytes(const fs::path& path, png_uint_32 format, int& w, int& h) {
    if (!fs::exists(path)) throw Error("missing-file", path.string());
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str()))
        throw Error("io-error", "cannot read " + path.string() + ": " + png.message);
    png.format = format;
    std::vector<png_byte> bytes(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr))
        throw Error("io-error", "cannot decode " + path.string() + ": " + png.message);
    w = static_cast<int>(png.width);
    h = static_cast<int>(png.height);
    return bytes;
}

}  // namespace

Image read_png(const fs::path& path) {
    int w = 0, h = 0;
    const std::vector<png_byte> bytes = read_png_bytes(path, PNG_FORMAT_RGB, w, h);
    Image out(w, h, 3);
    for (size_t i = 0; i < bytes.size(); ++i) out.data[i] = static_cast<float>(bytes[i]) / 255.0f;
    return out;
}

void write_label_png(const LabelMap& labels, const fs::path& path) {
    std::vector<png_byte> bytes(labels.labels.size());
    for (size_t i = 0; i < bytes.size(); ++i) {
        const int l = labels.labels[i];
        if (l < -1 || l > 254) throw Error("invalid-label", "label " + std::to_string(l) + " does not fit an 8-bit map");
        bytes[i] = static_cast<png_byte>(l + 1);
    }
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(labels.width);
    png.height = static_cast<png_uint_32>(labels.height);
    png.format = PNG_FORMAT_GRAY;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr))
        throw Error("io-error", "cannot write " + path.string() + ": " + png.message);
}

LabelMap read_label_png(const fs::path& path) {
    int w = 0, h = 0;
    const std::vector<png_byte> bytes = read_png_bytes(path, PNG_FORMAT_GRAY, w, h);
    LabelMap out(w, h);
    for (size_t i = 0; i < bytes.size(); ++i) out.labels[i] = static_cast<int>(bytes[i]) - 1;
    return out;
}

void write_raw_image(const Image& image, const fs::path& path) {
    const std::string header = "KMF32 " + std::to_string(image.width) + " " + std::to_string(image.height) + " " +
                               std::to_string(image.channels) + "\n";
    write_binary(path, header, image.data.data(), image.data.size() * sizeof(float));
}

Image read_raw_image(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("missing-file", path.string());
    std::string header;
    std::getline(in, header);
    const std::vector<std::string> tok = split_ws(header);
    if (tok.size() != 4 || tok[0] != "KMF32") throw Error("parse-error", path.string() + ": not a KMF32 image");
    Image out(static_cast<int>(parse_long(tok[1], path.string())), static_cast<int>(parse_long(tok[2], path.string())),
              static_cast<int>(parse_long(tok[3], path.string())));
    in.read(reinterpret_cast<char*>(out.data.data()), static_cast<std::streamsize>(out.data.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(out.data.size() * sizeof(float)))
        throw Error("parse-error", path.string() + ": truncated image data");
    return out;
}

// ---------------------------------------------------------------- dataset

namespace {

json camera_json(const PinholeCamera& c) {
    json r = json::array();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.push_back(c.rotation(i, j));
    return {{"rotation", r},          {"translation", vec_json(c.translation)},
            {"fx", c.fx},             {"fy", c.fy},
            {"cx", c.cx},             {"cy", c.cy},
            {"width", c.width},       {"height", c.height},
            {"near", c.near},         {"far", c.far}};
}

PinholeCamera json_camera(const json& j) {
    PinholeCamera c;
    const json& r = j.at("rotation");
    if (!r.is_array() || r.size() != 9) throw Error("bad-manifest", "camera rotation must have 9 entries");
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) c.rotation(i, k) = r[static_cast<size_t>(3 * i + k)].get<double>();
    c.translation = json_vec(j.at("translation"), "camera translation");
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.near = j.at("near").get<double>();
    c.far = j.at("far").get<double>();
    c.validate();
    return c;
}

json spec_json(const SceneSpec& s) {
    return {{"template", to_string(s.tmpl)},
            {"num_parts", s.num_parts},
            {"seed", s.seed},
            {"train_views", s.train_views},
            {"test_views", s.test_views},
            {"image_size", s.image_size},
            {"camera_radius", s.camera_radius},
            {"fov_deg", s.fov_deg},
            {"edge_length", s.edge_length},
            {"albedo_contrast", s.albedo_contrast},
            {"hinge_range_deg", s.hinge_range_deg},
            {"drawer_range", s.drawer_range},
            {"q_start", json::array({s.q_start_lo, s.q_start_hi})},
            {"q_end", json::array({s.q_end_lo, s.q_end_hi})}};
}

SceneSpec json_spec(const json& j) {
    SceneSpec s;
    s.tmpl = scene_template_from_string(j.at("template").get<std::string>());
    s.num_parts = j.value("num_parts", 0);
    s.seed = j.value("seed", 0U);
    s.train_views = j.value("train_views", s.train_views);
    s.test_views = j.value("test_views", s.test_views);
    s.image_size = j.value("image_size", s.image_size);
    s.camera_radius = j.value("camera_radius", s.camera_radius);
    s.fov_deg = j.value("fov_deg", s.fov_deg);
    s.edge_length = j.value("edge_length", s.edge_length);
    s.albedo_contrast = j.value("albedo_contrast", s.albedo_contrast);
    s.hinge_range_deg = j.value("hinge_range_deg", s.hinge_range_deg);
    s.drawer_range = j.value("drawer_range", s.drawer_range);
    if (j.contains("q_start")) {
        s.q_start_lo = j["q_start"].at(0).get<double>();
        s.q_start_hi = j["q_start"].at(1).get<double>();
    }
    if (j.contains("q_end")) {
        s.q_end_lo = j["q_end"].at(0).get<double>();
        s.q_end_hi = j["q_end"].at(1).get<double>();
    }
    return s;
}

json truth_json(const JointTruth& t) {
    return {{"part", t.part},       {"type", to_string(t.type)}, {"axis", vec_json(t.axis)},
            {"pivot", vec_json(t.pivot)}, {"range", t.range},    {"q_start", t.q_start},
            {"q_end", t.q_end}};
}

JointTruth json_truth(const json& j) {
    JointTruth t;
    t.part = j.at("part").get<int>();
    t.type = joint_type_from_string(j.at("type").get<std::string>());
    t.axis = json_vec(j.at("axis"), "axis");
    t.pivot = json_vec(j.at("pivot"), "pivot");
    t.range = j.at("range").get<double>();
    t.q_start = j.at("q_start").get<double>();
    t.q_end = j.at("q_end").get<double>();
    return t;
}

void check_labels(const LabelMap& labels, int num_parts, const fs::path& path) {
    for (int l : labels.labels)
        if (l < -1 || l >= num_parts) {
            std::string valid = "-1 (background)";
            for (int k = 0; k < num_parts; ++k) valid += ", " + std::to_string(k);
            throw Error("invalid-label",
                        "label " + std::to_string(l) + " in " + path.string() + "; valid ids are " + valid);
        }
}

}  // namespace

std::string ground_truth_to_json(const GroundTruth& gt, const std::string& mesh0, const std::string& mesh1) {
    json joints = json::array();
    for (const JointTruth& t : gt.joints) joints.push_back(truth_json(t));
    json doc{{"num_parts", gt.num_parts},
             {"units_to_meters", gt.units_to_meters},
             {"joints", joints},
             {"meshes", json::array({mesh0, mesh1})}};
    return doc.dump(2);
}

Dataset dataset_from_scene(const Scene& scene, const std::string& name,
                           const std::optional<std::array<PartAwareMesh, 2>>& init) {
    Dataset d;
    d.name = name;
    d.num_parts = scene.gt.num_parts;
    d.units_to_meters = scene.gt.units_to_meters;
    d.train = scene.train;
    d.test = scene.test;
    d.gt = scene.gt;
    d.init = init;
    d.generator = scene.spec;
    return d;
}

void save_dataset(const Dataset& data, const fs::path& dir) {
    fs::create_directories(dir);
    json views = json::array();
    for (int s = 0; s < 2; ++s)
        for (const char* split : {"train", "test"}) {
            const auto& list = std::string(split) == "train" ? data.train[static_cast<size_t>(s)]
                                                             : data.test[static_cast<size_t>(s)];
            for (size_t i = 0; i < list.size(); ++i) {
                const CameraView& v = list[i];
                char stem[64];
                std::snprintf(stem, sizeof stem, "state%d/%s_%03zu", s, split, i);
                const std::string base = stem;
                write_raw_image(v.rgb, dir / (base + "_rgb.f32"));
                write_png(v.rgb, dir / (base + "_rgb.png"));
                write_raw_image(v.depth, dir / (base + "_depth.f32"));
                write_label_png(v.labels, dir / (base + "_labels.png"));
                views.push_back({{"state", s},
                                 {"split", split},
                                 {"camera", camera_json(v.camera)},
                                 {"rgb", base + "_rgb.f32"},
                                 {"preview", base + "_rgb.png"},
                                 {"depth", base + "_depth.f32"},
                                 {"labels", base + "_labels.png"}});
            }
        }
    json doc{{"format", "kinemesh-dataset"},
             {"version", 1},
             {"name", data.name},
             {"num_parts", data.num_parts},
             {"units_to_meters", data.units_to_meters},
             {"views", views}};
    if (data.generator) doc["generator"] = spec_json(*data.generator);
    if (data.gt) {
        save_mesh(data.gt->mesh[0], dir / "gt" / "mesh_t0.obj");
        save_mesh(data.gt->mesh[1], dir / "gt" / "mesh_t1.obj");
        doc["gt"] = json::parse(ground_truth_to_json(*data.gt, "gt/mesh_t0.obj", "gt/mesh_t1.obj"));
    }
    if (data.init) {
        save_mesh((*data.init)[0], dir / "init" / "mesh_t0.obj");
        save_mesh((*data.init)[1], dir / "init" / "mesh_t1.obj");
        doc["init"] = {{"meshes", json::array({"init/mesh_t0.obj", "init/mesh_t1.obj"})}};
    }
    write_text_file(dir / "manifest.json", doc.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& manifest) {
    const fs::path path = fs::is_directory(manifest) ? manifest / "manifest.json" : manifest;
    const fs::path dir = path.parent_path();
    const json doc = parse_json(read_text_file(path), path.string());
    Dataset d;
    try {
        if (doc.at("format") != "kinemesh-dataset") throw Error("bad-manifest", path.string() + " is not a dataset");
        d.name = doc.value("name", std::string());
        d.num_parts = doc.at("num_parts").get<int>();
        if (d.num_parts < 1) throw Error("bad-manifest", "num_parts must be at least 1");
        d.units_to_meters = doc.value("units_to_meters", 1.0);
        for (const json& v : doc.at("views")) {
            CameraView view;
            view.state = v.at("state").get<int>();
            if (view.state != 0 && view.state != 1) throw Error("bad-manifest", "view state must be 0 or 1");
            view.camera = json_camera(v.at("camera"));
            view.rgb = read_raw_image(dir / v.at("rgb").get<std::string>());
            const fs::path depth = dir / v.at("depth").get<std::string>();
            if (!fs::exists(depth)) throw Error("missing-file", "depth map " + depth.string());
            view.depth = read_raw_image(depth);
            const fs::path labels = dir / v.at("labels").get<std::string>();
            view.labels = read_label_png(labels);
            check_labels(view.labels, d.num_parts, labels);
            if (view.rgb.width != view.camera.width || view.rgb.height != view.camera.height ||
                view.depth.width != view.rgb.width || view.depth.height != view.rgb.height ||
                view.labels.width != view.rgb.width || view.labels.height != view.rgb.height)
                throw Error("bad-manifest", "image sizes disagree for " + v.at("rgb").get<std::string>());
            const std::string split = v.at("split").get<std::string>();
            if (split == "train")
                d.train[static_cast<size_t>(view.state)].push_back(std::move(view));
            else if (split == "test")
                d.test[static_cast<size_t>(view.state)].push_back(std::move(view));
            else
                throw Error("bad-manifest", "unknown split '" + split + "'");
        }
        if (doc.contains("generator")) d.generator = json_spec(doc["generator"]);
        if (doc.contains("gt")) {
            const json& g = doc["gt"];
            GroundTruth gt;
            gt.num_parts = g.at("num_parts").get<int>();
            gt.units_to_meters = g.value("units_to_meters", d.units_to_meters);
            for (const json& j : g.at("joints")) gt.joints.push_back(json_truth(j));
            for (int s = 0; s < 2; ++s)
                gt.mesh[static_cast<size_t>(s)] = load_mesh(dir / g.at("meshes").at(static_cast<size_t>(s)).get<std::string>());
            d.gt = std::move(gt);
        }
        if (doc.contains("init")) {
            std::array<PartAwareMesh, 2> init;
            for (int s = 0; s < 2; ++s)
                init[static_cast<size_t>(s)] =
                    load_mesh(dir / doc["init"].at("meshes").at(static_cast<size_t>(s)).get<std::string>());
            d.init = std::move(init);
        }
    } catch (const json::exception& e) {
        throw Error("bad-manifest", path.string() + ": " + e.what());
    }
    return d;
}

// ---------------------------------------------------------------- config

namespace {

struct ConfigField {
    std::string key;
    std::function<std::string(const TrainConfig&)> get;
    std::function<void(TrainConfig&, const std::string&)> set;
};

template <class Access>
ConfigField number_field(std::string key, Access access) {
    return {key,
            [access](const TrainConfig& c) {
                TrainConfig copy = c;
                return fmt(static_cast<double>(access(copy)));
            },
            [access, key](TrainConfig& c, const std::string& v) {
                auto& ref = access(c);
                using T = std::remove_reference_t<decltype(ref)>;
                if constexpr (std::is_floating_point_v<T>) {
                    ref = parse_double(v, key);
                } else {
                    const long x = parse_long(v, key);
                    if constexpr (std::is_unsigned_v<T>)
                        if (x < 0) throw Error("invalid-config", key + " must be non-negative");
                    ref = static_cast<T>(x);
                }
            }};
}

template <class Access>
ConfigField bool_field(std::string key, Access access) {
    return {key, [access](const TrainConfig& c) {
                TrainConfig copy = c;
                return std::string(access(copy) ? "true" : "false");
            },
            [access, key](TrainConfig& c, const std::string& v) {
                if (v == "true" || v == "1" || v == "yes" || v == "on")
                    access(c) = true;
                else if (v == "false" || v == "0" || v == "no" || v == "off")
                    access(c) = false;
                else
                    throw Error("parse-error", key + ": expected a boolean, got '" + v + "'");
            }};
}

#define KM_NUM(name, expr) number_field(name, [](TrainConfig& c) -> auto& { return expr; })
#define KM_BOOL(name, expr) bool_field(name, [](TrainConfig& c) -> bool& { return expr; })

const std::vector<ConfigField>& config_fields() {
    static const std::vector<ConfigField> fields = [] {
        std::vector<ConfigField> f{
            KM_NUM("iterations", c.iterations),
            KM_NUM("recon_split", c.recon_split),
            KM_NUM("remesh_iter", c.remesh_iter),
            KM_BOOL("remesh", c.remesh),
            KM_NUM("backward_start", c.backward_start),
            KM_NUM("vertex_start", c.vertex_start),
            KM_NUM("bakeoff_iter", c.bakeoff_iter),
            KM_NUM("lr_rotation", c.lr_rotation),
            KM_NUM("lr_translation", c.lr_translation),
            KM_NUM("lr_pivot", c.lr_pivot),
            KM_NUM("lr_logits", c.lr_logits),
            KM_NUM("lr_color", c.lr_color),
            KM_NUM("lr_opacity", c.lr_opacity),
            KM_NUM("lr_position_start", c.lr_position_start),
            KM_NUM("lr_position_end", c.lr_position_end),
            KM_NUM("ema_decay", c.ema_decay),
            KM_NUM("views_per_step", c.views_per_step),
            KM_BOOL("geometric_seed", c.geometric_seed),
            KM_NUM("seed_sweep_deg", c.seed_sweep_deg),
            KM_NUM("seed_max_angle_deg", c.seed_max_angle_deg),
            KM_BOOL("init_from_depth", c.init_from_depth),
            KM_NUM("init_voxel_fraction", c.init_voxel_fraction),
            KM_NUM("seed", c.seed),
            KM_NUM("log_every", c.log_every),
            KM_NUM("weights.rgb", c.weights.rgb),
            KM_NUM("weights.ssim", c.weights.ssim),
            KM_NUM("weights.depth", c.weights.depth),
            KM_NUM("weights.part", c.weights.part),
            KM_NUM("weights.vtx_color", c.weights.vtx_color),
            KM_NUM("weights.vtx_opacity", c.weights.vtx_opacity),
            KM_NUM("weights.vmc", c.weights.vmc),
            KM_NUM("weights.pmc", c.weights.pmc),
            KM_NUM("weights.tau", c.weights.tau),
            KM_NUM("weights.tau_fraction", c.weights.tau_fraction),
            KM_BOOL("ablation.vertex_color", c.ablation.vertex_color),
            KM_BOOL("ablation.vertex_opacity", c.ablation.vertex_opacity),
            KM_BOOL("ablation.backward", c.ablation.backward),
            KM_BOOL("ablation.part_aware", c.ablation.part_aware),
            KM_NUM("raster.gamma", c.raster.gamma),
            KM_NUM("raster.background_r", c.raster.background.x()),
            KM_NUM("raster.background_g", c.raster.background.y()),
            KM_NUM("raster.background_b", c.raster.background.z()),
            KM_NUM("raster.max_faces_per_pixel", c.raster.max_faces_per_pixel),
            KM_NUM("raster.min_transmittance", c.raster.min_transmittance),
            KM_NUM("raster.depth_min_opacity", c.raster.depth_min_opacity),
            KM_NUM("raster.min_projected_area", c.raster.min_projected_area),
            KM_NUM("remesh.radius_multiplier", c.remesh_config.radius_multiplier),
            KM_NUM("remesh.max_faces_per_part", c.remesh_config.max_faces_per_part),
            KM_BOOL("remesh.enforce_manifold", c.remesh_config.enforce_manifold),
            KM_NUM("remesh.min_normal_cos", c.remesh_config.min_normal_cos),
            KM_NUM("remesh.min_vertices_for_delaunay", c.remesh_config.min_vertices_for_delaunay),
            KM_NUM("remesh.jitter", c.remesh_config.jitter),
            KM_NUM("remesh.seed", c.remesh_config.seed),
        };
        return f;
    }();
    return fields;
}

#undef KM_NUM
#undef KM_BOOL

}  // namespace

TrainConfig parse_train_config(const std::string& text, TrainConfig base) {
    std::map<std::string, const ConfigField*> by_key;
    for (const ConfigField& f : config_fields()) by_key[f.key] = &f;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body = trim(line.substr(0, line.find('#')));
        if (body.empty()) continue;
        const size_t eq = body.find('=');
        if (eq == std::string::npos)
            throw Error("parse-error", "config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        auto it = by_key.find(key);
        if (it == by_key.end())
            throw Error("unknown-config-key", "'" + key + "' on config line " + std::to_string(lineno));
        it->second->set(base, value);
    }
    base.validate();
    return base;
}

TrainConfig load_train_config(const fs::path& path, TrainConfig base) {
    return parse_train_config(read_text_file(path), std::move(base));
}

std::string format_train_config(const TrainConfig& cfg) {
    std::string out;
    for (const ConfigField& f : config_fields()) out += f.key + " = " + f.get(cfg) + "\n";
    return out;
}

std::vector<std::string> train_config_keys() {
    std::vector<std::string> keys;
    for (const ConfigField& f : config_fields()) keys.push_back(f.key);
    return keys;
}

}  // namespace kinemesh
