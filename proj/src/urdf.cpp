#include "kinemesh/urdf.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "kinemesh/error.hpp"
#include "kinemesh/io.hpp"

namespace kinemesh {

namespace pt = boost::property_tree;

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string vec(const Vec3& v) { return num(v.x()) + " " + num(v.y()) + " " + num(v.z()); }

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

[[noreturn]] void invalid(const std::string& detail) { throw Error("invalid-urdf", detail); }

bool moving(const std::string& type) { return type == "revolute" || type == "prismatic"; }

}  // namespace

void UrdfModel::validate() const {
    std::set<std::string> names;
    for (const UrdfLink& l : links) {
        if (l.name.empty()) invalid("link without a name");
        if (!names.insert(l.name).second) invalid("duplicate link '" + l.name + "'");
    }
    std::map<std::string, int> parents;
    std::set<std::string> joint_names;
    for (const UrdfJoint& j : joints) {
        if (!joint_names.insert(j.name).second) invalid("duplicate joint '" + j.name + "'");
        if (j.type != "revolute" && j.type != "prismatic" && j.type != "fixed" && j.type != "continuous")
            invalid("joint '" + j.name + "' has unsupported type '" + j.type + "'");
        if (!names.count(j.parent)) invalid("joint '" + j.name + "' parent '" + j.parent + "' is not a link");
        if (!names.count(j.child)) invalid("joint '" + j.name + "' child '" + j.child + "' is not a link");
        ++parents[j.child];
        if (j.type != "fixed" && std::abs(j.axis.norm() - 1.0) > 1e-9) invalid("joint '" + j.name + "' axis is not unit");
        if (moving(j.type) && !(j.lower <= j.upper)) invalid("joint '" + j.name + "' has lower > upper");
    }
    int roots = 0;
    for (const UrdfLink& l : links) {
        const int p = parents.count(l.name) ? parents[l.name] : 0;
        if (p > 1) invalid("link '" + l.name + "' is the child of " + std::to_string(p) + " joints");
        if (p == 0) ++roots;
    }
    if (!links.empty() && roots != 1) invalid("expected one root link, found " + std::to_string(roots));
}

UrdfModel build_urdf(const PartAwareMesh& mesh, const JointParams& joints, const UrdfOptions& options) {
    if (!mesh.hardened()) throw Error("not-hardened", "URDF export needs a hardened mesh");
    if (joints.num_parts() != mesh.num_parts)
        throw Error("joint-count-mismatch", "mesh has " + std::to_string(mesh.num_parts) + " parts, joints describe " +
                                                std::to_string(joints.num_parts()));
    if (!(options.units_to_meters > 0.0)) throw Error("invalid-config", "units_to_meters must be positive");
    if (!(options.limit_padding >= 0.0)) throw Error("invalid-config", "limit padding must be non-negative");
    for (int k = 1; k < mesh.num_parts; ++k) {
        const JointType t = joints.parts[static_cast<size_t>(k)].type;
        if (t != JointType::Revolute && t != JointType::Prismatic && t != JointType::Static)
            throw Error("untyped-joint", "part " + std::to_string(k) + " has joint type " + to_string(t));
    }
    const double s = options.units_to_meters;
    const double pad = options.limit_padding;
    UrdfModel model;
    model.name = options.name;
    for (int k = 0; k < mesh.num_parts; ++k) {
        const size_t uk = static_cast<size_t>(k);
        if (uk >= mesh.part_faces.size() || mesh.part_faces[uk].empty())
            throw Error("empty-part", "part " + std::to_string(k) + " has no faces");
        UrdfLink link;
        link.name = "part_" + std::to_string(k);
        link.mesh = options.mesh_dir + "/part_" + std::to_string(k) + ".obj";
        if (k == 0) {
            model.links.push_back(link);
            continue;
        }
        const PartJoint& pj = joints.parts[uk];
        UrdfJoint j;
        j.name = "joint_" + std::to_string(k);
        j.parent = "part_0";
        j.child = link.name;
        if (pj.type == JointType::Revolute) {
            const JointAxis ax = joint_axis(pj);
            const double angle = ax.angle_deg * std::numbers::pi / 180.0;
            j.type = "revolute";
            j.origin = pj.pivot * s;
            j.axis = ax.axis;
            j.lower = -pad * angle;
            j.upper = (1.0 + pad) * angle;
        } else {
            std::vector<Vec3> pts;
            std::vector<Triangle> tris;
            mesh.extract_part(k, pts, tris);
            Vec3 centroid = Vec3::Zero();
            for (const Vec3& p : pts) centroid += p;
            centroid /= static_cast<double>(pts.size());
            j.origin = centroid * s;
            if (pj.type == JointType::Prismatic) {
                const JointAxis ax = joint_axis(pj);
                const double d = ax.displacement * s;
                j.type = "prismatic";
                j.axis = ax.axis;
                j.lower = -pad * d;
                j.upper = (1.0 + pad) * d;
            } else {
                j.type = "fixed";
            }
        }
        link.mesh_origin = -j.origin;
        model.links.push_back(link);
        model.joints.push_back(j);
    }
    model.validate();
    return model;
}

UrdfModel export_urdf(const PartAwareMesh& mesh, const JointParams& joints, const std::filesystem::path& out_dir,
                      const UrdfOptions& options) {
    UrdfModel model = build_urdf(mesh, joints, options);
    for (int k = 0; k < mesh.num_parts; ++k) {
        std::vector<Vec3> pts;
        std::vector<Triangle> tris;
        mesh.extract_part(k, pts, tris);
        for (Vec3& p : pts) p *= options.units_to_meters;
        save_obj(out_dir / model.links[static_cast<size_t>(k)].mesh, pts, tris);
    }
    write_text_file(out_dir / (options.name + ".urdf"), urdf_to_xml(model));
    return model;
}

std::string urdf_to_xml(const UrdfModel& model) {
    std::ostringstream x;
    x << "<?xml version=\"1.0\"?>\n";
    x << "<robot name=\"" << xml_escape(model.name) << "\">\n";
    for (const UrdfLink& l : model.links) {
        x << "  <link name=\"" << xml_escape(l.name) << "\">\n";
        for (const char* tag : {"visual", "collision"}) {
            x << "    <" << tag << ">\n";
            x << "      <origin xyz=\"" << vec(l.mesh_origin) << "\" rpy=\"0 0 0\"/>\n";
            x << "      <geometry>\n";
            x << "        <mesh filename=\"" << xml_escape(l.mesh) << "\"/>\n";
            x << "      </geometry>\n";
            x << "    </" << tag << ">\n";
        }
        x << "  </link>\n";
    }
    for (const UrdfJoint& j : model.joints) {
        x << "  <joint name=\"" << xml_escape(j.name) << "\" type=\"" << j.type << "\">\n";
        x << "    <parent link=\"" << xml_escape(j.parent) << "\"/>\n";
        x << "    <child link=\"" << xml_escape(j.child) << "\"/>\n";
        x << "    <origin xyz=\"" << vec(j.origin) << "\" rpy=\"0 0 0\"/>\n";
        if (j.type != "fixed") x << "    <axis xyz=\"" << vec(j.axis) << "\"/>\n";
        if (moving(j.type))
            x << "    <limit lower=\"" << num(j.lower) << "\" upper=\"" << num(j.upper) << "\" effort=\""
              << num(j.effort) << "\" velocity=\"" << num(j.velocity) << "\"/>\n";
        x << "  </joint>\n";
    }
    x << "</robot>\n";
    return x.str();
}

namespace {

using Allowed = std::map<std::string, std::set<std::string>>;

// Element name -> allowed attributes, and element name -> allowed children.
const Allowed& schema_attributes() {
    static const Allowed a{
        {"robot", {"name", "version"}},
        {"link", {"name", "type"}},
        {"joint", {"name", "type"}},
        {"material", {"name"}},
        {"color", {"rgba"}},
        {"texture", {"filename"}},
        {"inertial", {}},
        {"mass", {"value"}},
        {"inertia", {"ixx", "ixy", "ixz", "iyy", "iyz", "izz"}},
        {"visual", {"name"}},
        {"collision", {"name"}},
        {"geometry", {}},
        {"box", {"size"}},
        {"cylinder", {"radius", "length"}},
        {"sphere", {"radius"}},
        {"mesh", {"filename", "scale"}},
        {"origin", {"xyz", "rpy"}},
        {"parent", {"link"}},
        {"child", {"link"}},
        {"axis", {"xyz"}},
        {"calibration", {"rising", "falling", "reference_position"}},
        {"dynamics", {"damping", "friction"}},
        {"limit", {"lower", "upper", "effort", "velocity"}},
        {"mimic", {"joint", "multiplier", "offset"}},
        {"safety_controller", {"soft_lower_limit", "soft_upper_limit", "k_position", "k_velocity"}},
    };
    return a;
}

const Allowed& schema_children() {
    static const Allowed c{
        {"robot", {"link", "joint", "material"}},
        {"link", {"inertial", "visual", "collision"}},
        {"inertial", {"origin", "mass", "inertia"}},
        {"visual", {"origin", "geometry", "material"}},
        {"collision", {"origin", "geometry"}},
        {"geometry", {"box", "cylinder", "sphere", "mesh"}},
        {"material", {"color", "texture"}},
        {"joint", {"origin", "parent", "child", "axis", "calibration", "dynamics", "limit", "mimic", "safety_controller"}},
    };
    return c;
}

const std::map<std::string, std::set<std::string>>& required_attributes() {
    static const std::map<std::string, std::set<std::string>> r{
        {"robot", {"name"}},  {"link", {"name"}},      {"joint", {"name", "type"}}, {"mesh", {"filename"}},
        {"parent", {"link"}}, {"child", {"link"}},     {"mass", {"value"}},         {"box", {"size"}},
        {"sphere", {"radius"}}, {"cylinder", {"radius", "length"}}, {"limit", {"effort", "velocity"}},
    };
    return r;
}

void check_element(const std::string& tag, const pt::ptree& node, const std::string& path) {
    const auto& attrs = schema_attributes();
    auto a = attrs.find(tag);
    if (a == attrs.end()) invalid("unknown element <" + tag + "> at " + path);
    std::set<std::string> present;
    if (auto xa = node.get_child_optional("<xmlattr>"))
        for (const auto& [name, _] : *xa) {
            if (!a->second.count(name)) invalid("unknown attribute '" + name + "' on <" + tag + "> at " + path);
            present.insert(name);
        }
    auto req = required_attributes().find(tag);
    if (req != required_attributes().end())
        for (const std::string& r : req->second)
            if (!present.count(r)) invalid("<" + tag + "> at " + path + " lacks required attribute '" + r + "'");
    const auto& kids = schema_children();
    auto allowed = kids.find(tag);
    int geometry_shapes = 0;
    for (const auto& [child, sub] : node) {
        if (child == "<xmlattr>" || child == "<xmlcomment>") continue;
        if (allowed == kids.end() || !allowed->second.count(child))
            invalid("element <" + child + "> not allowed inside <" + tag + "> at " + path);
        if (tag == "geometry") ++geometry_shapes;
        check_element(child, sub, path + "/" + child);
    }
    if (tag == "geometry" && geometry_shapes != 1) invalid("<geometry> at " + path + " needs exactly one shape");
}

Vec3 parse_vec(const std::string& s, const std::string& what) {
    std::istringstream in(s);
    Vec3 v;
    if (!(in >> v.x() >> v.y() >> v.z())) invalid(what + " must hold three numbers, got '" + s + "'");
    std::string rest;
    if (in >> rest) invalid(what + " must hold three numbers, got '" + s + "'");
    return v;
}

double parse_num(const std::string& s, const std::string& what) {
    try {
        size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) invalid(what + " is not a number: '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        invalid(what + " is not a number: '" + s + "'");
    }
}

}  // namespace

UrdfModel parse_urdf(const std::string& xml) {
    pt::ptree tree;
    try {
        std::istringstream in(xml);
        pt::read_xml(in, tree, pt::xml_parser::no_comments);
    } catch (const pt::xml_parser_error& e) {
        invalid(std::string("malformed XML: ") + e.what());
    }
    int roots = 0;
    for (const auto& [tag, _] : tree)
        if (tag != "<xmlcomment>") ++roots;
    if (roots != 1 || !tree.get_child_optional("robot")) invalid("document root must be a single <robot>");
    const pt::ptree& robot = tree.get_child("robot");
    check_element("robot", robot, "robot");

    UrdfModel model;
    model.name = robot.get<std::string>("<xmlattr>.name");
    for (const auto& [tag, node] : robot) {
        if (tag == "link") {
            UrdfLink l;
            l.name = node.get<std::string>("<xmlattr>.name");
            if (auto v = node.get_child_optional("visual")) {
                l.mesh = v->get<std::string>("geometry.mesh.<xmlattr>.filename", "");
                l.mesh_origin = parse_vec(v->get<std::string>("origin.<xmlattr>.xyz", "0 0 0"), "visual origin");
            }
            model.links.push_back(l);
        } else if (tag == "joint") {
            UrdfJoint j;
            j.name = node.get<std::string>("<xmlattr>.name");
            j.type = node.get<std::string>("<xmlattr>.type");
            const auto parent = node.get_optional<std::string>("parent.<xmlattr>.link");
            const auto child = node.get_optional<std::string>("child.<xmlattr>.link");
            if (!parent || !child) invalid("joint '" + j.name + "' needs <parent> and <child>");
            j.parent = *parent;
            j.child = *child;
            j.origin = parse_vec(node.get<std::string>("origin.<xmlattr>.xyz", "0 0 0"), "joint origin");
            j.axis = parse_vec(node.get<std::string>("axis.<xmlattr>.xyz", "1 0 0"), "joint axis");
            if (moving(j.type)) {
                const auto limit = node.get_child_optional("limit");
                if (!limit) invalid("joint '" + j.name + "' of type " + j.type + " needs <limit>");
                j.lower = parse_num(limit->get<std::string>("<xmlattr>.lower", "0"), "limit lower");
                j.upper = parse_num(limit->get<std::string>("<xmlattr>.upper", "0"), "limit upper");
                j.effort = parse_num(limit->get<std::string>("<xmlattr>.effort"), "limit effort");
                j.velocity = parse_num(limit->get<std::string>("<xmlattr>.velocity"), "limit velocity");
            }
            model.joints.push_back(j);
        }
    }
    model.validate();
    return model;
}

}  // namespace kinemesh
