#include "kinemesh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "kinemesh/error.hpp"

namespace kinemesh {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

double angle_between(const Vec3& a, const Vec3& b) {
    return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0)) * kDeg;
}

// GT axis oriented along the direction of actual motion.
Vec3 oriented_gt_axis(const JointTruth& j) { return j.motion() < 0.0 ? Vec3(-j.axis) : j.axis; }

Vec3 pred_direction(const PartJoint& joint, JointType as) {
    if (as == JointType::Prismatic) return joint.translation;
    return joint.rotation.rotvec();
}

}  // namespace

AxisAngleError axis_angle_error(const Vec3& pred_axis, const Vec3& gt_axis) {
    if (!(pred_axis.norm() > 0.0) || !(gt_axis.norm() > 0.0))
        throw Error("zero-axis", "axis angle error needs two non-zero axes");
    AxisAngleError e;
    e.signed_deg = angle_between(pred_axis, gt_axis);
    e.folded_deg = std::min(e.signed_deg, 180.0 - e.signed_deg);
    return e;
}

double axis_pos_error(const AxisLine& pred, const AxisLine& gt, double units_to_meters, AxisPosMode mode) {
    double d = 0.0;
    if (mode == AxisPosMode::OriginToOrigin) {
        d = (pred.origin - gt.origin).norm();
    } else {
        if (!(pred.direction.norm() > 0.0)) throw Error("zero-axis", "predicted axis line has no direction");
        const Vec3 u = pred.direction.normalized();
        const Vec3 r = gt.origin - pred.origin;
        d = (r - r.dot(u) * u).norm();
    }
    return d * units_to_meters / 0.1;
}

AxisLine joint_axis_line(const PartJoint& joint) {
    AxisLine line;
    const Vec3 w = joint.rotation.rotvec();
    const double angle = w.norm();
    line.direction = angle > 0.0 ? Vec3(w / angle) : Vec3::UnitZ();
    line.origin = joint.pivot;
    if (angle > 1e-9 && joint.translation.squaredNorm() > 0.0) {
        // screw axis: the point whose motion is parallel to the axis
        const Vec3 t_perp = joint.translation - joint.translation.dot(line.direction) * line.direction;
        const Mat3 a = Mat3::Identity() - joint.rotation.matrix();
        line.origin += a.completeOrthogonalDecomposition().solve(t_perp);
    }
    return line;
}

PartMotionError part_motion_error(const JointParams& pred, const GroundTruth& gt, int part) {
    if (part <= 0 || part >= gt.num_parts || part >= pred.num_parts())
        throw Error("unknown-part", "no movable part " + std::to_string(part));
    auto it = std::find_if(gt.joints.begin(), gt.joints.end(), [&](const JointTruth& j) { return j.part == part; });
    if (it == gt.joints.end()) throw Error("unknown-part", "no ground-truth joint for part " + std::to_string(part));
    const JointTruth& g = *it;
    const PartJoint& p = pred.parts[static_cast<size_t>(part)];
    PartMotionError e;
    const PartJoint rel = g.relative();
    if (g.type == JointType::Revolute) {
        e.gt_magnitude = std::abs(g.motion());
        e.pred_magnitude = p.rotation.rotvec().norm() * kDeg;
    } else {
        e.gt_magnitude = rel.translation.norm() * gt.units_to_meters;
        e.pred_magnitude = p.translation.norm() * gt.units_to_meters;
    }
    e.type_mismatch = p.type != g.type;
    if (e.type_mismatch) {
        e.value = e.gt_magnitude;
    } else if (g.type == JointType::Revolute) {
        e.value = std::abs(e.pred_magnitude - e.gt_magnitude);
    } else {
        e.value = (p.translation - rel.translation).norm() * gt.units_to_meters;
    }
    return e;
}

std::vector<Vec3> sample_surface(const std::vector<Vec3>& positions, const std::vector<Triangle>& faces,
                                 int n_samples, unsigned seed) {
    if (faces.empty()) throw Error("empty-mesh", "cannot sample a mesh without faces");
    if (n_samples < 1) throw Error("invalid-config", "sample count must be at least 1");
    std::vector<double> cdf(faces.size());
    double total = 0.0;
    for (size_t f = 0; f < faces.size(); ++f) {
        const Triangle& t = faces[f];
        total += triangle_area(positions[static_cast<size_t>(t[0])], positions[static_cast<size_t>(t[1])],
                               positions[static_cast<size_t>(t[2])]);
        cdf[f] = total;
    }
    if (!(total > 0.0)) throw Error("empty-mesh", "mesh has zero surface area");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec3> out;
    out.reserve(static_cast<size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i) {
        const double r = u(rng) * total;
        const size_t f = std::min<size_t>(
            static_cast<size_t>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin()), faces.size() - 1);
        double s = u(rng), t = u(rng);
        if (s + t > 1.0) {
            s = 1.0 - s;
            t = 1.0 - t;
        }
        const Triangle& tri = faces[f];
        const Vec3& a = positions[static_cast<size_t>(tri[0])];
        out.push_back(a + s * (positions[static_cast<size_t>(tri[1])] - a) + t * (positions[static_cast<size_t>(tri[2])] - a));
    }
    return out;
}

namespace {

// Mean nearest-neighbour distance from each point of `query` to `ref`,
// using a sweep over `ref` sorted by x.
double directed_mean(const std::vector<Vec3>& query, const std::vector<Vec3>& ref) {
    std::vector<Vec3> sorted = ref;
    std::sort(sorted.begin(), sorted.end(), [](const Vec3& a, const Vec3& b) { return a.x() < b.x(); });
    std::vector<double> xs(sorted.size());
    for (size_t i = 0; i < sorted.size(); ++i) xs[i] = sorted[i].x();
    double sum = 0.0;
    for (const Vec3& q : query) {
        const auto start = static_cast<long>(std::lower_bound(xs.begin(), xs.end(), q.x()) - xs.begin());
        double best = std::numeric_limits<double>::infinity();
        for (long i = start; i < static_cast<long>(xs.size()); ++i) {
            const double dx = xs[static_cast<size_t>(i)] - q.x();
            if (dx * dx >= best) break;
            best = std::min(best, (sorted[static_cast<size_t>(i)] - q).squaredNorm());
        }
        for (long i = start - 1; i >= 0; --i) {
            const double dx = q.x() - xs[static_cast<size_t>(i)];
            if (dx * dx >= best) break;
            best = std::min(best, (sorted[static_cast<size_t>(i)] - q).squaredNorm());
        }
        sum += std::sqrt(best);
    }
    return sum / static_cast<double>(query.size());
}

}  // namespace

double point_set_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw Error("empty-mesh", "chamfer distance needs two non-empty point sets");
    return 0.5 * (directed_mean(a, b) + directed_mean(b, a));
}

double chamfer(const std::vector<Vec3>& pred_positions, const std::vector<Triangle>& pred_faces,
               const std::vector<Vec3>& gt_positions, const std::vector<Triangle>& gt_faces, int n_samples,
               unsigned seed, double units_to_meters) {
    if (pred_faces.empty()) throw Error("empty-mesh", "predicted mesh is empty");
    if (gt_faces.empty()) throw Error("empty-mesh", "ground-truth mesh is empty");
    const auto a = sample_surface(pred_positions, pred_faces, n_samples, seed);
    const auto b = sample_surface(gt_positions, gt_faces, n_samples, seed);
    return point_set_chamfer(a, b) * units_to_meters * 1000.0;
}

std::string part_bucket(int num_parts) {
    if (num_parts <= 2) return "2 Parts";
    if (num_parts == 3) return "3 Parts";
    if (num_parts <= 5) return "4-5 Parts";
    return "6+ Parts";
}

EvalReport evaluate_object(const PartAwareMesh& pred_mesh, const JointParams& pred_joints, const GroundTruth& gt,
                           const EvalOptions& opt) {
    if (pred_joints.num_parts() != gt.num_parts || pred_mesh.num_parts != gt.num_parts)
        throw Error("joint-count-mismatch", "prediction has " + std::to_string(pred_joints.num_parts()) +
                                                " parts, ground truth has " + std::to_string(gt.num_parts));
    if (!pred_mesh.hardened()) throw Error("not-hardened", "evaluation needs a hardened predicted mesh");
    if (opt.state != 0 && opt.state != 1) throw Error("invalid-config", "state must be 0 or 1");

    EvalReport r;
    r.num_parts = gt.num_parts;
    r.bucket = part_bucket(gt.num_parts);
    for (const JointTruth& g : gt.joints) {
        const PartJoint& p = pred_joints.parts[static_cast<size_t>(g.part)];
        JointReport j;
        j.part = g.part;
        j.gt_type = g.type;
        j.pred_type = p.type;
        j.type_correct = p.type == g.type;
        const JointType as = p.type == JointType::Prismatic ? JointType::Prismatic : JointType::Revolute;
        Vec3 dir = pred_direction(p, as);
        if (!(dir.norm() > 0.0)) dir = Vec3::UnitZ();
        const AxisAngleError ang = axis_angle_error(dir, oriented_gt_axis(g));
        j.axis_ang_deg = ang.signed_deg;
        j.axis_ang_folded_deg = ang.folded_deg;
        if (g.type == JointType::Revolute && as == JointType::Revolute)
            j.axis_pos = axis_pos_error(joint_axis_line(p), AxisLine{g.pivot, g.axis}, gt.units_to_meters,
                                        opt.axis_pos_mode);
        const PartMotionError m = part_motion_error(pred_joints, gt, g.part);
        j.part_motion = m.value;
        j.pred_motion = m.pred_magnitude;
        j.gt_motion = m.gt_magnitude;
        r.joints.push_back(j);
    }

    const PartAwareMesh& gt_mesh = gt.mesh[static_cast<size_t>(opt.state)];
    r.part_cd_mm.assign(static_cast<size_t>(gt.num_parts), std::numeric_limits<double>::quiet_NaN());
    for (int k = 0; k < gt.num_parts; ++k) {
        std::vector<Vec3> pp, gp;
        std::vector<Triangle> pf, gf;
        pred_mesh.extract_part(k, pp, pf);
        gt_mesh.extract_part(k, gp, gf);
        if (pf.empty() || gf.empty()) continue;
        r.part_cd_mm[static_cast<size_t>(k)] =
            chamfer(pp, pf, gp, gf, opt.chamfer_samples, opt.seed + static_cast<unsigned>(k), gt.units_to_meters);
    }
    r.cd_s = r.part_cd_mm[0];
    double sum = 0.0;
    for (int k = 1; k < gt.num_parts; ++k) sum += r.part_cd_mm[static_cast<size_t>(k)];
    r.cd_m = gt.num_parts > 1 ? sum / (gt.num_parts - 1) : 0.0;
    return r;
}

namespace {

const char* kCsvHeader =
    "# CD: symmetric mean L2 nearest-neighbour distance (mm); Axis Pos: GT origin to predicted axis line (0.1 m)\n"
    "object,bucket,part,gt_type,pred_type,type_correct,Axis Ang,Axis Ang (folded),Axis Pos,Part Motion,"
    "pred_motion,gt_motion,CD\n";

std::string fmt(double v) {
    if (!std::isfinite(v)) return "nan";
    std::ostringstream s;
    s << std::setprecision(10) << v;
    return s.str();
}

void append_rows(std::ostringstream& out, const EvalReport& r) {
    out << r.name << ',' << r.bucket << ",0,static,static,1,,,,,,," << fmt(r.part_cd_mm.empty() ? 0.0 : r.part_cd_mm[0])
        << '\n';
    for (const JointReport& j : r.joints) {
        out << r.name << ',' << r.bucket << ',' << j.part << ',' << to_string(j.gt_type) << ','
            << to_string(j.pred_type) << ',' << (j.type_correct ? 1 : 0) << ',' << fmt(j.axis_ang_deg) << ','
            << fmt(j.axis_ang_folded_deg) << ',' << (j.axis_pos ? fmt(*j.axis_pos) : "") << ','
            << fmt(j.part_motion) << ',' << fmt(j.pred_motion) << ',' << fmt(j.gt_motion) << ','
            << fmt(r.part_cd_mm[static_cast<size_t>(j.part)]) << '\n';
    }
}

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

struct Accum {
    int objects = 0, joints = 0, correct = 0;
    double ang = 0, ang_folded = 0;
    int n_pos = 0, n_rev = 0, n_pri = 0;
    double pos = 0, motion_rev = 0, motion_pri = 0;
    double cd_s = 0, cd_m = 0;

    void add(const EvalReport& r) {
        ++objects;
        cd_s += r.cd_s;
        cd_m += r.cd_m;
        for (const JointReport& j : r.joints) {
            ++joints;
            correct += j.type_correct;
            ang += j.axis_ang_deg;
            ang_folded += j.axis_ang_folded_deg;
            if (j.axis_pos) {
                ++n_pos;
                pos += *j.axis_pos;
            }
            if (j.gt_type == JointType::Revolute) {
                ++n_rev;
                motion_rev += j.part_motion;
            } else {
                ++n_pri;
                motion_pri += j.part_motion;
            }
        }
    }
    nlohmann::json json() const {
        auto mean = [](double s, int n) { return n > 0 ? nlohmann::json(s / n) : nlohmann::json(nullptr); };
        return {{"objects", objects},
                {"joints", joints},
                {"type_accuracy", mean(correct, joints)},
                {"Axis Ang", mean(ang, joints)},
                {"Axis Ang (folded)", mean(ang_folded, joints)},
                {"Axis Pos", mean(pos, n_pos)},
                {"Part Motion (revolute, deg)", mean(motion_rev, n_rev)},
                {"Part Motion (prismatic, m)", mean(motion_pri, n_pri)},
                {"CD-s", mean(cd_s, objects)},
                {"CD-m", mean(cd_m, objects)}};
    }
};

}  // namespace

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << kCsvHeader;
    append_rows(out, *this);
    return out.str();
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["object"] = name;
    j["num_parts"] = num_parts;
    j["bucket"] = bucket;
    j["CD-s"] = number(cd_s);
    j["CD-m"] = number(cd_m);
    j["cd_definition"] = "symmetric mean L2, mm";
    nlohmann::json joints_json = nlohmann::json::array();
    for (const JointReport& jr : joints) {
        nlohmann::json e{{"part", jr.part},
                         {"gt_type", to_string(jr.gt_type)},
                         {"pred_type", to_string(jr.pred_type)},
                         {"type_correct", jr.type_correct},
                         {"Axis Ang", jr.axis_ang_deg},
                         {"Axis Ang (folded)", jr.axis_ang_folded_deg},
                         {"Axis Pos", jr.axis_pos ? nlohmann::json(*jr.axis_pos) : nlohmann::json(nullptr)},
                         {"Part Motion", jr.part_motion},
                         {"CD", number(part_cd_mm[static_cast<size_t>(jr.part)])}};
        joints_json.push_back(e);
    }
    j["joints"] = joints_json;
    return j.dump(2);
}

std::string reports_to_csv(const std::vector<EvalReport>& reports) {
    std::ostringstream out;
    out << kCsvHeader;
    for (const EvalReport& r : reports) append_rows(out, r);
    return out.str();
}

std::string summarize_reports(const std::vector<EvalReport>& reports) {
    std::map<std::string, Accum> buckets;
    Accum all;
    for (const EvalReport& r : reports) {
        buckets[r.bucket].add(r);
        all.add(r);
    }
    nlohmann::json j;
    for (const auto& [name, acc] : buckets) j["buckets"][name] = acc.json();
    j["all"] = all.json();
    return j.dump(2);
}

}  // namespace kinemesh
