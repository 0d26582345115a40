#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "kinemesh/articulation.hpp"
#include "kinemesh/depth_init.hpp"
#include "kinemesh/error.hpp"
#include "kinemesh/io.hpp"
#include "kinemesh/losses.hpp"
#include "kinemesh/metrics.hpp"
#include "kinemesh/raster.hpp"
#include "kinemesh/remesh.hpp"
#include "kinemesh/synth.hpp"
#include "kinemesh/trainer.hpp"
#include "kinemesh/urdf.hpp"

namespace py = pybind11;
using namespace kinemesh;

namespace {

using Points = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Indices = py::array_t<int, py::array::c_style | py::array::forcecast>;
using Pixels = py::array_t<float, py::array::c_style | py::array::forcecast>;

py::array_t<double> to_numpy(const std::vector<Vec3>& pts) {
    py::array_t<double> a({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
    auto r = a.mutable_unchecked<2>();
    for (size_t i = 0; i < pts.size(); ++i)
        for (int c = 0; c < 3; ++c) r(static_cast<py::ssize_t>(i), c) = pts[i][c];
    return a;
}

std::vector<Vec3> from_numpy(const Points& a) {
    if (a.ndim() != 2 || a.shape(1) != 3) throw Error("shape-mismatch", "expected an (N, 3) array of points");
    auto r = a.unchecked<2>();
    std::vector<Vec3> pts(static_cast<size_t>(a.shape(0)));
    for (py::ssize_t i = 0; i < a.shape(0); ++i) pts[static_cast<size_t>(i)] = Vec3(r(i, 0), r(i, 1), r(i, 2));
    return pts;
}

py::array_t<int> faces_to_numpy(const std::vector<Triangle>& faces) {
    py::array_t<int> a({static_cast<py::ssize_t>(faces.size()), py::ssize_t{3}});
    auto r = a.mutable_unchecked<2>();
    for (size_t i = 0; i < faces.size(); ++i)
        for (int c = 0; c < 3; ++c) r(static_cast<py::ssize_t>(i), c) = faces[i][c];
    return a;
}

std::vector<Triangle> faces_from_numpy(const Indices& a) {
    if (a.ndim() != 2 || a.shape(1) != 3) throw Error("shape-mismatch", "expected an (M, 3) array of faces");
    auto r = a.unchecked<2>();
    std::vector<Triangle> faces(static_cast<size_t>(a.shape(0)));
    for (py::ssize_t i = 0; i < a.shape(0); ++i) faces[static_cast<size_t>(i)] = {{r(i, 0), r(i, 1), r(i, 2)}};
    return faces;
}

py::array_t<float> image_to_numpy(const Image& img) {
    py::array_t<float> a({static_cast<py::ssize_t>(img.height), static_cast<py::ssize_t>(img.width),
                          static_cast<py::ssize_t>(img.channels)});
    std::copy(img.data.begin(), img.data.end(), a.mutable_data());
    return a;
}

Image image_from_numpy(const Pixels& a) {
    if (a.ndim() != 3) throw Error("shape-mismatch", "expected an (H, W, C) image");
    Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), static_cast<int>(a.shape(2)));
    std::copy(a.data(), a.data() + a.size(), img.data.begin());
    return img;
}

py::array_t<int> labels_to_numpy(const LabelMap& m) {
    py::array_t<int> a({static_cast<py::ssize_t>(m.height), static_cast<py::ssize_t>(m.width)});
    std::copy(m.labels.begin(), m.labels.end(), a.mutable_data());
    return a;
}

Eigen::Vector4d quat_to_wxyz(const UnitQuaternion& q) { return {q.w(), q.x(), q.y(), q.z()}; }

UnitQuaternion quat_from_wxyz(const Eigen::Vector4d& v) {
    if (!(v.norm() > 0.0)) throw Error("invalid-joint", "rotation quaternion must be nonzero");
    return UnitQuaternion(Eigen::Quaterniond(v[0], v[1], v[2], v[3]).normalized());
}

Direction direction_from_string(const std::string& s) {
    if (s == "forward") return Direction::Forward;
    if (s == "backward") return Direction::Backward;
    throw Error("invalid-config", "direction must be 'forward' or 'backward', got '" + s + "'");
}

py::dict joint_report_dict(const JointReport& j) {
    py::dict d;
    d["part"] = j.part;
    d["gt_type"] = to_string(j.gt_type);
    d["pred_type"] = to_string(j.pred_type);
    d["type_correct"] = j.type_correct;
    d["axis_ang"] = j.axis_ang_deg;
    d["axis_ang_folded"] = j.axis_ang_folded_deg;
    d["axis_pos"] = j.axis_pos ? py::object(py::float_(*j.axis_pos)) : py::object(py::none());
    d["part_motion"] = j.part_motion;
    d["pred_motion"] = j.pred_motion;
    d["gt_motion"] = j.gt_motion;
    return d;
}

py::dict urdf_dict(const UrdfModel& m) {
    py::list links, joints;
    for (const UrdfLink& l : m.links) {
        py::dict d;
        d["name"] = l.name;
        d["mesh"] = l.mesh;
        d["mesh_origin"] = l.mesh_origin;
        links.append(d);
    }
    for (const UrdfJoint& j : m.joints) {
        py::dict d;
        d["name"] = j.name;
        d["type"] = j.type;
        d["parent"] = j.parent;
        d["child"] = j.child;
        d["origin"] = j.origin;
        d["axis"] = j.axis;
        d["lower"] = j.lower;
        d["upper"] = j.upper;
        joints.append(d);
    }
    py::dict out;
    out["name"] = m.name;
    out["links"] = links;
    out["joints"] = joints;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Part-aware mesh reconstruction and articulation recovery";
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

    py::class_<PartAwareMesh>(m, "PartAwareMesh")
        .def_readonly("num_parts", &PartAwareMesh::num_parts)
        .def_readonly("sh_degree", &PartAwareMesh::sh_degree)
        .def_property("positions", [](const PartAwareMesh& x) { return to_numpy(x.positions); },
                      [](PartAwareMesh& x, const Points& p) {
                          std::vector<Vec3> pts = from_numpy(p);
                          if (pts.size() != x.vertex_count())
                              throw Error("shape-mismatch", "vertex count is fixed; got " + std::to_string(pts.size()));
                          x.positions = std::move(pts);
                      })
        .def_property_readonly("faces", [](const PartAwareMesh& x) { return faces_to_numpy(x.faces); })
        .def_property_readonly("labels", [](const PartAwareMesh& x) { return x.labels; })
        .def_property_readonly("opacity", [](const PartAwareMesh& x) { return x.opacity; })
        .def_property_readonly("vertex_count", &PartAwareMesh::vertex_count)
        .def_property_readonly("hardened", &PartAwareMesh::hardened)
        .def_property_readonly("bbox_diagonal", [](const PartAwareMesh& x) { return x.bounds().diagonal(); })
        .def("part_faces", [](const PartAwareMesh& x, int k) {
            if (k < 0 || k >= x.num_parts) throw Error("invalid-part", "part " + std::to_string(k) + " out of range");
            return x.part_faces[static_cast<size_t>(k)];
        })
        .def("harden", [](const PartAwareMesh& x) { return harden_parts(x); })
        .def("remesh", [](const PartAwareMesh& x) { return remesh_all(x, RemeshConfig{}); })
        .def("save", [](const PartAwareMesh& x, const fs::path& p) { save_mesh(x, p); }, py::arg("path"))
        .def_static("load", &load_mesh, py::arg("path"))
        .def("__repr__", [](const PartAwareMesh& x) {
            return "<PartAwareMesh vertices=" + std::to_string(x.vertex_count()) +
                   " faces=" + std::to_string(x.faces.size()) + " parts=" + std::to_string(x.num_parts) + ">";
        });

    py::class_<PartJoint>(m, "PartJoint")
        .def(py::init<>())
        .def_property("rotation", [](const PartJoint& j) { return quat_to_wxyz(j.rotation); },
                      [](PartJoint& j, const Eigen::Vector4d& q) { j.rotation = quat_from_wxyz(q); },
                      "unit quaternion [w, x, y, z]")
        .def_readwrite("pivot", &PartJoint::pivot)
        .def_readwrite("translation", &PartJoint::translation)
        .def_property("type", [](const PartJoint& j) { return to_string(j.type); },
                      [](PartJoint& j, const std::string& s) { j.type = joint_type_from_string(s); })
        .def_property_readonly("axis", [](const PartJoint& j) { return joint_axis(j).axis; })
        .def_property_readonly("angle_deg", [](const PartJoint& j) { return joint_axis(j).angle_deg; })
        .def_property_readonly("displacement", [](const PartJoint& j) { return joint_axis(j).displacement; })
        .def("matrix", [](const PartJoint& j) {
            JointParams p = JointParams::identity(2);
            p.parts[1] = j;
            return to_affine(p, 1).homogeneous();
        });

    py::class_<JointParams>(m, "JointParams")
        .def(py::init([](int n) { return JointParams::identity(n); }), py::arg("num_parts"))
        .def_readwrite("parts", &JointParams::parts)
        .def_property_readonly("num_parts", &JointParams::num_parts)
        .def("apply_type_constraints", &JointParams::apply_type_constraints)
        .def("to_json", &joints_to_json)
        .def_static("from_json", &joints_from_json, py::arg("text"))
        .def("save", [](const JointParams& j, const fs::path& p) { save_joints(j, p); }, py::arg("path"))
        .def_static("load", &load_joints, py::arg("path"));

    py::class_<GroundTruth>(m, "GroundTruth")
        .def_readonly("num_parts", &GroundTruth::num_parts)
        .def_readonly("units_to_meters", &GroundTruth::units_to_meters)
        .def_property_readonly("meshes", [](const GroundTruth& g) { return py::make_tuple(g.mesh[0], g.mesh[1]); })
        .def("joint_params", [](const GroundTruth& g) {
            JointParams p = g.joint_params();
            for (const JointTruth& j : g.joints) p.parts[static_cast<size_t>(j.part)].type = j.type;
            return p;
        });

    py::class_<CameraView>(m, "CameraView")
        .def_readonly("state", &CameraView::state)
        .def_property_readonly("rgb", [](const CameraView& v) { return image_to_numpy(v.rgb); })
        .def_property_readonly("depth", [](const CameraView& v) { return image_to_numpy(v.depth); })
        .def_property_readonly("labels", [](const CameraView& v) { return labels_to_numpy(v.labels); })
        .def_property_readonly("size", [](const CameraView& v) { return py::make_tuple(v.rgb.width, v.rgb.height); });

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("name", &Dataset::name)
        .def_readonly("num_parts", &Dataset::num_parts)
        .def_readonly("units_to_meters", &Dataset::units_to_meters)
        .def("train", [](const Dataset& d, int s) { return d.train.at(static_cast<size_t>(s)); }, py::arg("state"))
        .def("test", [](const Dataset& d, int s) { return d.test.at(static_cast<size_t>(s)); }, py::arg("state"))
        .def_property_readonly("gt", [](const Dataset& d) { return d.gt; })
        .def_property_readonly("init", [](const Dataset& d) -> py::object {
            if (!d.init) return py::none();
            return py::make_tuple((*d.init)[0], (*d.init)[1]);
        })
        .def("save", [](const Dataset& d, const fs::path& dir) { save_dataset(d, dir); }, py::arg("dir"));

    m.def(
        "generate_dataset",
        [](const std::string& tmpl, unsigned seed, int image_size, int train_views, int test_views, double init_noise,
           int num_parts) {
            SceneSpec spec;
            spec.tmpl = scene_template_from_string(tmpl);
            spec.num_parts = num_parts;
            spec.seed = seed;
            spec.image_size = image_size;
            spec.train_views = train_views;
            spec.test_views = test_views;
            const Scene scene = generate_scene(spec);
            return dataset_from_scene(scene, to_string(spec.tmpl) + "-" + std::to_string(seed),
                                      initial_meshes(scene.gt, init_noise, seed));
        },
        py::arg("template") = "hinged-box", py::arg("seed") = 0u, py::arg("image_size") = 64,
        py::arg("train_views") = 16, py::arg("test_views") = 4, py::arg("init_noise") = 0.01, py::arg("num_parts") = 0);
    m.def("load_dataset", &load_dataset, py::arg("path"));

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_static("parse", [](const std::string& text) { return parse_train_config(text); }, py::arg("text"))
        .def_static("load", [](const fs::path& p) { return load_train_config(p); }, py::arg("path"))
        .def_static("keys", &train_config_keys)
        .def("to_text", &format_train_config)
        .def("resolved", &TrainConfig::resolved)
        .def("validate", &TrainConfig::validate)
        .def_readwrite("iterations", &TrainConfig::iterations)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("views_per_step", &TrainConfig::views_per_step)
        .def_readwrite("remesh", &TrainConfig::remesh)
        .def_readwrite("init_from_depth", &TrainConfig::init_from_depth)
        .def_property("backward", [](const TrainConfig& c) { return c.ablation.backward; },
                      [](TrainConfig& c, bool b) { c.ablation.backward = b; });

    py::class_<FitResult>(m, "FitResult")
        .def_property_readonly("meshes", [](const FitResult& r) {
            return py::make_tuple(r.reconstruction.meshes[0], r.reconstruction.meshes[1]);
        })
        .def_property_readonly("joints", [](const FitResult& r) { return r.articulation.joints; })
        .def_property_readonly("initial_loss", [](const FitResult& r) { return r.reconstruction.initial_loss; })
        .def_property_readonly("final_loss", [](const FitResult& r) { return r.reconstruction.final_loss; })
        .def_property_readonly("hash_violations", [](const FitResult& r) { return r.articulation.hash_violations; })
        .def_property_readonly("warnings", [](const FitResult& r) {
            std::vector<std::string> w = r.reconstruction.warnings;
            w.insert(w.end(), r.articulation.warnings.begin(), r.articulation.warnings.end());
            return w;
        })
        .def_property_readonly("bakeoff", [](const FitResult& r) {
            py::list out;
            for (const BakeOffEntry& e : r.articulation.bakeoff.entries) {
                py::dict d;
                d["part"] = e.part;
                d["loss_revolute"] = e.loss_revolute;
                d["loss_prismatic"] = e.loss_prismatic;
                d["decision"] = to_string(e.decision);
                out.append(d);
            }
            return out;
        })
        .def_property_readonly("train_log", [](const FitResult& r) {
            std::vector<TrainLogRow> log = r.reconstruction.log;
            log.insert(log.end(), r.articulation.log.begin(), r.articulation.log.end());
            return train_log_csv(log);
        });

    m.def(
        "fit",
        [](const Dataset& d, const TrainConfig& cfg) {
            py::gil_scoped_release release;
            return fit(starting_meshes(d, cfg), d.train, cfg);
        },
        py::arg("dataset"), py::arg("config") = TrainConfig{});
    m.def(
        "mesh_from_depth",
        [](const Dataset& d, int state, double voxel_fraction) {
            if (state != 0 && state != 1) throw Error("invalid-config", "state must be 0 or 1");
            DepthInitConfig cfg;
            cfg.voxel_fraction = voxel_fraction;
            py::gil_scoped_release release;
            return mesh_from_depth(d.train[static_cast<size_t>(state)], d.num_parts, cfg);
        },
        py::arg("dataset"), py::arg("state"), py::arg("voxel_fraction") = 0.03);

    py::class_<EvalReport>(m, "EvalReport")
        .def_readonly("name", &EvalReport::name)
        .def_readonly("cd_s", &EvalReport::cd_s)
        .def_readonly("cd_m", &EvalReport::cd_m)
        .def_readonly("part_cd_mm", &EvalReport::part_cd_mm)
        .def_property_readonly("joints", [](const EvalReport& r) {
            py::list out;
            for (const JointReport& j : r.joints) out.append(joint_report_dict(j));
            return out;
        })
        .def("to_csv", &EvalReport::to_csv)
        .def("to_json", &EvalReport::to_json);

    m.def(
        "evaluate",
        [](const PartAwareMesh& mesh, const JointParams& joints, const GroundTruth& gt, int samples, unsigned seed,
           const std::string& axis_pos, const std::string& name) {
            EvalOptions opt;
            opt.chamfer_samples = samples;
            opt.seed = seed;
            if (axis_pos == "origin-to-origin")
                opt.axis_pos_mode = AxisPosMode::OriginToOrigin;
            else if (axis_pos != "point-to-line")
                throw Error("invalid-config", "axis_pos must be 'point-to-line' or 'origin-to-origin'");
            EvalReport r = evaluate_object(mesh, joints, gt, opt);
            r.name = name;
            return r;
        },
        py::arg("mesh"), py::arg("joints"), py::arg("gt"), py::arg("samples") = 2000, py::arg("seed") = 0u,
        py::arg("axis_pos") = "point-to-line", py::arg("name") = "object");

    m.def(
        "export_urdf",
        [](const PartAwareMesh& mesh, const JointParams& joints, const fs::path& out_dir, const std::string& name,
           double units_to_meters) {
            UrdfOptions opt;
            opt.name = name;
            opt.units_to_meters = units_to_meters;
            export_urdf(mesh, joints, out_dir, opt);
            return out_dir / (name + ".urdf");
        },
        py::arg("mesh"), py::arg("joints"), py::arg("out_dir"), py::arg("name") = "object",
        py::arg("units_to_meters") = 1.0);
    m.def("parse_urdf", [](const std::string& xml) { return urdf_dict(parse_urdf(xml)); }, py::arg("xml"));

    m.def("render", [](const PartAwareMesh& mesh, const CameraView& view) {
        const RenderBuffers b = render(mesh, view.camera, RasterConfig{}, false);
        py::dict d;
        d["rgb"] = image_to_numpy(b.rgb);
        d["depth"] = image_to_numpy(b.depth);
        d["opacity"] = image_to_numpy(b.opacity);
        return d;
    }, py::arg("mesh"), py::arg("view"));
    m.def("ssim", [](const Pixels& a, const Pixels& b) { return ssim(image_from_numpy(a), image_from_numpy(b)); },
          py::arg("a"), py::arg("b"));
    m.def("psnr", [](const Pixels& a, const Pixels& b) { return psnr(image_from_numpy(a), image_from_numpy(b)); },
          py::arg("a"), py::arg("b"));

    m.def("closest_point_on_triangle", [](const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
        const ClosestPoint cp = closest_point_on_triangle(p, a, b, c);
        return py::make_tuple(cp.point, cp.distance);
    }, py::arg("p"), py::arg("a"), py::arg("b"), py::arg("c"));
    m.def("analytic_inverse", [](const Mat4& h) {
        if ((h.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 0.0)
            throw Error("invalid-joint", "expected an affine 4x4 matrix with last row [0, 0, 0, 1]");
        AffineMotion a;
        a.linear = h.topLeftCorner<3, 3>();
        a.offset = h.topRightCorner<3, 1>();
        return analytic_inverse(a).homogeneous();
    }, py::arg("matrix"));
    m.def("transport_vertices", [](const PartAwareMesh& mesh, const JointParams& joints, const std::string& dir) {
        return to_numpy(transport_vertices(mesh, joints, direction_from_string(dir)));
    }, py::arg("mesh"), py::arg("joints"), py::arg("direction") = "forward");
    m.def("articulate", [](const PartAwareMesh& mesh, const JointParams& joints, const std::string& dir) {
        return articulate_mesh(mesh, joints, direction_from_string(dir));
    }, py::arg("mesh"), py::arg("joints"), py::arg("direction") = "forward");
    m.def("sample_surface", [](const Points& pos, const Indices& faces, int n, unsigned seed) {
        return to_numpy(sample_surface(from_numpy(pos), faces_from_numpy(faces), n, seed));
    }, py::arg("positions"), py::arg("faces"), py::arg("n_samples"), py::arg("seed") = 0u);
    m.def("point_set_chamfer", [](const Points& a, const Points& b) {
        return point_set_chamfer(from_numpy(a), from_numpy(b));
    }, py::arg("a"), py::arg("b"));
    m.def("chamfer_mm", [](const Points& pa, const Indices& fa, const Points& pb, const Indices& fb, int n,
                           unsigned seed, double u2m) {
        return chamfer(from_numpy(pa), faces_from_numpy(fa), from_numpy(pb), faces_from_numpy(fb), n, seed, u2m);
    }, py::arg("pred_positions"), py::arg("pred_faces"), py::arg("gt_positions"), py::arg("gt_faces"),
       py::arg("n_samples") = 2000, py::arg("seed") = 0u, py::arg("units_to_meters") = 1.0);
    m.def("axis_angle_error", [](const Vec3& a, const Vec3& b) { return axis_angle_error(a, b).signed_deg; },
          py::arg("pred_axis"), py::arg("gt_axis"));
}
