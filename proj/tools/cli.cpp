#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>

#include <CLI11.hpp>
#include <json.hpp>

#include "kinemesh/depth_init.hpp"
#include "kinemesh/error.hpp"
#include "kinemesh/io.hpp"
#include "kinemesh/metrics.hpp"
#include "kinemesh/synth.hpp"
#include "kinemesh/trainer.hpp"
#include "kinemesh/urdf.hpp"

namespace kinemesh {

namespace {

using nlohmann::json;

struct GenerateArgs {
    std::string tmpl = "hinged-box";
    int parts = 0;
    unsigned seed = 0;
    std::string out;
    int image_size = 64;
    int train_views = 16;
    int test_views = 4;
    double init_noise = 0.01;
};

struct FitArgs {
    std::string data;
    std::string config;
    std::string out;
    std::optional<unsigned> seed;
    std::optional<int> iterations;
};

struct EvalArgs {
    std::string pred;
    std::string gt;
    std::string out;
    unsigned seed = 0;
    int samples = 2000;
    std::string axis_pos = "point-to-line";
};

struct ExportArgs {
    std::string pred;
    std::string out;
    std::string name;
    std::optional<double> units_to_meters;
};

fs::path fit_dir(const std::string& pred) {
    const fs::path p(pred);
    return fs::is_directory(p) ? p : p.parent_path();
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw Error("bad-manifest", path.string() + ": " + e.what());
    }
}

int run_generate(const GenerateArgs& a, std::ostream& out) {
    SceneSpec spec;
    spec.tmpl = scene_template_from_string(a.tmpl);
    spec.num_parts = a.parts;
    spec.seed = a.seed;
    spec.image_size = a.image_size;
    spec.train_views = a.train_views;
    spec.test_views = a.test_views;
    const Scene scene = generate_scene(spec);
    const auto init = initial_meshes(scene.gt, a.init_noise, a.seed);
    const std::string name = to_string(spec.tmpl) + "-" + std::to_string(a.seed);
    save_dataset(dataset_from_scene(scene, name, init), a.out);
    out << "wrote " << name << " (" << scene.gt.num_parts << " parts, " << scene.train[0].size()
        << " train views per state) to " << a.out << "\n";
    return 0;
}

int run_fit(const FitArgs& a, std::ostream& out) {
    const Dataset data = load_dataset(a.data);
    TrainConfig cfg = a.config.empty() ? TrainConfig{} : load_train_config(a.config);
    if (a.seed) cfg.seed = *a.seed;
    if (a.iterations) cfg.iterations = *a.iterations;
    cfg.validate();

    const auto t0 = std::chrono::steady_clock::now();
    const FitResult r = fit(starting_meshes(data, cfg), data.train, cfg);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path dir(a.out);
    fs::create_directories(dir);
    save_mesh(r.reconstruction.meshes[0], dir / "mesh_t0.obj");
    save_mesh(r.reconstruction.meshes[1], dir / "mesh_t1.obj");
    save_joints(r.articulation.joints, dir / "joints.json");
    std::vector<TrainLogRow> log = r.reconstruction.log;
    log.insert(log.end(), r.articulation.log.begin(), r.articulation.log.end());
    write_text_file(dir / "train_log.csv", train_log_csv(log));
    write_text_file(dir / "config.txt", format_train_config(cfg.resolved()));

    json bake = json::array();
    for (const BakeOffEntry& e : r.articulation.bakeoff.entries)
        bake.push_back({{"part", e.part},
                        {"loss_revolute", e.loss_revolute},
                        {"loss_prismatic", e.loss_prismatic},
                        {"masked_views", e.masked_views},
                        {"fallback", e.fallback},
                        {"decision", to_string(e.decision)}});
    std::vector<std::string> warnings = r.reconstruction.warnings;
    warnings.insert(warnings.end(), r.articulation.warnings.begin(), r.articulation.warnings.end());
    const json manifest{{"format", "kinemesh-fit"},
                        {"version", 1},
                        {"name", data.name},
                        {"num_parts", data.num_parts},
                        {"units_to_meters", data.units_to_meters},
                        {"mesh", json::array({"mesh_t0.obj", "mesh_t1.obj"})},
                        {"joints", "joints.json"},
                        {"log", "train_log.csv"},
                        {"config", "config.txt"},
                        {"initial_loss", r.reconstruction.initial_loss},
                        {"final_loss", r.reconstruction.final_loss},
                        {"bakeoff", bake},
                        {"hash_violations", r.articulation.hash_violations},
                        {"warnings", warnings}};
    write_text_file(dir / "fit.json", manifest.dump(2) + "\n");
    for (const std::string& w : warnings) out << "warning: " << w << "\n";
    for (int k = 1; k < data.num_parts; ++k) {
        const PartJoint& j = r.articulation.joints.parts[static_cast<size_t>(k)];
        const JointAxis ax = joint_axis(j);
        char line[200];
        std::snprintf(line, sizeof line, "part %d: %s axis (%.4f, %.4f, %.4f) angle %.3f deg displacement %.4f\n", k,
                      to_string(j.type).c_str(), ax.axis.x(), ax.axis.y(), ax.axis.z(), ax.angle_deg,
                      j.type == JointType::Prismatic ? ax.displacement : 0.0);
        out << line;
    }
    char done[120];
    std::snprintf(done, sizeof done, "fit finished in %.1f s; wrote %s\n", seconds, a.out.c_str());
    out << done;
    return 0;
}

struct Prediction {
    PartAwareMesh mesh;
    JointParams joints;
    json manifest;
};

Prediction load_prediction(const std::string& pred) {
    const fs::path dir = fit_dir(pred);
    Prediction p;
    p.manifest = read_json(dir / "fit.json");
    if (p.manifest.value("format", "") != "kinemesh-fit") throw Error("bad-manifest", pred + " is not a fit result");
    p.mesh = load_mesh(dir / p.manifest.at("mesh").at(0).get<std::string>());
    p.joints = load_joints(dir / p.manifest.at("joints").get<std::string>());
    return p;
}

int run_eval(const EvalArgs& a, std::ostream& out) {
    const Prediction p = load_prediction(a.pred);
    const Dataset data = load_dataset(a.gt);
    if (!data.gt) throw Error("missing-ground-truth", "dataset " + a.gt + " carries no ground truth");
    EvalOptions opt;
    opt.seed = a.seed;
    opt.chamfer_samples = a.samples;
    if (a.axis_pos == "point-to-line")
        opt.axis_pos_mode = AxisPosMode::PointToLine;
    else if (a.axis_pos == "origin-to-origin")
        opt.axis_pos_mode = AxisPosMode::OriginToOrigin;
    else
        throw Error("invalid-config", "axis-pos must be point-to-line or origin-to-origin");
    EvalReport r = evaluate_object(p.mesh, p.joints, *data.gt, opt);
    r.name = data.name;
    const fs::path dir(a.out);
    write_text_file(dir / "report.csv", r.to_csv());
    write_text_file(dir / "report.json", r.to_json() + "\n");
    for (const JointReport& j : r.joints) {
        char line[240];
        std::snprintf(line, sizeof line, "part %d: %s/%s Axis Ang %.3f deg, Axis Pos %s, Part Motion %.4f\n", j.part,
                      to_string(j.gt_type).c_str(), to_string(j.pred_type).c_str(), j.axis_ang_deg,
                      j.axis_pos ? std::to_string(*j.axis_pos).c_str() : "n/a", j.part_motion);
        out << line;
    }
    char cd[120];
    std::snprintf(cd, sizeof cd, "CD-s %.3f mm, CD-m %.3f mm\n", r.cd_s, r.cd_m);
    out << cd;
    return 0;
}

int run_export(const ExportArgs& a, std::ostream& out) {
    const Prediction p = load_prediction(a.pred);
    UrdfOptions opt;
    opt.name = a.name.empty() ? p.manifest.value("name", std::string("object")) : a.name;
    if (opt.name.empty()) opt.name = "object";
    opt.units_to_meters = a.units_to_meters ? *a.units_to_meters : p.manifest.value("units_to_meters", 1.0);
    const UrdfModel m = export_urdf(p.mesh, p.joints, a.out, opt);
    out << "wrote " << (fs::path(a.out) / (opt.name + ".urdf")).string() << " (" << m.links.size() << " links, "
        << m.joints.size() << " joints)\n";
    return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"kinemesh: articulated mesh reconstruction from two observed states", "kinemesh"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Render a synthetic articulated scene into a dataset directory");
    g->add_option("--template", gen.tmpl, "hinged-box | drawer-cabinet | multi-drawer | door-drawer")->capture_default_str();
    g->add_option("--parts", gen.parts, "Part count including the base (0 = template default)");
    g->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
    g->add_option("--out", gen.out, "Output dataset directory")->required();
    g->add_option("--image-size", gen.image_size, "Image width and height")->capture_default_str();
    g->add_option("--train-views", gen.train_views, "Training views per state")->capture_default_str();
    g->add_option("--test-views", gen.test_views, "Test views per state")->capture_default_str();
    g->add_option("--init-noise", gen.init_noise, "Initial mesh jitter, fraction of the bbox diagonal")
        ->capture_default_str();

    FitArgs fa;
    auto* f = app.add_subcommand("fit", "Run reconstruction and articulation on a dataset");
    f->add_option("--data", fa.data, "Dataset directory or manifest.json")->required();
    f->add_option("--config", fa.config, "key = value training config file");
    f->add_option("--out", fa.out, "Output directory")->required();
    f->add_option("--seed", fa.seed, "Override the config seed");
    f->add_option("--iterations", fa.iterations, "Override the total iteration count");

    EvalArgs ea;
    auto* e = app.add_subcommand("eval", "Score a fit result against dataset ground truth");
    e->add_option("--pred", ea.pred, "Fit output directory")->required();
    e->add_option("--gt", ea.gt, "Dataset directory or manifest.json")->required();
    e->add_option("--out", ea.out, "Report directory")->required();
    e->add_option("--seed", ea.seed, "Chamfer sampling seed")->capture_default_str();
    e->add_option("--samples", ea.samples, "Chamfer samples per mesh")->capture_default_str();
    e->add_option("--axis-pos", ea.axis_pos, "point-to-line | origin-to-origin")->capture_default_str();

    ExportArgs xa;
    auto* x = app.add_subcommand("export", "Write a URDF for a fit result");
    x->add_option("--pred", xa.pred, "Fit output directory")->required();
    x->add_option("--out", xa.out, "Output directory")->required();
    x->add_option("--name", xa.name, "Robot name (default: dataset name)");
    x->add_option("--units-to-meters", xa.units_to_meters, "Scale override (default: dataset units)");

    std::vector<std::string> argv_store{"kinemesh"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const std::string& s : argv_store) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& pe) {
        err << "error: usage: " << pe.what() << "\n";
        CLI::App* sub = nullptr;
        for (CLI::App* s : app.get_subcommands()) sub = s;
        err << (sub ? sub->help() : app.help());
        return 2;
    }

    try {
        if (*g) return run_generate(gen, out);
        if (*f) return run_fit(fa, out);
        if (*e) return run_eval(ea, out);
        if (*x) return run_export(xa, out);
    } catch (const Error& ex) {
        err << "error: " << ex.what() << "\n";
        return 1;
    } catch (const std::exception& ex) {
        err << "error: internal: " << ex.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace kinemesh
