#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "kinemesh/io.hpp"
#include "kinemesh/urdf.hpp"
#include "test_util.hpp"

namespace kinemesh {
namespace {

using testing::ScratchDir;

struct CliRun {
    int code = -1;
    std::string out, err;
};

CliRun run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    CliRun r;
    r.code = cli_main(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::vector<std::string> small_generate(const std::string& tmpl, const std::string& out, const std::string& seed = "2") {
    return {"generate", "--template", tmpl, "--seed", seed, "--out", out, "--image-size", "16", "--train-views", "3",
            "--test-views", "1"};
}

TEST(Cli, UnknownFlagPrintsUsageAndExitsTwo) {
    const CliRun r = run({"generate", "--out", "x", "--frobnicate"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--frobnicate"), std::string::npos);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"teleport"}).code, 2);
    EXPECT_EQ(run({"fit", "--data", "d"}).code, 2);  // --out is required
}

TEST(Cli, HelpExitsZero) {
    const CliRun r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("generate"), std::string::npos);
}

TEST(Cli, RuntimeErrorsAreOneMachineParsableLine) {
    ScratchDir dir("cli_err");
    const CliRun r = run({"generate", "--template", "hinged-box", "--parts", "4", "--out", (dir / "d").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error: template-mismatch: ", 0), 0u) << r.err;
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
    const CliRun missing = run({"fit", "--data", (dir / "nowhere").string(), "--out", (dir / "f").string()});
    EXPECT_EQ(missing.code, 1);
    EXPECT_EQ(missing.err.rfind("error: missing-file: ", 0), 0u) << missing.err;
}

TEST(Cli, BadConfigKeyIsReported) {
    ScratchDir dir("cli_cfg");
    ASSERT_EQ(run(small_generate("hinged-box", (dir / "d").string())).code, 0);
    write_text_file(dir / "c.txt", "iterations = 10\nlearning_rate = 3\n");
    const CliRun r = run({"fit", "--data", (dir / "d").string(), "--config", (dir / "c.txt").string(), "--out",
                       (dir / "f").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error: unknown-config-key: ", 0), 0u) << r.err;
}

TEST(Cli, GenerateFitEvalExportEndToEnd) {
    ScratchDir dir("cli_e2e");
    const std::string data = (dir / "data").string(), fit = (dir / "fit").string();
    ASSERT_EQ(run(small_generate("hinged-box", data)).code, 0);
    write_text_file(dir / "cfg.txt", "iterations = 40\nlog_every = 5\n");
    const CliRun f = run({"fit", "--data", data, "--config", (dir / "cfg.txt").string(), "--out", fit, "--seed", "3"});
    ASSERT_EQ(f.code, 0) << f.err;
    EXPECT_NE(f.out.find("part 1:"), std::string::npos);
    const TrainConfig used = load_train_config(dir / "fit" / "config.txt");
    EXPECT_EQ(used.iterations, 40);
    EXPECT_EQ(used.seed, 3u);

    const CliRun e = run({"eval", "--pred", fit, "--gt", data, "--out", (dir / "eval").string()});
    ASSERT_EQ(e.code, 0) << e.err;
    const std::string csv = read_text_file(dir / "eval" / "report.csv");
    EXPECT_NE(csv.find("Axis Ang"), std::string::npos);
    EXPECT_NE(csv.find("hinged-box-2"), std::string::npos);

    const CliRun x = run({"export", "--pred", fit, "--out", (dir / "urdf").string()});
    ASSERT_EQ(x.code, 0) << x.err;
    const UrdfModel m = parse_urdf(read_text_file(dir / "urdf" / "hinged-box-2.urdf"));
    EXPECT_EQ(m.links.size(), 2u);
    EXPECT_EQ(m.joints.size(), 1u);
    EXPECT_TRUE(std::filesystem::exists(dir / "urdf" / "meshes" / "part_1.obj"));
}

TEST(Cli, SameSeedGivesIdenticalOutputs) {
    ScratchDir dir("cli_det");
    const std::string data = (dir / "data").string();
    ASSERT_EQ(run(small_generate("drawer-cabinet", data)).code, 0);
    for (const char* out : {"a", "b"})
        ASSERT_EQ(run({"fit", "--data", data, "--iterations", "30", "--out", (dir / out).string()}).code, 0);
    for (const char* file : {"fit.json", "joints.json", "mesh_t0.obj", "mesh_t0.obj.attr", "mesh_t1.obj",
                             "train_log.csv", "config.txt"})
        EXPECT_EQ(read_text_file(dir / "a" / file), read_text_file(dir / "b" / file)) << file;
    // regenerating the dataset is deterministic too
    ASSERT_EQ(run(small_generate("drawer-cabinet", (dir / "data2").string())).code, 0);
    EXPECT_EQ(read_text_file(dir / "data" / "manifest.json"), read_text_file(dir / "data2" / "manifest.json"));
    EXPECT_EQ(read_text_file(dir / "data" / "state1" / "train_002_rgb.f32"),
              read_text_file(dir / "data2" / "state1" / "train_002_rgb.f32"));
}

TEST(Cli, EvalWithMismatchedPartCountsFails) {
    ScratchDir dir("cli_mismatch");
    ASSERT_EQ(run(small_generate("hinged-box", (dir / "hinge").string())).code, 0);
    ASSERT_EQ(run(small_generate("door-drawer", (dir / "door").string())).code, 0);
    ASSERT_EQ(run({"fit", "--data", (dir / "hinge").string(), "--iterations", "20", "--out", (dir / "fit").string()}).code, 0);
    const CliRun r = run({"eval", "--pred", (dir / "fit").string(), "--gt", (dir / "door").string(), "--out",
                       (dir / "eval").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error: joint-count-mismatch: ", 0), 0u) << r.err;
}

}  // namespace
}  // namespace kinemesh
