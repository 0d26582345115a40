#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kinemesh/articulation.hpp"
#include "kinemesh/synth.hpp"
#include "kinemesh/trainer.hpp"
#include "kinemesh/view.hpp"

namespace kinemesh {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path);
// Creates parent directories as needed.
void write_text_file(const fs::path& path, const std::string& text);

// Mesh files: positions and faces as OBJ (17 significant digits, base color
// appended to each `v` line), every other attribute in a text sidecar at
// `<path>.attr`. Loading without a sidecar gives a one-part mesh with the OBJ
// colors (or gray) and full opacity.
void save_mesh(const PartAwareMesh& mesh, const fs::path& obj_path);
PartAwareMesh load_mesh(const fs::path& obj_path);
fs::path attribute_sidecar(const fs::path& obj_path);

// Plain OBJ, no sidecar.
void save_obj(const fs::path& path, std::span<const Vec3> positions, std::span<const Triangle> faces);
void load_obj(const fs::path& path, std::vector<Vec3>& positions, std::vector<Triangle>& faces);

// Joint manifest (JSON). Derived axis/angle fields are written for reading
// convenience and ignored on load.
std::string joints_to_json(const JointParams& joints);
JointParams joints_from_json(const std::string& text);
void save_joints(const JointParams& joints, const fs::path& path);
JointParams load_joints(const fs::path& path);

// 8-bit PNG, 1 or 3 channels; values are clamped to [0, 1].
void write_png(const Image& image, const fs::path& path);
Image read_png(const fs::path& path);
// Labels stored as 8-bit gray PNG holding label + 1 (0 = background).
void write_label_png(const LabelMap& labels, const fs::path& path);
LabelMap read_label_png(const fs::path& path);
// Exact float32 storage: one ASCII header line "KMF32 <w> <h> <c>", then
// little-endian samples.
void write_raw_image(const Image& image, const fs::path& path);
Image read_raw_image(const fs::path& path);

struct Dataset {
    std::string name;
    int num_parts = 1;
    double units_to_meters = 1.0;
    std::array<std::vector<CameraView>, 2> train;
    std::array<std::vector<CameraView>, 2> test;
    std::optional<GroundTruth> gt;
    std::optional<std::array<PartAwareMesh, 2>> init;
    std::optional<SceneSpec> generator;
};

Dataset dataset_from_scene(const Scene& scene, const std::string& name,
                           const std::optional<std::array<PartAwareMesh, 2>>& init = std::nullopt);
// Writes manifest.json plus one directory per state under `dir`.
void save_dataset(const Dataset& data, const fs::path& dir);
// Accepts a manifest path or the directory holding manifest.json.
Dataset load_dataset(const fs::path& manifest);

std::string ground_truth_to_json(const GroundTruth& gt, const std::string& mesh0, const std::string& mesh1);

// Flat `key = value` text, one field per line, `#` comments. Keys are the
// TrainConfig field names; nested groups use a dotted prefix
// (weights., ablation., raster., remesh.).
TrainConfig parse_train_config(const std::string& text, TrainConfig base = {});
TrainConfig load_train_config(const fs::path& path, TrainConfig base = {});
std::string format_train_config(const TrainConfig& cfg);
std::vector<std::string> train_config_keys();

}  // namespace kinemesh
