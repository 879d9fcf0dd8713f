#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "texmap/atlas.hpp"
#include "texmap/blend.hpp"
#include "texmap/camera.hpp"
#include "texmap/eval.hpp"
#include "texmap/mesh.hpp"
#include "texmap/mrf.hpp"
#include "texmap/quality.hpp"

namespace texmap {

struct DumpOptions {
  std::filesystem::path depth_dir;     // depth_<view>.png, 16-bit
  std::filesystem::path quality_csv;
  std::filesystem::path labels_csv;
  std::filesystem::path dist_dir;      // dist_<view>.png, 16-bit
};

struct PipelineConfig {
  std::size_t top_n = 3;
  int lbp_iters = 50;
  double lambda = 0.5;
  double lbp_damping = 0.0;
  double ratio = 0.4;
  double meanshift_threshold = 0.006;
  int meanshift_iters = 10;
  double depth_bias = 1e-3;
  int workers = 0;  // 0: one per hardware thread
  bool drop_degenerate = false;
  double weld_eps = 0.0;
  std::filesystem::path cache_dir;  // empty disables caching
  DumpOptions dump;

  // Throws InputError naming the offending key.
  void validate() const;
  // Applies one key=value setting. Throws InputError on unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  nlohmann::json to_json() const;
};

// Reads `key = value` lines; '#' starts a comment, values may be quoted.
PipelineConfig load_config_file(const std::filesystem::path& path, PipelineConfig base = {});

enum class Stage { kConfig, kMesh, kCamera, kVisibility, kQuality, kMrf, kBlend, kAtlas, kExport, kEval };

std::string_view stage_name(Stage stage);

// A module failure tagged with the stage it came from.
class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, bool invariant, const std::string& what)
      : std::runtime_error(std::string(stage_name(stage)) + ": " + what),
        stage_(stage), invariant_(invariant) {}

  Stage stage() const { return stage_; }
  bool invariant() const { return invariant_; }

 private:
  Stage stage_;
  bool invariant_;
};

struct TextureResult {
  TexturedModel model;
  QualityTable quality;
  CandidateSet candidates;
  std::vector<FacePatch> patches;
  std::size_t untextured_faces = 0;
  nlohmann::json report;  // timings under "timings_ms"
};

// In-memory run: visibility, quality, mrf, blend, atlas.
TextureResult run_texture(const Mesh& mesh, std::span<const ViewImage> views,
                          const PipelineConfig& config);

// File run: loads mesh and manifest (images relative to the manifest),
// textures, exports to out_dir and writes out_dir/run_report.json.
TextureResult run_texture(const std::filesystem::path& mesh_path,
                          const std::filesystem::path& manifest_path,
                          const std::filesystem::path& out_dir, const PipelineConfig& config);

EvalReport run_evaluate(const std::filesystem::path& model_path,
                        const std::filesystem::path& manifest_path, const PipelineConfig& config);

// Writes quality.csv and candidates.csv into out_dir.
void run_inspect(const std::filesystem::path& mesh_path, const std::filesystem::path& manifest_path,
                 const std::filesystem::path& out_dir, const PipelineConfig& config);

// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

}  // namespace texmap
