#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "snrprobe/cka.hpp"
#include "snrprobe/diffusion.hpp"
#include "snrprobe/error.hpp"
#include "snrprobe/mixing.hpp"
#include "snrprobe/regression.hpp"

namespace snrprobe {

enum class Stage { Mix, Pool, Cka, Fit, Diffusion, Render };

std::string_view stage_name(Stage s);
Stage parse_stage(const std::string& name);

struct PipelinePaths {
  std::filesystem::path clean;
  std::filesystem::path noise;
  std::filesystem::path activations;
  std::filesystem::path activations_manifest;
  std::filesystem::path output;
  // Derived from `output` by fill_defaults() when left empty.
  std::filesystem::path mixtures;
  std::filesystem::path embeddings;
  std::filesystem::path cka_csv;
  std::filesystem::path fit_csv;
  std::filesystem::path diffusion;
  std::filesystem::path figures;

  void fill_defaults();
};

enum class DiffusionRun { Both, Intra, Inter };

struct PipelineConfig {
  static constexpr int kSchemaVersion = 1;

  PipelinePaths paths;
  SweepConfig sweep;
  CKAConfig cka;
  FitMode fit_mode = FitMode::AveragedValues;
  DiffusionConfig diffusion;
  DiffusionRun diffusion_run = DiffusionRun::Both;
  std::vector<int> representative_snrs{-10, -5, 0, 10, 20, 30};
  std::vector<Stage> stages{Stage::Mix, Stage::Pool, Stage::Cka, Stage::Fit, Stage::Diffusion, Stage::Render};
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool write_summary = true;

  /// Parses a versioned JSON config; relative paths resolve against `base_dir`.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static PipelineConfig load(const std::filesystem::path& path);

  /// Throws ConfigError.
  void validate() const;
};

struct OutputFile {
  std::string path;  // relative to the output directory when inside it
  std::uint64_t hash = 0;
  std::uintmax_t bytes = 0;
};

struct RunReport {
  std::vector<Stage> stages_run;
  std::vector<OutputFile> files;  // sorted by path
};

/// Raised when a stage fails; `what()` names the stage and the cause.
class StageError : public Error {
 public:
  StageError(Stage stage, ErrorCode cause, const std::string& message);
  Stage stage() const noexcept { return stage_; }
  ErrorCode cause() const noexcept { return cause_; }

 private:
  Stage stage_;
  ErrorCode cause_;
};

/// Runs the requested stages in dependency order, writing `run_summary.json`
/// when enabled. A failing stage leaves `<stage>.partial` in the output
/// directory and throws StageError.
RunReport run_pipeline(const PipelineConfig& config);

/// FNV-1a 64 of a file's bytes.
std::uint64_t hash_file(const std::filesystem::path& path);

/// Loads layer metadata from whichever of the activations manifest or the
/// embeddings file is available.
std::vector<LayerInfo> load_layer_metadata(const PipelinePaths& paths);

}  // namespace snrprobe
