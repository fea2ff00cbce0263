#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "snrprobe/pipeline.hpp"

namespace fs = std::filesystem;
using namespace snrprobe;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;

  // mix
  std::string clean, noise, mix_out;
  std::optional<int> snr_min, snr_max;
  std::optional<double> lufs, clip_s, window_s;
  // pool
  std::string activations, manifest, pool_out;
  // cka
  std::string embeddings, cka_out, rows;
  std::optional<int> bootstrap;
  std::optional<double> ci_level;
  // fit
  std::string cka_in, fit_out, fit_mode;
  // diffusion
  std::string diff_mode, epsilon, diff_out;
  std::optional<int> coords, time;
  // render
  std::string render_cka, render_fit, render_diffusion, render_out;
  // run
  std::string output;
};

void apply_overrides(PipelineConfig& c, const Flags& f) {
  auto set_path = [](fs::path& dst, const std::string& v) {
    if (!v.empty()) dst = fs::absolute(v).lexically_normal();
  };
  if (f.seed) c.seed = f.seed;
  if (f.jobs) c.jobs = *f.jobs;
  set_path(c.paths.output, f.output);
  set_path(c.paths.clean, f.clean);
  set_path(c.paths.noise, f.noise);
  set_path(c.paths.mixtures, f.mix_out);
  set_path(c.paths.activations, f.activations);
  set_path(c.paths.activations_manifest, f.manifest);
  set_path(c.paths.embeddings, f.pool_out);
  set_path(c.paths.embeddings, f.embeddings);
  set_path(c.paths.cka_csv, f.cka_out);
  set_path(c.paths.cka_csv, f.cka_in);
  set_path(c.paths.cka_csv, f.render_cka);
  set_path(c.paths.fit_csv, f.fit_out);
  set_path(c.paths.fit_csv, f.render_fit);
  set_path(c.paths.diffusion, f.diff_out);
  set_path(c.paths.diffusion, f.render_diffusion);
  set_path(c.paths.figures, f.render_out);

  if (f.snr_min || f.snr_max) {
    int lo = f.snr_min.value_or(c.sweep.snr_grid_db.front());
    int hi = f.snr_max.value_or(c.sweep.snr_grid_db.back());
    c.sweep.snr_grid_db = SweepConfig::make_grid(lo, hi);
  }
  if (f.lufs) c.sweep.target_lufs = *f.lufs;
  if (f.clip_s) c.sweep.clip_duration_s = *f.clip_s;
  if (f.window_s) c.sweep.window_duration_s = *f.window_s;

  if (f.bootstrap) c.cka.bootstrap_resamples = *f.bootstrap;
  if (f.ci_level) c.cka.ci_level = *f.ci_level;
  if (f.rows == "utterances") c.cka.rows = RowUnit::Utterances;
  if (f.rows == "centroids") c.cka.rows = RowUnit::Centroids;
  if (f.fit_mode == "averaged-values") c.fit_mode = FitMode::AveragedValues;
  if (f.fit_mode == "averaged-fits") c.fit_mode = FitMode::AveragedFits;

  if (f.diff_mode == "intra") c.diffusion_run = DiffusionRun::Intra;
  if (f.diff_mode == "inter") c.diffusion_run = DiffusionRun::Inter;
  if (f.diff_mode == "both") c.diffusion_run = DiffusionRun::Both;
  if (!f.epsilon.empty()) {
    if (f.epsilon == "median") {
      c.diffusion.epsilon_mode = EpsilonMode::Median;
    } else {
      try {
        c.diffusion.epsilon_value = std::stod(f.epsilon);
      } catch (const std::exception&) {
        throw Error(ErrorCode::ConfigError, "--epsilon must be 'median' or a number");
      }
      c.diffusion.epsilon_mode = EpsilonMode::Fixed;
    }
  }
  if (f.coords) c.diffusion.n_coords = *f.coords;
  if (f.time) c.diffusion.time = *f.time;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layer-wise SNR probing: mixing, CKA profiles, diffusion maps"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "Pipeline config (JSON)");
  app.add_option("--seed", f.seed, "Master seed");
  app.add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* mix = app.add_subcommand("mix", "Generate the noisy mixture sweep");
  mix->add_option("--clean", f.clean, "Directory of clean utterances");
  mix->add_option("--noise", f.noise, "Directory of noise recordings");
  mix->add_option("--out", f.mix_out, "Output directory");
  mix->add_option("--snr-min", f.snr_min, "Lowest SNR (dB)");
  mix->add_option("--snr-max", f.snr_max, "Highest SNR (dB)");
  mix->add_option("--lufs", f.lufs, "Loudness target");
  mix->add_option("--clip-s", f.clip_s, "Clip duration (s)");
  mix->add_option("--window-s", f.window_s, "Window duration (s)");

  auto* pool = app.add_subcommand("pool", "Pool activations into embeddings.bin");
  pool->add_option("--activations", f.activations, "Activation tree");
  pool->add_option("--manifest", f.manifest, "activations_manifest.json");
  pool->add_option("--out", f.pool_out, "Output embeddings file");

  auto* cka = app.add_subcommand("cka", "Clean-vs-noisy CKA per layer and SNR");
  cka->add_option("--embeddings", f.embeddings, "embeddings.bin");
  cka->add_option("--out", f.cka_out, "Output cka.csv");
  cka->add_option("--bootstrap", f.bootstrap, "Bootstrap resamples");
  cka->add_option("--ci-level", f.ci_level, "Confidence level");
  cka->add_option("--rows", f.rows, "Sample unit")->check(CLI::IsMember({"utterances", "centroids"}));

  auto* fit = app.add_subcommand("fit", "Per-layer linear trend of CKA over SNR");
  fit->add_option("--cka", f.cka_in, "Input cka.csv");
  fit->add_option("--out", f.fit_out, "Output cka_fit.csv");
  fit->add_option("--manifest", f.manifest, "Layer metadata source");
  fit->add_option("--embeddings", f.embeddings, "Layer metadata source");
  fit->add_option("--mode", f.fit_mode, "Averaging")->check(CLI::IsMember({"averaged-values", "averaged-fits"}));

  auto* diff = app.add_subcommand("diffusion", "Intra- and inter-layer diffusion maps");
  diff->add_option("--embeddings", f.embeddings, "embeddings.bin");
  diff->add_option("--mode", f.diff_mode, "Which maps")->check(CLI::IsMember({"intra", "inter", "both"}));
  diff->add_option("--epsilon", f.epsilon, "'median' or a kernel bandwidth");
  diff->add_option("--coords", f.coords, "Retained coordinates");
  diff->add_option("--time", f.time, "Diffusion time");
  diff->add_option("--out", f.diff_out, "Output directory");

  auto* render = app.add_subcommand("render", "Render SVG figures from the CSV outputs");
  render->add_option("--cka", f.render_cka, "cka.csv");
  render->add_option("--fit", f.render_fit, "cka_fit.csv");
  render->add_option("--diffusion", f.render_diffusion, "Diffusion output directory");
  render->add_option("--out", f.render_out, "Figure directory");

  auto* run = app.add_subcommand("run", "Run the stages listed in the config");
  run->add_option("--output", f.output, "Override paths.output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    PipelineConfig config;
    if (!f.config.empty()) {
      config = PipelineConfig::load(f.config);
    } else if (*run) {
      throw Error(ErrorCode::ConfigError, "run needs --config");
    } else {
      config.write_summary = false;
    }
    if (!*run) {
      std::string name = app.get_subcommands().front()->get_name();
      config.stages = {parse_stage(name)};
    }
    apply_overrides(config, f);
    config.paths.fill_defaults();
    run_pipeline(config);
  } catch (const StageError& e) {
    std::cerr << "snrprobe: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "snrprobe: " << e.what() << '\n';
    return e.code() == ErrorCode::ConfigError ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "snrprobe: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
