#include "snrprobe/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "snrprobe/csv.hpp"
#include "snrprobe/embeddings.hpp"
#include "snrprobe/hash.hpp"
#include "snrprobe/kernels.hpp"
#include "snrprobe/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace snrprobe {

namespace {

constexpr Stage kAllStages[] = {Stage::Mix, Stage::Pool, Stage::Cka, Stage::Fit, Stage::Diffusion, Stage::Render};

void log(const std::string& msg) { std::cerr << "snrprobe: " << msg << '\n'; }

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    config_error(std::string("bad value for '") + key + "': " + e.what());
  }
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) config_error(where + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      config_error("unknown key '" + k + "' in " + where);
  }
}

std::string write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
  return path.string();
}

std::string bool_field(bool b) { return b ? "1" : "0"; }

bool parse_bool_field(const std::string& s) {
  if (s == "1") return true;
  if (s == "0") return false;
  throw Error(ErrorCode::CorruptFile, "expected 0 or 1, got '" + s + "'");
}

int parse_int_field(const std::string& s) {
  double v = parse_double(s);
  if (v != std::floor(v)) throw Error(ErrorCode::CorruptFile, "expected integer, got '" + s + "'");
  return static_cast<int>(v);
}

std::string snr_tag(int snr) { return std::to_string(snr); }

void write_matrix_csv(const DistanceMatrix& m, const fs::path& path) {
  CsvTable t;
  t.header.push_back("point");
  for (const auto& l : m.labels) t.header.push_back(l);
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    std::vector<std::string> row{m.labels[i]};
    for (std::size_t j = 0; j < m.labels.size(); ++j) row.push_back(format_double(m.values(i, j)));
    t.rows.push_back(std::move(row));
  }
  write_csv(t, path);
}

DistanceMatrix read_matrix_csv(const fs::path& path) {
  CsvTable t = read_csv(path);
  DistanceMatrix m;
  m.labels.assign(t.header.begin() + 1, t.header.end());
  const std::size_t n = m.labels.size();
  if (t.rows.size() != n) throw Error(ErrorCode::CorruptFile, path.string() + " is not square");
  m.values = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (t.rows[i][0] != m.labels[i]) throw Error(ErrorCode::CorruptFile, path.string() + " row labels differ");
    for (std::size_t j = 0; j < n; ++j) m.values(i, j) = parse_double(t.rows[i][j + 1]);
  }
  return m;
}

// ---- stages ----

void stage_mix(const PipelineConfig& c) {
  MixtureManifest m = generate_sweep(c.paths.clean, c.paths.noise, c.paths.mixtures, c.sweep, *c.seed);
  log("mix: " + std::to_string(m.entries.size()) + " mixtures, " + std::to_string(m.failures.size()) + " failures");
}

void stage_pool(const PipelineConfig& c) {
  ActivationsManifest manifest = ActivationsManifest::load(c.paths.activations_manifest);
  EmbeddingSet set = pool_activations(manifest, c.paths.activations);
  set.save(c.paths.embeddings);
  log("pool: " + std::to_string(set.embeddings().size()) + " embeddings over " + std::to_string(set.layers().size()) +
      " layers");
}

fs::path per_noise_path(const PipelinePaths& p) { return p.cka_csv.parent_path() / "cka_per_noise.csv"; }

void stage_cka(const PipelineConfig& c) {
  EmbeddingSet set = EmbeddingSet::load(c.paths.embeddings);
  CKAConfig cfg = c.cka;
  cfg.rng_seed = *c.seed;
  std::vector<CKAPoint> points = cka_grid(set, cfg);

  CsvTable avg{{"layer_id", "block", "depth_index", "snr_db", "cka", "ci_low", "ci_high", "n_rows"}, {}};
  CsvTable per{{"layer_id", "noise_type", "snr_db", "cka"}, {}};
  for (const CKAPoint& p : points) {
    const LayerInfo& l = set.layer(p.layer_id);
    avg.rows.push_back({p.layer_id, l.block, std::to_string(l.depth), std::to_string(p.snr_db), format_double(p.cka),
                        format_double(p.ci_low), format_double(p.ci_high), std::to_string(p.n_rows)});
    for (const auto& [noise, v] : p.per_noise)
      per.rows.push_back({p.layer_id, noise, std::to_string(p.snr_db), format_double(v)});
  }
  write_csv(avg, c.paths.cka_csv);
  write_csv(per, per_noise_path(c.paths));
  log("cka: " + std::to_string(points.size()) + " cells");
}

void stage_fit(const PipelineConfig& c) {
  CsvTable table = read_csv(c.paths.cka_csv);
  const std::size_t i_layer = table.column("layer_id"), i_block = table.column("block"),
                    i_depth = table.column("depth_index"), i_snr = table.column("snr_db"), i_cka = table.column("cka");

  std::map<std::string, CkaSeries> series;
  std::vector<std::string> order;
  std::set<int> snrs;
  std::map<std::string, LayerInfo> from_csv;
  for (const auto& row : table.rows) {
    const std::string& id = row[i_layer];
    auto [it, inserted] = series.try_emplace(id);
    if (inserted) {
      order.push_back(id);
      it->second.layer_id = id;
      LayerInfo info;
      info.id = id;
      info.block = row[i_block];
      info.depth = static_cast<std::size_t>(parse_int_field(row[i_depth]));
      from_csv[id] = info;
    }
    int snr = parse_int_field(row[i_snr]);
    it->second.snr_db.push_back(snr);
    it->second.cka.push_back(parse_double(row[i_cka]));
    snrs.insert(snr);
  }
  if (order.empty()) throw Error(ErrorCode::MissingInput, c.paths.cka_csv.string() + " has no rows");

  std::vector<LayerInfo> meta;
  try {
    meta = load_layer_metadata(c.paths);
  } catch (const Error&) {
    meta.clear();
  }
  std::vector<LayerInfo> layers;
  if (meta.empty()) {
    for (const auto& id : order) layers.push_back(from_csv[id]);
    std::stable_sort(layers.begin(), layers.end(), [](const LayerInfo& a, const LayerInfo& b) { return a.depth < b.depth; });
  } else {
    for (const auto& l : meta)
      if (series.count(l.id)) layers.push_back(l);
    if (layers.size() != order.size())
      throw Error(ErrorCode::MissingCell, "cka.csv names layers absent from the layer metadata");
  }

  std::vector<CkaSeries> averaged;
  for (const auto& l : layers) averaged.push_back(series.at(l.id));

  std::vector<std::vector<CkaSeries>> per_noise;
  if (c.fit_mode == FitMode::AveragedFits) {
    CsvTable pn = read_csv(per_noise_path(c.paths));
    const std::size_t j_layer = pn.column("layer_id"), j_noise = pn.column("noise_type"), j_snr = pn.column("snr_db"),
                      j_cka = pn.column("cka");
    std::map<std::string, std::map<std::string, CkaSeries>> grouped;
    for (const auto& row : pn.rows) {
      CkaSeries& s = grouped[row[j_layer]][row[j_noise]];
      s.layer_id = row[j_layer];
      s.snr_db.push_back(parse_int_field(row[j_snr]));
      s.cka.push_back(parse_double(row[j_cka]));
    }
    for (const auto& l : layers) {
      std::vector<CkaSeries> v;
      for (auto& [noise, s] : grouped[l.id]) v.push_back(s);
      per_noise.push_back(std::move(v));
    }
  }

  std::vector<int> grid(snrs.begin(), snrs.end());
  std::vector<LayerTrend> trends = profile_layers(layers, averaged, per_noise, grid, c.fit_mode);

  CsvTable out{{"layer_id", "block", "depth_index", "slope", "intercept", "r_squared", "is_skip_input",
                "is_skip_output", "is_local_slope_max", "degenerate"},
               {}};
  for (const LayerTrend& t : trends) {
    out.rows.push_back({t.fit.layer_id, t.block, std::to_string(t.depth_index), format_double(t.fit.slope),
                        format_double(t.fit.intercept), format_double(t.fit.r_squared), bool_field(t.is_skip_input),
                        bool_field(t.is_skip_output), bool_field(t.is_local_slope_max), bool_field(t.fit.degenerate)});
  }
  write_csv(out, c.paths.fit_csv);
  log("fit: " + std::to_string(trends.size()) + " layers");
}

json diffusion_config_json(const DiffusionConfig& d) {
  json j;
  j["epsilon"] = d.epsilon_mode == EpsilonMode::Median ? json("median") : json(d.epsilon_value);
  j["coords"] = d.n_coords;
  j["time"] = d.time;
  j["intra_points"] = d.intra_points == IntraPoints::NoiseAveraged ? "noise_averaged" : "per_noise";
  j["inter_layers"] = d.inter_layers == InterLayers::FirstInBlock ? "first_in_block" : "all_same_dim";
  j["include_clean_reference"] = d.include_clean_reference;
  return j;
}

void stage_diffusion(const PipelineConfig& c) {
  EmbeddingSet set = EmbeddingSet::load(c.paths.embeddings);
  CentroidSet centroids = set.centroids();
  const auto& layers = set.layers();
  const auto& grid = set.snr_grid();
  const auto& noises = set.noise_types();
  const fs::path dir = c.paths.diffusion;
  fs::create_directories(dir);

  json report;
  report["schema"] = "snrprobe.diffusion/1";
  report["config"] = diffusion_config_json(c.diffusion);

  if (c.diffusion_run != DiffusionRun::Inter) {
    std::vector<IntraLayerResult> results(layers.size());
    std::vector<std::string> errors(layers.size());
    const long n = static_cast<long>(layers.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
      try {
        results[static_cast<std::size_t>(i)] =
            intra_layer(centroids, layers[static_cast<std::size_t>(i)].id, grid, noises, c.diffusion);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(i)] = e.what();
      }
    }
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (!errors[i].empty()) throw Error(ErrorCode::StageFailure, "layer " + layers[i].id + ": " + errors[i]);

    CsvTable intra{{"layer_id", "snr_db", "dc1", "rho", "r2"}, {}};
    json summary = json::array();
    for (const IntraLayerResult& r : results) {
      for (std::size_t k = 0; k < r.snr_db.size(); ++k)
        intra.rows.push_back({r.layer_id, std::to_string(r.snr_db[k]), format_double(r.dc1[k]), format_double(r.rho),
                              format_double(r.r_squared)});
      write_matrix_csv(r.distances, dir / ("diffusion_intra_dist_" + r.layer_id + ".csv"));
      summary.push_back({{"layer_id", r.layer_id}, {"rho", r.rho}, {"r2", r.r_squared}, {"degenerate", r.degenerate}});
    }
    write_csv(intra, dir / "diffusion_intra.csv");
    report["intra"] = summary;
  }

  if (c.diffusion_run != DiffusionRun::Intra) {
    json inter = json::object();
    json snr_list = json::array();
    std::vector<std::string> excluded;
    std::vector<std::string> included;
    for (int snr : grid) {
      InterLayerResult r = inter_layer(centroids, layers, noises, snr, c.diffusion);
      write_matrix_csv(r.distances, dir / ("diffusion_inter_" + snr_tag(snr) + ".csv"));
      excluded = r.excluded;
      included = r.layers;
      snr_list.push_back(snr);
    }
    inter["layers"] = included;
    inter["excluded"] = excluded;
    inter["snr_db"] = snr_list;
    report["inter"] = inter;
  }
  write_text(dir / "diffusion_report.json", report.dump(2) + "\n");
  log("diffusion: " + std::to_string(layers.size()) + " layers, " + std::to_string(grid.size()) + " SNRs");
}

std::string layer_label(const std::string& block, const std::string& id) { return block + "/" + id; }

void stage_render(const PipelineConfig& c) {
  const fs::path figs = c.paths.figures;
  fs::create_directories(figs);
  int written = 0;

  if (fs::exists(c.paths.cka_csv)) {
    CsvTable t = read_csv(c.paths.cka_csv);
    const std::size_t i_layer = t.column("layer_id"), i_block = t.column("block"), i_snr = t.column("snr_db"),
                      i_cka = t.column("cka");
    std::vector<std::string> layer_order;
    std::map<std::string, std::string> blocks;
    std::set<int> snrs;
    std::map<std::pair<std::string, int>, double> values;
    for (const auto& row : t.rows) {
      if (!blocks.count(row[i_layer])) layer_order.push_back(row[i_layer]);
      blocks[row[i_layer]] = row[i_block];
      int snr = parse_int_field(row[i_snr]);
      snrs.insert(snr);
      values[{row[i_layer], snr}] = parse_double(row[i_cka]);
    }
    HeatmapSpec h;
    h.title = "Clean vs noisy CKA";
    h.x_label = "SNR (dB)";
    h.y_label = "layer";
    for (const auto& l : layer_order) h.row_labels.push_back(layer_label(blocks[l], l));
    for (int s : snrs) h.col_labels.push_back(std::to_string(s));
    h.values = Matrix::Constant(static_cast<Eigen::Index>(layer_order.size()), static_cast<Eigen::Index>(snrs.size()),
                                std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < layer_order.size(); ++i) {
      std::size_t j = 0;
      for (int s : snrs) {
        auto it = values.find({layer_order[i], s});
        if (it != values.end()) h.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = it->second;
        ++j;
      }
    }
    write_text(figs / "cka_heatmap.svg", render_heatmap(h));
    ++written;
  }

  if (fs::exists(c.paths.fit_csv)) {
    CsvTable t = read_csv(c.paths.fit_csv);
    const std::size_t i_layer = t.column("layer_id"), i_block = t.column("block");
    std::vector<double> slope = t.numeric_column("slope"), intercept = t.numeric_column("intercept");
    std::vector<std::string> labels;
    std::vector<Marker> markers;
    const std::size_t i_in = t.column("is_skip_input"), i_out = t.column("is_skip_output");
    for (const auto& row : t.rows) {
      labels.push_back(layer_label(row[i_block], row[i_layer]));
      if (parse_bool_field(row[i_out]))
        markers.push_back(Marker::Star);
      else if (parse_bool_field(row[i_in]))
        markers.push_back(Marker::Triangle);
      else
        markers.push_back(Marker::None);
    }
    std::vector<CurvePanel> panels{{"CKA slope per layer", "slope (1/dB)", {{"slope", slope, markers}}},
                                   {"CKA intercept per layer", "intercept", {{"intercept", intercept, markers}}}};
    write_text(figs / "cka_fit.svg", render_curves(panels, labels));
    ++written;
  }

  const fs::path dir = c.paths.diffusion;
  const fs::path intra_csv = dir / "diffusion_intra.csv";
  if (fs::exists(intra_csv)) {
    CsvTable t = read_csv(intra_csv);
    const std::size_t i_layer = t.column("layer_id");
    std::vector<std::string> ids;
    for (const auto& row : t.rows)
      if (ids.empty() || ids.back() != row[i_layer]) ids.push_back(row[i_layer]);
    for (const auto& id : ids) {
      const fs::path f = dir / ("diffusion_intra_dist_" + id + ".csv");
      if (!fs::exists(f)) continue;
      DistanceMatrix m = read_matrix_csv(f);
      HeatmapSpec h{"Diffusion distance across SNR: " + id, m.labels, m.labels, m.values, 0.0,
                    std::max(m.values.maxCoeff(), 1e-12), "SNR (dB)", "SNR (dB)"};
      write_text(figs / ("diffusion_intra_" + id + ".svg"), render_heatmap(h));
      ++written;
    }
  }
  for (int snr : c.representative_snrs) {
    const fs::path f = dir / ("diffusion_inter_" + snr_tag(snr) + ".csv");
    if (!fs::exists(f)) continue;
    DistanceMatrix m = read_matrix_csv(f);
    HeatmapSpec h{"Inter-layer diffusion distance at " + snr_tag(snr) + " dB", m.labels, m.labels, m.values, 0.0,
                  std::max(m.values.maxCoeff(), 1e-12), "layer", "layer"};
    write_text(figs / ("diffusion_inter_" + snr_tag(snr) + ".svg"), render_heatmap(h));
    ++written;
  }
  if (written == 0) throw Error(ErrorCode::MissingInput, "nothing to render");
  log("render: " + std::to_string(written) + " figures");
}

void run_stage(Stage s, const PipelineConfig& c) {
  switch (s) {
    case Stage::Mix: return stage_mix(c);
    case Stage::Pool: return stage_pool(c);
    case Stage::Cka: return stage_cka(c);
    case Stage::Fit: return stage_fit(c);
    case Stage::Diffusion: return stage_diffusion(c);
    case Stage::Render: return stage_render(c);
  }
}

bool requested(const PipelineConfig& c, Stage s) {
  return std::find(c.stages.begin(), c.stages.end(), s) != c.stages.end();
}

fs::path marker_dir(const PipelineConfig& c, Stage s) {
  if (!c.paths.output.empty()) return c.paths.output;
  switch (s) {
    case Stage::Mix: return c.paths.mixtures;
    case Stage::Pool: return c.paths.embeddings.parent_path();
    case Stage::Cka: return c.paths.cka_csv.parent_path();
    case Stage::Fit: return c.paths.fit_csv.parent_path();
    case Stage::Diffusion: return c.paths.diffusion;
    case Stage::Render: return c.paths.figures;
  }
  return {};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Mix: return "mix";
    case Stage::Pool: return "pool";
    case Stage::Cka: return "cka";
    case Stage::Fit: return "fit";
    case Stage::Diffusion: return "diffusion";
    case Stage::Render: return "render";
  }
  return "?";
}

Stage parse_stage(const std::string& name) {
  for (Stage s : kAllStages)
    if (stage_name(s) == name) return s;
  config_error("unknown stage '" + name + "'");
}

void PipelinePaths::fill_defaults() {
  if (activations_manifest.empty() && !activations.empty())
    activations_manifest = activations / "activations_manifest.json";
  if (output.empty()) return;
  if (mixtures.empty()) mixtures = output / "mixtures";
  if (embeddings.empty()) embeddings = output / "embeddings.bin";
  if (cka_csv.empty()) cka_csv = output / "cka.csv";
  if (fit_csv.empty()) fit_csv = output / "cka_fit.csv";
  if (diffusion.empty()) diffusion = output / "diffusion";
  if (figures.empty()) figures = output / "figures";
}

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
  check_keys(j, "config", {"schema_version", "seed", "jobs", "stages", "paths", "sweep", "cka", "diffusion"});
  if (!j.contains("schema_version")) config_error("missing schema_version");
  if (get_or<int>(j, "schema_version", 0) != kSchemaVersion)
    config_error("unsupported schema_version " + j["schema_version"].dump());

  PipelineConfig c;
  if (j.contains("seed")) c.seed = get_or<std::uint64_t>(j, "seed", 0);
  c.jobs = get_or<int>(j, "jobs", 1);
  if (j.contains("stages")) {
    c.stages.clear();
    for (const auto& s : get_or<std::vector<std::string>>(j, "stages", {})) c.stages.push_back(parse_stage(s));
  }

  if (j.contains("paths")) {
    const json& p = j["paths"];
    check_keys(p, "paths", {"clean", "noise", "activations", "activations_manifest", "output", "mixtures", "embeddings",
                            "cka_csv", "fit_csv", "diffusion", "figures"});
    auto path_of = [&](const char* key, fs::path& dst) {
      if (p.contains(key)) dst = resolve(base_dir, get_or<std::string>(p, key, ""));
    };
    path_of("clean", c.paths.clean);
    path_of("noise", c.paths.noise);
    path_of("activations", c.paths.activations);
    path_of("activations_manifest", c.paths.activations_manifest);
    path_of("output", c.paths.output);
    path_of("mixtures", c.paths.mixtures);
    path_of("embeddings", c.paths.embeddings);
    path_of("cka_csv", c.paths.cka_csv);
    path_of("fit_csv", c.paths.fit_csv);
    path_of("diffusion", c.paths.diffusion);
    path_of("figures", c.paths.figures);
  }

  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    check_keys(s, "sweep", {"snr_min", "snr_max", "clip_s", "window_s", "target_lufs"});
    c.sweep.snr_grid_db = SweepConfig::make_grid(get_or<int>(s, "snr_min", -10), get_or<int>(s, "snr_max", 30));
    c.sweep.clip_duration_s = get_or<double>(s, "clip_s", c.sweep.clip_duration_s);
    c.sweep.window_duration_s = get_or<double>(s, "window_s", c.sweep.window_duration_s);
    c.sweep.target_lufs = get_or<double>(s, "target_lufs", c.sweep.target_lufs);
  }

  if (j.contains("cka")) {
    const json& k = j["cka"];
    check_keys(k, "cka", {"bootstrap", "ci_level", "rows", "fit_mode"});
    c.cka.bootstrap_resamples = get_or<int>(k, "bootstrap", c.cka.bootstrap_resamples);
    c.cka.ci_level = get_or<double>(k, "ci_level", c.cka.ci_level);
    std::string rows = get_or<std::string>(k, "rows", "utterances");
    if (rows == "utterances")
      c.cka.rows = RowUnit::Utterances;
    else if (rows == "centroids")
      c.cka.rows = RowUnit::Centroids;
    else
      config_error("cka.rows must be utterances or centroids");
    std::string mode = get_or<std::string>(k, "fit_mode", "averaged_values");
    if (mode == "averaged_values")
      c.fit_mode = FitMode::AveragedValues;
    else if (mode == "averaged_fits")
      c.fit_mode = FitMode::AveragedFits;
    else
      config_error("cka.fit_mode must be averaged_values or averaged_fits");
  }

  if (j.contains("diffusion")) {
    const json& d = j["diffusion"];
    check_keys(d, "diffusion", {"mode", "epsilon", "coords", "time", "intra_points", "inter_layers",
                                "include_clean_reference", "representative_snrs"});
    std::string mode = get_or<std::string>(d, "mode", "both");
    if (mode == "both")
      c.diffusion_run = DiffusionRun::Both;
    else if (mode == "intra")
      c.diffusion_run = DiffusionRun::Intra;
    else if (mode == "inter")
      c.diffusion_run = DiffusionRun::Inter;
    else
      config_error("diffusion.mode must be intra, inter or both");
    if (d.contains("epsilon")) {
      if (d["epsilon"].is_string()) {
        if (d["epsilon"] != "median") config_error("diffusion.epsilon must be \"median\" or a number");
        c.diffusion.epsilon_mode = EpsilonMode::Median;
      } else {
        c.diffusion.epsilon_mode = EpsilonMode::Fixed;
        c.diffusion.epsilon_value = get_or<double>(d, "epsilon", 1.0);
      }
    }
    c.diffusion.n_coords = get_or<int>(d, "coords", c.diffusion.n_coords);
    c.diffusion.time = get_or<int>(d, "time", c.diffusion.time);
    std::string ip = get_or<std::string>(d, "intra_points", "noise_averaged");
    if (ip == "noise_averaged")
      c.diffusion.intra_points = IntraPoints::NoiseAveraged;
    else if (ip == "per_noise")
      c.diffusion.intra_points = IntraPoints::PerNoise;
    else
      config_error("diffusion.intra_points must be noise_averaged or per_noise");
    std::string il = get_or<std::string>(d, "inter_layers", "first_in_block");
    if (il == "first_in_block")
      c.diffusion.inter_layers = InterLayers::FirstInBlock;
    else if (il == "all_same_dim")
      c.diffusion.inter_layers = InterLayers::AllSameDim;
    else
      config_error("diffusion.inter_layers must be first_in_block or all_same_dim");
    c.diffusion.include_clean_reference = get_or<bool>(d, "include_clean_reference", true);
    c.representative_snrs = get_or<std::vector<int>>(d, "representative_snrs", c.representative_snrs);
  }
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) config_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    config_error(path.string() + ": " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

void PipelineConfig::validate() const {
  if (stages.empty()) config_error("no stages requested");
  if (jobs < 1) config_error("jobs must be at least 1");
  if ((requested(*this, Stage::Mix) || requested(*this, Stage::Cka)) && !seed)
    config_error("a seed is required for mix and cka");
  try {
    sweep.validate();
    cka.validate();
    diffusion.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    config_error(e.what());
  }

  auto need = [](const fs::path& p, const char* what, bool dir) {
    if (p.empty()) config_error(std::string("paths.") + what + " is not set");
    if (dir ? !fs::is_directory(p) : !fs::is_regular_file(p))
      config_error(std::string("paths.") + what + " does not exist: " + p.string());
  };
  auto set = [](const fs::path& p, const char* what) {
    if (p.empty()) config_error(std::string("paths.") + what + " is not set");
  };
  if (requested(*this, Stage::Mix)) {
    need(paths.clean, "clean", true);
    need(paths.noise, "noise", true);
    set(paths.mixtures, "mixtures");
  }
  if (requested(*this, Stage::Pool)) {
    need(paths.activations, "activations", true);
    need(paths.activations_manifest, "activations_manifest", false);
    set(paths.embeddings, "embeddings");
  }
  if (requested(*this, Stage::Cka)) {
    set(paths.embeddings, "embeddings");
    set(paths.cka_csv, "cka_csv");
  }
  if (requested(*this, Stage::Fit)) {
    set(paths.cka_csv, "cka_csv");
    set(paths.fit_csv, "fit_csv");
  }
  if (requested(*this, Stage::Diffusion)) {
    set(paths.embeddings, "embeddings");
    set(paths.diffusion, "diffusion");
  }
  if (requested(*this, Stage::Render)) set(paths.figures, "figures");
  if (write_summary && paths.output.empty()) config_error("paths.output is not set");
}

StageError::StageError(Stage stage, ErrorCode cause, const std::string& message)
    : Error(ErrorCode::StageFailure,
            "stage " + std::string(stage_name(stage)) + " failed (" + std::string(to_string(cause)) + "): " + message),
      stage_(stage),
      cause_(cause) {}

std::uint64_t hash_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::uint64_t h = kFnvOffset;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    auto got = static_cast<std::size_t>(in.gcount());
    h = fnv1a64(std::span(reinterpret_cast<const unsigned char*>(buf.data()), got), h);
  }
  return h;
}

std::vector<LayerInfo> load_layer_metadata(const PipelinePaths& paths) {
  if (!paths.activations_manifest.empty() && fs::is_regular_file(paths.activations_manifest))
    return ActivationsManifest::load(paths.activations_manifest).layers;
  if (!paths.embeddings.empty() && fs::is_regular_file(paths.embeddings))
    return EmbeddingSet::load(paths.embeddings).layers();
  throw Error(ErrorCode::MissingInput, "no activations manifest or embeddings file for layer metadata");
}

RunReport run_pipeline(const PipelineConfig& requested_config) {
  PipelineConfig config = requested_config;
  config.paths.fill_defaults();
  config.validate();
  kernels::set_num_threads(config.jobs);
  if (!config.paths.output.empty()) fs::create_directories(config.paths.output);

  RunReport report;
  for (Stage s : kAllStages) {
    if (!requested(config, s)) continue;
    const fs::path marker = marker_dir(config, s) / (std::string(stage_name(s)) + ".partial");
    log("stage " + std::string(stage_name(s)));
    try {
      run_stage(s, config);
    } catch (const std::exception& e) {
      const auto* err = dynamic_cast<const Error*>(&e);
      ErrorCode cause = err ? err->code() : ErrorCode::StageFailure;
      std::string msg = e.what();
      try {
        write_text(marker, msg + "\n");
      } catch (const std::exception&) {
      }
      throw StageError(s, cause, msg);
    }
    std::error_code ec;
    fs::remove(marker, ec);
    report.stages_run.push_back(s);
  }

  if (config.write_summary) {
    const fs::path root = config.paths.output;
    const fs::path summary_path = root / "run_summary.json";
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (!entry.is_regular_file()) continue;
      if (entry.path() == summary_path) continue;
      OutputFile f;
      f.path = entry.path().lexically_relative(root).generic_string();
      f.hash = hash_file(entry.path());
      f.bytes = entry.file_size();
      report.files.push_back(std::move(f));
    }
    std::sort(report.files.begin(), report.files.end(),
              [](const OutputFile& a, const OutputFile& b) { return a.path < b.path; });

    json j;
    j["schema"] = "snrprobe.run/1";
    j["seed"] = config.seed ? json(*config.seed) : json(nullptr);
    json stages = json::array();
    for (Stage s : report.stages_run) stages.push_back(stage_name(s));
    j["stages"] = stages;
    json files = json::array();
    for (const auto& f : report.files) files.push_back({{"path", f.path}, {"fnv1a64", hex64(f.hash)}, {"bytes", f.bytes}});
    j["files"] = files;
    write_text(summary_path, j.dump(2) + "\n");
  }
  return report;
}

}  // namespace snrprobe
