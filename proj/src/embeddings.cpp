#include "snrprobe/embeddings.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include <json.hpp>

#include "snrprobe/error.hpp"
#include "snrprobe/tensor.hpp"

namespace snrprobe {
namespace {

constexpr char kEmbeddingMagic[8] = {'S', 'P', 'E', 'M', 'B', '0', '0', '1'};

nlohmann::json layer_to_json(const LayerInfo& l) {
  return {{"id", l.id},
          {"block", l.block},
          {"first_in_block", l.first_in_block},
          {"skip_input", l.skip_input},
          {"skip_output", l.skip_output},
          {"token_axis", l.token_axis},
          {"axes", l.axes},
          {"pooled_shape", l.pooled_shape}};
}

LayerInfo layer_from_json(const nlohmann::json& j, std::size_t depth) {
  LayerInfo l;
  l.id = j.at("id").get<std::string>();
  l.block = j.at("block").get<std::string>();
  l.depth = depth;
  l.first_in_block = j.value("first_in_block", false);
  l.skip_input = j.value("skip_input", false);
  l.skip_output = j.value("skip_output", false);
  l.token_axis = j.value("token_axis", std::size_t{0});
  l.axes = j.value("axes", std::vector<std::string>{});
  l.pooled_shape = j.value("pooled_shape", std::vector<std::size_t>{});
  if (l.id.empty() || l.block.empty()) throw Error(ErrorCode::ConfigError, "layer id and block must be nonempty");
  return l;
}

}  // namespace

std::size_t LayerInfo::dim() const {
  std::size_t d = 1;
  for (std::size_t s : pooled_shape) d *= s;
  return pooled_shape.empty() ? 0 : d;
}

const std::vector<double>& CentroidSet::at(const CellKey& key) const {
  auto it = centroids.find(key);
  if (it == centroids.end()) {
    throw Error(ErrorCode::MissingCell, "no centroid for layer " + key.layer_id +
                                            (key.clean ? " (clean)" : " noise " + key.noise_type + " snr " + std::to_string(key.snr_db)));
  }
  return it->second;
}

std::vector<double> mean_of(const std::vector<const std::vector<double>*>& vectors) {
  if (vectors.empty()) throw Error(ErrorCode::InvalidArgument, "mean of zero vectors");
  const std::vector<double>& first = *vectors.front();
  std::vector<double> acc(first.size(), 0.0);
  std::vector<char> same(first.size(), 1);
  for (const auto* v : vectors) {
    if (v->size() != acc.size()) throw Error(ErrorCode::DimensionMismatch, "vectors differ in length");
    for (std::size_t i = 0; i < acc.size(); ++i) {
      acc[i] += (*v)[i];
      same[i] &= (*v)[i] == first[i];
    }
  }
  const double n = static_cast<double>(vectors.size());
  // n x / n can round away from x; keep constant components exact
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = same[i] ? first[i] : acc[i] / n;
  return acc;
}

CentroidSet build_centroids(std::vector<Embedding> embeddings) {
  std::sort(embeddings.begin(), embeddings.end(), [](const Embedding& a, const Embedding& b) {
    return std::tie(a.cell, a.utterance_id) < std::tie(b.cell, b.utterance_id);
  });
  std::map<std::string, std::size_t> layer_dim;
  std::map<CellKey, std::vector<const std::vector<double>*>> groups;
  for (const Embedding& e : embeddings) {
    auto [it, inserted] = layer_dim.emplace(e.cell.layer_id, e.vector.size());
    if (!inserted && it->second != e.vector.size()) {
      throw Error(ErrorCode::DimensionMismatch, "layer " + e.cell.layer_id + " mixes dimensions " +
                                                    std::to_string(it->second) + " and " + std::to_string(e.vector.size()));
    }
    groups[e.cell].push_back(&e.vector);
  }
  CentroidSet out;
  for (const auto& [cell, members] : groups) {
    out.centroids.emplace(cell, mean_of(members));
    out.counts.emplace(cell, members.size());
  }
  return out;
}

ActivationsManifest ActivationsManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot open activations manifest " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }

  ActivationsManifest m;
  try {
    std::set<std::string> ids;
    for (const auto& lj : j.at("layers")) {
      LayerInfo l = layer_from_json(lj, m.layers.size());
      if (!ids.insert(l.id).second) throw Error(ErrorCode::ConfigError, "duplicate layer id " + l.id);
      m.layers.push_back(std::move(l));
    }
    for (const auto& ej : j.at("entries")) {
      ActivationEntry e;
      const std::string layer = ej.at("layer").get<std::string>();
      if (!ids.contains(layer)) throw Error(ErrorCode::ConfigError, "entry references unknown layer " + layer);
      if (ej.value("condition", std::string("noisy")) == "clean") {
        e.cell = CellKey::clean_ref(layer);
      } else {
        e.cell = CellKey::noisy(layer, ej.at("noise").get<std::string>(), ej.at("snr_db").get<int>());
      }
      e.utterance_id = ej.at("utterance").get<std::string>();
      e.window = ej.value("window", 0);
      e.path = ej.at("path").get<std::string>();
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return m;
}

EmbeddingSet::EmbeddingSet(std::vector<LayerInfo> layers, std::vector<Embedding> embeddings)
    : layers_(std::move(layers)), embeddings_(std::move(embeddings)) {
  std::map<std::string, std::size_t> depth;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].depth = i;
    depth[layers_[i].id] = i;
  }
  for (const Embedding& e : embeddings_) {
    auto it = depth.find(e.cell.layer_id);
    if (it == depth.end()) throw Error(ErrorCode::ConfigError, "embedding for unknown layer " + e.cell.layer_id);
    if (e.vector.size() != layers_[it->second].dim()) {
      throw Error(ErrorCode::DimensionMismatch, "embedding of layer " + e.cell.layer_id + " has dimension " +
                                                    std::to_string(e.vector.size()) + ", expected " +
                                                    std::to_string(layers_[it->second].dim()));
    }
  }
  std::sort(embeddings_.begin(), embeddings_.end(), [&](const Embedding& a, const Embedding& b) {
    const std::size_t da = depth.at(a.cell.layer_id), db = depth.at(b.cell.layer_id);
    return std::tie(da, a.cell, a.utterance_id) < std::tie(db, b.cell, b.utterance_id);
  });
  std::set<std::string> utts, noises;
  std::set<int> snrs;
  for (std::size_t i = 0; i < embeddings_.size(); ++i) {
    const Embedding& e = embeddings_[i];
    if (!index_.emplace(std::make_pair(e.cell, e.utterance_id), i).second) {
      throw Error(ErrorCode::ConfigError, "duplicate embedding for utterance " + e.utterance_id);
    }
    utts.insert(e.utterance_id);
    if (!e.cell.clean) {
      noises.insert(e.cell.noise_type);
      snrs.insert(e.cell.snr_db);
    }
  }
  utterances_.assign(utts.begin(), utts.end());
  noise_types_.assign(noises.begin(), noises.end());
  snrs_.assign(snrs.begin(), snrs.end());
}

const LayerInfo& EmbeddingSet::layer(const std::string& id) const {
  for (const LayerInfo& l : layers_) {
    if (l.id == id) return l;
  }
  throw Error(ErrorCode::MissingCell, "unknown layer " + id);
}

const std::vector<double>* EmbeddingSet::find(const CellKey& cell, const std::string& utterance) const {
  auto it = index_.find(std::make_pair(cell, utterance));
  return it == index_.end() ? nullptr : &embeddings_[it->second].vector;
}

Matrix EmbeddingSet::rows(const CellKey& cell, const std::vector<std::string>& utterances) const {
  const std::size_t d = layer(cell.layer_id).dim();
  Matrix m(static_cast<Eigen::Index>(utterances.size()), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < utterances.size(); ++r) {
    const auto* v = find(cell, utterances[r]);
    if (v == nullptr) {
      throw Error(ErrorCode::MissingCell, "no embedding for layer " + cell.layer_id + ", utterance " + utterances[r] +
                                              (cell.clean ? " (clean)" : ", noise " + cell.noise_type + ", snr " + std::to_string(cell.snr_db)));
    }
    for (std::size_t c = 0; c < d; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = (*v)[c];
  }
  return m;
}

std::vector<std::string> EmbeddingSet::utterances_in(const CellKey& cell) const {
  std::vector<std::string> out;
  for (auto it = index_.lower_bound(std::make_pair(cell, std::string{})); it != index_.end() && it->first.first == cell; ++it) {
    out.push_back(it->first.second);
  }
  return out;
}

CentroidSet EmbeddingSet::centroids() const { return build_centroids(embeddings_); }

void EmbeddingSet::save(const std::filesystem::path& path) const {
  std::map<std::string, std::size_t> depth;
  nlohmann::json header;
  header["schema"] = "snrprobe.embeddings/1";
  auto& lj = header["layers"] = nlohmann::json::array();
  for (const LayerInfo& l : layers_) {
    depth[l.id] = l.depth;
    lj.push_back(layer_to_json(l));
  }
  auto& records = header["records"] = nlohmann::json::array();
  for (const Embedding& e : embeddings_) {
    records.push_back({depth.at(e.cell.layer_id), e.cell.clean, e.cell.noise_type, e.cell.snr_db, e.utterance_id});
  }
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(kEmbeddingMagic, sizeof kEmbeddingMagic);
  auto put_u64 = [&](std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
  };
  put_u64(text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Embedding& e : embeddings_) {
    for (double v : e.vector) put_u64(std::bit_cast<std::uint64_t>(v));
  }
}

EmbeddingSet EmbeddingSet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot open embeddings " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kEmbeddingMagic, 8) != 0) {
    throw Error(ErrorCode::BadMagic, path.string() + " is not an embeddings file");
  }
  auto get_u64 = [&](std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[at + static_cast<std::size_t>(i)];
    return v;
  };
  const std::size_t header_len = get_u64(8);
  if (16 + header_len > bytes.size()) throw Error(ErrorCode::CorruptFile, path.string() + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptFile, path.string() + ": " + e.what());
  }
  std::vector<LayerInfo> layers;
  for (const auto& lj : header.at("layers")) layers.push_back(layer_from_json(lj, layers.size()));

  std::vector<Embedding> embeddings;
  std::size_t pos = 16 + header_len;
  for (const auto& r : header.at("records")) {
    const auto li = r.at(0).get<std::size_t>();
    if (li >= layers.size()) throw Error(ErrorCode::CorruptFile, "record references unknown layer");
    Embedding e;
    e.cell = r.at(1).get<bool>() ? CellKey::clean_ref(layers[li].id)
                                 : CellKey::noisy(layers[li].id, r.at(2).get<std::string>(), r.at(3).get<int>());
    e.utterance_id = r.at(4).get<std::string>();
    const std::size_t d = layers[li].dim();
    if (pos + 8 * d > bytes.size()) throw Error(ErrorCode::ShapeOverflow, path.string() + ": payload shorter than header claims");
    e.vector.resize(d);
    for (std::size_t i = 0; i < d; ++i, pos += 8) e.vector[i] = std::bit_cast<double>(get_u64(pos));
    embeddings.push_back(std::move(e));
  }
  if (pos != bytes.size()) throw Error(ErrorCode::CorruptFile, path.string() + ": trailing bytes");
  return EmbeddingSet(std::move(layers), std::move(embeddings));
}

EmbeddingSet pool_activations(const ActivationsManifest& manifest, const std::filesystem::path& activations_dir) {
  std::vector<LayerInfo> layers = manifest.layers;
  std::map<std::string, std::size_t> layer_index;
  for (std::size_t i = 0; i < layers.size(); ++i) layer_index[layers[i].id] = i;

  const auto n = static_cast<std::ptrdiff_t>(manifest.entries.size());
  std::vector<std::vector<double>> pooled(manifest.entries.size());
  std::vector<std::vector<std::size_t>> shapes(manifest.entries.size());
  std::vector<std::string> errors(manifest.entries.size());
  std::vector<ErrorCode> codes(manifest.entries.size(), ErrorCode::IoError);

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const ActivationEntry& e = manifest.entries[k];
    try {
      ActivationTensor t = read_tensor(activations_dir / e.path);
      t.layer_id = e.cell.layer_id;
      const LayerInfo& l = layers[layer_index.at(e.cell.layer_id)];
      shapes[k] = pooled_shape(t.shape, l.token_axis);
      pooled[k] = global_average_pool(t, l.token_axis);
    } catch (const Error& ex) {
      errors[k] = ex.what();
      codes[k] = ex.code();
    } catch (const std::exception& ex) {
      errors[k] = ex.what();
    }
  }
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (!errors[k].empty()) throw Error(codes[k], manifest.entries[k].path + ": " + errors[k]);
  }

  // Trailing axes must agree across every tensor of a layer.
  for (std::size_t k = 0; k < manifest.entries.size(); ++k) {
    LayerInfo& l = layers[layer_index.at(manifest.entries[k].cell.layer_id)];
    if (l.pooled_shape.empty()) {
      l.pooled_shape = shapes[k];
    } else if (l.pooled_shape != shapes[k]) {
      throw Error(ErrorCode::DimensionMismatch, "layer " + l.id + ": tensor " + manifest.entries[k].path +
                                                    " has different trailing axes");
    }
  }

  std::map<std::pair<CellKey, std::string>, std::map<int, std::size_t>> windows;
  for (std::size_t k = 0; k < manifest.entries.size(); ++k) {
    const ActivationEntry& e = manifest.entries[k];
    if (!windows[{e.cell, e.utterance_id}].emplace(e.window, k).second) {
      throw Error(ErrorCode::ConfigError, "duplicate activation entry " + e.path);
    }
  }
  std::vector<Embedding> out;
  out.reserve(windows.size());
  for (const auto& [key, by_window] : windows) {
    std::vector<const std::vector<double>*> members;
    for (const auto& [w, k] : by_window) members.push_back(&pooled[k]);
    out.push_back({key.first, key.second, members.size() == 1 ? *members.front() : mean_of(members)});
  }
  return EmbeddingSet(std::move(layers), std::move(out));
}

}  // namespace snrprobe
