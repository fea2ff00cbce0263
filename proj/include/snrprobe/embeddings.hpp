#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "snrprobe/matrix.hpp"

namespace snrprobe {

/// Layer metadata from the activations manifest; `depth` is the manifest order.
struct LayerInfo {
  std::string id;
  std::string block;
  std::size_t depth = 0;
  bool first_in_block = false;
  bool skip_input = false;
  bool skip_output = false;
  std::size_t token_axis = 0;
  std::vector<std::string> axes;
  std::vector<std::size_t> pooled_shape;  // filled by pooling

  std::size_t dim() const;
};

inline constexpr const char* kLatentBlock = "latent";

/// One (layer, condition) cell. The clean reference has `clean` set and
/// ignores noise type and SNR.
struct CellKey {
  std::string layer_id;
  bool clean = false;
  std::string noise_type;
  int snr_db = 0;

  static CellKey noisy(std::string layer, std::string noise, int snr) {
    return {std::move(layer), false, std::move(noise), snr};
  }
  static CellKey clean_ref(std::string layer) { return {std::move(layer), true, {}, 0}; }

  auto operator<=>(const CellKey&) const = default;
};

struct Embedding {
  CellKey cell;
  std::string utterance_id;
  std::vector<double> vector;
};

struct CentroidSet {
  std::map<CellKey, std::vector<double>> centroids;
  std::map<CellKey, std::size_t> counts;

  const std::vector<double>& at(const CellKey& key) const;
};

/// Per-cell mean across utterances, summed in utterance-id order.
CentroidSet build_centroids(std::vector<Embedding> embeddings);

struct ActivationEntry {
  CellKey cell;
  std::string utterance_id;
  int window = 0;
  std::string path;
};

/// Parsed `activations_manifest.json`.
struct ActivationsManifest {
  std::vector<LayerInfo> layers;
  std::vector<ActivationEntry> entries;

  static ActivationsManifest load(const std::filesystem::path& path);
};

/// Pooled embeddings for every (cell, utterance), plus layer metadata.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(std::vector<LayerInfo> layers, std::vector<Embedding> embeddings);

  const std::vector<LayerInfo>& layers() const { return layers_; }
  const LayerInfo& layer(const std::string& id) const;
  const std::vector<Embedding>& embeddings() const { return embeddings_; }
  const std::vector<std::string>& utterances() const { return utterances_; }
  const std::vector<std::string>& noise_types() const { return noise_types_; }
  const std::vector<int>& snr_grid() const { return snrs_; }

  const std::vector<double>* find(const CellKey& cell, const std::string& utterance) const;

  /// Rows = `utterances` in order. Throws MissingCell if any is absent.
  Matrix rows(const CellKey& cell, const std::vector<std::string>& utterances) const;

  /// Utterances present in `cell`, sorted.
  std::vector<std::string> utterances_in(const CellKey& cell) const;

  CentroidSet centroids() const;

  void save(const std::filesystem::path& path) const;
  static EmbeddingSet load(const std::filesystem::path& path);

 private:
  std::vector<LayerInfo> layers_;
  std::vector<Embedding> embeddings_;  // sorted by (depth, cell, utterance)
  std::map<std::pair<CellKey, std::string>, std::size_t> index_;
  std::vector<std::string> utterances_;
  std::vector<std::string> noise_types_;
  std::vector<int> snrs_;
};

/// Reads and pools every manifest entry. Window-level vectors of one
/// utterance are averaged in window order.
EmbeddingSet pool_activations(const ActivationsManifest& manifest, const std::filesystem::path& activations_dir);

/// Element-wise mean of equal-length vectors in the given order.
std::vector<double> mean_of(const std::vector<const std::vector<double>*>& vectors);

}  // namespace snrprobe
