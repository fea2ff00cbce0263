#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace snrprobe {

enum class Dtype { F4, F8 };

/// Dense C-order activation array. Values are held as double regardless of
/// the on-disk dtype; f4 round-trips exactly.
struct ActivationTensor {
  std::string layer_id;
  std::vector<std::size_t> shape;
  std::vector<double> data;
  Dtype dtype = Dtype::F8;

  std::size_t element_count() const;
};

enum class Container { Npy, Tnsr };

/// Reads an NPY (v1/v2, little-endian f4/f8, C order) or TNSR1 container,
/// detected by magic bytes.
ActivationTensor read_tensor(const std::filesystem::path& path);

void write_tensor(const ActivationTensor& tensor, const std::filesystem::path& path,
                  Container container = Container::Npy);

/// Arithmetic mean over `token_axis`; the remaining axes are flattened in C order.
std::vector<double> global_average_pool(const ActivationTensor& tensor, std::size_t token_axis);

/// Shape left after removing `token_axis`.
std::vector<std::size_t> pooled_shape(const std::vector<std::size_t>& shape, std::size_t token_axis);

}  // namespace snrprobe
