#include "snrprobe/tensor.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <regex>

#include "snrprobe/error.hpp"
#include "snrprobe/kernels.hpp"

namespace snrprobe {
namespace {

constexpr unsigned char kNpyMagic[] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr char kTnsrMagic[] = {'T', 'N', 'S', 'R', '1'};

std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void put_le(std::vector<unsigned char>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

std::size_t checked_count(const std::vector<std::size_t>& shape) {
  std::size_t count = 1;
  for (std::size_t d : shape) {
    if (d != 0 && count > std::numeric_limits<std::size_t>::max() / d) {
      throw Error(ErrorCode::ShapeOverflow, "element count overflows");
    }
    count *= d;
  }
  return count;
}

void decode_payload(ActivationTensor& t, const unsigned char* p, std::size_t bytes, const std::string& name) {
  const std::size_t count = checked_count(t.shape);
  const std::size_t width = t.dtype == Dtype::F4 ? 4 : 8;
  if (bytes < count * width) {
    throw Error(ErrorCode::ShapeOverflow, name + ": header claims " + std::to_string(count) +
                                              " elements, payload holds " + std::to_string(bytes / width));
  }
  if (bytes > count * width) throw Error(ErrorCode::CorruptFile, name + ": trailing bytes after payload");
  t.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    t.data[i] = width == 4 ? static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(get_le(p + 4 * i, 4))))
                           : std::bit_cast<double>(get_le(p + 8 * i, 8));
  }
}

ActivationTensor parse_npy(const std::vector<unsigned char>& bytes, const std::string& name) {
  if (bytes.size() < 10) throw Error(ErrorCode::CorruptFile, name + ": truncated NPY header");
  const int major = bytes[6];
  std::size_t header_len = 0, header_start = 0;
  if (major == 1) {
    header_len = get_le(bytes.data() + 8, 2);
    header_start = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw Error(ErrorCode::CorruptFile, name + ": truncated NPY header");
    header_len = get_le(bytes.data() + 8, 4);
    header_start = 12;
  } else {
    throw Error(ErrorCode::UnsupportedFormat, name + ": NPY version " + std::to_string(major));
  }
  if (header_start + header_len > bytes.size()) throw Error(ErrorCode::CorruptFile, name + ": truncated NPY header");
  const std::string header(bytes.begin() + static_cast<std::ptrdiff_t>(header_start),
                           bytes.begin() + static_cast<std::ptrdiff_t>(header_start + header_len));

  static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
  static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
  static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
  std::smatch m;
  ActivationTensor t;
  if (!std::regex_search(header, m, descr_re)) throw Error(ErrorCode::CorruptFile, name + ": NPY header lacks descr");
  const std::string descr = m[1];
  if (descr == "<f4") {
    t.dtype = Dtype::F4;
  } else if (descr == "<f8") {
    t.dtype = Dtype::F8;
  } else {
    throw Error(ErrorCode::UnsupportedDtype, name + ": dtype " + descr);
  }
  if (!std::regex_search(header, m, order_re)) throw Error(ErrorCode::CorruptFile, name + ": NPY header lacks fortran_order");
  if (m[1] == "True") throw Error(ErrorCode::UnsupportedFormat, name + ": Fortran-order arrays are not supported");
  if (!std::regex_search(header, m, shape_re)) throw Error(ErrorCode::CorruptFile, name + ": NPY header lacks shape");
  const std::string dims = m[1];
  static const std::regex int_re(R"(\d+)");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), int_re); it != std::sregex_iterator(); ++it) {
    t.shape.push_back(static_cast<std::size_t>(std::stoull(it->str())));
  }
  const std::size_t payload = header_start + header_len;
  decode_payload(t, bytes.data() + payload, bytes.size() - payload, name);
  return t;
}

ActivationTensor parse_tnsr(const std::vector<unsigned char>& bytes, const std::string& name) {
  if (bytes.size() < 9) throw Error(ErrorCode::CorruptFile, name + ": truncated TNSR header");
  const auto rank = static_cast<std::size_t>(get_le(bytes.data() + 5, 4));
  const std::size_t header = 9 + 8 * rank;
  if (rank > 32 || header > bytes.size()) throw Error(ErrorCode::CorruptFile, name + ": truncated TNSR header");
  ActivationTensor t;
  for (std::size_t i = 0; i < rank; ++i) t.shape.push_back(static_cast<std::size_t>(get_le(bytes.data() + 9 + 8 * i, 8)));
  const std::size_t count = checked_count(t.shape);
  const std::size_t payload = bytes.size() - header;
  // The container carries no dtype tag; the payload width decides.
  if (count > 0 && payload == count * 4) {
    t.dtype = Dtype::F4;
  } else {
    t.dtype = Dtype::F8;
  }
  decode_payload(t, bytes.data() + header, payload, name);
  return t;
}

}  // namespace

std::size_t ActivationTensor::element_count() const { return checked_count(shape); }

ActivationTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot open " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const std::string name = path.string();
  if (bytes.size() >= 6 && std::memcmp(bytes.data(), kNpyMagic, 6) == 0) return parse_npy(bytes, name);
  if (bytes.size() >= 5 && std::memcmp(bytes.data(), kTnsrMagic, 5) == 0) return parse_tnsr(bytes, name);
  throw Error(ErrorCode::BadMagic, name + ": neither NPY nor TNSR1");
}

void write_tensor(const ActivationTensor& tensor, const std::filesystem::path& path, Container container) {
  const std::size_t count = tensor.element_count();
  if (count != tensor.data.size()) throw Error(ErrorCode::ShapeOverflow, "shape does not match data length");

  std::vector<unsigned char> out;
  if (container == Container::Npy) {
    std::string header = "{'descr': '";
    header += tensor.dtype == Dtype::F4 ? "<f4" : "<f8";
    header += "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < tensor.shape.size(); ++i) {
      header += std::to_string(tensor.shape[i]);
      if (tensor.shape.size() == 1 || i + 1 < tensor.shape.size()) header += ",";
      if (i + 1 < tensor.shape.size()) header += " ";
    }
    header += "), }";
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header += '\n';
    out.insert(out.end(), std::begin(kNpyMagic), std::end(kNpyMagic));
    out.push_back(1);
    out.push_back(0);
    put_le(out, header.size(), 2);
    out.insert(out.end(), header.begin(), header.end());
  } else {
    out.insert(out.end(), std::begin(kTnsrMagic), std::end(kTnsrMagic));
    put_le(out, tensor.shape.size(), 4);
    for (std::size_t d : tensor.shape) put_le(out, d, 8);
  }
  for (double v : tensor.data) {
    if (tensor.dtype == Dtype::F4) {
      put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
    } else {
      put_le(out, std::bit_cast<std::uint64_t>(v), 8);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

std::vector<std::size_t> pooled_shape(const std::vector<std::size_t>& shape, std::size_t token_axis) {
  if (token_axis >= shape.size()) throw Error(ErrorCode::InvalidArgument, "token axis out of range");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != token_axis) out.push_back(shape[i]);
  }
  return out;
}

std::vector<double> global_average_pool(const ActivationTensor& tensor, std::size_t token_axis) {
  if (token_axis >= tensor.shape.size()) throw Error(ErrorCode::InvalidArgument, "token axis out of range");
  if (tensor.shape[token_axis] == 0) throw Error(ErrorCode::EmptyAxis, "token axis of " + tensor.layer_id + " is empty");
  return kernels::omp::mean_over_axis(tensor.data, tensor.shape, token_axis);
}

}  // namespace snrprobe
