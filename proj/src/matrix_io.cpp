#include "sstempo/matrix_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "sstempo/errors.hpp"

namespace sstempo {
namespace {

constexpr char kMagic[5] = {'S', 'T', 'E', 'M', '1'};
constexpr const char* kManifestHeader = "name,rows,cols,offset";

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>(v >> 24)};
  os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated STEM1 record");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

std::size_t stem_record_size(Eigen::Index rows, Eigen::Index cols) {
  return sizeof(kMagic) + 8 + 4 * static_cast<std::size_t>(rows * cols);
}

void write_stem_record(std::ostream& os, const MatrixRF& m) {
  if (m.rows() > std::numeric_limits<std::uint32_t>::max() || m.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw ContractError("matrix too large for STEM1");
  }
  os.write(kMagic, sizeof(kMagic));
  put_u32(os, static_cast<std::uint32_t>(m.rows()));
  put_u32(os, static_cast<std::uint32_t>(m.cols()));
  const float* p = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) put_u32(os, std::bit_cast<std::uint32_t>(p[i]));
}

MatrixRF read_stem_record(std::istream& is) {
  char magic[sizeof(kMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("missing STEM1 magic");
  }
  const std::uint32_t rows = get_u32(is);
  const std::uint32_t cols = get_u32(is);
  MatrixRF m(rows, cols);
  float* p = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = std::bit_cast<float>(get_u32(is));
  return m;
}

void write_matrix(const std::filesystem::path& path, const MatrixRF& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw_io_error("cannot write matrix", path.string());
  write_stem_record(os, m);
  if (!os) throw_io_error("error writing matrix", path.string());
}

MatrixRF read_matrix(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw_io_error("cannot read matrix", path.string());
  return read_stem_record(is);
}

void write_axis_csv(const std::filesystem::path& path, std::span<const double> axis, const std::string& name) {
  std::ofstream os(path);
  if (!os) throw_io_error("cannot write axis CSV", path.string());
  os << name << '\n';
  for (double v : axis) os << fmt::format("{:.10g}\n", v);
}

std::vector<double> read_axis_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw_io_error("cannot read axis CSV", path.string());
  std::string line;
  std::getline(is, line);
  std::vector<double> axis;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      axis.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw FormatError("malformed axis value: " + line);
    }
  }
  return axis;
}

void write_matrix_csv(const std::filesystem::path& path, const MatrixRF& m, std::span<const double> axis) {
  if (static_cast<Eigen::Index>(axis.size()) != m.cols()) throw ContractError("axis length must match columns");
  std::ofstream os(path);
  if (!os) throw_io_error("cannot write CSV", path.string());
  os << "frame";
  for (double v : axis) os << fmt::format(",{:.6g}", v);
  os << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    os << r;
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << fmt::format(",{:.7g}", m(r, c));
    os << '\n';
  }
}

const MatrixRF& TensorBundle::at(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw FormatError("bundle has no tensor named " + name);
}

std::filesystem::path manifest_path(const std::filesystem::path& bundle_path) {
  return std::filesystem::path(bundle_path.string() + ".manifest");
}

void write_bundle(const std::filesystem::path& path, const TensorBundle& bundle) {
  std::ofstream data(path, std::ios::binary);
  if (!data) throw_io_error("cannot write tensor bundle", path.string());
  std::ofstream manifest(manifest_path(path));
  if (!manifest) throw_io_error("cannot write bundle manifest", manifest_path(path).string());

  for (const auto& [key, value] : bundle.metadata) {
    if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw ContractError("bundle metadata may not contain '=' in keys or newlines");
    }
    manifest << key << '=' << value << '\n';
  }
  manifest << kManifestHeader << '\n';
  std::size_t offset = 0;
  for (const auto& t : bundle.tensors) {
    if (t.name.find_first_of(",\n") != std::string::npos) throw ContractError("tensor names may not contain commas");
    manifest << fmt::format("{},{},{},{}\n", t.name, t.value.rows(), t.value.cols(), offset);
    write_stem_record(data, t.value);
    offset += stem_record_size(t.value.rows(), t.value.cols());
  }
  if (!data || !manifest) throw_io_error("error writing tensor bundle", path.string());
}

TensorBundle read_bundle(const std::filesystem::path& path) {
  std::ifstream manifest(manifest_path(path));
  if (!manifest) throw_io_error("cannot read bundle manifest", manifest_path(path).string());
  std::ifstream data(path, std::ios::binary);
  if (!data) throw_io_error("cannot read tensor bundle", path.string());

  TensorBundle bundle;
  std::string line;
  bool in_table = false;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    if (!in_table) {
      if (line == kManifestHeader) {
        in_table = true;
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError("malformed manifest line: " + line);
      bundle.metadata[line.substr(0, eq)] = line.substr(eq + 1);
      continue;
    }
    std::stringstream ss(line);
    std::string name, rows_s, cols_s, offset_s;
    std::getline(ss, name, ',');
    std::getline(ss, rows_s, ',');
    std::getline(ss, cols_s, ',');
    std::getline(ss, offset_s, ',');
    std::size_t offset = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    try {
      rows = std::stol(rows_s);
      cols = std::stol(cols_s);
      offset = std::stoull(offset_s);
    } catch (const std::exception&) {
      throw FormatError("malformed manifest row: " + line);
    }
    data.seekg(static_cast<std::streamoff>(offset));
    MatrixRF value = read_stem_record(data);
    if (value.rows() != rows || value.cols() != cols) throw FormatError("manifest shape mismatch for " + name);
    bundle.tensors.push_back({name, std::move(value)});
  }
  if (!in_table) throw FormatError("bundle manifest lacks the tensor table: " + manifest_path(path).string());
  return bundle;
}

}  // namespace sstempo
