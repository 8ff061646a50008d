#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sstempo/types.hpp"

namespace sstempo {

/// `STEM1` record: 5-byte magic, little-endian u32 rows, u32 cols, f32 row-major payload.
void write_stem_record(std::ostream& os, const MatrixRF& m);
MatrixRF read_stem_record(std::istream& is);
std::size_t stem_record_size(Eigen::Index rows, Eigen::Index cols);

void write_matrix(const std::filesystem::path& path, const MatrixRF& m);
MatrixRF read_matrix(const std::filesystem::path& path);

/// One-column CSV sidecar holding axis values (e.g. tempo in BPM).
void write_axis_csv(const std::filesystem::path& path, std::span<const double> axis, const std::string& name);
std::vector<double> read_axis_csv(const std::filesystem::path& path);

/// Frames as rows, one column per axis value.
void write_matrix_csv(const std::filesystem::path& path, const MatrixRF& m, std::span<const double> axis);

struct NamedTensor {
  std::string name;
  MatrixRF value;
};

struct TensorBundle {
  std::vector<NamedTensor> tensors;
  std::map<std::string, std::string> metadata;

  const MatrixRF& at(const std::string& name) const;
};

/// Writes `path` (concatenated STEM1 records) and `path.manifest`, a text file
/// with `key=value` metadata lines followed by `name,rows,cols,offset` rows.
void write_bundle(const std::filesystem::path& path, const TensorBundle& bundle);
TensorBundle read_bundle(const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& bundle_path);

}  // namespace sstempo
