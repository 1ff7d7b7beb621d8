#pragma once

#include "spp/common.hpp"

#include <filesystem>

namespace spp {

/// Pre-featurized classification data: one row per sample, labels in [0, classes).
struct Dataset {
  Matrix features;
  std::vector<int> labels;

  Index size() const { return features.rows(); }
};

/// CSV with header `label,f0,...,f{d-1}`.
Dataset read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);

/// Little-endian `[u32 N][u32 d][N*d f64][N u8]`.
Dataset read_dataset_binary(const std::filesystem::path& path);
void write_dataset_binary(const Dataset& data, const std::filesystem::path& path);

/// Dispatches on extension: `.csv` is text, anything else binary.
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace spp
