#include "spp/dataset.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace spp {

static_assert(std::endian::native == std::endian::little, "binary dataset IO assumes little-endian");

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("label", 0) != 0)
    throw std::runtime_error(path.string() + ": missing `label,f0,...` header");
  Index d = 0;
  for (char ch : line) d += ch == ',';

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Index cols = -1;
    while (std::getline(ss, cell, ',')) {
      if (cols < 0)
        labels.push_back(std::stoi(cell));
      else
        values.push_back(std::stod(cell));
      ++cols;
    }
    if (cols != d)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(d) + " features");
  }
  Dataset out;
  out.features = Eigen::Map<Matrix>(values.data(), static_cast<Index>(labels.size()), d);
  out.labels = std::move(labels);
  return out;
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "label";
  for (Index t = 0; t < data.features.cols(); ++t) out << ",f" << t;
  out << '\n';
  char buf[32];
  for (Index r = 0; r < data.size(); ++r) {
    out << data.labels[r];
    for (Index t = 0; t < data.features.cols(); ++t) {
      std::snprintf(buf, sizeof buf, "%.17g", data.features(r, t));
      out << ',' << buf;
    }
    out << '\n';
  }
}

Dataset read_dataset_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::uint32_t header[2];
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in) throw std::runtime_error(path.string() + ": truncated header");
  Dataset out;
  out.features.resize(header[0], header[1]);
  in.read(reinterpret_cast<char*>(out.features.data()),
          static_cast<std::streamsize>(sizeof(double) * header[0] * header[1]));
  std::vector<std::uint8_t> raw(header[0]);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw std::runtime_error(path.string() + ": truncated body");
  out.labels.assign(raw.begin(), raw.end());
  return out;
}

void write_dataset_binary(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::uint32_t header[2] = {static_cast<std::uint32_t>(data.size()),
                                   static_cast<std::uint32_t>(data.features.cols())};
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  out.write(reinterpret_cast<const char*>(data.features.data()),
            static_cast<std::streamsize>(sizeof(double) * data.features.size()));
  for (int y : data.labels) out.put(static_cast<char>(static_cast<std::uint8_t>(y)));
}

Dataset load_dataset(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? read_dataset_csv(path) : read_dataset_binary(path);
}

}  // namespace spp
