#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"

namespace cfs::cli {

std::string sha256_hex(const std::string& bytes);

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
};

// Line plot as a standalone SVG document. Non-positive values are dropped on
// logarithmic axes.
std::string svg_line_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series);

// Artifacts of one run, held in memory and written by a single writer.
class ArtifactSet {
 public:
  void add(const std::string& name, std::string bytes) { files_.emplace_back(name, std::move(bytes)); }
  // Writes every artifact into dir, then manifest.json: the given fields
  // plus "artifacts" (file, bytes, sha256 per entry).
  void commit(const std::filesystem::path& dir, Json manifest) const;
  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

}  // namespace cfs::cli
