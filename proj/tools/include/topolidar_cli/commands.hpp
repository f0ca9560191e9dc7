#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "topolidar/range/projection.hpp"

namespace topolidar::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

/// Runs one `topolidar` invocation; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct Dataset {
  std::vector<range::RangeImage> images;
  std::vector<std::string> texts;
  std::vector<std::string> files;
};

/// Reads manifest.tsv and the range images it lists.
Dataset load_dataset(const std::filesystem::path& dir, const range::ProjectionConfig& proj);

/// All *.tlri files of a directory in name order.
std::vector<range::RangeImage> load_image_dir(const std::filesystem::path& dir, const range::ProjectionConfig& proj);

}  // namespace topolidar::cli
