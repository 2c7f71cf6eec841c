#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "navstack/perception.hpp"

namespace navstack {

/// Binary PPM (P6, maxval 255).
RawFrame read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RawFrame& frame);

struct CorpusEntry {
  std::string filename;
  bool blurred = false;
};

/// Manifest format: one `<filename> <0|1>` line per image, 1 = blurred.
std::vector<CorpusEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<CorpusEntry>& entries);

}  // namespace navstack
