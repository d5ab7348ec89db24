#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace gypsum {

// Binary parameter archive: magic "GYPSUMCK", u32 format version, u64 header
// length, JSON header, then a flat little-endian double blob. The header is
// {"meta": <free-form>, "params": [{"key","shape","offset"}...]} where offset
// counts doubles into the blob. Values round-trip bitwise.
struct ArchiveEntry {
  std::string key;
  std::vector<int> shape;
  std::vector<double> values;
};

struct Archive {
  nlohmann::json meta;  // free-form metadata (config snapshot, epoch, ...)
  std::vector<ArchiveEntry> entries;

  const ArchiveEntry* find(const std::string& key) const;
};

inline constexpr char kArchiveMagic[8] = {'G', 'Y', 'P', 'S', 'U', 'M', 'C', 'K'};
inline constexpr uint32_t kArchiveVersion = 1;

// Throws MissingFile if the path cannot be opened for writing.
void write_archive(const std::string& path, const Archive& a);
// Throws MissingFile if absent, FormatError on any structural problem.
Archive read_archive(const std::string& path);

}  // namespace gypsum
