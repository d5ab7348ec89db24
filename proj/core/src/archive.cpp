#include "gypsum/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "gypsum/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "archive blob layout assumes a little-endian host");
static_assert(sizeof(double) == 8, "archive blob layout assumes 8-byte doubles");

namespace gypsum {

using nlohmann::json;

const ArchiveEntry* Archive::find(const std::string& key) const {
  for (const auto& e : entries)
    if (e.key == key) return &e;
  return nullptr;
}

void write_archive(const std::string& path, const Archive& a) {
  json params = json::array();
  size_t offset = 0;
  for (const auto& e : a.entries) {
    size_t n = 1;
    for (int d : e.shape) n *= static_cast<size_t>(d);
    if (n != e.values.size())
      throw ShapeMismatch("archive entry '" + e.key + "': shape/value size mismatch");
    params.push_back({{"key", e.key}, {"shape", e.shape}, {"offset", offset}});
    offset += n;
  }
  json header = {{"meta", a.meta}, {"params", params}};
  std::string hstr = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingFile("cannot open archive for writing: " + path);
  out.write(kArchiveMagic, 8);
  uint32_t ver = kArchiveVersion;
  out.write(reinterpret_cast<const char*>(&ver), 4);
  uint64_t hlen = hstr.size();
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(hstr.data(), static_cast<std::streamsize>(hstr.size()));
  for (const auto& e : a.entries)
    out.write(reinterpret_cast<const char*>(e.values.data()),
              static_cast<std::streamsize>(e.values.size() * sizeof(double)));
  out.flush();
  if (!out) throw MissingFile("failed writing archive: " + path);
}

Archive read_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile("archive not found: " + path);

  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kArchiveMagic, 8) != 0)
    throw FormatError("bad archive magic: " + path);
  uint32_t ver = 0;
  in.read(reinterpret_cast<char*>(&ver), 4);
  if (!in || ver != kArchiveVersion)
    throw FormatError("unsupported archive version " + std::to_string(ver));
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 8);
  if (!in || hlen == 0 || hlen > (1ull << 30))
    throw FormatError("bad archive header length");
  std::string hstr(hlen, '\0');
  in.read(hstr.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw FormatError("truncated archive header");

  json header;
  try {
    header = json::parse(hstr);
  } catch (const json::exception& e) {
    throw FormatError(std::string("archive header is not valid JSON: ") + e.what());
  }
  if (!header.is_object() || !header.contains("params") || !header["params"].is_array())
    throw FormatError("archive header missing params manifest");

  Archive a;
  a.meta = header.value("meta", json::object());

  // The manifest is ordered and offsets must tile the blob contiguously.
  size_t expect_offset = 0;
  for (const auto& p : header["params"]) {
    if (!p.is_object() || !p.contains("key") || !p.contains("shape") ||
        !p.contains("offset"))
      throw FormatError("archive manifest entry malformed");
    ArchiveEntry e;
    e.key = p["key"].get<std::string>();
    for (const auto& d : p["shape"]) {
      int dim = d.get<int>();
      if (dim <= 0) throw FormatError("archive entry '" + e.key + "': bad dimension");
      e.shape.push_back(dim);
    }
    if (e.shape.empty() || e.shape.size() > 2)
      throw FormatError("archive entry '" + e.key + "': rank must be 1 or 2");
    size_t off = p["offset"].get<size_t>();
    if (off != expect_offset)
      throw FormatError("archive entry '" + e.key + "': non-contiguous offset");
    size_t n = 1;
    for (int d : e.shape) n *= static_cast<size_t>(d);
    e.values.resize(n);
    in.read(reinterpret_cast<char*>(e.values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw FormatError("archive blob truncated at '" + e.key + "'");
    expect_offset += n;
    a.entries.push_back(std::move(e));
  }
  // No trailing bytes allowed.
  char extra;
  in.read(&extra, 1);
  if (!in.eof()) throw FormatError("archive has trailing bytes");
  return a;
}

}  // namespace gypsum
