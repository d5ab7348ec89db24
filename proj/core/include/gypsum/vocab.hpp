#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace gypsum {

// Sub-word vocabulary. Ids 0-3 are reserved control tokens; file format is
// one sub-word per line, line number = id.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr const char* kPadText = "<pad>";
  static constexpr const char* kUnkText = "<unk>";
  static constexpr const char* kBosText = "<bos>";
  static constexpr const char* kEosText = "<eos>";

  Vocabulary();  // just the four reserved tokens

  // Reserved tokens followed by `subwords` in the given order. Duplicates and
  // collisions with reserved texts raise DataError.
  static Vocabulary from_tokens(const std::vector<std::string>& subwords);

  // Deterministic corpus vocabulary: sub-words ranked by (count desc, text
  // asc), truncated so total size (reserved included) is at most max_size.
  static Vocabulary build(const std::unordered_map<std::string, long long>& counts,
                          int max_size);

  // One sub-word per line; the first four lines are the reserved tokens.
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  int id(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  // FNV-1a over all token texts (with separators); identifies the vocabulary
  // in checkpoints.
  uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  void push(const std::string& t);
};

}  // namespace gypsum
