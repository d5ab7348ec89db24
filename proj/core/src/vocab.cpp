#include "gypsum/vocab.hpp"

#include <algorithm>
#include <fstream>

#include "gypsum/errors.hpp"

namespace gypsum {

Vocabulary::Vocabulary() {
  push(kPadText);
  push(kUnkText);
  push(kBosText);
  push(kEosText);
}

void Vocabulary::push(const std::string& t) {
  if (index_.count(t)) throw DataError("duplicate vocabulary entry: " + t);
  index_.emplace(t, static_cast<int>(tokens_.size()));
  tokens_.push_back(t);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& subwords) {
  Vocabulary v;
  for (const auto& t : subwords) v.push(t);
  return v;
}

Vocabulary Vocabulary::build(const std::unordered_map<std::string, long long>& counts,
                             int max_size) {
  if (max_size < 4) throw DataError("vocabulary size must allow the reserved tokens");
  std::vector<std::pair<std::string, long long>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  for (const auto& [tok, cnt] : ranked) {
    if (v.size() >= max_size) break;
    if (!v.contains(tok)) v.push(tok);
  }
  return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open vocabulary file: " + path);
  Vocabulary v;
  v.tokens_.clear();
  v.index_.clear();
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    v.push(line);
  }
  if (v.size() < 4) throw FormatError("vocabulary file lacks the four reserved tokens");
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw MissingFile("cannot write vocabulary file: " + path);
  for (const auto& t : tokens_) out << t << '\n';
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const { return index_.count(token) > 0; }

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw DataError("vocabulary id out of range");
  return tokens_[static_cast<size_t>(id)];
}

uint64_t Vocabulary::hash() const {
  uint64_t h = 1469598103934665603ull;  // FNV offset basis
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ull;  // FNV prime
  };
  for (const auto& t : tokens_) {
    for (unsigned char c : t) mix(c);
    mix('\n');
  }
  return h;
}

}  // namespace gypsum
