#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gypsum/ast.hpp"

namespace gypsum {

// Fully resolved run configuration: every field has a preset default, config
// files and CLI overrides replace individual values, and unknown keys are
// rejected. Serialized as flat `key = value` lines (see dump()).
struct RunConfig {
  std::string preset = "desk";  // desk | paper
  std::string language = "java";
  std::uint64_t seed = 17;

  // embedding / shared widths
  int d_e = 64;

  // token-sequence encoder
  int L_c = 2;
  int l_c = 64;
  int head_c = 4;
  int d_model = 64;
  int d_k = 16;
  int d_v = 16;
  int d_ff = 128;
  std::string cencoder_mode = "scratch";  // scratch | pretrained
  std::string pretrained_path;

  // graph encoder
  int l_g = 64;
  int h_g = 64;
  int head_g = 4;
  int L_g = 2;
  int d_t = 16;
  int d_edge = 16;
  int node_cap = 5000;
  bool gat_activation_outside = false;

  // decoder
  int l_s = 32;
  int L_d = 2;
  int head_d = 4;
  bool fusion_ff_block = true;

  // output head
  bool copy_renormalize_leaves = true;

  // vocabulary
  int vocab_size = 512;

  // training
  double dropout = 0.0;
  std::string optimizer = "adam";
  double learning_rate = 0.003;
  int batch_size = 10;
  int epochs = 200;
  int patience = 5;
  double grad_clip = 5.0;  // 0 disables clipping

  // inference
  int beam_size = 6;
  bool length_normalize = true;

  // graph construction toggles
  bool control_if = true;
  bool control_while = true;
  bool control_for = true;
  bool control_foreach = true;
  bool control_switch = true;

  // dataset tooling
  bool lcs_char_mode = false;

  Language lang() const { return language_from_string(language); }
};

// Preset defaults. "paper" fills the published architecture scale; "desk" is
// the CPU-sized configuration the test suite runs at. Both depend on the
// language for the sequence-length limits. The GYPSUM_SEED environment
// variable, when set, overrides the preset seed (and is itself overridden by
// an explicit `seed` assignment).
RunConfig preset_config(const std::string& preset, const std::string& language);

// Apply `key = value` assignments from a config file / CLI. A `preset` or
// `language` key re-bases the defaults first, then the remaining keys
// override. Throws ConfigError on unknown keys or unparseable values,
// MissingFile if the path does not exist.
RunConfig load_config_file(const std::string& path, const RunConfig& base);
void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value);
RunConfig apply_config_text(const std::string& text, RunConfig base);

// Flat, stable `key = value` dump of every field (the --dump-config output).
std::string dump_config(const RunConfig& cfg);

}  // namespace gypsum
