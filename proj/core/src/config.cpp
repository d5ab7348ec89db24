#include "gypsum/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_map>

#include "gypsum/errors.hpp"

namespace gypsum {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("bad boolean for " + key + ": " + v);
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + key + ": " + v);
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": " + v);
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::uint64_t>(x);
  } catch (const std::exception&) {
    throw ConfigError("bad seed for " + key + ": " + v);
  }
}

}  // namespace

RunConfig preset_config(const std::string& preset, const std::string& language) {
  if (language != "java" && language != "python")
    throw ConfigError("unknown language: " + language);
  RunConfig c;  // field defaults = desk preset, java lengths
  c.preset = preset;
  c.language = language;
  if (preset == "desk") {
    // defaults above
  } else if (preset == "paper") {
    c.d_e = 768;
    c.L_c = 12;
    c.l_c = language == "java" ? 400 : 300;
    c.head_c = 12;
    c.d_model = 768;
    c.d_k = 64;
    c.d_v = 64;
    c.d_ff = 2048;
    c.l_g = 300;
    c.h_g = 768;
    c.head_g = 8;
    c.L_g = 4;
    c.d_t = 128;
    c.d_edge = 128;
    c.l_s = language == "java" ? 100 : 80;
    c.L_d = 6;
    c.head_d = 12;
    c.vocab_size = 50000;
    c.dropout = 0.2;
    c.learning_rate = 0.0001;
    c.batch_size = 32;
    c.grad_clip = 0.0;  // published setup uses no clipping
    c.beam_size = 6;
  } else {
    throw ConfigError("unknown preset: " + preset);
  }
  if (const char* env = std::getenv("GYPSUM_SEED")) {
    c.seed = parse_u64("GYPSUM_SEED", trim(env));
  }
  return c;
}

void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value) {
  using Setter = std::function<void(RunConfig&, const std::string&)>;
  static const std::unordered_map<std::string, Setter> setters = {
      {"language",
       [](RunConfig& c, const std::string& v) {
         if (v != "java" && v != "python") throw ConfigError("unknown language: " + v);
         c.language = v;
       }},
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); }},
      {"d_e", [](RunConfig& c, const std::string& v) { c.d_e = parse_int("d_e", v); }},
      {"L_c", [](RunConfig& c, const std::string& v) { c.L_c = parse_int("L_c", v); }},
      {"l_c", [](RunConfig& c, const std::string& v) { c.l_c = parse_int("l_c", v); }},
      {"head_c",
       [](RunConfig& c, const std::string& v) { c.head_c = parse_int("head_c", v); }},
      {"d_model",
       [](RunConfig& c, const std::string& v) { c.d_model = parse_int("d_model", v); }},
      {"d_k", [](RunConfig& c, const std::string& v) { c.d_k = parse_int("d_k", v); }},
      {"d_v", [](RunConfig& c, const std::string& v) { c.d_v = parse_int("d_v", v); }},
      {"d_ff", [](RunConfig& c, const std::string& v) { c.d_ff = parse_int("d_ff", v); }},
      {"cencoder_mode",
       [](RunConfig& c, const std::string& v) {
         if (v != "scratch" && v != "pretrained")
           throw ConfigError("unknown cencoder_mode: " + v);
         c.cencoder_mode = v;
       }},
      {"pretrained_path",
       [](RunConfig& c, const std::string& v) { c.pretrained_path = v; }},
      {"l_g", [](RunConfig& c, const std::string& v) { c.l_g = parse_int("l_g", v); }},
      {"h_g", [](RunConfig& c, const std::string& v) { c.h_g = parse_int("h_g", v); }},
      {"head_g",
       [](RunConfig& c, const std::string& v) { c.head_g = parse_int("head_g", v); }},
      {"L_g", [](RunConfig& c, const std::string& v) { c.L_g = parse_int("L_g", v); }},
      {"d_t", [](RunConfig& c, const std::string& v) { c.d_t = parse_int("d_t", v); }},
      {"d_edge",
       [](RunConfig& c, const std::string& v) { c.d_edge = parse_int("d_edge", v); }},
      {"node_cap",
       [](RunConfig& c, const std::string& v) { c.node_cap = parse_int("node_cap", v); }},
      {"gat_activation_outside",
       [](RunConfig& c, const std::string& v) {
         c.gat_activation_outside = parse_bool("gat_activation_outside", v);
       }},
      {"l_s", [](RunConfig& c, const std::string& v) { c.l_s = parse_int("l_s", v); }},
      {"L_d", [](RunConfig& c, const std::string& v) { c.L_d = parse_int("L_d", v); }},
      {"head_d",
       [](RunConfig& c, const std::string& v) { c.head_d = parse_int("head_d", v); }},
      {"fusion_ff_block",
       [](RunConfig& c, const std::string& v) {
         c.fusion_ff_block = parse_bool("fusion_ff_block", v);
       }},
      {"copy_renormalize_leaves",
       [](RunConfig& c, const std::string& v) {
         c.copy_renormalize_leaves = parse_bool("copy_renormalize_leaves", v);
       }},
      {"vocab_size",
       [](RunConfig& c, const std::string& v) { c.vocab_size = parse_int("vocab_size", v); }},
      {"dropout",
       [](RunConfig& c, const std::string& v) { c.dropout = parse_double("dropout", v); }},
      {"optimizer",
       [](RunConfig& c, const std::string& v) {
         if (v != "adam") throw ConfigError("unsupported optimizer: " + v);
         c.optimizer = v;
       }},
      {"learning_rate",
       [](RunConfig& c, const std::string& v) {
         c.learning_rate = parse_double("learning_rate", v);
       }},
      {"batch_size",
       [](RunConfig& c, const std::string& v) { c.batch_size = parse_int("batch_size", v); }},
      {"epochs",
       [](RunConfig& c, const std::string& v) { c.epochs = parse_int("epochs", v); }},
      {"patience",
       [](RunConfig& c, const std::string& v) { c.patience = parse_int("patience", v); }},
      {"grad_clip",
       [](RunConfig& c, const std::string& v) { c.grad_clip = parse_double("grad_clip", v); }},
      {"beam_size",
       [](RunConfig& c, const std::string& v) { c.beam_size = parse_int("beam_size", v); }},
      {"length_normalize",
       [](RunConfig& c, const std::string& v) {
         c.length_normalize = parse_bool("length_normalize", v);
       }},
      {"control_if",
       [](RunConfig& c, const std::string& v) { c.control_if = parse_bool("control_if", v); }},
      {"control_while",
       [](RunConfig& c, const std::string& v) {
         c.control_while = parse_bool("control_while", v);
       }},
      {"control_for",
       [](RunConfig& c, const std::string& v) { c.control_for = parse_bool("control_for", v); }},
      {"control_foreach",
       [](RunConfig& c, const std::string& v) {
         c.control_foreach = parse_bool("control_foreach", v);
       }},
      {"control_switch",
       [](RunConfig& c, const std::string& v) {
         c.control_switch = parse_bool("control_switch", v);
       }},
      {"lcs_char_mode",
       [](RunConfig& c, const std::string& v) {
         c.lcs_char_mode = parse_bool("lcs_char_mode", v);
       }},
  };
  if (key == "preset") {
    cfg = preset_config(value, cfg.language);
    return;
  }
  auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("unknown config key: " + key);
  it->second(cfg, value);
}

RunConfig apply_config_text(const std::string& text, RunConfig base) {
  // First pass: preset / language re-base the defaults (order-independent of
  // where they appear in the file); second pass applies the other keys.
  std::vector<std::pair<std::string, std::string>> pairs;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("bad config line " + std::to_string(lineno) + ": " + s);
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key on line " + std::to_string(lineno));
    pairs.emplace_back(key, value);
  }
  std::string preset = base.preset, language = base.language;
  bool rebase = false;
  for (const auto& [k, v] : pairs) {
    if (k == "preset") {
      preset = v;
      rebase = true;
    } else if (k == "language") {
      language = v;
      rebase = true;
    }
  }
  RunConfig cfg = rebase ? preset_config(preset, language) : base;
  for (const auto& [k, v] : pairs) {
    if (k == "preset" || k == "language") continue;
    apply_config_line(cfg, k, v);
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw MissingFile("config file not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return apply_config_text(buf.str(), base);
}

std::string dump_config(const RunConfig& c) {
  std::ostringstream o;
  auto num = [](double v) {
    std::ostringstream s;
    s << v;
    return s.str();
  };
  o << "preset = " << c.preset << '\n';
  o << "language = " << c.language << '\n';
  o << "seed = " << c.seed << '\n';
  o << "d_e = " << c.d_e << '\n';
  o << "L_c = " << c.L_c << '\n';
  o << "l_c = " << c.l_c << '\n';
  o << "head_c = " << c.head_c << '\n';
  o << "d_model = " << c.d_model << '\n';
  o << "d_k = " << c.d_k << '\n';
  o << "d_v = " << c.d_v << '\n';
  o << "d_ff = " << c.d_ff << '\n';
  o << "cencoder_mode = " << c.cencoder_mode << '\n';
  o << "pretrained_path = " << c.pretrained_path << '\n';
  o << "l_g = " << c.l_g << '\n';
  o << "h_g = " << c.h_g << '\n';
  o << "head_g = " << c.head_g << '\n';
  o << "L_g = " << c.L_g << '\n';
  o << "d_t = " << c.d_t << '\n';
  o << "d_edge = " << c.d_edge << '\n';
  o << "node_cap = " << c.node_cap << '\n';
  o << "gat_activation_outside = " << (c.gat_activation_outside ? "true" : "false")
    << '\n';
  o << "l_s = " << c.l_s << '\n';
  o << "L_d = " << c.L_d << '\n';
  o << "head_d = " << c.head_d << '\n';
  o << "fusion_ff_block = " << (c.fusion_ff_block ? "true" : "false") << '\n';
  o << "copy_renormalize_leaves = " << (c.copy_renormalize_leaves ? "true" : "false")
    << '\n';
  o << "vocab_size = " << c.vocab_size << '\n';
  o << "dropout = " << num(c.dropout) << '\n';
  o << "optimizer = " << c.optimizer << '\n';
  o << "learning_rate = " << num(c.learning_rate) << '\n';
  o << "batch_size = " << c.batch_size << '\n';
  o << "epochs = " << c.epochs << '\n';
  o << "patience = " << c.patience << '\n';
  o << "grad_clip = " << num(c.grad_clip) << '\n';
  o << "beam_size = " << c.beam_size << '\n';
  o << "length_normalize = " << (c.length_normalize ? "true" : "false") << '\n';
  o << "control_if = " << (c.control_if ? "true" : "false") << '\n';
  o << "control_while = " << (c.control_while ? "true" : "false") << '\n';
  o << "control_for = " << (c.control_for ? "true" : "false") << '\n';
  o << "control_foreach = " << (c.control_foreach ? "true" : "false") << '\n';
  o << "control_switch = " << (c.control_switch ? "true" : "false") << '\n';
  o << "lcs_char_mode = " << (c.lcs_char_mode ? "true" : "false") << '\n';
  return o.str();
}

}  // namespace gypsum
