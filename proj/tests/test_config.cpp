#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>

#include "gypsum/config.hpp"
#include "gypsum/errors.hpp"

using namespace gypsum;

namespace {

// Scoped environment-variable override that restores the prior state.
struct EnvGuard {
  std::string name;
  std::string old_value;
  bool had_old;
  EnvGuard(const std::string& n, const char* v) : name(n) {
    const char* cur = std::getenv(n.c_str());
    had_old = cur != nullptr;
    if (had_old) old_value = cur;
    if (v)
      setenv(n.c_str(), v, 1);
    else
      unsetenv(n.c_str());
  }
  ~EnvGuard() {
    if (had_old)
      setenv(name.c_str(), old_value.c_str(), 1);
    else
      unsetenv(name.c_str());
  }
};

}  // namespace

TEST_CASE("desk preset matches documented defaults") {
  EnvGuard env("GYPSUM_SEED", nullptr);
  RunConfig c = preset_config("desk", "java");
  CHECK(c.preset == "desk");
  CHECK(c.language == "java");
  CHECK(c.seed == 17);
  CHECK(c.d_e == 64);
  CHECK(c.L_c == 2);
  CHECK(c.l_c == 64);
  CHECK(c.head_c == 4);
  CHECK(c.d_model == 64);
  CHECK(c.d_k == 16);
  CHECK(c.d_v == 16);
  CHECK(c.d_ff == 128);
  CHECK(c.cencoder_mode == "scratch");
  CHECK(c.l_g == 64);
  CHECK(c.h_g == 64);
  CHECK(c.head_g == 4);
  CHECK(c.L_g == 2);
  CHECK(c.d_t == 16);
  CHECK(c.d_edge == 16);
  CHECK(c.node_cap == 5000);
  CHECK_FALSE(c.gat_activation_outside);
  CHECK(c.l_s == 32);
  CHECK(c.L_d == 2);
  CHECK(c.head_d == 4);
  CHECK(c.fusion_ff_block);
  CHECK(c.copy_renormalize_leaves);
  CHECK(c.vocab_size == 512);
  CHECK(c.dropout == doctest::Approx(0.0));
  CHECK(c.optimizer == "adam");
  CHECK(c.learning_rate == doctest::Approx(0.003));
  CHECK(c.batch_size == 10);
  CHECK(c.epochs == 200);
  CHECK(c.patience == 5);
  CHECK(c.grad_clip == doctest::Approx(5.0));
  CHECK(c.beam_size == 6);
  CHECK(c.length_normalize);
  CHECK(c.control_if);
  CHECK(c.control_while);
  CHECK(c.control_for);
  CHECK(c.control_foreach);
  CHECK(c.control_switch);
  CHECK_FALSE(c.lcs_char_mode);
}

TEST_CASE("full-scale preset resolves the published hyperparameters") {
  EnvGuard env("GYPSUM_SEED", nullptr);

  SUBCASE("java lengths") {
    RunConfig c = preset_config("paper", "java");
    CHECK(c.d_e == 768);
    CHECK(c.L_c == 12);
    CHECK(c.l_c == 400);
    CHECK(c.head_c == 12);
    CHECK(c.d_model == 768);
    CHECK(c.d_k == 64);
    CHECK(c.d_v == 64);
    CHECK(c.d_ff == 2048);
    CHECK(c.l_g == 300);
    CHECK(c.h_g == 768);
    CHECK(c.head_g == 8);
    CHECK(c.L_g == 4);
    CHECK(c.d_t == 128);
    CHECK(c.d_edge == 128);
    CHECK(c.l_s == 100);
    CHECK(c.L_d == 6);
    CHECK(c.head_d == 12);
    CHECK(c.vocab_size == 50000);
    CHECK(c.dropout == doctest::Approx(0.2));
    CHECK(c.optimizer == "adam");
    CHECK(c.learning_rate == doctest::Approx(0.0001));
    CHECK(c.batch_size == 32);
    CHECK(c.grad_clip == doctest::Approx(0.0));
    CHECK(c.beam_size == 6);
  }

  SUBCASE("python lengths") {
    RunConfig c = preset_config("paper", "python");
    CHECK(c.l_c == 300);
    CHECK(c.l_s == 80);
    CHECK(c.l_g == 300);  // graph length is language-independent
  }
}

TEST_CASE("unknown preset, language, and keys are rejected") {
  CHECK_THROWS_AS(preset_config("gigantic", "java"), ConfigError);
  CHECK_THROWS_AS(preset_config("desk", "cobol"), ConfigError);
  RunConfig c = preset_config("desk", "java");
  CHECK_THROWS_AS(apply_config_line(c, "d_q", "4"), ConfigError);
  CHECK_THROWS_AS(apply_config_line(c, "", "4"), ConfigError);
  CHECK_THROWS_AS(apply_config_line(c, "d_e", "sixty-four"), ConfigError);
  CHECK_THROWS_AS(apply_config_line(c, "dropout", "lots"), ConfigError);
  CHECK_THROWS_AS(apply_config_line(c, "length_normalize", "maybe"), ConfigError);
  CHECK_THROWS_AS(apply_config_line(c, "optimizer", "sgd"), ConfigError);
  CHECK_THROWS_AS(apply_config_line(c, "cencoder_mode", "frozen"), ConfigError);
  CHECK_THROWS_AS(apply_config_line(c, "d_e", "64x"), ConfigError);
}

TEST_CASE("config text applies overrides on top of the preset") {
  EnvGuard env("GYPSUM_SEED", nullptr);
  RunConfig base = preset_config("desk", "java");
  RunConfig c = apply_config_text(
      "# comment line\n"
      "\n"
      "d_e = 32\n"
      "dropout=0.1\n"
      "  beam_size =  3  \n"
      "gat_activation_outside = true\n",
      base);
  CHECK(c.d_e == 32);
  CHECK(c.dropout == doctest::Approx(0.1));
  CHECK(c.beam_size == 3);
  CHECK(c.gat_activation_outside);
  // untouched fields keep the preset values
  CHECK(c.d_model == 64);
  CHECK(c.l_s == 32);
}

TEST_CASE("preset and language keys re-base before other overrides apply") {
  EnvGuard env("GYPSUM_SEED", nullptr);
  RunConfig base = preset_config("desk", "java");
  // Even though d_ff appears before the preset switch, it must survive:
  // preset/language re-base first, then every other key is applied.
  RunConfig c = apply_config_text(
      "d_ff = 999\n"
      "preset = paper\n"
      "language = python\n",
      base);
  CHECK(c.preset == "paper");
  CHECK(c.language == "python");
  CHECK(c.l_c == 300);
  CHECK(c.l_s == 80);
  CHECK(c.d_ff == 999);   // explicit override wins over the preset value
  CHECK(c.d_e == 768);    // untouched paper value
}

TEST_CASE("seed precedence: explicit > environment > preset") {
  SUBCASE("environment overrides the preset seed") {
    EnvGuard env("GYPSUM_SEED", "4242");
    RunConfig c = preset_config("desk", "java");
    CHECK(c.seed == 4242);
  }
  SUBCASE("explicit key overrides the environment") {
    EnvGuard env("GYPSUM_SEED", "4242");
    RunConfig c = apply_config_text("seed = 7\n", preset_config("desk", "java"));
    CHECK(c.seed == 7);
  }
  SUBCASE("preset seed used when nothing else is set") {
    EnvGuard env("GYPSUM_SEED", nullptr);
    RunConfig c = preset_config("desk", "java");
    CHECK(c.seed == 17);
  }
  SUBCASE("garbage environment seed is rejected") {
    EnvGuard env("GYPSUM_SEED", "banana");
    CHECK_THROWS_AS(preset_config("desk", "java"), ConfigError);
  }
}

TEST_CASE("malformed config lines are rejected") {
  RunConfig base = preset_config("desk", "java");
  CHECK_THROWS_AS(apply_config_text("d_e\n", base), ConfigError);
  CHECK_THROWS_AS(apply_config_text("= 12\n", base), ConfigError);
  CHECK_THROWS_AS(apply_config_text("bogus_key = 1\n", base), ConfigError);
}

TEST_CASE("dump is a fixed point under re-parsing") {
  EnvGuard env("GYPSUM_SEED", nullptr);
  for (const char* preset : {"desk", "paper"}) {
    for (const char* lang : {"java", "python"}) {
      RunConfig c = preset_config(preset, lang);
      c.dropout = 0.15;
      c.grad_clip = 2.5;
      c.gat_activation_outside = true;
      std::string dumped = dump_config(c);
      RunConfig rt = apply_config_text(dumped, preset_config("desk", "java"));
      std::string dumped2 = dump_config(rt);
      CHECK(dumped == dumped2);
      CHECK(rt.d_e == c.d_e);
      CHECK(rt.l_c == c.l_c);
      CHECK(rt.l_s == c.l_s);
      CHECK(rt.dropout == doctest::Approx(c.dropout));
      CHECK(rt.grad_clip == doctest::Approx(c.grad_clip));
      CHECK(rt.gat_activation_outside == c.gat_activation_outside);
      CHECK(rt.seed == c.seed);
    }
  }
}

TEST_CASE("missing config file raises MissingFile") {
  RunConfig base = preset_config("desk", "java");
  CHECK_THROWS_AS(load_config_file("/nonexistent/path/cfg.txt", base), MissingFile);
}

TEST_CASE("every dumped key is a recognized config key") {
  EnvGuard env("GYPSUM_SEED", nullptr);
  RunConfig c = preset_config("paper", "python");
  std::string dumped = dump_config(c);
  // If dump emitted a key the parser does not accept, this would throw.
  RunConfig rt = apply_config_text(dumped, preset_config("desk", "java"));
  CHECK(rt.preset == "paper");
  CHECK(rt.language == "python");
}
