#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "gypsum/errors.hpp"
#include "gypsum/metrics.hpp"

using namespace gypsum;

namespace {
std::vector<std::string> toks(std::initializer_list<const char*> ws) {
  return std::vector<std::string>(ws.begin(), ws.end());
}
}  // namespace

TEST_CASE("porter stemmer reproduces the published algorithm") {
  // Each pair hand-traced through steps 1a-5b of the original algorithm.
  const std::pair<const char*, const char*> cases[] = {
      {"caresses", "caress"},   {"ponies", "poni"},
      {"ties", "ti"},           {"cats", "cat"},
      {"feed", "feed"},         {"agreed", "agre"},
      {"plastered", "plaster"}, {"motoring", "motor"},
      {"sing", "sing"},         {"conflated", "conflat"},
      {"troubled", "troubl"},   {"sized", "size"},
      {"hopping", "hop"},       {"tanned", "tan"},
      {"falling", "fall"},      {"hissing", "hiss"},
      {"fizzed", "fizz"},       {"failing", "fail"},
      {"filing", "file"},       {"happy", "happi"},
      {"sky", "sky"},           {"relational", "relat"},
      {"conditional", "condit"},{"rational", "ration"},
      {"valenci", "valenc"},    {"hesitanci", "hesit"},
      {"digitizer", "digit"},   {"conformabli", "conform"},
      {"radicalli", "radic"},   {"differentli", "differ"},
      {"vileli", "vile"},       {"analogousli", "analog"},
      {"vietnamization", "vietnam"}, {"predication", "predic"},
      {"operator", "oper"},     {"feudalism", "feudal"},
      {"decisiveness", "decis"},{"hopefulness", "hope"},
      {"callousness", "callous"}, {"formaliti", "formal"},
      {"sensitiviti", "sensit"},{"sensibiliti", "sensibl"},
      {"triplicate", "triplic"},{"formative", "form"},
      {"formalize", "formal"},  {"electriciti", "electr"},
      {"electrical", "electr"}, {"hopeful", "hope"},
      {"goodness", "good"},     {"revival", "reviv"},
      {"allowance", "allow"},   {"inference", "infer"},
      {"airliner", "airlin"},   {"gyroscopic", "gyroscop"},
      {"adjustable", "adjust"}, {"defensible", "defens"},
      {"irritant", "irrit"},    {"replacement", "replac"},
      {"adjustment", "adjust"}, {"dependent", "depend"},
      {"adoption", "adopt"},    {"communism", "commun"},
      {"activate", "activ"},    {"angulariti", "angular"},
      {"effective", "effect"},  {"bowdlerize", "bowdler"},
      {"probate", "probat"},    {"rate", "rate"},
      {"cease", "ceas"},        {"controll", "control"},
      {"roll", "roll"},         {"running", "run"},
      {"runs", "run"},          {"returns", "return"},
      {"values", "valu"},       {"computed", "comput"},
      {"iterates", "iter"},     {"arrays", "arrai"},
      {"sums", "sum"},          {"summing", "sum"},
      {"argument", "argument"}, {"region", "region"},
      {"mission", "mission"},
  };
  for (const auto& [word, want] : cases) {
    CAPTURE(word);
    CHECK(porter_stem(word) == want);
  }
  // Lowercased before stemming; short words pass through.
  CHECK(porter_stem("Running") == "run");
  CHECK(porter_stem("ab") == "ab");
  CHECK(porter_stem("") == "");
  CHECK(porter_stem(".") == ".");
}

TEST_CASE("smoothed sentence BLEU-4") {
  SUBCASE("identity scores exactly 100") {
    CHECK(bleu(toks({"the", "cat", "sat"}), toks({"the", "cat", "sat"})) ==
          100.0);
    CHECK(bleu(toks({"a"}), toks({"a"})) == 100.0);
  }
  SUBCASE("short hypothesis pays only the brevity penalty") {
    // All matched orders are perfect; the 4-gram order has no candidates on
    // either side and drops out, so the score is 100 * exp(1 - 4/3).
    double got = bleu(toks({"the", "cat", "sat"}),
                      toks({"the", "cat", "sat", "down"}));
    CHECK(got == doctest::Approx(100.0 * std::exp(-1.0 / 3.0)).epsilon(1e-12));
    CHECK(got == doctest::Approx(71.65313105737893).epsilon(1e-10));
  }
  SUBCASE("counts are clipped against the reference") {
    // hyp "x x a b c d" vs ref "x a b c d": the duplicated unigram counts
    // once, giving precisions 5/6, 4/5, 3/4, 2/3 -> geometric mean (1/3)^.25.
    double got = bleu(toks({"x", "x", "a", "b", "c", "d"}),
                      toks({"x", "a", "b", "c", "d"}));
    CHECK(got ==
          doctest::Approx(100.0 * std::pow(1.0 / 3.0, 0.25)).epsilon(1e-6));
    CHECK(got == doctest::Approx(75.98356856515925).epsilon(1e-6));
  }
  SUBCASE("long hypothesis: no brevity penalty") {
    // Precisions 4/5, 3/4, 2/3, 1/2 -> (1/5)^.25, BP = 1.
    double got = bleu(toks({"a", "b", "c", "d", "e"}),
                      toks({"a", "b", "c", "d"}));
    CHECK(got ==
          doctest::Approx(100.0 * std::pow(0.2, 0.25)).epsilon(1e-6));
  }
  SUBCASE("disjoint tokens fall to the smoothing floor") {
    double got = bleu(toks({"x", "y", "z"}), toks({"a", "b", "c"}));
    CHECK(got > 0.0);
    CHECK(got < 0.01);
  }
  SUBCASE("empty hypothesis scores zero") {
    CHECK(bleu({}, toks({"a", "b"})) == 0.0);
    CHECK(bleu({}, {}) == 0.0);
  }
}

TEST_CASE("ROUGE-L F1") {
  SUBCASE("hand value: hyp 'a b c' vs ref 'a c'") {
    // LCS 2 -> P = 2/3, R = 1, F1 = 80.
    CHECK(rouge_l(toks({"a", "b", "c"}), toks({"a", "c"})) ==
          doctest::Approx(80.0).epsilon(1e-12));
  }
  SUBCASE("identity scores exactly 100") {
    CHECK(rouge_l(toks({"x", "y"}), toks({"x", "y"})) == 100.0);
  }
  SUBCASE("precision-weighted case") {
    // hyp "a b c d" vs ref "a b": P = 1/2, R = 1 -> F1 = 2/3.
    CHECK(rouge_l(toks({"a", "b", "c", "d"}), toks({"a", "b"})) ==
          doctest::Approx(200.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("zeros") {
    CHECK(rouge_l(toks({"x"}), toks({"a"})) == 0.0);
    CHECK(rouge_l({}, {}) == 0.0);
    CHECK(rouge_l({}, toks({"a"})) == 0.0);
    CHECK(rouge_l(toks({"a"}), {}) == 0.0);
  }
  SUBCASE("subsequence need not be contiguous") {
    CHECK(rouge_l(toks({"a", "x", "b", "y", "c"}), toks({"a", "b", "c"})) ==
          doctest::Approx(100.0 * 2.0 * (3.0 / 5.0) / (3.0 / 5.0 + 1.0))
              .epsilon(1e-12));
  }
}

TEST_CASE("METEOR with exact and stem stages") {
  SUBCASE("identity scores exactly 100") {
    CHECK(meteor(toks({"the", "cat", "sat"}), toks({"the", "cat", "sat"})) ==
          100.0);
  }
  SUBCASE("one shared token out of 4 and 4") {
    // m=1, P=R=1/4 -> F = 1/4; one chunk -> no penalty -> 25.
    CHECK(meteor(toks({"a", "x", "y", "z"}), toks({"a", "p", "q", "r"})) ==
          doctest::Approx(25.0).epsilon(1e-12));
  }
  SUBCASE("stem stage matches inflected forms") {
    CHECK(meteor(toks({"running"}), toks({"runs"})) == 100.0);
    CHECK(meteor(toks({"the", "runs"}), toks({"the", "running"})) == 100.0);
  }
  SUBCASE("fragmentation penalty on reordered matches") {
    // All four match but split into 3 chunks: penalty 0.5*(3/4)^3.
    double got = meteor(toks({"the", "cat", "sat", "down"}),
                        toks({"the", "cat", "down", "sat"}));
    CHECK(got == doctest::Approx(100.0 * (1.0 - 0.5 * 0.421875))
                     .epsilon(1e-12));
    CHECK(got == doctest::Approx(78.90625).epsilon(1e-12));
  }
  SUBCASE("mixed stages with maximal fragmentation") {
    // Matches: "he" exact, running~runs by stem. m=2 of 3 and 3,
    // F = (4/9)/(2/3) = 2/3; 2 chunks of 2 matches -> penalty 0.5.
    double got = meteor(toks({"he", "is", "running"}),
                        toks({"he", "was", "runs"}));
    CHECK(got == doctest::Approx(100.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("reference tokens match at most once") {
    // hyp "a a" vs ref "a": m=1, P=1/2, R=1 -> F = 0.5/0.55 = 10/11.
    CHECK(meteor(toks({"a", "a"}), toks({"a"})) ==
          doctest::Approx(1000.0 / 11.0).epsilon(1e-12));
  }
  SUBCASE("zeros") {
    CHECK(meteor(toks({"x"}), toks({"a"})) == 0.0);
    CHECK(meteor({}, toks({"a"})) == 0.0);
    CHECK(meteor(toks({"a"}), {}) == 0.0);
  }
}

TEST_CASE("score bounds over assorted inputs") {
  const std::vector<std::vector<std::string>> pool = {
      toks({"a", "b", "c"}), toks({"c", "b", "a"}), toks({"a"}),
      toks({"a", "a", "b", "b"}), toks({"x", "y", "z", "w", "v"}), {},
      toks({"running", "fast"}), toks({"runs", "faster"})};
  for (const auto& h : pool)
    for (const auto& r : pool) {
      CAPTURE(h.size());
      CAPTURE(r.size());
      for (double s : {bleu(h, r), rouge_l(h, r), meteor(h, r)}) {
        CHECK(s >= 0.0);
        CHECK(s <= 100.0);
      }
    }
  for (const auto& h : pool) {
    if (h.empty()) continue;
    CHECK(bleu(h, h) == 100.0);
    CHECK(rouge_l(h, h) == 100.0);
    CHECK(meteor(h, h) == 100.0);
  }
}

TEST_CASE("corpus evaluation averages sentence scores") {
  std::vector<std::vector<std::string>> refs = {toks({"a", "b", "c"}),
                                                toks({"x", "y"})};
  SUBCASE("all identical -> 100 everywhere") {
    MetricReport rep = evaluate_corpus(refs, refs);
    CHECK(rep.bleu == 100.0);
    CHECK(rep.meteor == 100.0);
    CHECK(rep.rouge_l == 100.0);
    REQUIRE(rep.bleu_scores.size() == 2);
    CHECK(rep.bleu_scores[0] == 100.0);
    CHECK(rep.meteor_scores[1] == 100.0);
    CHECK(rep.rouge_scores[0] == 100.0);
  }
  SUBCASE("a perfect and an empty hypothesis average to 50") {
    std::vector<std::vector<std::string>> hyps = {refs[0], {}};
    MetricReport rep = evaluate_corpus(hyps, refs);
    CHECK(rep.bleu == 50.0);
    CHECK(rep.meteor == 50.0);
    CHECK(rep.rouge_l == 50.0);
    CHECK(rep.bleu_scores[1] == 0.0);
    CHECK(rep.meteor_scores[1] == 0.0);
    CHECK(rep.rouge_scores[1] == 0.0);
  }
  SUBCASE("corpus value equals the mean of the per-example list") {
    std::vector<std::vector<std::string>> hyps = {toks({"a", "b"}),
                                                  toks({"x", "y", "z"})};
    MetricReport rep = evaluate_corpus(hyps, refs);
    CHECK(rep.bleu == (rep.bleu_scores[0] + rep.bleu_scores[1]) / 2.0);
    CHECK(rep.meteor == (rep.meteor_scores[0] + rep.meteor_scores[1]) / 2.0);
    CHECK(rep.rouge_l == (rep.rouge_scores[0] + rep.rouge_scores[1]) / 2.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(evaluate_corpus({refs[0]}, refs), ShapeMismatch);
    CHECK_THROWS_AS(evaluate_corpus({}, {}), DataError);
  }
}

TEST_CASE("metric tokenization matches the training splitter") {
  CHECK(metric_tokens("Adds two numbers.") ==
        toks({"adds", "two", "numbers", "."}));
  CHECK(metric_tokens("getX") == toks({"get", "x"}));
  CHECK(metric_tokens("") == std::vector<std::string>{});
}
