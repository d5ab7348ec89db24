#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gypsum/config.hpp"
#include "gypsum/errors.hpp"
#include "gypsum/frontend.hpp"
#include "gypsum/gencoder.hpp"
#include "gypsum/graph.hpp"
#include "gypsum/nn.hpp"
#include "gypsum/tensor.hpp"
#include "gypsum/tokenizer.hpp"
#include "gypsum/vocab.hpp"

using namespace gypsum;

namespace {

RunConfig tiny_config() {
  RunConfig cfg = preset_config("desk", "java");
  cfg.d_model = 6;
  cfg.d_t = 4;
  cfg.d_edge = 5;
  cfg.h_g = 8;
  cfg.head_g = 2;
  cfg.L_g = 2;
  cfg.l_g = 32;
  cfg.d_e = 8;  // equal widths: no output projection
  cfg.vocab_size = 64;
  return cfg;
}

SemanticGraph java_graph(const std::string& code, const Tokenizer& tok) {
  ExtendedAst ast = extend_ast(parse_java(code), tok, Language::Java);
  return build_graph(std::move(ast), "t");
}

struct Fixture {
  RunConfig cfg;
  Vocabulary vocab;
  HeuristicTokenizer tok;
  SemanticGraph g;
  KindRegistry kinds;
  ParamStore ps;
  Tensor tok_emb;
  GEncoderParams enc;

  explicit Fixture(const std::string& code, RunConfig c = tiny_config(),
                   uint64_t seed = 123)
      : cfg(c),
        g(java_graph(code, tok)),
        kinds(all_kinds()),
        ps(seed),
        tok_emb(ps.create("emb.token", {cfg.vocab_size, cfg.d_model}, Init::FanIn)),
        enc(make_gencoder(ps, "genc", cfg, tok_emb, kinds.size())) {
    std::vector<std::string> subwords;
    for (const auto& n : g.ast.nodes)
      if (n.leaf && !vocab.contains(n.text) &&
          std::find(subwords.begin(), subwords.end(), n.text) == subwords.end())
        subwords.push_back(n.text);
    vocab = Vocabulary::from_tokens(subwords);
  }

  std::vector<std::string> all_kinds() {
    std::vector<std::string> ks;
    std::unordered_map<std::string, int> seen;
    collect_kinds(g, ks, seen);
    return ks;
  }
};

}  // namespace

TEST_CASE("kind registry maps kinds and rejects unknowns") {
  KindRegistry reg({"A", "B", "C"});
  CHECK(reg.size() == 3);
  CHECK(reg.index("A") == 0);
  CHECK(reg.index("C") == 2);
  CHECK(reg.contains("B"));
  CHECK_FALSE(reg.contains("Z"));
  CHECK_THROWS_AS(reg.index("Z"), UnknownKind);
  CHECK_THROWS_AS(KindRegistry({"A", "A"}), DataError);
}

TEST_CASE("initial node states: shape, kind sharing, text sensitivity") {
  Fixture f("int add(int a, int b) { return a + b; }");
  Tensor h0 = init_node_states(f.enc, f.g, f.vocab, f.kinds);
  int n = static_cast<int>(f.g.ast.nodes.size());
  REQUIRE(h0.shape() == std::vector<int>{n, f.cfg.h_g});

  // Internal nodes of identical kind get identical rows.
  std::vector<int> params_nodes;
  for (int i = 0; i < n; ++i) {
    const auto& node = f.g.ast.nodes[size_t(i)];
    if (!node.leaf && node.kind == "FormalParameter") params_nodes.push_back(i);
  }
  REQUIRE(params_nodes.size() == 2);
  for (int c = 0; c < f.cfg.h_g; ++c)
    CHECK(h0.at(params_nodes[0], c) == h0.at(params_nodes[1], c));

  // Leaves with identical (kind, text) agree; same kind with different text
  // differs through the shared token embedding.
  int same_a = -1, same_b = -1, diff_a = -1, diff_b = -1;
  for (int i = 0; i < n && (same_a < 0 || diff_a < 0); ++i) {
    const auto& ni = f.g.ast.nodes[size_t(i)];
    if (!ni.leaf) continue;
    for (int j = i + 1; j < n; ++j) {
      const auto& nj = f.g.ast.nodes[size_t(j)];
      if (!nj.leaf || nj.kind != ni.kind) continue;
      if (nj.text == ni.text && same_a < 0) {
        same_a = i;
        same_b = j;
      }
      if (nj.text != ni.text && diff_a < 0) {
        diff_a = i;
        diff_b = j;
      }
    }
  }
  REQUIRE(same_a >= 0);
  REQUIRE(diff_a >= 0);
  bool same = true, differ = false;
  for (int c = 0; c < f.cfg.h_g; ++c) {
    if (h0.at(same_a, c) != h0.at(same_b, c)) same = false;
    if (h0.at(diff_a, c) != h0.at(diff_b, c)) differ = true;
  }
  CHECK(same);
  CHECK(differ);

  // A kind outside the registry fails at inference time.
  KindRegistry smaller({"MethodDeclaration"});
  CHECK_THROWS_AS(init_node_states(f.enc, f.g, f.vocab, smaller), UnknownKind);
}

TEST_CASE("edge batch is dst-segmented and requires self edges") {
  Fixture f("void f() { int x = 1; }");
  EdgeBatch b = build_edge_batch(f.g);
  int n = static_cast<int>(f.g.ast.nodes.size());
  REQUIRE(static_cast<int>(b.seg_offsets.size()) == n + 1);
  CHECK(b.seg_offsets.front() == 0);
  CHECK(b.seg_offsets.back() == static_cast<int>(b.src.size()));
  for (size_t e = 0; e < b.dst.size(); ++e) {
    int d = b.dst[e];
    CHECK(static_cast<int>(e) >= b.seg_offsets[size_t(d)]);
    CHECK(static_cast<int>(e) < b.seg_offsets[size_t(d) + 1]);
  }
  // Sorted by (dst, src, type).
  for (size_t e = 1; e < b.dst.size(); ++e) {
    bool ordered = std::make_tuple(b.dst[e - 1], b.src[e - 1], b.type[e - 1]) <
                   std::make_tuple(b.dst[e], b.src[e], b.type[e]);
    CHECK(ordered);
  }

  SemanticGraph bare = add_base_edges(f.g.ast, "bare");
  // Base edges only: the root has no incoming edge, so the batch is invalid.
  CHECK_THROWS_AS(build_edge_batch(bare), DataError);
}

TEST_CASE("attention normalizes to 1 over each node's incident edges") {
  Fixture f("int mul(int a, int b) { int r = a * b; return r; }");
  EdgeBatch batch = build_edge_batch(f.g);
  Tensor h = init_node_states(f.enc, f.g, f.vocab, f.kinds);
  int n = static_cast<int>(f.g.ast.nodes.size());
  for (int l = 0; l < f.cfg.L_g; ++l) {
    GatLayerResult r = gat_layer(f.enc, l, h, batch, f.cfg);
    for (int i = 0; i < n; ++i) {
      double s = 0;
      for (int e = batch.seg_offsets[size_t(i)]; e < batch.seg_offsets[size_t(i) + 1];
           ++e)
        s += r.edge_attn.at(e);
      INFO("layer ", l, " node ", i);
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
    h = r.states;
    for (double v : h.value()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("singleton and path-graph attention match softmax-of-few-terms") {
  // Single node: only the Self edge, so its attention is exactly 1.
  ExtendedAst one;
  one.nodes.push_back({0, "Leaf", "x", true, -1, {}, false});
  SemanticGraph g1 = build_graph(one, "one");
  RunConfig cfg = tiny_config();
  ParamStore ps(7);
  Tensor emb = ps.create("emb.token", {cfg.vocab_size, cfg.d_model}, Init::FanIn);
  KindRegistry kinds({"Leaf"});
  GEncoderParams enc = make_gencoder(ps, "genc", cfg, emb, kinds.size());
  Vocabulary vocab = Vocabulary::from_tokens({"x"});
  EdgeBatch b1 = build_edge_batch(g1);
  REQUIRE(b1.src.size() == 1);
  Tensor h1 = init_node_states(enc, g1, vocab, kinds);
  GatLayerResult r1 = gat_layer(enc, 0, h1, b1, cfg);
  CHECK(r1.edge_attn.at(0) == doctest::Approx(1.0).epsilon(1e-12));

  // Path 0-1-2: the middle node has exactly 3 incident edge terms.
  ExtendedAst path;
  path.nodes.push_back({0, "K", "", false, -1, {1}, false});
  path.nodes.push_back({1, "K", "", false, 0, {2}, false});
  path.nodes.push_back({2, "Leaf", "x", true, 1, {}, false});
  SemanticGraph g3 = build_graph(path, "path");
  KindRegistry kinds3({"K", "Leaf"});
  ParamStore ps3(8);
  Tensor emb3 = ps3.create("emb.token", {cfg.vocab_size, cfg.d_model}, Init::FanIn);
  GEncoderParams enc3 = make_gencoder(ps3, "genc", cfg, emb3, kinds3.size());
  EdgeBatch b3 = build_edge_batch(g3);
  Tensor h3 = init_node_states(enc3, g3, vocab, kinds3);
  GatLayerResult r3 = gat_layer(enc3, 0, h3, b3, cfg);
  int lo = b3.seg_offsets[1], hi = b3.seg_offsets[2];
  CHECK(hi - lo == 3);  // Child from 0, ChildRev from 2, Self
  double s = 0;
  for (int e = lo; e < hi; ++e) s += r3.edge_attn.at(e);
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("self-only graphs keep nodes independent") {
  ExtendedAst path;
  path.nodes.push_back({0, "K", "", false, -1, {1}, false});
  path.nodes.push_back({1, "K", "", false, 0, {2}, false});
  path.nodes.push_back({2, "Leaf", "x", true, 1, {}, false});
  SemanticGraph g = add_base_edges(path, "p");
  g.edges.clear();
  for (int i = 0; i < 3; ++i) g.edges.push_back({i, i, EdgeType::Self});

  RunConfig cfg = tiny_config();
  ParamStore ps(9);
  Tensor emb = ps.create("emb.token", {cfg.vocab_size, cfg.d_model}, Init::FanIn);
  GEncoderParams enc = make_gencoder(ps, "genc", cfg, emb, 2);
  EdgeBatch b = build_edge_batch(g);

  Rng rng(5);
  Tensor h_a = Tensor::rand_uniform({3, cfg.h_g}, 1.0, rng);
  std::vector<double> vals = h_a.value();
  for (int c = 0; c < cfg.h_g; ++c) vals[size_t(2 * cfg.h_g + c)] += 3.5;  // node 2 only
  Tensor h_b = Tensor::from_values({3, cfg.h_g}, vals);

  GatLayerResult ra = gat_layer(enc, 0, h_a, b, cfg);
  GatLayerResult rb = gat_layer(enc, 0, h_b, b, cfg);
  for (int i = 0; i < 2; ++i)
    for (int c = 0; c < cfg.h_g; ++c)
      CHECK(ra.states.at(i, c) == doctest::Approx(rb.states.at(i, c)).epsilon(1e-12));
  // Self attention of a singleton segment is 1, so the update reduces to a
  // per-node transform of its own state.
  for (size_t e = 0; e < b.src.size(); ++e)
    CHECK(ra.edge_attn.at(static_cast<int>(e)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("hand-sized attention layer matches a scalar brute-force evaluation") {
  // 2 nodes (root 0, leaf 1), h_g = 2, d_edge = 2, one head, one layer.
  ExtendedAst two;
  two.nodes.push_back({0, "K", "", false, -1, {1}, false});
  two.nodes.push_back({1, "Leaf", "x", true, 0, {}, false});
  SemanticGraph g = build_graph(two, "two");
  // Edge multiset: Child(0->1), ChildRev(1->0), Self(0), Self(1).

  RunConfig cfg = tiny_config();
  cfg.h_g = 2;
  cfg.d_edge = 2;
  cfg.head_g = 1;
  cfg.L_g = 1;
  cfg.d_e = 2;
  ParamStore ps(1);
  Tensor emb = ps.create("emb.token", {cfg.vocab_size, cfg.d_model}, Init::FanIn);
  GEncoderParams enc = make_gencoder(ps, "genc", cfg, emb, 2);

  // Overwrite with small fixed weights.
  enc.w.value() = {0.1, -0.2, 0.3, 0.4};        // W row-major [2x2]
  enc.w_e.value() = {0.5, 0.0, -0.1, 0.25};     // W_e [2x2]
  std::vector<double> ee(size_t(kNumEdgeTypes) * 2, 0.0);
  auto set_e = [&](EdgeType t, double a, double b) {
    ee[size_t(t) * 2] = a;
    ee[size_t(t) * 2 + 1] = b;
  };
  set_e(EdgeType::Child, 0.2, -0.3);
  set_e(EdgeType::ChildRev, -0.15, 0.1);
  set_e(EdgeType::Self, 0.05, 0.35);
  enc.edge_emb.value() = ee;
  enc.layers[0].heads[0].w_score.value() = {0.3, -0.1, 0.2, 0.4, -0.25, 0.15};

  Tensor h0 = Tensor::from_values({2, 2}, {0.7, -0.4, 0.25, 0.9});
  EdgeBatch batch = build_edge_batch(g);
  GatLayerResult got = gat_layer(enc, 0, h0, batch, cfg);

  // Independent scalar evaluation, plain double arithmetic throughout.
  auto matvec2 = [](const std::vector<double>& m, const double* v, double* out) {
    out[0] = m[0] * v[0] + m[1] * v[1];
    out[1] = m[2] * v[0] + m[3] * v[1];
  };
  double h[2][2] = {{0.7, -0.4}, {0.25, 0.9}};
  double wh[2][2];
  matvec2(enc.w.value(), h[0], wh[0]);
  matvec2(enc.w.value(), h[1], wh[1]);
  double we[kNumEdgeTypes][2];
  for (int t = 0; t < kNumEdgeTypes; ++t) {
    double ev[2] = {ee[size_t(t) * 2], ee[size_t(t) * 2 + 1]};
    matvec2(enc.w_e.value(), ev, we[t]);
  }
  const std::vector<double>& ws = enc.layers[0].heads[0].w_score.value();
  auto score = [&](int i, int j, EdgeType t) {
    double s = ws[0] * wh[i][0] + ws[1] * wh[i][1] + ws[2] * wh[j][0] +
               ws[3] * wh[j][1] + ws[4] * we[size_t(t)][0] + ws[5] * we[size_t(t)][1];
    return s > 0 ? s : 0.2 * s;  // LeakyReLU slope 0.2
  };
  auto eluv = [](double x) { return x > 0 ? x : std::exp(x) - 1.0; };

  // Node 0 incident edges: ChildRev from 1, Self from 0.
  double s0_rev = score(0, 1, EdgeType::ChildRev);
  double s0_self = score(0, 0, EdgeType::Self);
  double m0 = std::max(s0_rev, s0_self);
  double z0 = std::exp(s0_rev - m0) + std::exp(s0_self - m0);
  double a0_rev = std::exp(s0_rev - m0) / z0;
  double a0_self = std::exp(s0_self - m0) / z0;
  double out0[2];
  for (int c = 0; c < 2; ++c)
    out0[c] = eluv(a0_rev * h[1][c]) + eluv(a0_self * h[0][c]);

  // Node 1 incident edges: Child from 0, Self from 1.
  double s1_child = score(1, 0, EdgeType::Child);
  double s1_self = score(1, 1, EdgeType::Self);
  double m1 = std::max(s1_child, s1_self);
  double z1 = std::exp(s1_child - m1) + std::exp(s1_self - m1);
  double a1_child = std::exp(s1_child - m1) / z1;
  double a1_self = std::exp(s1_self - m1) / z1;
  double out1[2];
  for (int c = 0; c < 2; ++c)
    out1[c] = eluv(a1_child * h[0][c]) + eluv(a1_self * h[1][c]);

  for (int c = 0; c < 2; ++c) {
    CHECK(std::abs(got.states.at(0, c) - out0[c]) < 1e-10);
    CHECK(std::abs(got.states.at(1, c) - out1[c]) < 1e-10);
  }

  // Attention weights line up with the sorted edge batch.
  for (size_t e = 0; e < batch.src.size(); ++e) {
    double expect = 0;
    if (batch.dst[e] == 0)
      expect = batch.src[e] == 1 ? a0_rev : a0_self;
    else
      expect = batch.src[e] == 0 ? a1_child : a1_self;
    CHECK(std::abs(got.edge_attn.at(static_cast<int>(e)) - expect) < 1e-10);
  }

  // Standard-form variant: activation applied after the sum.
  RunConfig cfg_out = cfg;
  cfg_out.gat_activation_outside = true;
  GatLayerResult got_out = gat_layer(enc, 0, h0, batch, cfg_out);
  for (int c = 0; c < 2; ++c) {
    double e0 = eluv(a0_rev * h[1][c] + a0_self * h[0][c]);
    double e1 = eluv(a1_child * h[0][c] + a1_self * h[1][c]);
    CHECK(std::abs(got_out.states.at(0, c) - e0) < 1e-10);
    CHECK(std::abs(got_out.states.at(1, c) - e1) < 1e-10);
  }
}

TEST_CASE("hidden layers concatenate and project; last layer averages heads") {
  Fixture f("void f() { int x = 1; }");
  // L_g=2, head_g=2: layer 0 must have a projection, layer 1 must not.
  CHECK(f.enc.layers[0].w_o.w.defined());
  CHECK_FALSE(f.enc.layers[1].w_o.w.defined());
  CHECK(f.enc.layers[0].w_o.w.shape() ==
        std::vector<int>{f.cfg.h_g, f.cfg.head_g * f.cfg.h_g});
}

TEST_CASE("encode_graph pads, masks, truncates, and enforces the node cap") {
  Fixture f("int add(int a, int b) { return a + b; }");
  ForwardContext ctx;
  GraphEncoding e = encode_graph(f.enc, f.g, f.vocab, f.kinds, f.cfg, ctx);
  int n = static_cast<int>(f.g.ast.nodes.size());
  REQUIRE(n < f.cfg.l_g);
  REQUIRE(e.out.matrix.shape() == std::vector<int>{f.cfg.l_g, f.cfg.d_e});
  REQUIRE(static_cast<int>(e.out.mask.size()) == f.cfg.l_g);
  int real = 0;
  for (int r = 0; r < f.cfg.l_g; ++r) {
    if (e.out.mask[r]) {
      ++real;
      continue;
    }
    for (int c = 0; c < f.cfg.d_e; ++c) CHECK(e.out.matrix.at(r, c) == 0.0);
  }
  CHECK(real == n);

  // Truncation to a small l_g keeps exactly l_g rows, all real.
  RunConfig small = f.cfg;
  small.l_g = 4;
  GraphEncoding es = encode_graph(f.enc, f.g, f.vocab, f.kinds, small, ctx);
  CHECK(es.out.matrix.rows() == 4);
  for (uint8_t m : es.out.mask) CHECK(m == 1);

  // Node cap rejection.
  RunConfig capped = f.cfg;
  capped.node_cap = 3;
  CHECK_THROWS_AS(encode_graph(f.enc, f.g, f.vocab, f.kinds, capped, ctx), LengthError);

  // Unequal widths engage the output projection.
  RunConfig wide = f.cfg;
  wide.d_e = 12;
  ParamStore ps2(77);
  Tensor emb2 = ps2.create("emb.token", {wide.vocab_size, wide.d_model}, Init::FanIn);
  GEncoderParams enc2 = make_gencoder(ps2, "genc", wide, emb2, f.kinds.size());
  CHECK(enc2.out_proj.w.defined());
  GraphEncoding ew = encode_graph(enc2, f.g, f.vocab, f.kinds, wide, ctx);
  CHECK(ew.out.matrix.cols() == 12);
}

TEST_CASE("relabeling node ids leaves the ordered encoding unchanged") {
  std::string code = "int f(int a) { if (a > 0) { a = a - 1; } return a; }";
  Fixture f(code);

  // Relabel: node i -> n-1-i, preserving structure.
  int n = static_cast<int>(f.g.ast.nodes.size());
  auto mapid = [n](int i) { return n - 1 - i; };
  SemanticGraph g2;
  g2.id = f.g.id;
  g2.ast.nodes.resize(size_t(n));
  for (int i = 0; i < n; ++i) {
    AstNode nn = f.g.ast.nodes[size_t(i)];
    nn.id = mapid(i);
    nn.parent = nn.parent < 0 ? -1 : mapid(nn.parent);
    for (auto& c : nn.children) c = mapid(c);
    g2.ast.nodes[size_t(mapid(i))] = nn;
  }
  g2.ast.root = mapid(f.g.ast.root);
  for (const auto& e : f.g.edges)
    g2.edges.push_back({mapid(e.src), mapid(e.dst), e.type});
  g2.ast.validate();

  ForwardContext ctx;
  GraphEncoding e1 = encode_graph(f.enc, f.g, f.vocab, f.kinds, f.cfg, ctx);
  GraphEncoding e2 = encode_graph(f.enc, g2, f.vocab, f.kinds, f.cfg, ctx);
  REQUIRE(e1.out.matrix.shape() == e2.out.matrix.shape());
  CHECK(e1.out.mask == e2.out.mask);
  for (size_t i = 0; i < e1.out.matrix.size(); ++i)
    CHECK(e1.out.matrix.value()[i] ==
          doctest::Approx(e2.out.matrix.value()[i]).epsilon(1e-9));
}

TEST_CASE("determinism: same seed, same encoding") {
  std::string code = "void g() { int y = 2; }";
  Fixture f1(code, tiny_config(), 555);
  Fixture f2(code, tiny_config(), 555);
  ForwardContext ctx;
  GraphEncoding e1 = encode_graph(f1.enc, f1.g, f1.vocab, f1.kinds, f1.cfg, ctx);
  GraphEncoding e2 = encode_graph(f2.enc, f2.g, f2.vocab, f2.kinds, f2.cfg, ctx);
  CHECK(e1.out.matrix.value() == e2.out.matrix.value());
}

TEST_CASE("gradients through the graph encoder match finite differences") {
  RunConfig cfg = tiny_config();
  cfg.h_g = 4;
  cfg.d_model = 4;
  cfg.d_t = 3;
  cfg.d_edge = 3;
  cfg.l_g = 12;
  cfg.d_e = 4;
  Fixture f("int f(int a) { return a + 1; }", cfg, 321);
  ForwardContext ctx;

  auto forward = [&]() {
    GraphEncoding e = encode_graph(f.enc, f.g, f.vocab, f.kinds, f.cfg, ctx);
    const int nw = static_cast<int>(e.out.matrix.size());
    std::vector<double> w(static_cast<size_t>(nw));
    for (size_t i = 0; i < w.size(); ++i) w[i] = 0.07 + 0.013 * double(i % 11);
    Tensor wt = Tensor::from_values({nw}, std::move(w));
    // The edge attention feeds downstream consumers, so include it in the loss.
    Tensor attn_part = sum_all(mul(
        e.edge_attn, Tensor::full({static_cast<int>(e.edge_attn.size())}, 0.23)));
    return add(sum_all(mul(reshape(e.out.matrix, {nw}), wt)), attn_part);
  };

  f.ps.zero_grad_all();
  Tensor loss = forward();
  loss.backward();

  const double eps = 1e-6, tol = 1e-4;
  NoGradGuard ng;
  int checked = 0;
  for (const auto& name : f.ps.names()) {
    Tensor t = f.ps.get(name);
    size_t stride = std::max<size_t>(1, t.size() / 4);
    for (size_t k = 0; k < t.size(); k += stride) {
      double orig = t.value()[k];
      t.value()[k] = orig + eps;
      double up = forward().item();
      t.value()[k] = orig - eps;
      double dn = forward().item();
      t.value()[k] = orig;
      double num = (up - dn) / (2 * eps);
      double ana = t.grad()[k];
      double denom = std::max({1.0, std::abs(num), std::abs(ana)});
      INFO("param ", name, " idx ", k, " analytic ", ana, " numeric ", num);
      CHECK(std::abs(num - ana) <= tol * denom);
      ++checked;
    }
  }
  CHECK(checked > 30);
}
