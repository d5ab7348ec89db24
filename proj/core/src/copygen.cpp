#include "gypsum/copygen.hpp"

#include "gypsum/errors.hpp"

namespace gypsum {

CopyGenParams make_copygen(ParamStore& ps, const std::string& prefix, int d_e,
                           int vocab_size) {
  if (d_e <= 0 || vocab_size <= 0)
    throw ConfigError("copy head needs positive d_e and vocabulary size");
  CopyGenParams p;
  p.w_gen = ps.create(prefix + ".w_gen", {3, d_e}, Init::FanIn);
  p.w_voc = ps.create(prefix + ".w_voc", {vocab_size, d_e}, Init::FanIn);
  return p;
}

Tensor gate_probs(const CopyGenParams& p, const Tensor& d_t) {
  return softmax_vec(linear(d_t, p.w_gen, Tensor()));
}

Tensor vocab_dist(const CopyGenParams& p, const Tensor& d_t) {
  return softmax_vec(linear(d_t, p.w_voc, Tensor()));
}

namespace {

// Zeroes masked entries; optionally renormalizes the survivors to sum 1.
Tensor mask_vector(const Tensor& v, const std::vector<uint8_t>& mask, bool renorm,
                   const char* what) {
  if (static_cast<size_t>(v.rows()) != mask.size())
    throw ShapeMismatch(std::string(what) + ": mask length mismatch");
  bool any = false;
  for (uint8_t m : mask)
    if (m) {
      any = true;
      break;
    }
  if (!any) throw DegenerateMask(std::string(what) + ": every position is masked");
  std::vector<double> keep(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) keep[i] = mask[i] ? 1.0 : 0.0;
  Tensor masked = mul(v, Tensor::from_values({v.rows()}, std::move(keep)));
  if (!renorm) return masked;
  Tensor total = sum_all(masked);
  if (total.item() <= 0.0)
    throw DegenerateMask(std::string(what) + ": no attention mass on copyable positions");
  return div_bcast(masked, total);
}

}  // namespace

CopyDists copy_dists(const Tensor& attn_c_row, const Tensor& attn_g_row,
                     const CopyMasks& masks, bool renormalize_leaves) {
  CopyDists d;
  d.a_c = mask_vector(attn_c_row, masks.code, /*renorm=*/true, "copy over code tokens");
  d.a_g = mask_vector(attn_g_row, masks.leaf, renormalize_leaves,
                      "copy over graph leaves");
  return d;
}

int ExtendedVocab::id_of(const Vocabulary& vocab, const std::string& token) const {
  if (vocab.contains(token)) return vocab.id(token);
  auto it = novel_index.find(token);
  return it == novel_index.end() ? -1 : it->second;
}

const std::string& ExtendedVocab::token_of(const Vocabulary& vocab, int ext_id) const {
  if (ext_id < vocab_size) return vocab.token(ext_id);
  return novel.at(static_cast<size_t>(ext_id - vocab_size));
}

ExtendedVocab build_extended_vocab(const Vocabulary& vocab,
                                   const std::vector<std::string>& code_tokens,
                                   const std::vector<std::string>& leaf_texts,
                                   const CopyMasks& masks) {
  if (code_tokens.size() != masks.code.size() || leaf_texts.size() != masks.leaf.size())
    throw ShapeMismatch("extended vocabulary: token/mask length mismatch");
  ExtendedVocab ext;
  ext.vocab_size = vocab.size();
  auto ext_id = [&](const std::string& s) {
    if (vocab.contains(s)) return vocab.id(s);
    auto it = ext.novel_index.find(s);
    if (it != ext.novel_index.end()) return it->second;
    int id = ext.vocab_size + static_cast<int>(ext.novel.size());
    ext.novel.push_back(s);
    ext.novel_index.emplace(s, id);
    return id;
  };
  ext.code_pos_ext.assign(code_tokens.size(), -1);
  for (size_t i = 0; i < code_tokens.size(); ++i)
    if (masks.code[i]) ext.code_pos_ext[i] = ext_id(code_tokens[i]);
  ext.leaf_pos_ext.assign(leaf_texts.size(), -1);
  for (size_t i = 0; i < leaf_texts.size(); ++i)
    if (masks.leaf[i]) ext.leaf_pos_ext[i] = ext_id(leaf_texts[i]);
  return ext;
}

namespace {

// Scatter-add of per-position probabilities onto extended-vocabulary ids.
// Masked positions (ext id -1) are parked on bucket 0; their values are zero
// by construction so the bucket stays untouched.
Tensor scatter_to_ext(const Tensor& probs, const std::vector<int>& pos_ext, int n_ext) {
  std::vector<int> seg(pos_ext.size(), 0);
  for (size_t i = 0; i < pos_ext.size(); ++i) seg[i] = pos_ext[i] < 0 ? 0 : pos_ext[i];
  Tensor col = reshape(probs, {probs.rows(), 1});
  return reshape(segment_sum_rows(col, seg, n_ext), {n_ext});
}

}  // namespace

Tensor token_dist(const Tensor& gate, const Tensor& p_voc, const Tensor& a_c,
                  const Tensor& a_g, const ExtendedVocab& ext) {
  if (gate.rows() != 3) throw ShapeMismatch("gate must have three components");
  if (p_voc.rows() != ext.vocab_size)
    throw ShapeMismatch("vocabulary distribution width mismatch");
  int n_ext = ext.size();
  Tensor voc_ext = n_ext == ext.vocab_size
                       ? p_voc
                       : concat_vec(p_voc, Tensor::zeros({n_ext - ext.vocab_size}));
  Tensor c_ext = scatter_to_ext(a_c, ext.code_pos_ext, n_ext);
  Tensor g_ext = scatter_to_ext(a_g, ext.leaf_pos_ext, n_ext);
  Tensor rows = stack_rows({voc_ext, c_ext, g_ext});      // [3, n_ext]
  Tensor gated = scale_rows(rows, gate);                  // row r scaled by gate[r]
  return reshape(segment_sum_rows(gated, {0, 0, 0}, 1), {n_ext});
}

StepDistribution step_distribution(const CopyGenParams& p, const Tensor& d_t,
                                   const Tensor& attn_c_row, const Tensor& attn_g_row,
                                   const CopyMasks& masks, const ExtendedVocab& ext,
                                   const RunConfig& cfg) {
  StepDistribution s;
  s.gate = gate_probs(p, d_t);
  s.p_voc = vocab_dist(p, d_t);
  CopyDists cd =
      copy_dists(attn_c_row, attn_g_row, masks, cfg.copy_renormalize_leaves);
  s.a_c = cd.a_c;
  s.a_g = cd.a_g;
  s.merged = token_dist(s.gate, s.p_voc, s.a_c, s.a_g, ext);
  return s;
}

}  // namespace gypsum
