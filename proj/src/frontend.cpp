#include "tapfm/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tapfm {

std::vector<std::string> default_tn_labels() {
  std::vector<std::string> labels = {"O"};
  for (const char* cls : {"CARDINAL", "DATE", "MONEY", "TIME", "LETTERS"}) {
    labels.push_back(std::string("B-") + cls);
    labels.push_back(std::string("I-") + cls);
  }
  return labels;
}

ResConformerBlock make_res_conformer(ParamStore& store, const std::string& prefix, int dim,
                                     int ffn_hidden, RngStream& rng) {
  ResConformerBlock b;
  b.dim = dim;
  double s = 1.0 / std::sqrt(static_cast<double>(dim));
  b.ln1_g = store.create(prefix + ".ln1_g", Tensor::full(1, dim, 1.0));
  b.ln1_b = store.create(prefix + ".ln1_b", Tensor(1, dim));
  b.ffn1_w1 = store.create(prefix + ".ffn1_w1", Tensor::randn(dim, ffn_hidden, rng, s));
  b.ffn1_b1 = store.create(prefix + ".ffn1_b1", Tensor(1, ffn_hidden));
  b.ffn1_w2 = store.create(prefix + ".ffn1_w2", Tensor::randn(ffn_hidden, dim, rng, s));
  b.ffn1_b2 = store.create(prefix + ".ffn1_b2", Tensor(1, dim));
  b.wq = store.create(prefix + ".wq", Tensor::randn(dim, dim, rng, s));
  b.wk = store.create(prefix + ".wk", Tensor::randn(dim, dim, rng, s));
  b.wv = store.create(prefix + ".wv", Tensor::randn(dim, dim, rng, s));
  b.conv_w = store.create(prefix + ".conv_w", Tensor::randn(3, dim, rng, s));
  b.conv_b = store.create(prefix + ".conv_b", Tensor(1, dim));
  b.ffn2_w1 = store.create(prefix + ".ffn2_w1", Tensor::randn(dim, ffn_hidden, rng, s));
  b.ffn2_b1 = store.create(prefix + ".ffn2_b1", Tensor(1, ffn_hidden));
  b.ffn2_w2 = store.create(prefix + ".ffn2_w2", Tensor::randn(ffn_hidden, dim, rng, s));
  b.ffn2_b2 = store.create(prefix + ".ffn2_b2", Tensor(1, dim));
  b.ln2_g = store.create(prefix + ".ln2_g", Tensor::full(1, dim, 1.0));
  b.ln2_b = store.create(prefix + ".ln2_b", Tensor(1, dim));
  b.proj = store.create(prefix + ".proj", Tensor(dim, dim));  // zero
  return b;
}

Value res_conformer_branch(const ResConformerBlock& b, const Value& x) {
  Value h = layer_norm_rows(x, b.ln1_g, b.ln1_b);
  h = tanh_v(add_rowvec(matmul(h, b.ffn1_w1), b.ffn1_b1));
  h = add_rowvec(matmul(h, b.ffn1_w2), b.ffn1_b2);
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(b.dim));
  Value q = matmul(h, b.wq);
  Value k = matmul(h, b.wk);
  Value v = matmul(h, b.wv);
  h = matmul(softmax_rows(scalar_mul(matmul(q, transpose(k)), inv_sqrt_d)), v);
  h = add_rowvec(conv_dw3(h, b.conv_w), b.conv_b);
  h = tanh_v(add_rowvec(matmul(h, b.ffn2_w1), b.ffn2_b1));
  h = add_rowvec(matmul(h, b.ffn2_w2), b.ffn2_b2);
  h = layer_norm_rows(h, b.ln2_g, b.ln2_b);
  return matmul(h, b.proj);
}

Value res_conformer_forward(const ResConformerBlock& b, const Value& x) {
  // skip path carries the value but no gradient
  return add(detach(x), res_conformer_branch(b, x));
}

FrontendModel make_frontend_model(const SymbolBank& bank, const FrontendConfig& cfg) {
  FrontendModel m;
  m.bank = bank;
  m.cfg = cfg;
  if (m.cfg.tn_labels.empty()) m.cfg.tn_labels = default_tn_labels();
  if (m.cfg.pron_inventory.empty()) m.cfg.pron_inventory = bank.pronunciation_inventory();
  RngStream rng(cfg.seed, 0xF0);
  const int d = cfg.encoder.dim;
  m.text = make_text_encoder(m.store, "text", bank.vocab_with_specials(), bank.cls_id(),
                             bank.size(), cfg.encoder, rng);
  m.block = make_res_conformer(m.store, "conformer", d, cfg.encoder.ffn_hidden, rng);

  double s = 1.0 / std::sqrt(static_cast<double>(d));
  const int k_tn = static_cast<int>(m.cfg.tn_labels.size());
  m.tn_w = m.store.create("tn.w", Tensor::randn(d, k_tn, rng, s));
  m.tn_b = m.store.create("tn.b", Tensor(1, k_tn));
  m.tn_trans = m.store.create("tn.trans", Tensor(k_tn, k_tn));
  m.tn_start = m.store.create("tn.start", Tensor(1, k_tn));
  m.tn_end = m.store.create("tn.end", Tensor(1, k_tn));
  m.tn_mask = build_transition_mask(m.cfg.tn_labels);

  const int k_pbp = static_cast<int>(m.cfg.pbp_labels.size());
  m.pbp_lstm = make_span_extractor(m.store, "pbp.lstm", d, cfg.lstm_hidden, rng);
  m.pbp_w = m.store.create("pbp.w", Tensor::randn(2 * cfg.lstm_hidden, k_pbp, rng, s));
  m.pbp_b = m.store.create("pbp.b", Tensor(1, k_pbp));
  m.pbp_trans = m.store.create("pbp.trans", Tensor(k_pbp, k_pbp));
  m.pbp_start = m.store.create("pbp.start", Tensor(1, k_pbp));
  m.pbp_end = m.store.create("pbp.end", Tensor(1, k_pbp));
  m.pbp_mask = permissive_mask(k_pbp);

  const int n_pron = static_cast<int>(m.cfg.pron_inventory.size());
  if (n_pron < 2) throw std::invalid_argument("pronunciation inventory too small");
  m.pd_lstm = make_span_extractor(m.store, "pd.lstm", d, cfg.lstm_hidden, rng);
  m.pd_w = m.store.create("pd.w", Tensor::randn(2 * cfg.lstm_hidden, n_pron, rng, s));
  m.pd_b = m.store.create("pd.b", Tensor(1, n_pron));
  for (int i = 0; i < n_pron; ++i) m.pron_index[m.cfg.pron_inventory[i]] = i;
  return m;
}

FrontendForward frontend_forward(FrontendModel& model, const std::vector<int>& token_ids) {
  if (token_ids.empty()) throw std::invalid_argument("frontend_forward: empty input");
  TextEncodeResult enc = encode_text(model.text, token_ids);
  Value shared = model.cfg.resconformer_on ? res_conformer_forward(model.block, enc.tokens)
                                           : enc.tokens;
  FrontendForward out;
  out.tn_emissions = add_rowvec(matmul(shared, model.tn_w), model.tn_b);
  Value pbp_states = bilstm_sequence(model.pbp_lstm, shared);
  out.pbp_emissions = add_rowvec(matmul(pbp_states, model.pbp_w), model.pbp_b);
  Value pd_states = bilstm_sequence(model.pd_lstm, shared);
  out.pd_scores = add_rowvec(matmul(pd_states, model.pd_w), model.pd_b);
  return out;
}

Value mask_pd_scores(const FrontendModel& model, const Value& pd_scores, int position,
                     const std::vector<std::string>& candidates) {
  if (position < 0 || position >= pd_scores->val.rows)
    throw std::out_of_range("polyphone position out of range");
  Tensor penalty(1, pd_scores->val.cols);
  for (auto& x : penalty.data) x = kCrfMaskPenalty;
  for (const auto& c : candidates) {
    auto it = model.pron_index.find(c);
    if (it == model.pron_index.end())
      throw std::out_of_range("candidate not in pronunciation inventory: " + c);
    penalty.data[it->second] = 0.0;
  }
  return add_rowvec(slice_rows(pd_scores, position, position + 1), make_constant(penalty));
}

int boundary_rank(const std::string& label) {
  if (label == "N") return 0;
  if (label == "PW") return 1;
  if (label == "PPH") return 2;
  if (label == "IPH") return 3;
  throw std::invalid_argument("bad boundary label: " + label);
}

namespace {

const char* kBoundaryNames[] = {"N", "PW", "PPH", "IPH"};

}  // namespace

FrontendOutput result_merge(const std::vector<std::string>& tokens,
                            const std::vector<std::string>& tn_tags,
                            const std::vector<std::string>& boundaries,
                            const std::vector<std::pair<int, std::string>>& pd_choices) {
  const size_t n = tokens.size();
  if (tn_tags.size() != n || boundaries.size() != n)
    throw std::invalid_argument("result_merge: length mismatch");
  if (auto why = check_bio(tn_tags))
    throw std::invalid_argument("result_merge: " + *why);

  FrontendOutput out;
  out.tokens = tokens;
  out.tn_tags = tn_tags;

  // NSW span starting at each B- position
  std::vector<int> span_end(n, -1);
  for (size_t i = 0; i < n; ++i) {
    if (tn_tags[i].rfind("B-", 0) != 0) continue;
    size_t j = i + 1;
    while (j < n && tn_tags[j].rfind("I-", 0) == 0) ++j;
    span_end[i] = static_cast<int>(j);
  }
  std::vector<bool> in_span(n, false);
  for (size_t i = 0; i < n; ++i)
    if (span_end[i] > 0)
      for (int j = static_cast<int>(i); j < span_end[i]; ++j) in_span[j] = true;

  for (size_t i = 0; i < n;) {
    if (span_end[i] > 0) {
      int e = span_end[i];
      NswClass cls = nsw_class_from_string(tn_tags[i].substr(2));
      auto words = verbalize_span(
          std::vector<std::string>(tokens.begin() + i, tokens.begin() + e), cls);
      // highest boundary level anywhere in the span lands after its last word
      int level = 0;
      for (int j = static_cast<int>(i); j < e; ++j)
        level = std::max(level, boundary_rank(boundaries[j]));
      for (size_t w = 0; w < words.size(); ++w) {
        out.spoken.push_back(words[w]);
        out.boundaries.push_back(w + 1 == words.size() ? kBoundaryNames[level] : "N");
      }
      i = static_cast<size_t>(e);
    } else {
      out.spoken.push_back(tokens[i]);
      out.boundaries.push_back(boundaries[i]);
      ++i;
    }
  }
  for (const auto& [pos, pron] : pd_choices) {
    if (pos < 0 || pos >= static_cast<int>(n))
      throw std::out_of_range("result_merge: polyphone position out of range");
    if (!in_span[pos]) out.polyphones.emplace_back(pos, pron);  // verbalization wins inside spans
  }
  return out;
}

Prediction predict_tags(FrontendModel& model, const std::vector<int>& token_ids) {
  FrontendForward fwd = frontend_forward(model, token_ids);
  Prediction pred;
  auto tn_path = crf_viterbi(fwd.tn_emissions->val, model.tn_trans->val, model.tn_mask,
                             model.tn_start->val, model.tn_end->val);
  for (int k : tn_path) pred.tn_tags.push_back(model.cfg.tn_labels[k]);
  auto pbp_path = crf_viterbi(fwd.pbp_emissions->val, model.pbp_trans->val, model.pbp_mask,
                              model.pbp_start->val, model.pbp_end->val);
  for (int k : pbp_path) pred.boundaries.push_back(model.cfg.pbp_labels[k]);
  return pred;
}

std::string predict_pronunciation(FrontendModel& model, const std::vector<int>& token_ids,
                                  int position, const std::vector<std::string>& candidates) {
  FrontendForward fwd = frontend_forward(model, token_ids);
  Value masked = mask_pd_scores(model, fwd.pd_scores, position, candidates);
  int best = 0;
  for (int j = 1; j < masked->val.cols; ++j)
    if (masked->val.data[j] > masked->val.data[best]) best = j;
  return model.cfg.pron_inventory[best];
}

}  // namespace tapfm
