#include "tapfm/encoders.hpp"

#include <cmath>
#include <stdexcept>

namespace tapfm {

std::vector<std::pair<int, int>> slide_windows(int length, const WindowSpec& spec) {
  if (length < 1) throw std::invalid_argument("slide_windows: length must be >= 1");
  if (spec.size < 1 || spec.stride < 1)
    throw std::invalid_argument("slide_windows: size and stride must be >= 1");
  if (length < spec.size) return {{0, length}};
  std::vector<std::pair<int, int>> out;
  int last_end = 0;
  for (int s = 0; s + spec.size <= length; s += spec.stride) {
    out.emplace_back(s, s + spec.size);
    last_end = s + spec.size;
  }
  if (last_end < length) out.emplace_back(length - spec.size, length);
  return out;
}

Value layer_norm_rows(const Value& x, const Value& gain, const Value& bias) {
  Value centered = add_colvec(x, neg(row_mean(x)));
  Value var = row_mean(square_v(centered));
  Value normed = div_colvec(centered, sqrt_eps(var, 1e-5));
  return add_rowvec(mul_rowvec(normed, gain), bias);
}

TextEncoderModel make_text_encoder(ParamStore& store, const std::string& prefix,
                                   int vocab_with_specials, int cls_id, int mlm_vocab,
                                   const EncoderConfig& cfg, RngStream& rng) {
  TextEncoderModel m;
  m.cfg = cfg;
  m.cls_id = cls_id;
  const int d = cfg.dim;
  m.embed = store.create(prefix + ".embed", Tensor::randn(vocab_with_specials, d, rng, 0.1));
  m.pos = store.create(prefix + ".pos", Tensor::randn(cfg.max_len, d, rng, 0.1));
  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = prefix + ".layer" + std::to_string(l);
    TextEncoderModel::Layer layer;
    layer.ln1_g = store.create(p + ".ln1_g", Tensor::full(1, d, 1.0));
    layer.ln1_b = store.create(p + ".ln1_b", Tensor(1, d));
    double s = 1.0 / std::sqrt(static_cast<double>(d));
    layer.wq = store.create(p + ".wq", Tensor::randn(d, d, rng, s));
    layer.wk = store.create(p + ".wk", Tensor::randn(d, d, rng, s));
    layer.wv = store.create(p + ".wv", Tensor::randn(d, d, rng, s));
    layer.wo = store.create(p + ".wo", Tensor(d, d));  // zero: layer starts as identity
    layer.ln2_g = store.create(p + ".ln2_g", Tensor::full(1, d, 1.0));
    layer.ln2_b = store.create(p + ".ln2_b", Tensor(1, d));
    layer.ffn_w1 = store.create(p + ".ffn_w1", Tensor::randn(d, cfg.ffn_hidden, rng, s));
    layer.ffn_b1 = store.create(p + ".ffn_b1", Tensor(1, cfg.ffn_hidden));
    layer.ffn_w2 = store.create(p + ".ffn_w2", Tensor(cfg.ffn_hidden, d));  // zero
    layer.ffn_b2 = store.create(p + ".ffn_b2", Tensor(1, d));
    m.layer.push_back(layer);
  }
  double s = 1.0 / std::sqrt(static_cast<double>(d));
  m.mlm_w = store.create(prefix + ".mlm_w", Tensor::randn(d, mlm_vocab, rng, s));
  m.mlm_b = store.create(prefix + ".mlm_b", Tensor(1, mlm_vocab));
  return m;
}

TextEncodeResult encode_text(const TextEncoderModel& model, const std::vector<int>& token_ids) {
  if (token_ids.empty()) throw std::invalid_argument("encode_text: empty input");
  const int n = static_cast<int>(token_ids.size());
  if (n + 1 > model.cfg.max_len)
    throw std::invalid_argument("encode_text: sequence longer than positional table");
  std::vector<int> ids;
  ids.reserve(n + 1);
  ids.push_back(model.cls_id);
  ids.insert(ids.end(), token_ids.begin(), token_ids.end());

  Value x = add(gather_rows(model.embed, ids), slice_rows(model.pos, 0, n + 1));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(model.cfg.dim));
  for (const auto& layer : model.layer) {
    Value h = layer_norm_rows(x, layer.ln1_g, layer.ln1_b);
    Value q = matmul(h, layer.wq);
    Value k = matmul(h, layer.wk);
    Value v = matmul(h, layer.wv);
    Value attn = softmax_rows(scalar_mul(matmul(q, transpose(k)), inv_sqrt_d));
    x = add(x, matmul(matmul(attn, v), layer.wo));
    Value f = layer_norm_rows(x, layer.ln2_g, layer.ln2_b);
    f = tanh_v(add_rowvec(matmul(f, layer.ffn_w1), layer.ffn_b1));
    x = add(x, add_rowvec(matmul(f, layer.ffn_w2), layer.ffn_b2));
  }
  TextEncodeResult res;
  res.pooled = slice_rows(x, 0, 1);
  res.tokens = slice_rows(x, 1, n + 1);
  return res;
}

Value mlm_logits(const TextEncoderModel& model, const Value& token_states) {
  return add_rowvec(matmul(token_states, model.mlm_w), model.mlm_b);
}

AudioEncoderModel make_audio_encoder(ParamStore& store, const std::string& prefix,
                                     int audio_dim, int dim, RngStream& rng) {
  AudioEncoderModel m;
  m.dim = dim;
  double s1 = 1.0 / std::sqrt(static_cast<double>(audio_dim));
  double s2 = 1.0 / std::sqrt(static_cast<double>(dim));
  m.w1 = store.create(prefix + ".w1", Tensor::randn(audio_dim, dim, rng, s1));
  m.b1 = store.create(prefix + ".b1", Tensor(1, dim));
  m.w2 = store.create(prefix + ".w2", Tensor::randn(dim, dim, rng, s2));
  m.b2 = store.create(prefix + ".b2", Tensor(1, dim));
  m.attn_w = store.create(prefix + ".attn_w", Tensor::randn(dim, dim, rng, s2));
  m.attn_v = store.create(prefix + ".attn_v", Tensor::randn(dim, 1, rng, s2));
  return m;
}

AudioEncodeResult encode_audio(const AudioEncoderModel& model, const Tensor& frames) {
  if (frames.rows < 1) throw std::invalid_argument("encode_audio: empty input");
  Value x = make_constant(frames);
  Value h = tanh_v(add_rowvec(matmul(x, model.w1), model.b1));
  Value ea = add_rowvec(matmul(h, model.w2), model.b2);
  Value scores = matmul(tanh_v(matmul(ea, model.attn_w)), model.attn_v);  // T x 1
  AudioEncodeResult res;
  res.weights = softmax_rows(transpose(scores));  // 1 x T
  res.pooled = matmul(res.weights, ea);
  res.frames = ea;
  return res;
}

SpanExtractor make_span_extractor(ParamStore& store, const std::string& prefix, int input_dim,
                                  int hidden, RngStream& rng) {
  SpanExtractor ex;
  ex.input_dim = input_dim;
  ex.hidden = hidden;
  double s = 1.0 / std::sqrt(static_cast<double>(input_dim));
  ex.fwd_wx = store.create(prefix + ".fwd_wx", Tensor::randn(input_dim, 4 * hidden, rng, s));
  ex.fwd_wh = store.create(prefix + ".fwd_wh", Tensor::randn(hidden, 4 * hidden, rng, s));
  ex.fwd_b = store.create(prefix + ".fwd_b", Tensor(1, 4 * hidden));
  ex.bwd_wx = store.create(prefix + ".bwd_wx", Tensor::randn(input_dim, 4 * hidden, rng, s));
  ex.bwd_wh = store.create(prefix + ".bwd_wh", Tensor::randn(hidden, 4 * hidden, rng, s));
  ex.bwd_b = store.create(prefix + ".bwd_b", Tensor(1, 4 * hidden));
  return ex;
}

namespace {

struct LstmState {
  Value h, c;
};

LstmState lstm_step(const Value& x, const LstmState& st, const Value& wx, const Value& wh,
                    const Value& b, int hidden) {
  Value gates = add_rowvec(add(matmul(x, wx), matmul(st.h, wh)), b);
  Value ig = sigmoid_v(slice_cols(gates, 0, hidden));
  Value fg = sigmoid_v(slice_cols(gates, hidden, 2 * hidden));
  Value gg = tanh_v(slice_cols(gates, 2 * hidden, 3 * hidden));
  Value og = sigmoid_v(slice_cols(gates, 3 * hidden, 4 * hidden));
  LstmState next;
  next.c = add(mul(fg, st.c), mul(ig, gg));
  next.h = mul(og, tanh_v(next.c));
  return next;
}

std::vector<Value> lstm_run(const SpanExtractor& ex, const Value& seq, int start, int end,
                            bool backward_dir) {
  const Value& wx = backward_dir ? ex.bwd_wx : ex.fwd_wx;
  const Value& wh = backward_dir ? ex.bwd_wh : ex.fwd_wh;
  const Value& b = backward_dir ? ex.bwd_b : ex.fwd_b;
  LstmState st{make_constant(Tensor(1, ex.hidden)), make_constant(Tensor(1, ex.hidden))};
  std::vector<Value> hs;
  for (int i = 0; i < end - start; ++i) {
    int t = backward_dir ? end - 1 - i : start + i;
    st = lstm_step(slice_rows(seq, t, t + 1), st, wx, wh, b, ex.hidden);
    hs.push_back(st.h);
  }
  return hs;
}

}  // namespace

Value bilstm_summary(const SpanExtractor& ex, const Value& seq, int start, int end) {
  if (start < 0 || end > seq->val.rows || start >= end)
    throw std::out_of_range("bilstm_summary: window out of range");
  auto fwd = lstm_run(ex, seq, start, end, false);
  auto bwd = lstm_run(ex, seq, start, end, true);
  return concat_cols({fwd.back(), bwd.back()});
}

Value bilstm_sequence(const SpanExtractor& ex, const Value& seq) {
  const int n = seq->val.rows;
  auto fwd = lstm_run(ex, seq, 0, n, false);
  auto bwd = lstm_run(ex, seq, 0, n, true);
  std::vector<Value> rows;
  for (int t = 0; t < n; ++t)
    rows.push_back(concat_cols({fwd[t], bwd[n - 1 - t]}));
  return concat_rows(rows);
}

Value extract_spans(const Value& states, const std::vector<std::pair<int, int>>& windows,
                    const SpanExtractor& ex) {
  if (windows.empty()) throw std::invalid_argument("extract_spans: no windows");
  std::vector<Value> rows;
  for (auto [s, e] : windows) rows.push_back(bilstm_summary(ex, states, s, e));
  return concat_rows(rows);
}

}  // namespace tapfm
