#pragma once

#include <string>
#include <vector>

#include "tapfm/autograd.hpp"
#include "tapfm/optim.hpp"
#include "tapfm/rng.hpp"

namespace tapfm {

struct WindowSpec {
  int size = 1;
  int stride = 1;
};

// Overlapping windows [i*stride, i*stride+size). A final window
// [length-size, length) is appended if the tail would otherwise be
// uncovered; inputs shorter than `size` yield a single [0, length).
std::vector<std::pair<int, int>> slide_windows(int length, const WindowSpec& spec);

struct EncoderConfig {
  int dim = 32;        // D
  int layers = 2;
  int ffn_hidden = 64;
  int max_len = 25;    // positions incl. [CLS]
};

// 2-layer single-head transformer encoder with pre-LN. Attention and FFN
// output projections start at zero so fresh layers act as the identity.
struct TextEncoderModel {
  EncoderConfig cfg;
  int cls_id = 0;
  Value embed;  // (V + specials) x D
  Value pos;    // max_len x D
  struct Layer {
    Value ln1_g, ln1_b, wq, wk, wv, wo;
    Value ln2_g, ln2_b, ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  };
  std::vector<Layer> layer;
  Value mlm_w, mlm_b;  // D x V, 1 x V (real tokens only)
};

struct TextEncodeResult {
  Value pooled;   // P_t, 1 x D ([CLS] row)
  Value tokens;   // E_t, n x D
};

TextEncoderModel make_text_encoder(ParamStore& store, const std::string& prefix,
                                   int vocab_with_specials, int cls_id, int mlm_vocab,
                                   const EncoderConfig& cfg, RngStream& rng);
TextEncodeResult encode_text(const TextEncoderModel& model, const std::vector<int>& token_ids);
Value mlm_logits(const TextEncoderModel& model, const Value& token_states);

// Two-layer MLP frame projection plus additive attention pooling for the
// utterance-level vector Q_a.
struct AudioEncoderModel {
  int dim = 32;
  Value w1, b1, w2, b2;      // d_a -> D -> D
  Value attn_w, attn_v;      // D x D, D x 1
};

struct AudioEncodeResult {
  Value pooled;   // Q_a, 1 x D
  Value frames;   // E_a, T x D
  Value weights;  // attention distribution, 1 x T
};

AudioEncoderModel make_audio_encoder(ParamStore& store, const std::string& prefix,
                                     int audio_dim, int dim, RngStream& rng);
AudioEncodeResult encode_audio(const AudioEncoderModel& model, const Tensor& frames);

// BiLSTM span summarizer: final forward state ++ final backward state.
struct SpanExtractor {
  int input_dim = 32;
  int hidden = 16;  // per direction; output dim = 2 * hidden
  Value fwd_wx, fwd_wh, fwd_b;
  Value bwd_wx, bwd_wh, bwd_b;
};

SpanExtractor make_span_extractor(ParamStore& store, const std::string& prefix, int input_dim,
                                  int hidden, RngStream& rng);

// Runs the BiLSTM over seq rows [start, end); returns 1 x 2H summary.
Value bilstm_summary(const SpanExtractor& ex, const Value& seq, int start, int end);
// Full BiLSTM output sequence, n x 2H (used by the frontend heads).
Value bilstm_sequence(const SpanExtractor& ex, const Value& seq);

Value extract_spans(const Value& states, const std::vector<std::pair<int, int>>& windows,
                    const SpanExtractor& ex);

// LayerNorm over each row: (x - mean) / sqrt(var + 1e-5) * g + b.
Value layer_norm_rows(const Value& x, const Value& gain, const Value& bias);

}  // namespace tapfm
