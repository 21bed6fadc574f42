#pragma once

#include <optional>
#include <string>

#include "tapfm/alignment.hpp"
#include "tapfm/corpus.hpp"
#include "tapfm/encoders.hpp"
#include "tapfm/optim.hpp"

namespace tapfm {

struct PretrainConfig {
  double alpha = 0.5;   // sentence-loss weight
  double beta = 0.5;    // MLM weight
  double logit_scale = 10.0;
  WindowSpec text_window{3, 1};
  WindowSpec audio_window{33, 11};
  double mlm_rate = 0.15;
  int epochs = 30;
  int batch_size = 8;
  AdamWConfig optim;
  EncoderConfig encoder;
  bool span_on = true;
  bool sentence_on = true;
  bool mlm_on = true;
  uint64_t seed = 1;
};

struct PretrainModels {
  ParamStore store;
  SymbolBank bank;
  TextEncoderModel text;
  AudioEncoderModel audio;
  SpanExtractor text_spans;
  SpanExtractor audio_spans;
};

PretrainModels make_pretrain_models(const SymbolBank& bank, const PretrainConfig& cfg);

struct PretrainBatchItem {
  const PretrainExample* anchor = nullptr;
  const PretrainExample* positive = nullptr;
  const PretrainExample* negative = nullptr;
  std::vector<int> masked_ids;
  std::vector<int> mlm_targets;  // original id at masked positions, -1 elsewhere
};

// Uniform positive (same speaker, different utterance) and negative
// (different speaker) sampling; returns indices into the dataset.
std::pair<int, int> sample_pair(const PretrainDataset& corpus, int anchor_index,
                                RngStream& rng);

// L_sen = 2 - cos(P_t, Q_pos) + cos(P_t, Q_neg); value in [0, 4].
Value sentence_loss(const Value& text_pooled, const Value& audio_pos, const Value& audio_neg);

// Independent Bernoulli(rate) masking; at least one position is forced when
// rate > 0 so the MLM loss is always defined.
std::pair<std::vector<int>, std::vector<int>> apply_mlm_mask(const std::vector<int>& token_ids,
                                                             double rate, int mask_id,
                                                             RngStream& rng);

struct LossBreakdown {
  double total = 0.0;
  double span = 0.0;
  double sentence = 0.0;
  double mlm = 0.0;
};

// Differentiable total loss for one batch item; components returned so the
// identity total = span + alpha*sen + beta*mlm holds bit-exactly.
struct PretrainLoss {
  Value total, span, sentence, mlm;
};
PretrainLoss pretrain_loss(PretrainModels& models, const PretrainBatchItem& item,
                           const PretrainConfig& cfg);

// Loss + AdamW update for a single batch item.
LossBreakdown pretrain_step(PretrainModels& models, const PretrainBatchItem& item,
                            const PretrainConfig& cfg);

struct EpochReport {
  int epoch = 0;
  LossBreakdown mean_loss;
  double heldout_retrieval = 0.0;
};

struct TrainReport {
  std::vector<EpochReport> epochs;
};

TrainReport run_pretraining(PretrainModels& models, const PretrainDataset& train,
                            const PretrainDataset& dev, const PretrainConfig& cfg,
                            const std::string& report_path = "");

struct SimilarityReport {
  double mean_matched = 0.0;
  double mean_mismatched = 0.0;
  double top1_retrieval = 0.0;
  int utterances = 0;
  int spans = 0;
};

// Gold text-span -> audio-span map: the audio window with maximal temporal
// overlap against the text window's ground-truth frame interval (ties to
// the lower index). csv_dir, when set, gets one <utterance_id>.csv cosine
// matrix per utterance.
SimilarityReport eval_alignment(PretrainModels& models, const PretrainDataset& split,
                                const PretrainConfig& cfg,
                                const std::optional<std::string>& csv_dir = std::nullopt);

// Gold window map used by eval_alignment (exposed for tests).
std::vector<int> gold_span_map(const AudioFrames& audio, size_t n_tokens,
                               const PretrainConfig& cfg);

}  // namespace tapfm
