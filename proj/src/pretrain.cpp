#include "tapfm/pretrain.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace tapfm {

PretrainModels make_pretrain_models(const SymbolBank& bank, const PretrainConfig& cfg) {
  PretrainModels m;
  m.bank = bank;
  RngStream rng(cfg.seed, 0xA11);
  const int d = cfg.encoder.dim;
  m.text = make_text_encoder(m.store, "text", bank.vocab_with_specials(), bank.cls_id(),
                             bank.size(), cfg.encoder, rng);
  m.audio = make_audio_encoder(m.store, "audio", bank.audio_dim, d, rng);
  m.text_spans = make_span_extractor(m.store, "span_t", d, d / 2, rng);
  m.audio_spans = make_span_extractor(m.store, "span_a", d, d / 2, rng);
  return m;
}

std::pair<int, int> sample_pair(const PretrainDataset& corpus, int anchor_index,
                                RngStream& rng) {
  const auto& anchor = corpus.examples.at(anchor_index).utt;
  std::vector<int> positives, negatives;
  for (int i = 0; i < static_cast<int>(corpus.examples.size()); ++i) {
    const auto& u = corpus.examples[i].utt;
    if (u.speaker_id == anchor.speaker_id && u.id != anchor.id) positives.push_back(i);
    if (u.speaker_id != anchor.speaker_id) negatives.push_back(i);
  }
  if (positives.empty() || negatives.empty())
    throw std::runtime_error("insufficient speaker coverage");
  return {positives[rng.next_below(positives.size())],
          negatives[rng.next_below(negatives.size())]};
}

namespace {

Value cosine(const Value& a, const Value& b) {
  return matmul(l2_normalize_rows(a), transpose(l2_normalize_rows(b)));
}

}  // namespace

Value sentence_loss(const Value& text_pooled, const Value& audio_pos, const Value& audio_neg) {
  Value loss = scalar_add(sub(cosine(text_pooled, audio_neg), cosine(text_pooled, audio_pos)), 2.0);
  return loss;
}

std::pair<std::vector<int>, std::vector<int>> apply_mlm_mask(const std::vector<int>& token_ids,
                                                             double rate, int mask_id,
                                                             RngStream& rng) {
  if (rate < 0.0 || rate > 1.0) throw std::invalid_argument("mlm rate must be in [0,1]");
  std::vector<int> masked = token_ids;
  std::vector<int> targets(token_ids.size(), -1);
  bool any = false;
  for (size_t i = 0; i < token_ids.size(); ++i) {
    if (rng.next_double() < rate) {
      targets[i] = token_ids[i];
      masked[i] = mask_id;
      any = true;
    }
  }
  if (!any && rate > 0.0 && !token_ids.empty()) {
    size_t i = rng.next_below(token_ids.size());
    targets[i] = token_ids[i];
    masked[i] = mask_id;
  }
  return {masked, targets};
}

PretrainLoss pretrain_loss(PretrainModels& models, const PretrainBatchItem& item,
                           const PretrainConfig& cfg) {
  if (!cfg.span_on && !cfg.sentence_on && !cfg.mlm_on)
    throw std::invalid_argument("no active objective");
  PretrainLoss out;
  Value zero = make_constant(Tensor::scalar(0.0));
  out.span = out.sentence = out.mlm = zero;

  TextEncodeResult text;
  if (cfg.span_on || cfg.sentence_on) text = encode_text(models.text, item.anchor->utt.token_ids);

  if (cfg.span_on) {
    auto twin = slide_windows(static_cast<int>(item.anchor->utt.token_ids.size()),
                              cfg.text_window);
    Value st = extract_spans(text.tokens, twin, models.text_spans);
    AudioEncodeResult anchor_audio = encode_audio(models.audio, item.anchor->audio.frames);
    auto awin = slide_windows(item.anchor->audio.frames.rows, cfg.audio_window);
    Value sa = extract_spans(anchor_audio.frames, awin, models.audio_spans);
    out.span = span_contrastive_loss(pairing_matrix(st, sa), cfg.logit_scale).total;
  }
  if (cfg.sentence_on) {
    Value q_pos = encode_audio(models.audio, item.positive->audio.frames).pooled;
    Value q_neg = encode_audio(models.audio, item.negative->audio.frames).pooled;
    out.sentence = sentence_loss(text.pooled, q_pos, q_neg);
  }
  if (cfg.mlm_on) {
    TextEncodeResult masked = encode_text(models.text, item.masked_ids);
    Value logits = mlm_logits(models.text, masked.tokens);
    out.mlm = nll_rows(log_softmax_rows(logits), item.mlm_targets);
  }
  out.total = add(out.span, add(scalar_mul(out.sentence, cfg.alpha),
                                scalar_mul(out.mlm, cfg.beta)));
  return out;
}

LossBreakdown pretrain_step(PretrainModels& models, const PretrainBatchItem& item,
                            const PretrainConfig& cfg) {
  PretrainLoss loss = pretrain_loss(models, item, cfg);
  if (!loss.total->val.all_finite())
    throw std::domain_error("non-finite pretraining loss");
  models.store.zero_grads();
  backward(loss.total);
  models.store.step(cfg.optim);
  return {loss.total->val.item(), loss.span->val.item(), loss.sentence->val.item(),
          loss.mlm->val.item()};
}

namespace {

PretrainBatchItem assemble_item(const PretrainDataset& train, int index,
                                const PretrainModels& models, const PretrainConfig& cfg,
                                RngStream& rng) {
  PretrainBatchItem item;
  item.anchor = &train.examples[index];
  auto [p, n] = sample_pair(train, index, rng);
  item.positive = &train.examples[p];
  item.negative = &train.examples[n];
  if (cfg.mlm_on) {
    auto [masked, targets] = apply_mlm_mask(item.anchor->utt.token_ids, cfg.mlm_rate,
                                            models.bank.mask_id(), rng);
    item.masked_ids = masked;
    item.mlm_targets = targets;
  }
  return item;
}

}  // namespace

TrainReport run_pretraining(PretrainModels& models, const PretrainDataset& train,
                            const PretrainDataset& dev, const PretrainConfig& cfg,
                            const std::string& report_path) {
  if (train.examples.empty()) throw std::invalid_argument("empty training corpus");
  TrainReport report;
  std::ofstream rep;
  if (!report_path.empty()) {
    rep.open(report_path);
    if (!rep) throw std::runtime_error("cannot write " + report_path);
  }
  std::vector<int> order(train.examples.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    RngStream shuffle_rng(cfg.seed, RngStream::derive_stream(0xE0, epoch));
    RngStream sample_rng(cfg.seed, RngStream::derive_stream(0xE1, epoch));
    shuffle_rng.shuffle(order);

    LossBreakdown sum;
    size_t batches = 0;
    for (size_t off = 0; off < order.size(); off += cfg.batch_size) {
      size_t lim = std::min(order.size(), off + cfg.batch_size);
      std::vector<Value> totals;
      LossBreakdown acc;
      for (size_t i = off; i < lim; ++i) {
        PretrainBatchItem item = assemble_item(train, order[i], models, cfg, sample_rng);
        PretrainLoss loss = pretrain_loss(models, item, cfg);
        totals.push_back(loss.total);
        acc.total += loss.total->val.item();
        acc.span += loss.span->val.item();
        acc.sentence += loss.sentence->val.item();
        acc.mlm += loss.mlm->val.item();
      }
      Value batch_sum = totals[0];
      for (size_t i = 1; i < totals.size(); ++i) batch_sum = add(batch_sum, totals[i]);
      Value batch_loss = scalar_mul(batch_sum, 1.0 / static_cast<double>(totals.size()));
      if (!batch_loss->val.all_finite()) throw std::domain_error("non-finite pretraining loss");
      models.store.zero_grads();
      backward(batch_loss);
      models.store.step(cfg.optim);
      double n = static_cast<double>(totals.size());
      sum.total += acc.total / n;
      sum.span += acc.span / n;
      sum.sentence += acc.sentence / n;
      sum.mlm += acc.mlm / n;
      ++batches;
    }

    EpochReport row;
    row.epoch = epoch;
    row.mean_loss = {sum.total / batches, sum.span / batches, sum.sentence / batches,
                     sum.mlm / batches};
    if (!dev.examples.empty())
      row.heldout_retrieval = eval_alignment(models, dev, cfg).top1_retrieval;
    report.epochs.push_back(row);
    if (rep) {
      nlohmann::json j = {{"epoch", row.epoch},
                          {"total", row.mean_loss.total},
                          {"span", row.mean_loss.span},
                          {"sentence", row.mean_loss.sentence},
                          {"mlm", row.mean_loss.mlm},
                          {"heldout_retrieval", row.heldout_retrieval}};
      rep << j.dump() << "\n";
    }
  }
  return report;
}

std::vector<int> gold_span_map(const AudioFrames& audio, size_t n_tokens,
                               const PretrainConfig& cfg) {
  auto twin = slide_windows(static_cast<int>(n_tokens), cfg.text_window);
  auto awin = slide_windows(audio.frames.rows, cfg.audio_window);
  std::vector<int> gold;
  for (auto [ts, te] : twin) {
    int f0 = audio.alignment[ts].first;
    int f1 = audio.alignment[te - 1].second;
    int best = 0, best_overlap = -1;
    for (size_t j = 0; j < awin.size(); ++j) {
      int ov = std::min(f1, awin[j].second) - std::max(f0, awin[j].first);
      if (ov > best_overlap) {
        best_overlap = ov;
        best = static_cast<int>(j);
      }
    }
    gold.push_back(best);
  }
  return gold;
}

SimilarityReport eval_alignment(PretrainModels& models, const PretrainDataset& split,
                                const PretrainConfig& cfg,
                                const std::optional<std::string>& csv_dir) {
  if (split.examples.empty()) throw std::invalid_argument("empty evaluation split");
  SimilarityReport rep;
  double matched_sum = 0.0, mismatched_sum = 0.0;
  long mismatched_count = 0;
  int hits = 0;
  for (const auto& ex : split.examples) {
    TextEncodeResult text = encode_text(models.text, ex.utt.token_ids);
    auto twin = slide_windows(static_cast<int>(ex.utt.token_ids.size()), cfg.text_window);
    Value st = extract_spans(text.tokens, twin, models.text_spans);
    AudioEncodeResult audio = encode_audio(models.audio, ex.audio.frames);
    auto awin = slide_windows(ex.audio.frames.rows, cfg.audio_window);
    Value sa = extract_spans(audio.frames, awin, models.audio_spans);
    Value pm = pairing_matrix(st, sa);
    std::vector<int> gold = gold_span_map(ex.audio, ex.utt.token_ids.size(), cfg);
    for (int i = 0; i < pm->val.rows; ++i) {
      matched_sum += pm->val.at(i, gold[i]);
      int arg = 0;
      for (int j = 0; j < pm->val.cols; ++j) {
        if (pm->val.at(i, j) > pm->val.at(i, arg)) arg = j;
        if (j != gold[i]) {
          mismatched_sum += pm->val.at(i, j);
          ++mismatched_count;
        }
      }
      if (arg == gold[i]) ++hits;
      ++rep.spans;
    }
    ++rep.utterances;
    if (csv_dir) {
      std::filesystem::create_directories(*csv_dir);
      std::ofstream csv(*csv_dir + "/" + ex.utt.id + ".csv");
      for (int i = 0; i < pm->val.rows; ++i) {
        for (int j = 0; j < pm->val.cols; ++j)
          csv << (j ? "," : "") << pm->val.at(i, j);
        csv << "\n";
      }
    }
  }
  rep.mean_matched = matched_sum / rep.spans;
  rep.mean_mismatched = mismatched_count ? mismatched_sum / mismatched_count : 0.0;
  rep.top1_retrieval = static_cast<double>(hits) / rep.spans;
  return rep;
}

}  // namespace tapfm
