#pragma once

#include <map>
#include <string>
#include <vector>

#include "tapfm/corpus.hpp"
#include "tapfm/crf.hpp"
#include "tapfm/encoders.hpp"
#include "tapfm/optim.hpp"

namespace tapfm {

struct FrontendConfig {
  EncoderConfig encoder;
  bool resconformer_on = true;
  int lstm_hidden = 16;  // per direction, PBP/PD heads
  std::vector<std::string> tn_labels;         // BIO over NSW classes
  std::vector<std::string> pbp_labels = {"N", "PW", "PPH", "IPH"};
  std::vector<std::string> pron_inventory;    // global pronunciation set
  uint64_t seed = 1;
};

// BIO label set for the built-in NSW classes (O first, then B-/I- pairs).
std::vector<std::string> default_tn_labels();

// Conformer-lite branch behind a gradient-stopped residual: the forward
// value matches an ordinary residual, but no gradient reaches the input
// through the skip path.
struct ResConformerBlock {
  int dim = 32;
  Value ln1_g, ln1_b;
  Value ffn1_w1, ffn1_b1, ffn1_w2, ffn1_b2;
  Value wq, wk, wv;
  Value conv_w, conv_b;  // depthwise kernel 3
  Value ffn2_w1, ffn2_b1, ffn2_w2, ffn2_b2;
  Value ln2_g, ln2_b;
  Value proj;  // final projection, zero-init: block starts as the identity
};

ResConformerBlock make_res_conformer(ParamStore& store, const std::string& prefix, int dim,
                                     int ffn_hidden, RngStream& rng);
Value res_conformer_forward(const ResConformerBlock& block, const Value& x);
// Branch output alone (reference path for the stop-gradient contract tests).
Value res_conformer_branch(const ResConformerBlock& block, const Value& x);

struct FrontendModel {
  ParamStore store;
  SymbolBank bank;
  FrontendConfig cfg;
  TextEncoderModel text;
  ResConformerBlock block;
  // TN: linear emissions + masked CRF
  Value tn_w, tn_b, tn_trans, tn_start, tn_end;
  CrfMask tn_mask;
  // PBP: BiLSTM + linear emissions + CRF
  SpanExtractor pbp_lstm;
  Value pbp_w, pbp_b, pbp_trans, pbp_start, pbp_end;
  CrfMask pbp_mask;
  // PD: BiLSTM + linear scores over the pronunciation inventory
  SpanExtractor pd_lstm;
  Value pd_w, pd_b;
  std::map<std::string, int> pron_index;
};

FrontendModel make_frontend_model(const SymbolBank& bank, const FrontendConfig& cfg);

struct FrontendForward {
  Value tn_emissions;   // n x |tn_labels|
  Value pbp_emissions;  // n x 4
  Value pd_scores;      // n x |inventory| (unmasked; mask per instance)
};

FrontendForward frontend_forward(FrontendModel& model, const std::vector<int>& token_ids);

// pd_scores restricted to one instance's candidates: non-candidates get an
// additive -1e4.
Value mask_pd_scores(const FrontendModel& model, const Value& pd_scores, int position,
                     const std::vector<std::string>& candidates);

struct FrontendOutput {
  std::vector<std::string> tokens;
  std::vector<std::string> tn_tags;
  std::vector<std::string> spoken;
  std::vector<std::string> boundaries;  // per spoken token
  std::vector<std::pair<int, std::string>> polyphones;  // input position -> pronunciation
};

// Rule-based reconciliation: expand NSW spans, push boundaries predicted
// strictly inside a span to its last expanded word (keeping the highest
// displaced level), drop PD choices inside spans.
FrontendOutput result_merge(const std::vector<std::string>& tokens,
                            const std::vector<std::string>& tn_tags,
                            const std::vector<std::string>& boundaries,
                            const std::vector<std::pair<int, std::string>>& pd_choices);

struct Prediction {
  std::vector<std::string> tn_tags;
  std::vector<std::string> boundaries;
};

// Viterbi decodes for both CRF heads on one sentence.
Prediction predict_tags(FrontendModel& model, const std::vector<int>& token_ids);
// PD argmax over the instance's candidates.
std::string predict_pronunciation(FrontendModel& model, const std::vector<int>& token_ids,
                                  int position, const std::vector<std::string>& candidates);

int boundary_rank(const std::string& label);  // N=0 < PW < PPH < IPH

}  // namespace tapfm
