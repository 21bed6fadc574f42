#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tapfm/rng.hpp"
#include "tapfm/tensor.hpp"
#include "tapfm/verbalizer.hpp"

namespace tapfm {

struct CorpusConfig {
  int vocab_size = 40;   // V, excluding specials
  int audio_dim = 16;    // d_a
  int frame_min = 5;
  int frame_max = 9;
  int speakers = 3;
  int utterances_per_speaker = 167;
  int min_len = 6;
  int max_len = 24;
  double noise_sigma = 0.1;
  double offset_scale = 0.5;
  double heldout_fraction = 0.1;
  int tn_sentences = 300;
  int pbp_sentences = 300;
  int pd_sentences = 300;
  uint64_t seed = 1234;

  void validate() const;  // throws std::invalid_argument
};

enum class TokenRole { FUNCTION, NOUN, VERB, HOMOGRAPH, NSW };

// Vocabulary plus one fixed acoustic template per token. Special ids sit
// after the V real tokens.
struct SymbolBank {
  std::vector<std::string> tokens;          // index = token id
  std::map<std::string, int> vocab;         // token -> id
  std::vector<Tensor> templates;            // per token, len_i x d_a
  std::vector<TokenRole> roles;
  std::vector<NswClass> nsw_classes;        // PLAIN unless role == NSW
  std::map<int, std::vector<std::string>> homograph_candidates;
  int audio_dim = 0;

  int size() const { return static_cast<int>(tokens.size()); }
  int cls_id() const { return size(); }
  int mask_id() const { return size() + 1; }
  int pad_id() const { return size() + 2; }
  int unk_id() const { return size() + 3; }
  int vocab_with_specials() const { return size() + 4; }

  int id_of(const std::string& tok) const;  // throws on unknown
  // union of all homograph candidate pronunciations, sorted, deduplicated
  std::vector<std::string> pronunciation_inventory() const;
};

struct Utterance {
  std::string id;
  int speaker_id = 0;
  std::vector<std::string> tokens;
  std::vector<int> token_ids;
};

struct AudioFrames {
  Tensor frames;  // T x d_a
  std::vector<std::pair<int, int>> alignment;  // per token, [start, end)
};

struct PretrainExample {
  Utterance utt;
  AudioFrames audio;
};

struct VerbalizedSpan {
  int start = 0, end = 0;  // token range [start, end)
  std::vector<std::string> words;
};

struct TnExample {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;  // BIO over NSW classes
  std::vector<VerbalizedSpan> verbalized;
};

struct PbpExample {
  std::vector<std::string> tokens;
  std::vector<std::string> boundaries;  // "N"|"PW"|"PPH"|"IPH"
};

struct PdExample {
  std::vector<std::string> tokens;
  int position = 0;
  std::vector<std::string> candidates;
  std::string gold;
};

struct PretrainDataset {
  std::vector<PretrainExample> examples;
};
struct TnDataset {
  std::vector<TnExample> examples;
};
struct PbpDataset {
  std::vector<PbpExample> examples;
};
struct PdDataset {
  std::vector<PdExample> examples;
};

SymbolBank build_symbol_bank(const CorpusConfig& cfg, RngStream& rng);

// Fixed per-speaker offset vector, norm scaled to cfg.offset_scale.
Tensor speaker_offset(const CorpusConfig& cfg, int speaker_id);

AudioFrames synthesize_utterance(const std::vector<std::string>& tokens, int speaker_id,
                                 const SymbolBank& bank, const CorpusConfig& cfg,
                                 RngStream& rng);

// Writes vocab.json, pretrain_{train,dev}.jsonl and corpus_report.json under out_dir.
void generate_pretrain_corpus(const CorpusConfig& cfg, const std::string& out_dir);

// Writes {tn,pbp,pd}_{train,dev}.jsonl under out_dir.
void generate_task_datasets(const CorpusConfig& cfg, const std::string& out_dir);

// Expands one NSW token span to its gold spoken words (multi-token DATE
// spans read the trailing 4-digit token as a year).
std::vector<std::string> verbalize_span(const std::vector<std::string>& span_tokens,
                                        NswClass cls);

SymbolBank load_symbol_bank(const std::string& path);
void save_symbol_bank(const SymbolBank& bank, const std::string& path);
nlohmann::json bank_to_json(const SymbolBank& bank);
SymbolBank bank_from_json(const nlohmann::json& j);

// Loaders validate record invariants and report "<path>:<line>: <reason>".
PretrainDataset load_pretrain_dataset(const std::string& path, const SymbolBank& bank);
TnDataset load_tn_dataset(const std::string& path);
PbpDataset load_pbp_dataset(const std::string& path);
PdDataset load_pd_dataset(const std::string& path);

// BIO validity check shared by loader and tests; returns failure reason.
std::optional<std::string> check_bio(const std::vector<std::string>& tags);

}  // namespace tapfm
