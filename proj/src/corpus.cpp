#include "tapfm/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace tapfm {

using nlohmann::json;

namespace {

const std::vector<std::string> kFunctionWords = {"the", "a",   "of",  "and", "to",
                                                 "in",  "on",  "with", "for", "at"};
const std::vector<std::string> kNouns = {"cat",   "dog",  "bird", "house", "tree", "river",
                                         "stone", "cloud", "road", "door",  "fish", "star",
                                         "book",  "chair", "lamp", "boat"};
const std::vector<std::string> kVerbs = {"runs",  "sees",  "finds", "takes", "makes",
                                         "holds", "moves", "keeps", "calls", "shows"};
// homograph -> two candidate pronunciations; #1 is used before noun-class tokens
const std::vector<std::pair<std::string, std::vector<std::string>>> kHomographs = {
    {"read", {"r eh d", "r iy d"}},   {"lead", {"l eh d", "l iy d"}},
    {"bass", {"b ae s", "b ey s"}},   {"wind", {"w ih n d", "w ay n d"}},
    {"live", {"l ih v", "l ay v"}},   {"bow", {"b aw", "b ow"}},
    {"tear", {"t eh r", "t ih r"}},   {"row", {"r aw", "r ow"}}};

std::string make_nsw_surface(NswClass cls, RngStream& rng, int ordinal) {
  switch (cls) {
    case NswClass::CARDINAL:
      // every third cardinal is year-like so multi-token DATE spans exist
      if (ordinal % 3 == 0) return std::to_string(1900 + rng.next_below(200));
      return std::to_string(rng.next_below(1000));
    case NswClass::MONEY: {
      std::string s = "$" + std::to_string(1 + rng.next_below(999));
      if (rng.next_below(2) == 0) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), ".%02d", static_cast<int>(rng.next_below(100)));
        s += buf;
      }
      return s;
    }
    case NswClass::TIME: {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%d:%02d", static_cast<int>(1 + rng.next_below(12)),
                    static_cast<int>(rng.next_below(60)));
      return buf;
    }
    case NswClass::DATE: {
      int m = static_cast<int>(1 + rng.next_below(12));
      int d = static_cast<int>(1 + rng.next_below(28));
      // half carry a year, half are bare M/D (paired with a year token in TN)
      if (ordinal % 2 == 0)
        return std::to_string(m) + "/" + std::to_string(d) + "/" +
               std::to_string(1900 + rng.next_below(200));
      return std::to_string(m) + "/" + std::to_string(d);
    }
    case NswClass::LETTERS: {
      int len = static_cast<int>(2 + rng.next_below(3));
      std::string s;
      for (int i = 0; i < len; ++i)
        s += static_cast<char>('A' + rng.next_below(26));
      return s;
    }
    case NswClass::PLAIN:
      break;
  }
  throw std::logic_error("make_nsw_surface: bad class");
}

int dev_stride(const CorpusConfig& cfg) {
  if (cfg.heldout_fraction <= 0.0) return 0;
  return std::max(2, static_cast<int>(std::lround(1.0 / cfg.heldout_fraction)));
}

std::vector<int> role_indices(const SymbolBank& bank, TokenRole role) {
  std::vector<int> out;
  for (int i = 0; i < bank.size(); ++i)
    if (bank.roles[i] == role) out.push_back(i);
  return out;
}

std::vector<int> nsw_indices(const SymbolBank& bank, NswClass cls) {
  std::vector<int> out;
  for (int i = 0; i < bank.size(); ++i)
    if (bank.roles[i] == TokenRole::NSW && bank.nsw_classes[i] == cls) out.push_back(i);
  return out;
}

json frames_to_json(const Tensor& frames) {
  json rows = json::array();
  for (int i = 0; i < frames.rows; ++i) {
    json row = json::array();
    for (int j = 0; j < frames.cols; ++j) row.push_back(frames.at(i, j));
    rows.push_back(row);
  }
  return rows;
}

Tensor frames_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw std::runtime_error("frames must be a non-empty array");
  int rows = static_cast<int>(j.size());
  int cols = static_cast<int>(j[0].size());
  Tensor t(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols)
      throw std::runtime_error("ragged frame matrix");
    for (int c = 0; c < cols; ++c) t.at(i, c) = j[i][c].get<double>();
  }
  return t;
}

[[noreturn]] void line_error(const std::string& path, int line, const std::string& why) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + why);
}

template <typename Fn>
void for_each_jsonl(const std::string& path, Fn fn) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      line_error(path, lineno, std::string("malformed JSON: ") + e.what());
    }
    fn(j, lineno);
  }
}

}  // namespace

void CorpusConfig::validate() const {
  if (vocab_size < 10 || audio_dim < 4)
    throw std::invalid_argument("corpus too degenerate");
  if (frame_min < 1 || frame_max < frame_min)
    throw std::invalid_argument("bad frame length range");
  if (max_len < 1 || max_len > 24 || min_len < 1 || min_len > max_len)
    throw std::invalid_argument("utterance length must satisfy 1 <= min <= max <= 24");
  if (heldout_fraction < 0.0 || heldout_fraction >= 1.0)
    throw std::invalid_argument("heldout_fraction must be in [0, 1)");
}

int SymbolBank::id_of(const std::string& tok) const {
  auto it = vocab.find(tok);
  if (it == vocab.end()) throw std::out_of_range("token not in bank: " + tok);
  return it->second;
}

std::vector<std::string> SymbolBank::pronunciation_inventory() const {
  std::set<std::string> s;
  for (const auto& [id, cands] : homograph_candidates)
    s.insert(cands.begin(), cands.end());
  return {s.begin(), s.end()};
}

SymbolBank build_symbol_bank(const CorpusConfig& cfg, RngStream& rng) {
  cfg.validate();
  const int v = cfg.vocab_size;
  int n_func = std::min<int>(std::max(2, v * 20 / 100), kFunctionWords.size());
  int n_noun = std::min<int>(std::max(2, v * 25 / 100), kNouns.size());
  int n_verb = std::min<int>(std::max(1, v * 15 / 100), kVerbs.size());
  int n_homo = std::min<int>(std::max(2, v * 12 / 100), kHomographs.size());
  while (n_func + n_noun + n_verb + n_homo > v) {  // tiny vocabularies
    if (n_noun > 2) --n_noun;
    else if (n_func > 2) --n_func;
    else if (n_verb > 1) --n_verb;
    else --n_homo;
  }
  int n_nsw = v - n_func - n_noun - n_verb - n_homo;

  SymbolBank bank;
  bank.audio_dim = cfg.audio_dim;
  auto add = [&](const std::string& tok, TokenRole role, NswClass cls) {
    if (bank.vocab.count(tok)) return false;
    bank.vocab[tok] = bank.size();
    bank.tokens.push_back(tok);
    bank.roles.push_back(role);
    bank.nsw_classes.push_back(cls);
    return true;
  };
  for (int i = 0; i < n_func; ++i) add(kFunctionWords[i], TokenRole::FUNCTION, NswClass::PLAIN);
  for (int i = 0; i < n_noun; ++i) add(kNouns[i], TokenRole::NOUN, NswClass::PLAIN);
  for (int i = 0; i < n_verb; ++i) add(kVerbs[i], TokenRole::VERB, NswClass::PLAIN);
  for (int i = 0; i < n_homo; ++i) {
    add(kHomographs[i].first, TokenRole::HOMOGRAPH, NswClass::PLAIN);
    bank.homograph_candidates[bank.size() - 1] = kHomographs[i].second;
  }
  const NswClass cycle[] = {NswClass::CARDINAL, NswClass::MONEY, NswClass::TIME,
                            NswClass::DATE, NswClass::LETTERS};
  int made = 0, ordinal = 0;
  while (made < n_nsw) {
    NswClass cls = cycle[ordinal % 5];
    if (add(make_nsw_surface(cls, rng, ordinal / 5), TokenRole::NSW, cls)) ++made;
    ++ordinal;
  }

  for (int i = 0; i < bank.size(); ++i) {
    int len = cfg.frame_min +
              static_cast<int>(rng.next_below(cfg.frame_max - cfg.frame_min + 1));
    bank.templates.push_back(Tensor::randn(len, cfg.audio_dim, rng));
  }
  return bank;
}

Tensor speaker_offset(const CorpusConfig& cfg, int speaker_id) {
  Tensor o(1, cfg.audio_dim);
  if (cfg.offset_scale == 0.0) return o;
  RngStream rng(cfg.seed, RngStream::derive_stream(0x5EAC0FF5ULL, speaker_id));
  double norm = 0.0;
  for (auto& x : o.data) {
    x = rng.next_normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : o.data) x *= cfg.offset_scale / norm;
  return o;
}

AudioFrames synthesize_utterance(const std::vector<std::string>& tokens, int speaker_id,
                                 const SymbolBank& bank, const CorpusConfig& cfg,
                                 RngStream& rng) {
  AudioFrames out;
  int total = 0;
  std::vector<int> ids;
  for (const auto& t : tokens) {
    int id = bank.id_of(t);
    ids.push_back(id);
    out.alignment.emplace_back(total, total + bank.templates[id].rows);
    total += bank.templates[id].rows;
  }
  Tensor offset = speaker_offset(cfg, speaker_id);
  out.frames = Tensor(total, cfg.audio_dim);
  int row = 0;
  for (int id : ids) {
    const Tensor& tpl = bank.templates[id];
    for (int i = 0; i < tpl.rows; ++i, ++row)
      for (int c = 0; c < cfg.audio_dim; ++c)
        out.frames.at(row, c) =
            tpl.at(i, c) + offset.data[c] + cfg.noise_sigma * rng.next_normal();
  }
  return out;
}

namespace {

std::vector<std::string> sample_utterance_tokens(const SymbolBank& bank,
                                                 const CorpusConfig& cfg, RngStream& rng) {
  auto funcs = role_indices(bank, TokenRole::FUNCTION);
  auto nouns = role_indices(bank, TokenRole::NOUN);
  auto verbs = role_indices(bank, TokenRole::VERB);
  auto homos = role_indices(bank, TokenRole::HOMOGRAPH);
  auto nsws = role_indices(bank, TokenRole::NSW);
  int len = cfg.min_len + static_cast<int>(rng.next_below(cfg.max_len - cfg.min_len + 1));
  std::vector<std::string> toks;
  for (int i = 0; i < len; ++i) {
    uint64_t r = rng.next_below(100);
    const std::vector<int>* pool;
    if (r < 30 && !funcs.empty()) pool = &funcs;
    else if (r < 60 && !nouns.empty()) pool = &nouns;
    else if (r < 80 && !verbs.empty()) pool = &verbs;
    else if (r < 90 && !homos.empty()) pool = &homos;
    else if (!nsws.empty()) pool = &nsws;
    else pool = &nouns;
    toks.push_back(bank.tokens[(*pool)[rng.next_below(pool->size())]]);
  }
  return toks;
}

json utterance_record(const Utterance& u, const AudioFrames& a) {
  json j;
  j["id"] = u.id;
  j["speaker"] = u.speaker_id;
  j["tokens"] = u.tokens;
  j["frames"] = frames_to_json(a.frames);
  json al = json::array();
  for (auto [s, e] : a.alignment) al.push_back(json::array({s, e}));
  j["alignment"] = al;
  return j;
}

}  // namespace

void generate_pretrain_corpus(const CorpusConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  if (cfg.speakers < 3)
    throw std::invalid_argument(
        "sentence-level contrast needs >=2 speakers with multiple utterances; "
        ">=3 required by default");
  if (cfg.utterances_per_speaker < 2)
    throw std::invalid_argument("need >=2 utterances per speaker");
  std::filesystem::create_directories(out_dir);

  RngStream bank_rng(cfg.seed, 0);
  SymbolBank bank = build_symbol_bank(cfg, bank_rng);
  save_symbol_bank(bank, out_dir + "/vocab.json");

  std::ofstream train(out_dir + "/pretrain_train.jsonl");
  std::ofstream dev(out_dir + "/pretrain_dev.jsonl");
  if (!train || !dev) throw std::runtime_error("cannot write corpus files in " + out_dir);
  const int stride = dev_stride(cfg);
  int n_train = 0, n_dev = 0;
  long total_frames = 0;
  for (int s = 0; s < cfg.speakers; ++s) {
    for (int u = 0; u < cfg.utterances_per_speaker; ++u) {
      int index = s * cfg.utterances_per_speaker + u;
      RngStream rng(cfg.seed, RngStream::derive_stream(1000, index));
      Utterance utt;
      char idbuf[16];
      std::snprintf(idbuf, sizeof(idbuf), "u%05d", index);
      utt.id = idbuf;
      utt.speaker_id = s;
      utt.tokens = sample_utterance_tokens(bank, cfg, rng);
      for (const auto& t : utt.tokens) utt.token_ids.push_back(bank.id_of(t));
      AudioFrames audio = synthesize_utterance(utt.tokens, s, bank, cfg, rng);
      total_frames += audio.frames.rows;
      bool is_dev = stride > 0 && (index % stride) == 0;
      (is_dev ? dev : train) << utterance_record(utt, audio).dump() << "\n";
      (is_dev ? n_dev : n_train)++;
    }
  }
  json report;
  report["train_utterances"] = n_train;
  report["dev_utterances"] = n_dev;
  report["total_frames"] = total_frames;
  report["vocab_size"] = bank.size();
  report["seed"] = cfg.seed;
  std::ofstream rep(out_dir + "/corpus_report.json");
  rep << report.dump(2) << "\n";
}

std::vector<std::string> verbalize_span(const std::vector<std::string>& span_tokens,
                                        NswClass cls) {
  if (span_tokens.empty()) throw VerbalizeError("empty NSW span");
  if (cls == NswClass::DATE && span_tokens.size() == 2 && span_tokens[1].size() == 4)
    return verbalize(span_tokens[0] + "/" + span_tokens[1], NswClass::DATE);
  std::vector<std::string> out;
  for (const auto& t : span_tokens) {
    auto w = verbalize(t, cls);
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

namespace {

// plain carrier sentence: alternating function/noun/verb words
std::vector<std::string> plain_sentence(const SymbolBank& bank, RngStream& rng, int len) {
  auto funcs = role_indices(bank, TokenRole::FUNCTION);
  auto nouns = role_indices(bank, TokenRole::NOUN);
  auto verbs = role_indices(bank, TokenRole::VERB);
  std::vector<std::string> toks;
  for (int i = 0; i < len; ++i) {
    const std::vector<int>* pool;
    switch (rng.next_below(5)) {
      case 0: case 1: pool = &funcs; break;
      case 2: case 3: pool = &nouns; break;
      default: pool = &verbs; break;
    }
    toks.push_back(bank.tokens[(*pool)[rng.next_below(pool->size())]]);
  }
  return toks;
}

TnExample make_tn_example(const SymbolBank& bank, RngStream& rng) {
  TnExample ex;
  ex.tokens = plain_sentence(bank, rng, 5 + static_cast<int>(rng.next_below(6)));
  ex.tags.assign(ex.tokens.size(), "O");

  auto bare_dates = nsw_indices(bank, NswClass::DATE);
  std::erase_if(bare_dates, [&](int i) {
    return std::count(bank.tokens[i].begin(), bank.tokens[i].end(), '/') != 1;
  });
  auto years = nsw_indices(bank, NswClass::CARDINAL);
  std::erase_if(years, [&](int i) { return bank.tokens[i].size() != 4; });

  int n_spans = 1 + static_cast<int>(rng.next_below(2));
  for (int k = 0; k < n_spans; ++k) {
    int pos = static_cast<int>(rng.next_below(ex.tokens.size() + 1));
    // never split an existing span
    while (pos < static_cast<int>(ex.tags.size()) && ex.tags[pos].rfind("I-", 0) == 0) ++pos;
    // paired M/D + year span exercises I- tags
    if (!bare_dates.empty() && !years.empty() && rng.next_below(10) < 3) {
      int d = bare_dates[rng.next_below(bare_dates.size())];
      int y = years[rng.next_below(years.size())];
      ex.tokens.insert(ex.tokens.begin() + pos, {bank.tokens[d], bank.tokens[y]});
      ex.tags.insert(ex.tags.begin() + pos, {"B-DATE", "I-DATE"});
    } else {
      const NswClass classes[] = {NswClass::CARDINAL, NswClass::MONEY, NswClass::TIME,
                                  NswClass::DATE, NswClass::LETTERS};
      NswClass cls = classes[rng.next_below(5)];
      auto pool = nsw_indices(bank, cls);
      if (pool.empty()) continue;
      int t = pool[rng.next_below(pool.size())];
      ex.tokens.insert(ex.tokens.begin() + pos, bank.tokens[t]);
      ex.tags.insert(ex.tags.begin() + pos, "B-" + nsw_class_to_string(cls));
    }
  }
  // recover spans + gold verbalizations from the tags
  for (size_t i = 0; i < ex.tags.size(); ++i) {
    if (ex.tags[i].rfind("B-", 0) != 0) continue;
    NswClass cls = nsw_class_from_string(ex.tags[i].substr(2));
    size_t j = i + 1;
    while (j < ex.tags.size() && ex.tags[j].rfind("I-", 0) == 0) ++j;
    VerbalizedSpan vs;
    vs.start = static_cast<int>(i);
    vs.end = static_cast<int>(j);
    vs.words = verbalize_span(
        std::vector<std::string>(ex.tokens.begin() + i, ex.tokens.begin() + j), cls);
    ex.verbalized.push_back(vs);
  }
  return ex;
}

PbpExample make_pbp_example(const SymbolBank& bank, RngStream& rng) {
  PbpExample ex;
  ex.tokens = plain_sentence(bank, rng, 6 + static_cast<int>(rng.next_below(7)));
  int n = static_cast<int>(ex.tokens.size());
  ex.boundaries.assign(n, "N");
  int period = 3 + static_cast<int>(rng.next_below(3));  // hidden PPH rhythm
  for (int i = 0; i < n; ++i) {
    if (bank.vocab.count(ex.tokens[i]) &&
        bank.roles[bank.vocab.at(ex.tokens[i])] == TokenRole::NOUN)
      ex.boundaries[i] = "PW";
    if ((i + 1) % period == 0) ex.boundaries[i] = "PPH";
    if (i + 1 < n && ex.tokens[i + 1] == "and") ex.boundaries[i] = "IPH";
  }
  ex.boundaries[n - 1] = "IPH";  // sentence end
  return ex;
}

PdExample make_pd_example(const SymbolBank& bank, RngStream& rng) {
  auto homos = role_indices(bank, TokenRole::HOMOGRAPH);
  auto nouns = role_indices(bank, TokenRole::NOUN);
  auto funcs = role_indices(bank, TokenRole::FUNCTION);
  if (homos.empty()) throw std::runtime_error("no homographs in vocabulary");
  PdExample ex;
  ex.tokens = plain_sentence(bank, rng, 5 + static_cast<int>(rng.next_below(5)));
  int h = homos[rng.next_below(homos.size())];
  ex.position = static_cast<int>(rng.next_below(ex.tokens.size() - 1));
  ex.tokens[ex.position] = bank.tokens[h];
  // gold pronunciation determined by the class of the following token
  bool next_is_noun = rng.next_below(2) == 0;
  int next = next_is_noun ? nouns[rng.next_below(nouns.size())]
                          : funcs[rng.next_below(funcs.size())];
  ex.tokens[ex.position + 1] = bank.tokens[next];
  ex.candidates = bank.homograph_candidates.at(h);
  ex.gold = next_is_noun ? ex.candidates[0] : ex.candidates[1];
  return ex;
}

}  // namespace

void generate_task_datasets(const CorpusConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  RngStream bank_rng(cfg.seed, 0);
  SymbolBank bank = build_symbol_bank(cfg, bank_rng);
  const int stride = dev_stride(cfg);

  auto open2 = [&](const std::string& name) {
    auto tr = std::make_shared<std::ofstream>(out_dir + "/" + name + "_train.jsonl");
    auto dv = std::make_shared<std::ofstream>(out_dir + "/" + name + "_dev.jsonl");
    if (!*tr || !*dv) throw std::runtime_error("cannot write " + name + " files in " + out_dir);
    return std::pair(tr, dv);
  };
  auto [tn_tr, tn_dv] = open2("tn");
  auto [pbp_tr, pbp_dv] = open2("pbp");
  auto [pd_tr, pd_dv] = open2("pd");

  for (int i = 0; i < cfg.tn_sentences; ++i) {
    RngStream rng(cfg.seed, RngStream::derive_stream(2000, i));
    TnExample ex = make_tn_example(bank, rng);
    json j;
    j["tokens"] = ex.tokens;
    j["tags"] = ex.tags;
    json vs = json::array();
    for (const auto& v : ex.verbalized)
      vs.push_back({{"span", {v.start, v.end}}, {"words", v.words}});
    j["verbalized"] = vs;
    *((stride > 0 && i % stride == 0) ? tn_dv : tn_tr) << j.dump() << "\n";
  }
  for (int i = 0; i < cfg.pbp_sentences; ++i) {
    RngStream rng(cfg.seed, RngStream::derive_stream(3000, i));
    PbpExample ex = make_pbp_example(bank, rng);
    json j;
    j["tokens"] = ex.tokens;
    j["boundaries"] = ex.boundaries;
    *((stride > 0 && i % stride == 0) ? pbp_dv : pbp_tr) << j.dump() << "\n";
  }
  for (int i = 0; i < cfg.pd_sentences; ++i) {
    RngStream rng(cfg.seed, RngStream::derive_stream(4000, i));
    PdExample ex = make_pd_example(bank, rng);
    json j;
    j["tokens"] = ex.tokens;
    j["position"] = ex.position;
    j["candidates"] = ex.candidates;
    j["gold"] = ex.gold;
    *((stride > 0 && i % stride == 0) ? pd_dv : pd_tr) << j.dump() << "\n";
  }
}

nlohmann::json bank_to_json(const SymbolBank& bank) {
  json j;
  j["tokens"] = bank.tokens;
  j["audio_dim"] = bank.audio_dim;
  json roles = json::array(), classes = json::array(), templates = json::array();
  for (int i = 0; i < bank.size(); ++i) {
    roles.push_back(static_cast<int>(bank.roles[i]));
    classes.push_back(nsw_class_to_string(bank.nsw_classes[i]));
    templates.push_back(frames_to_json(bank.templates[i]));
  }
  j["roles"] = roles;
  j["nsw_classes"] = classes;
  j["templates"] = templates;
  json homo = json::object();
  for (const auto& [id, cands] : bank.homograph_candidates)
    homo[std::to_string(id)] = cands;
  j["homographs"] = homo;
  return j;
}

void save_symbol_bank(const SymbolBank& bank, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << bank_to_json(bank).dump() << "\n";
}

SymbolBank bank_from_json(const nlohmann::json& j) {
  SymbolBank bank;
  bank.audio_dim = j.at("audio_dim").get<int>();
  for (const auto& t : j.at("tokens")) {
    bank.vocab[t.get<std::string>()] = bank.size();
    bank.tokens.push_back(t.get<std::string>());
  }
  for (const auto& r : j.at("roles")) bank.roles.push_back(static_cast<TokenRole>(r.get<int>()));
  for (const auto& c : j.at("nsw_classes"))
    bank.nsw_classes.push_back(nsw_class_from_string(c.get<std::string>()));
  for (const auto& t : j.at("templates")) bank.templates.push_back(frames_from_json(t));
  for (const auto& [key, cands] : j.at("homographs").items())
    bank.homograph_candidates[std::stoi(key)] = cands.get<std::vector<std::string>>();
  if (bank.roles.size() != bank.tokens.size() || bank.templates.size() != bank.tokens.size())
    throw std::runtime_error("inconsistent bank arrays");
  return bank;
}

SymbolBank load_symbol_bank(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return bank_from_json(json::parse(in));
}

std::optional<std::string> check_bio(const std::vector<std::string>& tags) {
  std::string prev = "O";
  for (size_t i = 0; i < tags.size(); ++i) {
    const std::string& t = tags[i];
    if (t == "O") {
      prev = t;
      continue;
    }
    if (t.size() < 3 || (t[0] != 'B' && t[0] != 'I') || t[1] != '-')
      return "bad tag '" + t + "' at position " + std::to_string(i);
    if (t[0] == 'I') {
      std::string cls = t.substr(2);
      bool ok = prev.size() >= 3 && (prev[0] == 'B' || prev[0] == 'I') && prev.substr(2) == cls;
      if (!ok) return "I- without matching B- at position " + std::to_string(i);
    }
    prev = t;
  }
  return std::nullopt;
}

PretrainDataset load_pretrain_dataset(const std::string& path, const SymbolBank& bank) {
  PretrainDataset ds;
  for_each_jsonl(path, [&](const json& j, int line) {
    PretrainExample ex;
    try {
      ex.utt.id = j.at("id").get<std::string>();
      ex.utt.speaker_id = j.at("speaker").get<int>();
      ex.utt.tokens = j.at("tokens").get<std::vector<std::string>>();
      ex.audio.frames = frames_from_json(j.at("frames"));
      for (const auto& a : j.at("alignment"))
        ex.audio.alignment.emplace_back(a[0].get<int>(), a[1].get<int>());
    } catch (const json::exception& e) {
      line_error(path, line, std::string("schema violation: ") + e.what());
    }
    if (ex.utt.tokens.empty() || ex.utt.tokens.size() > 24)
      line_error(path, line, "utterance length out of range");
    for (const auto& t : ex.utt.tokens) {
      auto it = bank.vocab.find(t);
      if (it == bank.vocab.end()) line_error(path, line, "token not in bank: " + t);
      ex.utt.token_ids.push_back(it->second);
    }
    if (ex.audio.alignment.size() != ex.utt.tokens.size())
      line_error(path, line, "alignment/token count mismatch");
    int cursor = 0;
    for (auto [s, e] : ex.audio.alignment) {
      if (s != cursor || e <= s) line_error(path, line, "alignment not contiguous");
      cursor = e;
    }
    if (cursor != ex.audio.frames.rows)
      line_error(path, line, "alignment does not cover all frames");
    if (ex.audio.frames.cols != bank.audio_dim)
      line_error(path, line, "frame dimensionality mismatch");
    ds.examples.push_back(std::move(ex));
  });
  return ds;
}

TnDataset load_tn_dataset(const std::string& path) {
  TnDataset ds;
  for_each_jsonl(path, [&](const json& j, int line) {
    TnExample ex;
    try {
      ex.tokens = j.at("tokens").get<std::vector<std::string>>();
      ex.tags = j.at("tags").get<std::vector<std::string>>();
      for (const auto& v : j.at("verbalized")) {
        VerbalizedSpan vs;
        vs.start = v.at("span")[0].get<int>();
        vs.end = v.at("span")[1].get<int>();
        vs.words = v.at("words").get<std::vector<std::string>>();
        ex.verbalized.push_back(vs);
      }
    } catch (const json::exception& e) {
      line_error(path, line, std::string("schema violation: ") + e.what());
    }
    if (ex.tokens.size() != ex.tags.size())
      line_error(path, line, "tokens/tags length mismatch");
    if (auto why = check_bio(ex.tags)) line_error(path, line, *why);
    for (const auto& v : ex.verbalized)
      if (v.start < 0 || v.end > static_cast<int>(ex.tokens.size()) || v.start >= v.end)
        line_error(path, line, "verbalized span out of range");
    ds.examples.push_back(std::move(ex));
  });
  return ds;
}

PbpDataset load_pbp_dataset(const std::string& path) {
  PbpDataset ds;
  for_each_jsonl(path, [&](const json& j, int line) {
    PbpExample ex;
    try {
      ex.tokens = j.at("tokens").get<std::vector<std::string>>();
      ex.boundaries = j.at("boundaries").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      line_error(path, line, std::string("schema violation: ") + e.what());
    }
    if (ex.tokens.size() != ex.boundaries.size())
      line_error(path, line, "tokens/boundaries length mismatch");
    for (const auto& b : ex.boundaries)
      if (b != "N" && b != "PW" && b != "PPH" && b != "IPH")
        line_error(path, line, "bad boundary label '" + b + "'");
    ds.examples.push_back(std::move(ex));
  });
  return ds;
}

PdDataset load_pd_dataset(const std::string& path) {
  PdDataset ds;
  for_each_jsonl(path, [&](const json& j, int line) {
    PdExample ex;
    try {
      ex.tokens = j.at("tokens").get<std::vector<std::string>>();
      ex.position = j.at("position").get<int>();
      ex.candidates = j.at("candidates").get<std::vector<std::string>>();
      ex.gold = j.at("gold").get<std::string>();
    } catch (const json::exception& e) {
      line_error(path, line, std::string("schema violation: ") + e.what());
    }
    if (ex.position < 0 || ex.position >= static_cast<int>(ex.tokens.size()))
      line_error(path, line, "polyphone position out of range");
    if (ex.candidates.size() < 2) line_error(path, line, "need >=2 candidates");
    if (std::find(ex.candidates.begin(), ex.candidates.end(), ex.gold) == ex.candidates.end())
      line_error(path, line, "gold pronunciation not among candidates");
    ds.examples.push_back(std::move(ex));
  });
  return ds;
}

}  // namespace tapfm
