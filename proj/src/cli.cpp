#include "tapfm/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "tapfm/checkpoint.hpp"
#include "tapfm/frontend.hpp"

namespace tapfm {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::runtime_error(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw std::runtime_error(where + ": unknown key '" + key + "'");
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_window(const json& j, const char* key, WindowSpec& out) {
  if (!j.contains(key)) return;
  check_keys(j.at(key), {"size", "stride"}, key);
  read_key(j.at(key), "size", out.size);
  read_key(j.at(key), "stride", out.stride);
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error(path + ": invalid JSON");
  check_keys(j, {"seed", "paths", "corpus", "pretrain", "finetune"}, path);

  RunConfig cfg;
  read_key(j, "seed", cfg.seed);
  cfg.corpus.seed = cfg.pretrain.seed = cfg.finetune.seed = cfg.seed;

  if (j.contains("paths")) {
    const json& p = j.at("paths");
    check_keys(p, {"data_dir", "work_dir"}, "paths");
    read_key(p, "data_dir", cfg.data_dir);
    read_key(p, "work_dir", cfg.work_dir);
  }
  if (j.contains("corpus")) {
    const json& c = j.at("corpus");
    check_keys(c,
               {"vocab_size", "audio_dim", "frame_min", "frame_max", "speakers",
                "utterances_per_speaker", "min_len", "max_len", "noise_sigma", "offset_scale",
                "heldout_fraction", "tn_sentences", "pbp_sentences", "pd_sentences", "seed"},
               "corpus");
    read_key(c, "vocab_size", cfg.corpus.vocab_size);
    read_key(c, "audio_dim", cfg.corpus.audio_dim);
    read_key(c, "frame_min", cfg.corpus.frame_min);
    read_key(c, "frame_max", cfg.corpus.frame_max);
    read_key(c, "speakers", cfg.corpus.speakers);
    read_key(c, "utterances_per_speaker", cfg.corpus.utterances_per_speaker);
    read_key(c, "min_len", cfg.corpus.min_len);
    read_key(c, "max_len", cfg.corpus.max_len);
    read_key(c, "noise_sigma", cfg.corpus.noise_sigma);
    read_key(c, "offset_scale", cfg.corpus.offset_scale);
    read_key(c, "heldout_fraction", cfg.corpus.heldout_fraction);
    read_key(c, "tn_sentences", cfg.corpus.tn_sentences);
    read_key(c, "pbp_sentences", cfg.corpus.pbp_sentences);
    read_key(c, "pd_sentences", cfg.corpus.pd_sentences);
    read_key(c, "seed", cfg.corpus.seed);
  }
  if (j.contains("pretrain")) {
    const json& p = j.at("pretrain");
    check_keys(p,
               {"alpha", "beta", "logit_scale", "text_window", "audio_window", "mlm_rate",
                "epochs", "batch_size", "lr", "weight_decay", "dim", "layers", "ffn_hidden",
                "max_len", "seed"},
               "pretrain");
    read_key(p, "alpha", cfg.pretrain.alpha);
    read_key(p, "beta", cfg.pretrain.beta);
    read_key(p, "logit_scale", cfg.pretrain.logit_scale);
    read_window(p, "text_window", cfg.pretrain.text_window);
    read_window(p, "audio_window", cfg.pretrain.audio_window);
    read_key(p, "mlm_rate", cfg.pretrain.mlm_rate);
    read_key(p, "epochs", cfg.pretrain.epochs);
    read_key(p, "batch_size", cfg.pretrain.batch_size);
    read_key(p, "lr", cfg.pretrain.optim.lr);
    read_key(p, "weight_decay", cfg.pretrain.optim.weight_decay);
    read_key(p, "dim", cfg.pretrain.encoder.dim);
    read_key(p, "layers", cfg.pretrain.encoder.layers);
    read_key(p, "ffn_hidden", cfg.pretrain.encoder.ffn_hidden);
    read_key(p, "max_len", cfg.pretrain.encoder.max_len);
    read_key(p, "seed", cfg.pretrain.seed);
  }
  if (j.contains("finetune")) {
    const json& f = j.at("finetune");
    check_keys(f,
               {"epochs", "batch_size", "lr", "weight_decay", "temperature", "h_best",
                "lstm_hidden", "seed"},
               "finetune");
    read_key(f, "epochs", cfg.finetune.epochs);
    read_key(f, "batch_size", cfg.finetune.batch_size);
    read_key(f, "lr", cfg.finetune.optim.lr);
    read_key(f, "weight_decay", cfg.finetune.optim.weight_decay);
    read_key(f, "temperature", cfg.finetune.temperature);
    read_key(f, "h_best", cfg.finetune.h_best);
    read_key(f, "lstm_hidden", cfg.lstm_hidden);
    read_key(f, "seed", cfg.finetune.seed);
  }
  return cfg;
}

void override_seed(RunConfig& cfg, uint64_t seed) {
  cfg.seed = cfg.corpus.seed = cfg.pretrain.seed = cfg.finetune.seed = seed;
}

namespace {

json encoder_to_json(const EncoderConfig& e) {
  return {{"dim", e.dim}, {"layers", e.layers}, {"ffn_hidden", e.ffn_hidden},
          {"max_len", e.max_len}};
}

EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig e;
  read_key(j, "dim", e.dim);
  read_key(j, "layers", e.layers);
  read_key(j, "ffn_hidden", e.ffn_hidden);
  read_key(j, "max_len", e.max_len);
  return e;
}

json window_to_json(const WindowSpec& w) { return {{"size", w.size}, {"stride", w.stride}}; }

WindowSpec window_from_json(const json& j) {
  WindowSpec w;
  read_key(j, "size", w.size);
  read_key(j, "stride", w.stride);
  return w;
}

// Stage-1 checkpoints carry a strict superset of the frontend's text
// encoder parameters; copy the intersection.
int restore_matching(ParamStore& store, const Checkpoint& ckpt) {
  int copied = 0;
  for (const auto& [name, tensor] : ckpt.tensors) {
    if (!store.has(name)) continue;
    Value p = store.get(name);
    if (!p->val.same_shape(tensor))
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    p->val = tensor;
    ++copied;
  }
  if (copied == 0) throw std::runtime_error("checkpoint shares no parameters with this model");
  return copied;
}

FrontendModel frontend_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.config.value("stage", "") != "frontend")
    throw std::runtime_error("not a frontend checkpoint");
  SymbolBank bank = bank_from_json(ckpt.config.at("bank"));
  FrontendConfig fcfg;
  fcfg.encoder = encoder_from_json(ckpt.config.at("encoder"));
  fcfg.resconformer_on = ckpt.config.value("resconformer", true);
  fcfg.lstm_hidden = ckpt.config.value("lstm_hidden", 16);
  fcfg.tn_labels = default_tn_labels();
  fcfg.pron_inventory = bank.pronunciation_inventory();
  fcfg.seed = ckpt.config.value("seed", uint64_t{1});
  FrontendModel model = make_frontend_model(bank, fcfg);
  restore_params(model.store, ckpt);
  return model;
}

std::vector<int> ids_or_unk(const SymbolBank& bank, const std::vector<std::string>& tokens) {
  std::vector<int> ids;
  for (const auto& t : tokens)
    ids.push_back(bank.vocab.count(t) ? bank.vocab.at(t) : bank.unk_id());
  return ids;
}

int cmd_gen_corpus(const RunConfig& cfg) {
  generate_pretrain_corpus(cfg.corpus, cfg.data_dir);
  generate_task_datasets(cfg.corpus, cfg.data_dir);
  std::cout << "wrote corpus to " << cfg.data_dir << "\n";
  return 0;
}

int cmd_pretrain(const RunConfig& cfg, const std::string& out, bool no_span, bool no_sentence,
                 bool no_mlm) {
  PretrainConfig pcfg = cfg.pretrain;
  pcfg.span_on = !no_span;
  pcfg.sentence_on = !no_sentence;
  pcfg.mlm_on = !no_mlm;
  SymbolBank bank = load_symbol_bank(cfg.data_dir + "/vocab.json");
  PretrainDataset train = load_pretrain_dataset(cfg.data_dir + "/pretrain_train.jsonl", bank);
  PretrainDataset dev = load_pretrain_dataset(cfg.data_dir + "/pretrain_dev.jsonl", bank);
  PretrainModels models = make_pretrain_models(bank, pcfg);
  TrainReport report = run_pretraining(models, train, dev, pcfg,
                                       cfg.work_dir + "/pretrain_report.jsonl");
  json meta = {{"stage", "pretrain"},
               {"bank", bank_to_json(bank)},
               {"encoder", encoder_to_json(pcfg.encoder)},
               {"text_window", window_to_json(pcfg.text_window)},
               {"audio_window", window_to_json(pcfg.audio_window)},
               {"logit_scale", pcfg.logit_scale},
               {"data_dir", cfg.data_dir},
               {"seed", pcfg.seed}};
  save_checkpoint(out, models.store, meta);
  const auto& last = report.epochs.back();
  std::cout << json({{"epochs", report.epochs.size()},
                     {"final_total", last.mean_loss.total},
                     {"final_heldout_retrieval", last.heldout_retrieval}})
                   .dump()
            << "\n";
  return 0;
}

int cmd_eval_align(const std::string& ckpt_path, const std::string& split,
                   const std::optional<std::string>& config_path,
                   const std::optional<std::string>& csv_dir,
                   std::optional<uint64_t> seed_override) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.config.value("stage", "") != "pretrain")
    throw std::runtime_error("not a pretraining checkpoint");
  if (split != "train" && split != "dev")
    throw std::runtime_error("--split must be train or dev");
  PretrainConfig pcfg;
  std::string data_dir = ckpt.config.value("data_dir", std::string("data"));
  if (config_path) {
    RunConfig cfg = load_run_config(*config_path);
    if (seed_override) override_seed(cfg, *seed_override);
    pcfg = cfg.pretrain;
    data_dir = cfg.data_dir;
  }
  pcfg.encoder = encoder_from_json(ckpt.config.at("encoder"));
  if (ckpt.config.contains("text_window"))
    pcfg.text_window = window_from_json(ckpt.config.at("text_window"));
  if (ckpt.config.contains("audio_window"))
    pcfg.audio_window = window_from_json(ckpt.config.at("audio_window"));
  pcfg.logit_scale = ckpt.config.value("logit_scale", pcfg.logit_scale);
  pcfg.seed = ckpt.config.value("seed", uint64_t{1});

  SymbolBank bank = bank_from_json(ckpt.config.at("bank"));
  PretrainModels models = make_pretrain_models(bank, pcfg);
  restore_params(models.store, ckpt);
  PretrainDataset data =
      load_pretrain_dataset(data_dir + "/pretrain_" + split + ".jsonl", bank);
  SimilarityReport rep = eval_alignment(models, data, pcfg, csv_dir);
  std::cout << json({{"mean_matched", rep.mean_matched},
                     {"mean_mismatched", rep.mean_mismatched},
                     {"top1_retrieval", rep.top1_retrieval},
                     {"utterances", rep.utterances},
                     {"spans", rep.spans}})
                   .dump()
            << "\n";
  return 0;
}

int cmd_finetune(const RunConfig& cfg, const std::optional<std::string>& ckpt_path,
                 const std::string& out, bool no_dwa_plus, bool no_resconformer,
                 bool fresh_encoder) {
  SymbolBank bank = load_symbol_bank(cfg.data_dir + "/vocab.json");
  std::optional<Checkpoint> stage1;
  if (ckpt_path) stage1 = load_checkpoint(*ckpt_path);

  FrontendConfig fcfg;
  fcfg.encoder = stage1 ? encoder_from_json(stage1->config.at("encoder")) : cfg.pretrain.encoder;
  fcfg.resconformer_on = !no_resconformer;
  fcfg.lstm_hidden = cfg.lstm_hidden;
  fcfg.tn_labels = default_tn_labels();
  fcfg.pron_inventory = bank.pronunciation_inventory();
  fcfg.seed = cfg.finetune.seed;
  FrontendModel model = make_frontend_model(bank, fcfg);
  if (stage1 && !fresh_encoder) restore_matching(model.store, *stage1);

  TaskDatasets data;
  data.tn_train = load_tn_dataset(cfg.data_dir + "/tn_train.jsonl");
  data.tn_dev = load_tn_dataset(cfg.data_dir + "/tn_dev.jsonl");
  data.pbp_train = load_pbp_dataset(cfg.data_dir + "/pbp_train.jsonl");
  data.pbp_dev = load_pbp_dataset(cfg.data_dir + "/pbp_dev.jsonl");
  data.pd_train = load_pd_dataset(cfg.data_dir + "/pd_train.jsonl");
  data.pd_dev = load_pd_dataset(cfg.data_dir + "/pd_dev.jsonl");

  FinetuneConfig ftcfg = cfg.finetune;
  ftcfg.dwa_plus_on = !no_dwa_plus;
  FinetuneReport report =
      joint_finetune(model, data, ftcfg, cfg.work_dir + "/finetune_report.jsonl");

  json meta = {{"stage", "frontend"},
               {"bank", bank_to_json(bank)},
               {"encoder", encoder_to_json(fcfg.encoder)},
               {"lstm_hidden", fcfg.lstm_hidden},
               {"resconformer", fcfg.resconformer_on},
               {"data_dir", cfg.data_dir},
               {"seed", ftcfg.seed}};
  save_checkpoint(out, model.store, meta);
  const auto& m = report.epochs.back().metrics;
  std::cout << json({{"epochs", report.epochs.size()},
                     {"tn_span_f1", m.tn_span_f1},
                     {"pbp_macro_f1", m.pbp_macro_f1()},
                     {"pd_acc", m.pd_acc}})
                   .dump()
            << "\n";
  return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& in_path,
                const std::string& out_path) {
  FrontendModel model = frontend_from_checkpoint(load_checkpoint(ckpt_path));
  std::ifstream in(in_path);
  if (!in) throw std::runtime_error("cannot open " + in_path);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("tokens"))
      throw std::runtime_error(in_path + ":" + std::to_string(lineno) +
                               ": expected {\"tokens\": [...]}");
    std::vector<std::string> tokens = j.at("tokens").get<std::vector<std::string>>();
    std::vector<int> ids = ids_or_unk(model.bank, tokens);
    Prediction pred = predict_tags(model, ids);
    // a mispredicted tag can put a plain word inside an NSW span; demote
    // spans the verbalizer rejects instead of failing the whole line
    for (size_t i = 0; i < pred.tn_tags.size(); ++i) {
      if (pred.tn_tags[i].rfind("B-", 0) != 0) continue;
      size_t j = i + 1;
      while (j < pred.tn_tags.size() && pred.tn_tags[j].rfind("I-", 0) == 0) ++j;
      try {
        verbalize_span({tokens.begin() + i, tokens.begin() + j},
                       nsw_class_from_string(pred.tn_tags[i].substr(2)));
      } catch (const std::exception&) {
        for (size_t k = i; k < j; ++k) pred.tn_tags[k] = "O";
      }
      i = j - 1;
    }
    std::vector<std::pair<int, std::string>> pd_choices;
    for (size_t i = 0; i < ids.size(); ++i) {
      auto it = model.bank.homograph_candidates.find(ids[i]);
      if (it == model.bank.homograph_candidates.end()) continue;
      pd_choices.emplace_back(static_cast<int>(i),
                              predict_pronunciation(model, ids, static_cast<int>(i), it->second));
    }
    FrontendOutput merged = result_merge(tokens, pred.tn_tags, pred.boundaries, pd_choices);
    json poly = json::array();
    for (const auto& [pos, pron] : merged.polyphones) poly.push_back({pos, pron});
    out << json({{"tokens", merged.tokens},
                 {"tn_tags", merged.tn_tags},
                 {"spoken", merged.spoken},
                 {"boundaries", merged.boundaries},
                 {"polyphones", poly}})
               .dump()
        << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& tn_path,
             const std::string& pbp_path, const std::string& pd_path) {
  FrontendModel model = frontend_from_checkpoint(load_checkpoint(ckpt_path));
  TnDataset tn = load_tn_dataset(tn_path);
  PbpDataset pbp = load_pbp_dataset(pbp_path);
  PdDataset pd = load_pd_dataset(pd_path);
  MetricsReport m = evaluate_metrics(model, tn, pbp, pd);
  std::cout << json({{"tn_span_f1", m.tn_span_f1},
                     {"tn_sentence_acc", m.tn_sentence_acc},
                     {"pbp_f1_pw", m.pbp_f1_pw},
                     {"pbp_f1_pph", m.pbp_f1_pph},
                     {"pbp_f1_iph", m.pbp_f1_iph},
                     {"pbp_macro_f1", m.pbp_macro_f1()},
                     {"pd_acc", m.pd_acc}})
                   .dump()
            << "\n";
  return 0;
}

std::optional<uint64_t> env_seed() {
  const char* env = std::getenv("TAPFM_SEED");
  if (!env || !*env) return std::nullopt;
  try {
    return std::stoull(env);
  } catch (const std::exception&) {
    throw std::runtime_error("TAPFM_SEED is not a number");
  }
}

}  // namespace

int main_dispatch(int argc, char** argv) {
  CLI::App app{"text-audio pretraining and TTS frontend toolkit"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, out_path, in_path, split = "dev";
  std::string tn_path, pbp_path, pd_path;
  std::string csv_dir;
  uint64_t seed_flag = 0;
  bool no_span = false, no_sentence = false, no_mlm = false;
  bool no_dwa_plus = false, no_resconformer = false, fresh_encoder = false;

  auto* gen = app.add_subcommand("gen-corpus", "generate the synthetic paired corpus");
  gen->add_option("--config", config_path)->required();
  auto* gen_seed = gen->add_option("--seed", seed_flag);

  auto* pre = app.add_subcommand("pretrain", "stage-1 contrastive pretraining");
  pre->add_option("--config", config_path)->required();
  pre->add_option("--out", out_path)->required();
  auto* pre_seed = pre->add_option("--seed", seed_flag);
  pre->add_flag("--no-span", no_span);
  pre->add_flag("--no-sentence", no_sentence);
  pre->add_flag("--no-mlm", no_mlm);

  auto* ea = app.add_subcommand("eval-align", "span similarity / retrieval report");
  ea->add_option("--ckpt", ckpt_path)->required();
  ea->add_option("--split", split);
  auto* ea_cfg = ea->add_option("--config", config_path);
  auto* ea_csv = ea->add_option("--csv-dir", csv_dir);
  auto* ea_seed = ea->add_option("--seed", seed_flag);

  auto* ft = app.add_subcommand("finetune", "stage-2 joint frontend training");
  ft->add_option("--config", config_path)->required();
  auto* ft_ckpt = ft->add_option("--ckpt", ckpt_path);
  ft->add_option("--out", out_path)->required();
  auto* ft_seed = ft->add_option("--seed", seed_flag);
  ft->add_flag("--no-dwa-plus", no_dwa_plus);
  ft->add_flag("--no-resconformer", no_resconformer);
  ft->add_flag("--fresh-encoder", fresh_encoder);

  auto* pr = app.add_subcommand("predict", "run the frontend on token JSONL");
  pr->add_option("--ckpt", ckpt_path)->required();
  pr->add_option("--in", in_path)->required();
  pr->add_option("--out", out_path)->required();

  auto* ev = app.add_subcommand("eval", "frontend metrics on gold task files");
  ev->add_option("--ckpt", ckpt_path)->required();
  ev->add_option("--tn", tn_path)->required();
  ev->add_option("--pbp", pbp_path)->required();
  ev->add_option("--pd", pd_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "E:1: " << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    auto resolve_seed = [&](CLI::Option* flag) -> std::optional<uint64_t> {
      if (flag && flag->count()) return seed_flag;
      return env_seed();
    };
    auto load_cfg = [&](CLI::Option* flag) {
      RunConfig cfg = load_run_config(config_path);
      if (auto s = resolve_seed(flag)) override_seed(cfg, *s);
      return cfg;
    };

    if (gen->parsed()) return cmd_gen_corpus(load_cfg(gen_seed));
    if (pre->parsed())
      return cmd_pretrain(load_cfg(pre_seed), out_path, no_span, no_sentence, no_mlm);
    if (ea->parsed())
      return cmd_eval_align(ckpt_path, split,
                            ea_cfg->count() ? std::optional<std::string>(config_path)
                                            : std::nullopt,
                            ea_csv->count() ? std::optional<std::string>(csv_dir) : std::nullopt,
                            resolve_seed(ea_seed));
    if (ft->parsed())
      return cmd_finetune(load_cfg(ft_seed),
                          ft_ckpt->count() ? std::optional<std::string>(ckpt_path) : std::nullopt,
                          out_path, no_dwa_plus, no_resconformer, fresh_encoder);
    if (pr->parsed()) return cmd_predict(ckpt_path, in_path, out_path);
    if (ev->parsed()) return cmd_eval(ckpt_path, tn_path, pbp_path, pd_path);
    std::cerr << "E:1: no subcommand\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "E:3: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "E:2: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace tapfm
