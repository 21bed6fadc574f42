#include "tapfm/multitask.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace tapfm {

namespace {

std::vector<double> weighted_softmax(const std::vector<double>& x, double temperature, int k) {
  double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> e(x.size());
  double sum = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    e[i] = std::exp((x[i] - mx) / temperature);
    sum += e[i];
  }
  for (auto& v : e) v *= k / sum;
  return e;
}

}  // namespace

std::vector<double> dwa_lambda(const DwaState& state, int iteration) {
  const int k = state.task_count;
  if (iteration <= 2 || state.loss_history.size() < 2)
    return std::vector<double>(k, 1.0);
  const auto& prev = state.loss_history[state.loss_history.size() - 1];   // L(l-1)
  const auto& prev2 = state.loss_history[state.loss_history.size() - 2];  // L(l-2)
  std::vector<double> r(k);
  for (int i = 0; i < k; ++i)
    r[i] = prev2[i] == 0.0 ? 1.0 : prev[i] / prev2[i];
  return weighted_softmax(r, state.temperature, k);
}

std::vector<double> dwa_plus_epsilon(const DwaState& state, int /*iteration*/) {
  const int k = state.task_count;
  for (double h : state.h_best)
    if (h <= 0.0) throw std::invalid_argument("h_best must be > 0");
  if (state.metric_history.empty()) return std::vector<double>(k, 1.0);
  const auto& h = state.metric_history.back();
  std::vector<double> d(k);
  for (int i = 0; i < k; ++i) d[i] = (state.h_best[i] - h[i]) / state.h_best[i];
  return weighted_softmax(d, state.temperature, k);
}

std::vector<double> combined_weights(const std::vector<double>& lambda,
                                     const std::vector<double>& epsilon) {
  if (lambda.size() != epsilon.size())
    throw std::invalid_argument("combined_weights: length mismatch");
  std::vector<double> w(lambda.size());
  for (size_t i = 0; i < w.size(); ++i) w[i] = 0.5 * (lambda[i] + epsilon[i]);
  return w;
}

namespace {

int label_index(const std::vector<std::string>& labels, const std::string& lab) {
  auto it = std::find(labels.begin(), labels.end(), lab);
  if (it == labels.end()) throw std::out_of_range("label not in set: " + lab);
  return static_cast<int>(it - labels.begin());
}

std::set<std::tuple<std::string, int, int>> tag_spans(const std::vector<std::string>& tags) {
  std::set<std::tuple<std::string, int, int>> spans;
  for (size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].rfind("B-", 0) != 0) continue;
    size_t j = i + 1;
    while (j < tags.size() && tags[j].rfind("I-", 0) == 0 &&
           tags[j].substr(2) == tags[i].substr(2))
      ++j;
    spans.insert({tags[i].substr(2), static_cast<int>(i), static_cast<int>(j)});
  }
  return spans;
}

double f1(long tp, long fp, long fn) {
  if (tp == 0) return 0.0;
  double p = static_cast<double>(tp) / (tp + fp);
  double r = static_cast<double>(tp) / (tp + fn);
  return 2.0 * p * r / (p + r);
}

}  // namespace

double micro_span_f1(const std::vector<std::vector<std::string>>& gold,
                     const std::vector<std::vector<std::string>>& pred) {
  if (gold.size() != pred.size()) throw std::invalid_argument("span_f1: length mismatch");
  long tp = 0, fp = 0, fn = 0;
  for (size_t s = 0; s < gold.size(); ++s) {
    auto g = tag_spans(gold[s]);
    auto p = tag_spans(pred[s]);
    for (const auto& span : p) g.count(span) ? ++tp : ++fp;
    for (const auto& span : g) fn += p.count(span) ? 0 : 1;
  }
  return f1(tp, fp, fn);
}

std::array<double, 3> pbp_level_f1(const std::vector<std::vector<std::string>>& gold,
                                   const std::vector<std::vector<std::string>>& pred) {
  if (gold.size() != pred.size()) throw std::invalid_argument("level_f1: length mismatch");
  long tp[4] = {0}, fp[4] = {0}, fn[4] = {0};
  for (size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != pred[s].size()) throw std::invalid_argument("level_f1: length mismatch");
    for (size_t i = 0; i < gold[s].size(); ++i) {
      int g = boundary_rank(gold[s][i]);
      int p = boundary_rank(pred[s][i]);
      for (int level = 1; level <= 3; ++level) {
        bool gp = g >= level, pp = p >= level;
        if (gp && pp) ++tp[level];
        else if (pp) ++fp[level];
        else if (gp) ++fn[level];
      }
    }
  }
  return {f1(tp[1], fp[1], fn[1]), f1(tp[2], fp[2], fn[2]), f1(tp[3], fp[3], fn[3])};
}

MetricsReport evaluate_metrics(FrontendModel& model, const TnDataset& tn, const PbpDataset& pbp,
                               const PdDataset& pd) {
  if (tn.examples.empty() || pbp.examples.empty() || pd.examples.empty())
    throw std::invalid_argument("empty evaluation dataset");
  MetricsReport rep;

  std::vector<std::vector<std::string>> tn_gold, tn_pred;
  long exact = 0;
  for (const auto& ex : tn.examples) {
    std::vector<int> ids;
    for (const auto& t : ex.tokens)
      ids.push_back(model.bank.vocab.count(t) ? model.bank.vocab.at(t) : model.bank.unk_id());
    Prediction pred = predict_tags(model, ids);
    if (pred.tn_tags == ex.tags) ++exact;
    tn_gold.push_back(ex.tags);
    tn_pred.push_back(pred.tn_tags);
  }
  rep.tn_span_f1 = micro_span_f1(tn_gold, tn_pred);
  rep.tn_sentence_acc = static_cast<double>(exact) / tn.examples.size();

  std::vector<std::vector<std::string>> pbp_gold, pbp_pred;
  for (const auto& ex : pbp.examples) {
    std::vector<int> ids;
    for (const auto& t : ex.tokens)
      ids.push_back(model.bank.vocab.count(t) ? model.bank.vocab.at(t) : model.bank.unk_id());
    pbp_gold.push_back(ex.boundaries);
    pbp_pred.push_back(predict_tags(model, ids).boundaries);
  }
  auto lf = pbp_level_f1(pbp_gold, pbp_pred);
  rep.pbp_f1_pw = lf[0];
  rep.pbp_f1_pph = lf[1];
  rep.pbp_f1_iph = lf[2];

  long pd_hits = 0;
  for (const auto& ex : pd.examples) {
    std::vector<int> ids;
    for (const auto& t : ex.tokens)
      ids.push_back(model.bank.vocab.count(t) ? model.bank.vocab.at(t) : model.bank.unk_id());
    if (predict_pronunciation(model, ids, ex.position, ex.candidates) == ex.gold) ++pd_hits;
  }
  rep.pd_acc = static_cast<double>(pd_hits) / pd.examples.size();
  return rep;
}

namespace {

std::vector<int> token_ids_for(const FrontendModel& model, const std::vector<std::string>& toks) {
  std::vector<int> ids;
  for (const auto& t : toks)
    ids.push_back(model.bank.vocab.count(t) ? model.bank.vocab.at(t) : model.bank.unk_id());
  return ids;
}

Value tn_loss(FrontendModel& model, const TnExample& ex) {
  FrontendForward fwd = frontend_forward(model, token_ids_for(model, ex.tokens));
  std::vector<int> gold;
  for (const auto& t : ex.tags) gold.push_back(label_index(model.cfg.tn_labels, t));
  return crf_nll(fwd.tn_emissions, model.tn_trans, model.tn_mask, model.tn_start, model.tn_end,
                 gold);
}

Value pbp_loss(FrontendModel& model, const PbpExample& ex) {
  FrontendForward fwd = frontend_forward(model, token_ids_for(model, ex.tokens));
  std::vector<int> gold;
  for (const auto& b : ex.boundaries) gold.push_back(label_index(model.cfg.pbp_labels, b));
  return crf_nll(fwd.pbp_emissions, model.pbp_trans, model.pbp_mask, model.pbp_start,
                 model.pbp_end, gold);
}

Value pd_loss(FrontendModel& model, const PdExample& ex) {
  FrontendForward fwd = frontend_forward(model, token_ids_for(model, ex.tokens));
  Value scores = mask_pd_scores(model, fwd.pd_scores, ex.position, ex.candidates);
  return nll_rows(log_softmax_rows(scores), {model.pron_index.at(ex.gold)});
}

template <typename DS, typename LossFn>
Value batch_loss(FrontendModel& model, const DS& ds, const std::vector<int>& order,
                 size_t cursor, int batch, LossFn loss_fn, double* mean_out) {
  std::vector<Value> losses;
  for (int i = 0; i < batch; ++i) {
    int idx = order[(cursor + i) % order.size()];
    losses.push_back(loss_fn(model, ds.examples[idx]));
  }
  Value sum = losses[0];
  for (size_t i = 1; i < losses.size(); ++i) sum = add(sum, losses[i]);
  Value mean = scalar_mul(sum, 1.0 / losses.size());
  *mean_out = mean->val.item();
  return mean;
}

}  // namespace

FinetuneReport joint_finetune(FrontendModel& model, const TaskDatasets& data,
                              const FinetuneConfig& cfg, const std::string& report_path) {
  if (data.tn_train.examples.empty() || data.pbp_train.examples.empty() ||
      data.pd_train.examples.empty())
    throw std::invalid_argument("empty task dataset");

  std::ofstream rep;
  if (!report_path.empty()) {
    rep.open(report_path);
    if (!rep) throw std::runtime_error("cannot write " + report_path);
  }

  DwaState dwa(3, cfg.temperature);
  dwa.h_best.assign(3, cfg.h_best);
  std::vector<double> weights(3, 1.0);

  std::vector<int> tn_order(data.tn_train.examples.size());
  std::vector<int> pbp_order(data.pbp_train.examples.size());
  std::vector<int> pd_order(data.pd_train.examples.size());
  std::iota(tn_order.begin(), tn_order.end(), 0);
  std::iota(pbp_order.begin(), pbp_order.end(), 0);
  std::iota(pd_order.begin(), pd_order.end(), 0);

  size_t largest = std::max({tn_order.size(), pbp_order.size(), pd_order.size()});
  int steps_per_epoch =
      static_cast<int>((largest + cfg.batch_size - 1) / cfg.batch_size);

  FinetuneReport report;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    RngStream shuffle_rng(cfg.seed, RngStream::derive_stream(0xF7, epoch));
    shuffle_rng.shuffle(tn_order);
    shuffle_rng.shuffle(pbp_order);
    shuffle_rng.shuffle(pd_order);

    double epoch_loss[3] = {0, 0, 0};
    for (int step = 0; step < steps_per_epoch; ++step) {
      size_t cursor = static_cast<size_t>(step) * cfg.batch_size;
      double mean[3];
      Value l_tn = batch_loss(model, data.tn_train, tn_order, cursor, cfg.batch_size,
                              tn_loss, &mean[0]);
      Value l_pbp = batch_loss(model, data.pbp_train, pbp_order, cursor, cfg.batch_size,
                               pbp_loss, &mean[1]);
      Value l_pd = batch_loss(model, data.pd_train, pd_order, cursor, cfg.batch_size,
                              pd_loss, &mean[2]);
      Value total = add(add(scalar_mul(l_tn, weights[0]), scalar_mul(l_pbp, weights[1])),
                        scalar_mul(l_pd, weights[2]));
      if (!total->val.all_finite()) throw std::domain_error("non-finite finetuning loss");
      model.store.zero_grads();
      backward(total);
      model.store.step(cfg.optim);
      for (int k = 0; k < 3; ++k) epoch_loss[k] += mean[k];
    }

    FinetuneEpochRow row;
    row.epoch = epoch;
    for (int k = 0; k < 3; ++k) row.task_loss.push_back(epoch_loss[k] / steps_per_epoch);
    row.task_weight = weights;
    row.metrics = evaluate_metrics(model, data.tn_dev, data.pbp_dev, data.pd_dev);
    report.epochs.push_back(row);

    dwa.loss_history.push_back(row.task_loss);
    dwa.metric_history.push_back(
        {row.metrics.tn_span_f1, row.metrics.pbp_macro_f1(), row.metrics.pd_acc});
    if (cfg.dwa_plus_on)
      weights = combined_weights(dwa_lambda(dwa, epoch + 1), dwa_plus_epsilon(dwa, epoch + 1));

    if (rep) {
      nlohmann::json j = {{"epoch", row.epoch},
                          {"loss", row.task_loss},
                          {"weight", row.task_weight},
                          {"metrics",
                           {{"tn_span_f1", row.metrics.tn_span_f1},
                            {"tn_sentence_acc", row.metrics.tn_sentence_acc},
                            {"pbp_f1_pw", row.metrics.pbp_f1_pw},
                            {"pbp_f1_pph", row.metrics.pbp_f1_pph},
                            {"pbp_f1_iph", row.metrics.pbp_f1_iph},
                            {"pd_acc", row.metrics.pd_acc}}}};
      rep << j.dump() << "\n";
    }
  }
  return report;
}

}  // namespace tapfm
