#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tapfm/frontend.hpp"

namespace tapfm {

struct DwaState {
  int task_count = 3;
  double temperature = 2.0;                    // T
  std::vector<std::vector<double>> loss_history;    // one row per iteration
  std::vector<std::vector<double>> metric_history;  // h_k(l) in [0, 1]
  std::vector<double> h_best;                  // theoretically best metric, default 1

  DwaState() : h_best(3, 1.0) {}
  explicit DwaState(int k, double t = 2.0) : task_count(k), temperature(t), h_best(k, 1.0) {}
};

// lambda_k(l) = K exp(r_k/T) / sum exp(r_i/T) with r_k = L_k(l-1)/L_k(l-2).
// All-ones until two iterations of history exist; zero denominators fall
// back to r_k = 1.
std::vector<double> dwa_lambda(const DwaState& state, int iteration);

// epsilon_k from d_k = (h^m - h_k(l-1)) / h^m; all-ones while the metric
// history is empty. h^m <= 0 is a configuration error.
std::vector<double> dwa_plus_epsilon(const DwaState& state, int iteration);

// w_k = (lambda_k + epsilon_k) / 2
std::vector<double> combined_weights(const std::vector<double>& lambda,
                                     const std::vector<double>& epsilon);

struct MetricsReport {
  double tn_span_f1 = 0.0;
  double tn_sentence_acc = 0.0;
  double pbp_f1_pw = 0.0;
  double pbp_f1_pph = 0.0;
  double pbp_f1_iph = 0.0;
  double pd_acc = 0.0;

  double pbp_macro_f1() const { return (pbp_f1_pw + pbp_f1_pph + pbp_f1_iph) / 3.0; }
};

MetricsReport evaluate_metrics(FrontendModel& model, const TnDataset& tn, const PbpDataset& pbp,
                               const PdDataset& pd);

// Micro span-F1 over (class, start, end) triples decoded from BIO tags,
// excluding O.
double micro_span_f1(const std::vector<std::vector<std::string>>& gold,
                     const std::vector<std::vector<std::string>>& pred);

// Hierarchical per-level F1 (PW=1, PPH=2, IPH=3): a token is positive at a
// level if its boundary ranks at least that high.
std::array<double, 3> pbp_level_f1(const std::vector<std::vector<std::string>>& gold,
                                   const std::vector<std::vector<std::string>>& pred);

struct FinetuneConfig {
  int epochs = 8;
  int batch_size = 8;
  AdamWConfig optim;
  bool dwa_plus_on = true;
  double temperature = 2.0;
  double h_best = 1.0;
  uint64_t seed = 1;
};

struct FinetuneEpochRow {
  int epoch = 0;
  std::vector<double> task_loss;    // TN, PBP, PD
  std::vector<double> task_weight;  // w used during this epoch
  MetricsReport metrics;
};

struct FinetuneReport {
  std::vector<FinetuneEpochRow> epochs;
};

struct TaskDatasets {
  TnDataset tn_train, tn_dev;
  PbpDataset pbp_train, pbp_dev;
  PdDataset pd_train, pd_dev;
};

// Round-robin joint training of the three heads with DWA+ weights
// refreshed once per epoch from dev metrics.
FinetuneReport joint_finetune(FrontendModel& model, const TaskDatasets& data,
                              const FinetuneConfig& cfg,
                              const std::string& report_path = "");

}  // namespace tapfm
