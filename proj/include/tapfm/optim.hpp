#pragma once

#include <map>
#include <string>
#include <vector>

#include "tapfm/autograd.hpp"

namespace tapfm {

struct AdamWConfig {
  double lr = 6e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Named trainable parameters plus AdamW moment state. Names are unique and
// shapes immutable after creation. std::map keeps iteration order stable so
// checkpoints and updates are deterministic.
class ParamStore {
 public:
  Value create(const std::string& name, Tensor init);
  Value get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }

  void zero_grads();
  // One AdamW update over all parameters with accumulated grads.
  void step(const AdamWConfig& cfg);

  int64_t step_count() const { return step_count_; }
  const std::map<std::string, Value>& params() const { return params_; }
  std::map<std::string, Value>& params() { return params_; }

 private:
  struct Moments {
    Tensor m, v;
  };
  std::map<std::string, Value> params_;
  std::map<std::string, Moments> moments_;
  int64_t step_count_ = 0;
};

struct GradReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_index = -1;
  bool pass = false;
};

// Compares reverse-mode gradients of loss_fn against central finite
// differences for every entry of every parameter.
GradReport grad_check(const std::function<Value(ParamStore&)>& loss_fn, ParamStore& params,
                      double eps = 1e-5, double rel_tol = 1e-4);

}  // namespace tapfm
