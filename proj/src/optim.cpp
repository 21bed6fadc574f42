#include "tapfm/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace tapfm {

Value ParamStore::create(const std::string& name, Tensor init) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
  Value v = make_leaf(std::move(init));
  params_[name] = v;
  moments_[name] = {Tensor(v->val.rows, v->val.cols), Tensor(v->val.rows, v->val.cols)};
  return v;
}

Value ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, v] : params_) zero_grad(v);
}

void ParamStore::step(const AdamWConfig& cfg) {
  ++step_count_;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_count_));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_count_));
  for (auto& [name, v] : params_) {
    if (v->grad.numel() == 0) continue;  // untouched this step
    auto& mom = moments_[name];
    for (size_t i = 0; i < v->val.numel(); ++i) {
      double g = v->grad.data[i];
      mom.m.data[i] = cfg.beta1 * mom.m.data[i] + (1.0 - cfg.beta1) * g;
      mom.v.data[i] = cfg.beta2 * mom.v.data[i] + (1.0 - cfg.beta2) * g * g;
      double mhat = mom.m.data[i] / bc1;
      double vhat = mom.v.data[i] / bc2;
      v->val.data[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) +
                                  cfg.weight_decay * v->val.data[i]);
    }
  }
}

GradReport grad_check(const std::function<Value(ParamStore&)>& loss_fn, ParamStore& params,
                      double eps, double rel_tol) {
  params.zero_grads();
  Value loss = loss_fn(params);
  if (!loss->val.all_finite()) throw std::domain_error("non-finite objective");
  backward(loss);

  GradReport rep;
  for (auto& [name, p] : params.params()) {
    for (size_t i = 0; i < p->val.numel(); ++i) {
      double analytic = p->grad.numel() ? p->grad.data[i] : 0.0;
      double orig = p->val.data[i];
      p->val.data[i] = orig + eps;
      double up = loss_fn(params)->val.item();
      p->val.data[i] = orig - eps;
      double dn = loss_fn(params)->val.item();
      p->val.data[i] = orig;
      if (!std::isfinite(up) || !std::isfinite(dn))
        throw std::domain_error("non-finite objective");
      double fd = (up - dn) / (2.0 * eps);
      double denom = std::max({std::abs(analytic), std::abs(fd), 1e-8});
      double rel = std::abs(analytic - fd) / denom;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = name;
        rep.worst_index = static_cast<int>(i);
      }
    }
  }
  rep.pass = rep.max_rel_err <= rel_tol;
  return rep;
}

}  // namespace tapfm
