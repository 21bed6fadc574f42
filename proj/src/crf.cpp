#include "tapfm/crf.hpp"

#include <stdexcept>

namespace tapfm {

namespace {

// Anything this far down can only be a masked path.
constexpr double kInfeasible = kCrfMaskPenalty / 2.0;

void check_dims(const Value& emissions, const Value& transitions, const CrfMask& mask,
                const Value& start, const Value& end) {
  const int k = emissions->val.cols;
  if (transitions->val.rows != k || transitions->val.cols != k)
    throw std::invalid_argument("crf: transition shape mismatch");
  if (mask.transition_penalty.rows != k || start->val.cols != k || end->val.cols != k)
    throw std::invalid_argument("crf: mask/start/end shape mismatch");
  if (emissions->val.rows < 1) throw std::invalid_argument("crf: empty emissions");
}

}  // namespace

CrfMask permissive_mask(int num_labels) {
  CrfMask m;
  m.transition_penalty = Tensor(num_labels, num_labels);
  m.start_penalty = Tensor(1, num_labels);
  return m;
}

CrfMask build_transition_mask(const std::vector<std::string>& bio_labels) {
  const int k = static_cast<int>(bio_labels.size());
  auto parse = [](const std::string& lab) -> std::pair<char, std::string> {
    if (lab == "O") return {'O', ""};
    if (lab.size() >= 3 && (lab[0] == 'B' || lab[0] == 'I') && lab[1] == '-')
      return {lab[0], lab.substr(2)};
    throw std::invalid_argument("malformed BIO label: " + lab);
  };
  CrfMask m = permissive_mask(k);
  for (int j = 0; j < k; ++j) {
    auto [tj, cj] = parse(bio_labels[j]);
    if (tj == 'I') m.start_penalty.data[j] = kCrfMaskPenalty;
    for (int i = 0; i < k; ++i) {
      auto [ti, ci] = parse(bio_labels[i]);
      if (tj == 'I' && !((ti == 'B' || ti == 'I') && ci == cj))
        m.transition_penalty.at(i, j) = kCrfMaskPenalty;
    }
  }
  return m;
}

Value crf_log_partition(const Value& emissions, const Value& transitions, const CrfMask& mask,
                        const Value& start, const Value& end) {
  check_dims(emissions, transitions, mask, start, end);
  const int n = emissions->val.rows;
  Value masked_trans = add(transitions, make_constant(mask.transition_penalty));
  Value alpha = add(add(slice_rows(emissions, 0, 1), start),
                    make_constant(mask.start_penalty));  // 1 x K
  for (int t = 1; t < n; ++t) {
    // M[i][j] = alpha[i] + trans[i][j]; alpha'[j] = lse_i M[i][j] + emis[t][j]
    Value m = add_colvec(masked_trans, transpose(alpha));
    Value lse = transpose(logsumexp_rows(transpose(m)));  // 1 x K
    alpha = add(lse, slice_rows(emissions, t, t + 1));
  }
  Value z = logsumexp_rows(add(alpha, end));  // 1 x 1
  if (z->val.item() < kInfeasible) throw std::domain_error("no feasible path");
  return z;
}

Value crf_path_score(const Value& emissions, const Value& transitions, const CrfMask& mask,
                     const Value& start, const Value& end, const std::vector<int>& path) {
  check_dims(emissions, transitions, mask, start, end);
  const int n = emissions->val.rows;
  if (static_cast<int>(path.size()) != n)
    throw std::invalid_argument("crf: path length mismatch");
  if (!mask.start_allowed(path[0]))
    throw std::domain_error("gold path starts on a masked label");
  for (int t = 1; t < n; ++t)
    if (!mask.transition_allowed(path[t - 1], path[t]))
      throw std::domain_error("gold path crosses a masked transition");
  Value score = add(at_elem(start, 0, path[0]), at_elem(emissions, 0, path[0]));
  for (int t = 1; t < n; ++t) {
    score = add(score, at_elem(transitions, path[t - 1], path[t]));
    score = add(score, at_elem(emissions, t, path[t]));
  }
  return add(score, at_elem(end, 0, path[n - 1]));
}

Value crf_nll(const Value& emissions, const Value& transitions, const CrfMask& mask,
              const Value& start, const Value& end, const std::vector<int>& gold) {
  Value z = crf_log_partition(emissions, transitions, mask, start, end);
  Value s = crf_path_score(emissions, transitions, mask, start, end, gold);
  return sub(z, s);
}

std::vector<int> crf_viterbi(const Tensor& emissions, const Tensor& transitions,
                             const CrfMask& mask, const Tensor& start, const Tensor& end) {
  const int n = emissions.rows, k = emissions.cols;
  if (n < 1) throw std::invalid_argument("crf_viterbi: empty emissions");
  // best[t][j] = max score of the path suffix starting at position t in label j
  std::vector<std::vector<double>> best(n, std::vector<double>(k));
  for (int j = 0; j < k; ++j) best[n - 1][j] = emissions.at(n - 1, j) + end.data[j];
  for (int t = n - 2; t >= 0; --t)
    for (int i = 0; i < k; ++i) {
      double mx = -1e300;
      for (int j = 0; j < k; ++j) {
        double v = transitions.at(i, j) + mask.transition_penalty.at(i, j) + best[t + 1][j];
        if (v > mx) mx = v;
      }
      best[t][i] = emissions.at(t, i) + mx;
    }
  // left-to-right reconstruction; smallest index among ties gives the
  // lexicographically smallest maximal path
  std::vector<int> path(n);
  double total = -1e300;
  for (int j = 0; j < k; ++j) {
    double v = start.data[j] + mask.start_penalty.data[j] + best[0][j];
    if (v > total) {
      total = v;
      path[0] = j;
    }
  }
  if (total < kInfeasible) throw std::domain_error("no feasible path");
  for (int t = 1; t < n; ++t) {
    int prev = path[t - 1];
    double mx = -1e300;
    for (int j = 0; j < k; ++j) {
      double v = transitions.at(prev, j) + mask.transition_penalty.at(prev, j) + best[t][j];
      if (v > mx) {
        mx = v;
        path[t] = j;
      }
    }
  }
  return path;
}

}  // namespace tapfm
