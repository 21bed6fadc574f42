#include "tapfm/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tapfm {

Value pairing_matrix(const Value& span_text, const Value& span_audio) {
  if (span_text->val.rows < 1 || span_audio->val.rows < 1)
    throw std::invalid_argument("pairing_matrix: empty span set");
  if (span_text->val.cols != span_audio->val.cols)
    throw std::invalid_argument("pairing_matrix: dim mismatch");
  return matmul(l2_normalize_rows(span_text), transpose(l2_normalize_rows(span_audio)));
}

std::vector<int> argmax_candidates(const Tensor& logits, Direction dir) {
  const bool t2a = dir == Direction::T2A;
  const int outer = t2a ? logits.rows : logits.cols;
  const int inner = t2a ? logits.cols : logits.rows;
  std::vector<int> out(outer);
  for (int i = 0; i < outer; ++i) {
    int best = 0;
    double best_v = t2a ? logits.at(i, 0) : logits.at(0, i);
    for (int j = 1; j < inner; ++j) {
      double v = t2a ? logits.at(i, j) : logits.at(j, i);
      if (v > best_v) {
        best_v = v;
        best = j;
      }
    }
    out[i] = best;
  }
  return out;
}

LisResult find_lis(const std::vector<int>& candidates) {
  const int n = static_cast<int>(candidates.size());
  if (n == 0) throw std::invalid_argument("find_lis: empty input");
  // len[i] = length of the longest strictly increasing subsequence starting at i
  std::vector<int> len(n, 1);
  for (int i = n - 2; i >= 0; --i)
    for (int j = i + 1; j < n; ++j)
      if (candidates[j] > candidates[i]) len[i] = std::max(len[i], 1 + len[j]);
  int max_len = *std::max_element(len.begin(), len.end());

  // Greedy left-to-right: smallest next value (then leftmost index) that can
  // still complete a subsequence of the required remaining length.
  LisResult res;
  int prev_idx = -1;
  bool have_prev = false;
  int prev_val = 0;
  for (int remaining = max_len; remaining >= 1; --remaining) {
    int pick = -1;
    for (int i = prev_idx + 1; i < n; ++i) {
      if (len[i] != remaining) continue;
      if (have_prev && candidates[i] <= prev_val) continue;
      if (pick == -1 || candidates[i] < candidates[pick]) pick = i;
    }
    res.indexes.push_back(pick);
    res.values.push_back(candidates[pick]);
    prev_idx = pick;
    prev_val = candidates[pick];
    have_prev = true;
  }
  return res;
}

SpanLabels generate_span_labels(const std::vector<int>& candidates, int v_max, Direction dir) {
  const int n = static_cast<int>(candidates.size());
  if (n < 1) throw std::invalid_argument("generate_span_labels: empty candidates");
  if (v_max < 0) throw std::invalid_argument("generate_span_labels: negative v_max");
  for (int c : candidates)
    if (c < 0 || c > v_max)
      throw std::out_of_range("generate_span_labels: candidate outside [0, v_max]");

  SpanLabels out;
  out.v_max = v_max;
  out.direction = dir;
  out.values.assign(n, 0);
  if (v_max == 0) return out;  // rate would divide by zero; all spans map to 0

  LisResult lis = find_lis(candidates);
  const double rate = static_cast<double>(n) / v_max;
  int last = 0;
  auto in = [](const std::vector<int>& v, int x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  };
  for (int i = 1; i < n; ++i) {
    if (in(lis.indexes, i)) {
      out.values[i] = candidates[i];
    } else {
      double t = (std::min(last + 1, v_max) + i / rate) / 2.0;
      int temp = static_cast<int>(std::floor(t + 0.5));  // round half up
      if (in(lis.values, temp) || temp < last)
        out.values[i] = -1;
      else
        out.values[i] = temp;
    }
    last = std::max(out.values[i], last);
  }
  out.values[n - 1] = v_max;
  return out;
}

SpanLossResult span_contrastive_loss(const Value& pm, double scale) {
  if (scale <= 0.0) throw std::invalid_argument("span_contrastive_loss: scale must be > 0");
  const int n = pm->val.rows, m = pm->val.cols;

  SpanLossResult res;
  res.labels_t2a =
      generate_span_labels(argmax_candidates(pm->val, Direction::T2A), m - 1, Direction::T2A);
  res.labels_a2t =
      generate_span_labels(argmax_candidates(pm->val, Direction::A2T), n - 1, Direction::A2T);

  auto all_ignored = [](const SpanLabels& l) {
    return std::all_of(l.values.begin(), l.values.end(), [](int v) { return v == -1; });
  };
  res.t2a_all_ignored = all_ignored(res.labels_t2a);
  res.a2t_all_ignored = all_ignored(res.labels_a2t);

  Value logits = scalar_mul(pm, scale);
  res.t2a = nll_rows(log_softmax_rows(logits), res.labels_t2a.values);
  res.a2t = nll_rows(log_softmax_rows(transpose(logits)), res.labels_a2t.values);
  res.total = scalar_mul(add(res.t2a, res.a2t), 0.5);
  return res;
}

}  // namespace tapfm
