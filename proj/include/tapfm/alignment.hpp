#pragma once

#include <vector>

#include "tapfm/autograd.hpp"

namespace tapfm {

enum class Direction { T2A, A2T };

struct SpanLabels {
  std::vector<int> values;  // -1 = ignored in loss
  int v_max = 0;
  Direction direction = Direction::T2A;
};

struct LisResult {
  std::vector<int> indexes;  // strictly increasing positions
  std::vector<int> values;   // candidates[indexes[i]], strictly increasing
};

// Cosine pairing matrix between text spans [N,D] and audio spans [M,D]:
// rownorm(S_t) * rownorm(S_a)^T. Differentiable. Throws on a row with
// norm < 1e-12 ("degenerate span vector").
Value pairing_matrix(const Value& span_text, const Value& span_audio);

// Per-row (T2A) or per-column (A2T) argmax; ties toward the lowest index.
std::vector<int> argmax_candidates(const Tensor& logits, Direction dir);

// Longest strictly increasing subsequence; among maximal-length answers the
// lexicographically smallest value sequence (then leftmost indexes).
LisResult find_lis(const std::vector<int>& candidates);

// Span label generation: keep LIS anchors, interpolate the rest, ignore
// interpolations that collide with anchor values or run backwards.
// v_max == 0 short-circuits to all zeros.
SpanLabels generate_span_labels(const std::vector<int>& candidates, int v_max,
                                Direction dir = Direction::T2A);

struct SpanLossResult {
  Value total;  // (t2a + a2t) / 2
  Value t2a;
  Value a2t;
  SpanLabels labels_t2a;
  SpanLabels labels_a2t;
  bool t2a_all_ignored = false;
  bool a2t_all_ignored = false;
};

// Bidirectional span contrastive loss. `scale` multiplies the cosine logits
// inside the softmax cross-entropy only.
SpanLossResult span_contrastive_loss(const Value& pm, double scale);

}  // namespace tapfm
