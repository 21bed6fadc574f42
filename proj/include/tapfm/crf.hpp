#pragma once

#include <string>
#include <vector>

#include "tapfm/autograd.hpp"

namespace tapfm {

// Forbidden moves carry an additive log-space penalty instead of a true
// -inf; -1e4 never wins and never overflows.
inline constexpr double kCrfMaskPenalty = -1e4;

struct CrfMask {
  Tensor transition_penalty;  // K x K, 0 (allowed) or kCrfMaskPenalty
  Tensor start_penalty;       // 1 x K

  bool transition_allowed(int from, int to) const {
    return transition_penalty.at(from, to) == 0.0;
  }
  bool start_allowed(int k) const { return start_penalty.data[k] == 0.0; }
};

CrfMask permissive_mask(int num_labels);

// BIO mask: forbids O->I-X, B-X->I-Y, I-X->I-Y (X != Y) and start->I-X.
// Labels must be "O" or "B-<cls>"/"I-<cls>".
CrfMask build_transition_mask(const std::vector<std::string>& bio_labels);

// Forward-algorithm log partition over all feasible paths, log-space.
// Throws "no feasible path" if every path is masked out.
Value crf_log_partition(const Value& emissions, const Value& transitions, const CrfMask& mask,
                        const Value& start, const Value& end);

Value crf_path_score(const Value& emissions, const Value& transitions, const CrfMask& mask,
                     const Value& start, const Value& end, const std::vector<int>& path);

// log_partition - path_score(gold); >= 0. Throws if gold crosses a mask.
Value crf_nll(const Value& emissions, const Value& transitions, const CrfMask& mask,
              const Value& start, const Value& end, const std::vector<int>& gold);

// Max-score feasible path; ties broken toward the lexicographically
// smallest label-index sequence.
std::vector<int> crf_viterbi(const Tensor& emissions, const Tensor& transitions,
                             const CrfMask& mask, const Tensor& start, const Tensor& end);

}  // namespace tapfm
