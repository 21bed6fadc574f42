#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "tapfm/alignment.hpp"
#include "tapfm/optim.hpp"
#include "tapfm/rng.hpp"

using namespace tapfm;

namespace {

// exhaustive LIS with the same tie-break: maximal length, then the
// lexicographically smallest value sequence, then leftmost indexes
LisResult lis_oracle(const std::vector<int>& seq) {
  const int n = static_cast<int>(seq.size());
  LisResult best;
  for (uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::vector<int> idx, val;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) {
        idx.push_back(i);
        val.push_back(seq[i]);
      }
    bool increasing = true;
    for (size_t i = 1; i < val.size(); ++i)
      if (val[i] <= val[i - 1]) increasing = false;
    if (!increasing) continue;
    if (val.size() < best.values.size()) continue;
    if (val.size() > best.values.size() || val < best.values ||
        (val == best.values && idx < best.indexes)) {
      best.indexes = idx;
      best.values = val;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("lis hand cases") {
  LisResult r = find_lis({3, 1, 2, 5, 4});
  CHECK(r.values == std::vector<int>{1, 2, 4});
  CHECK(r.indexes == std::vector<int>{1, 2, 4});

  r = find_lis({5, 4, 3, 2, 1});
  CHECK(r.values == std::vector<int>{1});
  CHECK(r.indexes == std::vector<int>{4});

  r = find_lis({2, 2, 2});
  CHECK(r.values == std::vector<int>{2});
  CHECK(r.indexes == std::vector<int>{0});

  CHECK_THROWS((void)find_lis({}));
}

TEST_CASE("lis matches exhaustive oracle on 1000 random sequences") {
  RngStream rng(101, 0);
  for (int t = 0; t < 1000; ++t) {
    int n = 1 + static_cast<int>(rng.next_below(12));
    std::vector<int> seq(n);
    for (int& v : seq) v = static_cast<int>(rng.next_below(16));
    LisResult got = find_lis(seq);
    LisResult want = lis_oracle(seq);
    INFO("case ", t);
    CHECK(got.values == want.values);
    CHECK(got.indexes == want.indexes);
  }
}

TEST_CASE("span label fixtures") {
  CHECK(generate_span_labels({0, 1, 2}, 2).values == std::vector<int>{0, 1, 2});
  CHECK(generate_span_labels({0, 3, 1, 2, 5}, 5).values == std::vector<int>{0, -1, 1, 2, 5});
  CHECK(generate_span_labels({0, 0, 0}, 0).values == std::vector<int>{0, 0, 0});
}

TEST_CASE("span label input validation") {
  CHECK_THROWS((void)generate_span_labels({0, 5}, 4));
  CHECK_THROWS((void)generate_span_labels({7, 3, 9}, 0));
  CHECK_THROWS((void)generate_span_labels({-1, 0}, 4));
  CHECK_THROWS((void)generate_span_labels({}, 4));
}

TEST_CASE("span label properties on 1000 random candidate sequences") {
  RngStream rng(202, 0);
  for (int t = 0; t < 1000; ++t) {
    int len = 1 + static_cast<int>(rng.next_below(40));
    int v_max = static_cast<int>(rng.next_below(31));
    std::vector<int> cand(len);
    for (int& v : cand) v = static_cast<int>(rng.next_below(v_max + 1));
    SpanLabels out = generate_span_labels(cand, v_max);
    REQUIRE(out.values.size() == cand.size());

    INFO("case ", t, " len ", len, " v_max ", v_max);
    // last element pinned to v_max
    CHECK(out.values.back() == v_max);
    // non-ignored labels stay in range
    for (int v : out.values) {
      if (v == -1) continue;
      CHECK(v >= 0);
      CHECK(v <= v_max);
    }
    if (v_max == 0) continue;

    LisResult lis = find_lis(cand);
    std::vector<bool> anchor(len, false);
    for (int i : lis.indexes) anchor[i] = true;
    int last = 0;
    for (int i = 1; i < len - 1; ++i) {
      if (anchor[i]) {
        // interior LIS anchors retain candidate values
        CHECK(out.values[i] == cand[i]);
      } else if (out.values[i] != -1) {
        // assigned interpolations respect the running `last`
        CHECK(out.values[i] >= last);
      }
      last = std::max(last, out.values[i]);
    }
  }
}

TEST_CASE("pairing matrix is a cosine matrix") {
  RngStream rng(7, 0);
  Tensor st = Tensor::randn(4, 8, rng), sa = Tensor::randn(6, 8, rng);
  Tensor pm = pairing_matrix(make_constant(st), make_constant(sa))->val;
  REQUIRE(pm.rows == 4);
  REQUIRE(pm.cols == 6);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j) {
      double dot = 0, na = 0, nb = 0;
      for (int k = 0; k < 8; ++k) {
        dot += st.at(i, k) * sa.at(j, k);
        na += st.at(i, k) * st.at(i, k);
        nb += sa.at(j, k) * sa.at(j, k);
      }
      CHECK(pm.at(i, j) == doctest::Approx(dot / std::sqrt(na * nb)).epsilon(1e-12));
      CHECK(std::abs(pm.at(i, j)) <= 1.0 + 1e-12);
    }
  // self-pairing diagonal is exactly 1
  Tensor self = pairing_matrix(make_constant(st), make_constant(st))->val;
  for (int i = 0; i < 4; ++i) CHECK(self.at(i, i) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("argmax candidates break ties to the lowest index") {
  Tensor m(2, 3);
  m.data = {0.5, 0.9, 0.9,
            0.2, 0.2, 0.1};
  CHECK(argmax_candidates(m, Direction::T2A) == std::vector<int>{1, 0});
  CHECK(argmax_candidates(m, Direction::A2T) == std::vector<int>{0, 0, 0});
}

TEST_CASE("span contrastive loss composition and scale") {
  RngStream rng(11, 0);
  Value pm = make_constant(Tensor::randn(5, 7, rng, 0.3));
  SpanLossResult r = span_contrastive_loss(pm, 10.0);
  CHECK(r.total->val.item() ==
        doctest::Approx((r.t2a->val.item() + r.a2t->val.item()) / 2.0).epsilon(1e-15));
  CHECK(r.total->val.item() >= 0.0);
  CHECK_THROWS((void)span_contrastive_loss(pm, 0.0));
  // a larger scale sharpens a correct prediction toward zero loss
  Tensor easy(2, 2);
  easy.data = {0.9, -0.9, -0.9, 0.9};
  double hi = span_contrastive_loss(make_constant(easy), 10.0).total->val.item();
  double lo = span_contrastive_loss(make_constant(easy), 1.0).total->val.item();
  CHECK(hi < lo);
}

TEST_CASE("span contrastive loss matches manual cross-entropy on a known layout") {
  // pairing with a strict diagonal structure: labels are 0..n-1 both ways
  Tensor pm(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) pm.at(i, j) = i == j ? 0.8 : -0.4;
  SpanLossResult r = span_contrastive_loss(make_constant(pm), 10.0);
  CHECK(r.labels_t2a.values == std::vector<int>{0, 1, 2});
  CHECK(r.labels_a2t.values == std::vector<int>{0, 1, 2});
  double z = std::log(std::exp(8.0) + 2.0 * std::exp(-4.0));
  double ce = z - 8.0;
  CHECK(r.t2a->val.item() == doctest::Approx(ce).epsilon(1e-9));
  CHECK(r.a2t->val.item() == doctest::Approx(ce).epsilon(1e-9));
}

TEST_CASE("span loss gradient check") {
  ParamStore store;
  RngStream rng(13, 0);
  store.create("st", Tensor::randn(4, 6, rng, 0.5));
  store.create("sa", Tensor::randn(5, 6, rng, 0.5));
  GradReport rep = grad_check(
      [](ParamStore& s) {
        return span_contrastive_loss(pairing_matrix(s.get("st"), s.get("sa")), 10.0).total;
      },
      store);
  INFO(rep.worst_param, " rel err ", rep.max_rel_err);
  CHECK(rep.pass);
}
