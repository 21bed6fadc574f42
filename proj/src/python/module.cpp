#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tapfm/alignment.hpp"
#include "tapfm/crf.hpp"
#include "tapfm/encoders.hpp"
#include "tapfm/multitask.hpp"
#include "tapfm/verbalizer.hpp"

namespace py = pybind11;
using namespace tapfm;

namespace {

Tensor to_tensor(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("empty matrix");
  Tensor t = Tensor::zeros(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int i = 0; i < t.rows; ++i) {
    if (static_cast<int>(rows[i].size()) != t.cols)
      throw std::invalid_argument("ragged matrix");
    for (int j = 0; j < t.cols; ++j) t.at(i, j) = rows[i][j];
  }
  return t;
}

std::vector<std::vector<double>> from_tensor(const Tensor& t) {
  std::vector<std::vector<double>> out(t.rows, std::vector<double>(t.cols));
  for (int i = 0; i < t.rows; ++i)
    for (int j = 0; j < t.cols; ++j) out[i][j] = t.at(i, j);
  return out;
}

}  // namespace

PYBIND11_MODULE(_tapfm, m) {
  m.doc() = "text-audio pretraining / TTS frontend core operations";

  m.def("find_lis", [](const std::vector<int>& seq) {
    LisResult r = find_lis(seq);
    return std::make_pair(r.indexes, r.values);
  });

  m.def(
      "generate_span_labels",
      [](const std::vector<int>& candidates, int v_max, const std::string& direction) {
        Direction dir = direction == "t2a" ? Direction::T2A : Direction::A2T;
        return generate_span_labels(candidates, v_max, dir).values;
      },
      py::arg("candidates"), py::arg("v_max"), py::arg("direction") = "t2a");

  m.def(
      "slide_windows",
      [](int length, int size, int stride) { return slide_windows(length, {size, stride}); },
      py::arg("length"), py::arg("size"), py::arg("stride"));

  m.def(
      "pairing_matrix",
      [](const std::vector<std::vector<double>>& text_spans,
         const std::vector<std::vector<double>>& audio_spans) {
        Value pm = pairing_matrix(make_constant(to_tensor(text_spans)),
                                  make_constant(to_tensor(audio_spans)));
        return from_tensor(pm->val);
      },
      py::arg("text_spans"), py::arg("audio_spans"));

  m.def(
      "span_contrastive_loss",
      [](const std::vector<std::vector<double>>& pairing, double scale) {
        auto r = span_contrastive_loss(make_constant(to_tensor(pairing)), scale);
        return std::make_tuple(r.total->val.item(), r.t2a->val.item(), r.a2t->val.item());
      },
      py::arg("pairing"), py::arg("scale") = 10.0);

  m.def("verbalize", [](const std::string& text, const std::string& cls) {
    return verbalize(text, nsw_class_from_string(cls));
  });
  m.def("number_to_words", &number_to_words);

  m.def(
      "crf_log_partition",
      [](const std::vector<std::vector<double>>& emissions,
         const std::vector<std::vector<double>>& transitions, const std::vector<double>& start,
         const std::vector<double>& end) {
        int k = static_cast<int>(start.size());
        Tensor st = Tensor::zeros(1, k), en = Tensor::zeros(1, k);
        for (int i = 0; i < k; ++i) {
          st.at(0, i) = start[i];
          en.at(0, i) = end[i];
        }
        Value z = crf_log_partition(make_constant(to_tensor(emissions)),
                                    make_constant(to_tensor(transitions)), permissive_mask(k),
                                    make_constant(st), make_constant(en));
        return z->val.item();
      });

  m.def(
      "crf_viterbi",
      [](const std::vector<std::vector<double>>& emissions,
         const std::vector<std::vector<double>>& transitions, const std::vector<double>& start,
         const std::vector<double>& end) {
        int k = static_cast<int>(start.size());
        Tensor st = Tensor::zeros(1, k), en = Tensor::zeros(1, k);
        for (int i = 0; i < k; ++i) {
          st.at(0, i) = start[i];
          en.at(0, i) = end[i];
        }
        return crf_viterbi(to_tensor(emissions), to_tensor(transitions), permissive_mask(k), st,
                           en);
      });

  m.def(
      "dwa_weights",
      [](const std::vector<std::vector<double>>& loss_history,
         const std::vector<std::vector<double>>& metric_history, double temperature,
         double h_best) {
        int k = loss_history.empty()
                    ? (metric_history.empty() ? 3 : static_cast<int>(metric_history[0].size()))
                    : static_cast<int>(loss_history[0].size());
        DwaState state(k, temperature);
        state.loss_history = loss_history;
        state.metric_history = metric_history;
        state.h_best.assign(k, h_best);
        int it = static_cast<int>(loss_history.size()) + 1;
        auto lam = dwa_lambda(state, it);
        auto eps = dwa_plus_epsilon(state, it);
        return std::make_tuple(lam, eps, combined_weights(lam, eps));
      },
      py::arg("loss_history"), py::arg("metric_history"), py::arg("temperature") = 2.0,
      py::arg("h_best") = 1.0);
}
