#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "tapfm/rng.hpp"

namespace tapfm {

// Dense row-major 2-D (or 1-D treated as 1xN) tensor of doubles.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {
    if (r < 0 || c < 0) throw std::invalid_argument("negative tensor dims");
  }

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  static Tensor full(int r, int c, double v) {
    Tensor t(r, c);
    for (auto& x : t.data) x = v;
    return t;
  }
  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }
  static Tensor randn(int r, int c, RngStream& rng, double scale = 1.0) {
    Tensor t(r, c);
    for (auto& x : t.data) x = rng.next_normal() * scale;
    return t;
  }

  size_t numel() const { return data.size(); }
  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  double item() const {
    if (numel() != 1) throw std::logic_error("item() on non-scalar tensor");
    return data[0];
  }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
  }
};

}  // namespace tapfm
