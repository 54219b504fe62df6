#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace ctxbias {

using Vec = std::vector<double>;

// Dense row-major matrix. Just enough linear algebra for the windowed
// tagger; kept hand-rolled so the backward pass stays transparent.
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(size_t i, size_t j) { return data[i * cols + j]; }
  double operator()(size_t i, size_t j) const { return data[i * cols + j]; }

  double* row(size_t i) { return data.data() + i * cols; }
  const double* row(size_t i) const { return data.data() + i * cols; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  void add(const Matrix& o) {
    assert(rows == o.rows && cols == o.cols);
    for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
  }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// y = M x  (M: r x c, x: c, y: r)
inline void matvec(const Matrix& m, const double* x, double* y) {
  for (size_t i = 0; i < m.rows; ++i) {
    const double* w = m.row(i);
    double acc = 0.0;
    for (size_t j = 0; j < m.cols; ++j) acc += w[j] * x[j];
    y[i] = acc;
  }
}

// y += M^T x  (M: r x c, x: r, y: c)
inline void matvec_transpose_add(const Matrix& m, const double* x, double* y) {
  for (size_t i = 0; i < m.rows; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* w = m.row(i);
    for (size_t j = 0; j < m.cols; ++j) y[j] += xi * w[j];
  }
}

// M += a x^T  (outer product accumulate; a: rows, x: cols)
inline void outer_add(Matrix& m, const double* a, const double* x) {
  for (size_t i = 0; i < m.rows; ++i) {
    const double ai = a[i];
    if (ai == 0.0) continue;
    double* w = m.row(i);
    for (size_t j = 0; j < m.cols; ++j) w[j] += ai * x[j];
  }
}

inline void vec_add(Vec& a, const Vec& b) {
  assert(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

// Numerically stable log(sum(exp(v))).
inline double log_sum_exp(const double* v, size_t n) {
  double mx = v[0];
  for (size_t i = 1; i < n; ++i) mx = std::max(mx, v[i]);
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

// out[i] = exp(v[i]) / sum; returns nothing, overwrites out.
inline void softmax(const double* v, size_t n, double* out) {
  double mx = v[0];
  for (size_t i = 1; i < n; ++i) mx = std::max(mx, v[i]);
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    out[i] = std::exp(v[i] - mx);
    s += out[i];
  }
  for (size_t i = 0; i < n; ++i) out[i] /= s;
}

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace ctxbias
