#pragma once

#include <cstddef>
#include <vector>

namespace fgml::model {

using Vec = std::vector<double>;

// Dense row-major matrix, just enough for the propagation and readout math.
struct Mat {
  int rows = 0;
  int cols = 0;
  Vec a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const {
    return a.data() + static_cast<size_t>(r) * cols;
  }
  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
};

// y += M x
inline void matvec_acc(const Mat& m, const double* x, double* y) {
  for (int i = 0; i < m.rows; ++i) {
    const double* mr = m.row(i);
    double acc = 0.0;
    for (int j = 0; j < m.cols; ++j) acc += mr[j] * x[j];
    y[i] += acc;
  }
}

// y += M x given MT = M^T. Column-sweep form: the inner loop carries no
// reduction, so it vectorizes without reassociation.
inline void matvec_pre_t_acc(const Mat& mt, const double* x, double* y) {
  for (int j = 0; j < mt.rows; ++j) {
    const double* col = mt.row(j);
    const double xj = x[j];
    for (int i = 0; i < mt.cols; ++i) y[i] += col[i] * xj;
  }
}

inline Mat transpose(const Mat& m) {
  Mat t(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
  return t;
}

// y += M^T x
inline void matvec_t_acc(const Mat& m, const double* x, double* y) {
  for (int i = 0; i < m.rows; ++i) {
    const double* mr = m.row(i);
    const double xi = x[i];
    for (int j = 0; j < m.cols; ++j) y[j] += mr[j] * xi;
  }
}

// M += a ⊗ b
inline void outer_acc(Mat& m, const double* a, const double* b) {
  for (int i = 0; i < m.rows; ++i) {
    double* mr = m.row(i);
    const double ai = a[i];
    for (int j = 0; j < m.cols; ++j) mr[j] += ai * b[j];
  }
}

}  // namespace fgml::model
