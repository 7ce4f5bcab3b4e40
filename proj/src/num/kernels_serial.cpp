#include "loadcast/num/kernels.hpp"

#include <algorithm>
#include <cmath>

// Reference kernels. The OpenMP versions in kernels.cpp must match these
// bit for bit; keep loop order and accumulation order in sync between the
// two files when changing anything here.

namespace loadcast::num::serial {

void mm_nn(double* c, const double* a, const double* b, std::size_t m,
           std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) {
        s += a[i * k + l] * b[l * n + j];
      }
      c[i * n + j] = s;
    }
  }
}

void mm_nt_acc(double* c, const double* a, const double* b, std::size_t m,
               std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < n; ++l) {
        s += a[i * n + l] * b[j * n + l];
      }
      c[i * k + j] += s;
    }
  }
}

void mm_tn_acc(double* c, const double* a, const double* b, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        s += a[i * k + p] * b[i * n + q];
      }
      c[p * n + q] += s;
    }
  }
}

void softmax_rows(double* y, const double* x, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = x + i * n;
    double* yi = y + i * n;
    double mx = xi[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xi[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      yi[j] = std::exp(xi[j] - mx);
      sum += yi[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < n; ++j) yi[j] *= inv;
  }
}

void softmax_rows_bwd_acc(double* dx, const double* y, const double* dy,
                          std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* yi = y + i * n;
    const double* dyi = dy + i * n;
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += dyi[j] * yi[j];
    for (std::size_t j = 0; j < n; ++j) {
      dx[i * n + j] += yi[j] * (dyi[j] - dot);
    }
  }
}

void layer_norm_fwd(double* y, double* xhat, double* invstd, const double* x,
                    const double* gain, const double* bias, std::size_t m,
                    std::size_t n, double eps) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = x + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += xi[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = xi[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    invstd[i] = inv;
    for (std::size_t j = 0; j < n; ++j) {
      const double xh = (xi[j] - mean) * inv;
      xhat[i * n + j] = xh;
      y[i * n + j] = gain[j] * xh + bias[j];
    }
  }
}

void layer_norm_bwd_acc(double* dx, double* dgain, double* dbias,
                        const double* dy, const double* xhat,
                        const double* invstd, const double* gain,
                        std::size_t m, std::size_t n) {
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* dyi = dy + i * n;
    const double* xhi = xhat + i * n;
    double sum_h = 0.0;
    double sum_hx = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = dyi[j] * gain[j];
      sum_h += h;
      sum_hx += h * xhi[j];
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double h = dyi[j] * gain[j];
      dx[i * n + j] += invstd[i] * (h - (sum_h + xhi[j] * sum_hx) * inv_n);
    }
  }
  // column reductions kept separate from the row loop so the row loop can be
  // parallelized without races
  for (std::size_t j = 0; j < n; ++j) {
    double dg = 0.0;
    double db = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      dg += dy[i * n + j] * xhat[i * n + j];
      db += dy[i * n + j];
    }
    dgain[j] += dg;
    dbias[j] += db;
  }
}

void relu_fwd(double* y, const double* x, std::size_t size) {
  for (std::size_t i = 0; i < size; ++i) {
    y[i] = x[i] > 0.0 ? x[i] : 0.0;
  }
}

void relu_bwd_acc(double* dx, const double* x, const double* dy,
                  std::size_t size) {
  for (std::size_t i = 0; i < size; ++i) {
    if (x[i] > 0.0) dx[i] += dy[i];
  }
}

}  // namespace loadcast::num::serial
