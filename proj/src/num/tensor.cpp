#include "loadcast/num/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <string>
#include <utility>

#include "loadcast/num/kernels.hpp"
#include "loadcast/parallel.hpp"

namespace loadcast::num {

namespace {

std::string shape_str(const Shape& s) {
  return "[" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != shape.size()) {
    throw ShapeError("tensor: value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  node_ = std::make_shared<Node>();
  node_->shape = shape;
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
  if (requires_grad) node_->grad.assign(shape.size(), 0.0);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(shape, std::vector<double>(shape.size(), 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  return Tensor(shape, std::vector<double>(shape.size(), value), requires_grad);
}

Tensor Tensor::scalar_of(double value, bool requires_grad) {
  return Tensor({1, 1}, {value}, requires_grad);
}

std::span<const double> Tensor::grad() const {
  if (!node_->requires_grad) {
    throw Error("tensor: grad requested on tensor without requires_grad");
  }
  return node_->grad;
}

std::span<double> Tensor::grad_mut() const {
  if (!node_->requires_grad) {
    throw Error("tensor: grad requested on tensor without requires_grad");
  }
  return node_->grad;
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("tensor: item() on non-scalar " + shape_str(shape()));
  }
  return node_->value[0];
}

void Tensor::zero_grad() const {
  if (node_->requires_grad) {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }
}

Tensor Tensor::clone() const {
  Tensor out(node_->shape, node_->value, node_->requires_grad);
  if (node_->requires_grad) out.node_->grad = node_->grad;
  return out;
}

Tensor Tape::make_traced(Shape shape, bool requires_grad) {
  Tensor t = Tensor::zeros(shape, requires_grad);
  traced_.push_back(t);
  return t;
}

void Tape::record(std::function<void()> backward_step) {
  records_.push_back(std::move(backward_step));
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw Error("backward: loss must be scalar, got " +
                shape_str(loss.shape()));
  }
  // Intermediate (traced) gradients restart from zero so that repeated
  // backward calls add exactly one more contribution to every leaf.
  for (Tensor& t : traced_) {
    if (t.requires_grad()) {
      auto g = t.grad_mut();
      std::fill(g.begin(), g.end(), 0.0);
    }
  }
  if (loss.requires_grad()) {
    loss.node_->grad[0] += 1.0;
  }
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    (*it)();
  }
}

void Tape::clear() {
  records_.clear();
  traced_.clear();
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = make_traced(
      {m, n}, grad_enabled_ && (a.requires_grad() || b.requires_grad()));
  kernels::mm_nn(out.value_mut().data(), a.value().data(), b.value().data(), m,
                 k, n);
  if (out.requires_grad()) {
    record([a, b, out, m, k, n]() mutable {
      const double* g = out.grad().data();
      if (a.requires_grad()) {
        kernels::mm_nt_acc(a.grad_mut().data(), g, b.value().data(), m, n, k);
      }
      if (b.requires_grad()) {
        kernels::mm_tn_acc(b.grad_mut().data(), a.value().data(), g, m, k, n);
      }
    });
  }
  return out;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const std::size_t sz = a.size();
  Tensor out = make_traced(
      a.shape(), grad_enabled_ && (a.requires_grad() || b.requires_grad()));
  const double* pa = a.value().data();
  const double* pb = b.value().data();
  double* po = out.value_mut().data();
  parallel_for(static_cast<std::int64_t>(sz), 1.0,
               [=](std::int64_t i) { po[i] = pa[i] + pb[i]; });
  if (out.requires_grad()) {
    record([a, b, out, sz]() mutable {
      const double* g = out.grad().data();
      if (a.requires_grad()) {
        double* ga = a.grad_mut().data();
        parallel_for(static_cast<std::int64_t>(sz), 1.0,
                     [=](std::int64_t i) { ga[i] += g[i]; });
      }
      if (b.requires_grad()) {
        double* gb = b.grad_mut().data();
        parallel_for(static_cast<std::int64_t>(sz), 1.0,
                     [=](std::int64_t i) { gb[i] += g[i]; });
      }
    });
  }
  return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const std::size_t sz = a.size();
  Tensor out = make_traced(
      a.shape(), grad_enabled_ && (a.requires_grad() || b.requires_grad()));
  const double* pa = a.value().data();
  const double* pb = b.value().data();
  double* po = out.value_mut().data();
  parallel_for(static_cast<std::int64_t>(sz), 1.0,
               [=](std::int64_t i) { po[i] = pa[i] - pb[i]; });
  if (out.requires_grad()) {
    record([a, b, out, sz]() mutable {
      const double* g = out.grad().data();
      if (a.requires_grad()) {
        double* ga = a.grad_mut().data();
        parallel_for(static_cast<std::int64_t>(sz), 1.0,
                     [=](std::int64_t i) { ga[i] += g[i]; });
      }
      if (b.requires_grad()) {
        double* gb = b.grad_mut().data();
        parallel_for(static_cast<std::int64_t>(sz), 1.0,
                     [=](std::int64_t i) { gb[i] -= g[i]; });
      }
    });
  }
  return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const std::size_t sz = a.size();
  Tensor out = make_traced(
      a.shape(), grad_enabled_ && (a.requires_grad() || b.requires_grad()));
  const double* pa = a.value().data();
  const double* pb = b.value().data();
  double* po = out.value_mut().data();
  parallel_for(static_cast<std::int64_t>(sz), 1.0,
               [=](std::int64_t i) { po[i] = pa[i] * pb[i]; });
  if (out.requires_grad()) {
    record([a, b, out, sz]() mutable {
      const double* g = out.grad().data();
      if (a.requires_grad()) {
        double* ga = a.grad_mut().data();
        const double* vb = b.value().data();
        parallel_for(static_cast<std::int64_t>(sz), 2.0,
                     [=](std::int64_t i) { ga[i] += g[i] * vb[i]; });
      }
      if (b.requires_grad()) {
        double* gb = b.grad_mut().data();
        const double* va = a.value().data();
        parallel_for(static_cast<std::int64_t>(sz), 2.0,
                     [=](std::int64_t i) { gb[i] += g[i] * va[i]; });
      }
    });
  }
  return out;
}

Tensor Tape::scale(const Tensor& a, double factor) {
  const std::size_t sz = a.size();
  Tensor out = make_traced(a.shape(), grad_enabled_ && a.requires_grad());
  const double* pa = a.value().data();
  double* po = out.value_mut().data();
  parallel_for(static_cast<std::int64_t>(sz), 1.0,
               [=](std::int64_t i) { po[i] = pa[i] * factor; });
  if (out.requires_grad()) {
    record([a, out, factor, sz]() mutable {
      const double* g = out.grad().data();
      double* ga = a.grad_mut().data();
      parallel_for(static_cast<std::int64_t>(sz), 2.0,
                   [=](std::int64_t i) { ga[i] += g[i] * factor; });
    });
  }
  return out;
}

Tensor Tape::relu(const Tensor& a) {
  Tensor out = make_traced(a.shape(), grad_enabled_ && a.requires_grad());
  kernels::relu_fwd(out.value_mut().data(), a.value().data(), a.size());
  if (out.requires_grad()) {
    record([a, out]() mutable {
      kernels::relu_bwd_acc(a.grad_mut().data(), a.value().data(),
                            out.grad().data(), a.size());
    });
  }
  return out;
}

Tensor Tape::add_row(const Tensor& m, const Tensor& v) {
  if (v.rows() != 1 || v.cols() != m.cols()) {
    throw ShapeError("add_row: vector " + shape_str(v.shape()) +
                     " does not broadcast over " + shape_str(m.shape()));
  }
  const std::size_t rows = m.rows(), cols = m.cols();
  Tensor out = make_traced(
      m.shape(), grad_enabled_ && (m.requires_grad() || v.requires_grad()));
  const double* pm = m.value().data();
  const double* pv = v.value().data();
  double* po = out.value_mut().data();
  parallel_for(static_cast<std::int64_t>(rows), static_cast<double>(cols),
               [=](std::int64_t i) {
                 for (std::size_t j = 0; j < cols; ++j) {
                   po[i * cols + j] = pm[i * cols + j] + pv[j];
                 }
               });
  if (out.requires_grad()) {
    record([m, v, out, rows, cols]() mutable {
      const double* g = out.grad().data();
      if (m.requires_grad()) {
        double* gm = m.grad_mut().data();
        parallel_for(static_cast<std::int64_t>(rows * cols), 1.0,
                     [=](std::int64_t i) { gm[i] += g[i]; });
      }
      if (v.requires_grad()) {
        double* gv = v.grad_mut().data();
        parallel_for(static_cast<std::int64_t>(cols),
                     static_cast<double>(rows), [=](std::int64_t j) {
                       double s = 0.0;
                       for (std::size_t i = 0; i < rows; ++i) {
                         s += g[i * cols + j];
                       }
                       gv[j] += s;
                     });
      }
    });
  }
  return out;
}

Tensor Tape::softmax_rows(const Tensor& a) {
  Tensor out = make_traced(a.shape(), grad_enabled_ && a.requires_grad());
  kernels::softmax_rows(out.value_mut().data(), a.value().data(), a.rows(),
                        a.cols());
  if (out.requires_grad()) {
    record([a, out]() mutable {
      kernels::softmax_rows_bwd_acc(a.grad_mut().data(), out.value().data(),
                                    out.grad().data(), a.rows(), a.cols());
    });
  }
  return out;
}

Tensor Tape::layer_norm(const Tensor& x, const Tensor& gain,
                        const Tensor& bias, double eps) {
  const std::size_t rows = x.rows(), cols = x.cols();
  if (gain.size() != cols || bias.size() != cols) {
    throw ShapeError("layer_norm: gain/bias length must equal column count");
  }
  const bool rg = grad_enabled_ && (x.requires_grad() || gain.requires_grad() ||
                                    bias.requires_grad());
  Tensor out = make_traced(x.shape(), rg);
  auto xhat = std::make_shared<std::vector<double>>(rows * cols);
  auto invstd = std::make_shared<std::vector<double>>(rows);
  kernels::layer_norm_fwd(out.value_mut().data(), xhat->data(), invstd->data(),
                          x.value().data(), gain.value().data(),
                          bias.value().data(), rows, cols, eps);
  if (out.requires_grad()) {
    record([x, gain, bias, out, xhat, invstd, rows, cols]() mutable {
      // scratch for any operand that does not require grad
      std::vector<double> sink_x, sink_g, sink_b;
      double* dx = nullptr;
      if (x.requires_grad()) {
        dx = x.grad_mut().data();
      } else {
        sink_x.assign(rows * cols, 0.0);
        dx = sink_x.data();
      }
      double* dg = nullptr;
      if (gain.requires_grad()) {
        dg = gain.grad_mut().data();
      } else {
        sink_g.assign(cols, 0.0);
        dg = sink_g.data();
      }
      double* db = nullptr;
      if (bias.requires_grad()) {
        db = bias.grad_mut().data();
      } else {
        sink_b.assign(cols, 0.0);
        db = sink_b.data();
      }
      kernels::layer_norm_bwd_acc(dx, dg, db, out.grad().data(), xhat->data(),
                                  invstd->data(), gain.value().data(), rows,
                                  cols);
    });
  }
  return out;
}

Tensor Tape::reshape(const Tensor& a, Shape shape) {
  if (shape.size() != a.size()) {
    throw ShapeError("reshape: element count mismatch " +
                     shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  Tensor out = make_traced(shape, grad_enabled_ && a.requires_grad());
  std::copy(a.value().begin(), a.value().end(), out.value_mut().begin());
  if (out.requires_grad()) {
    record([a, out]() mutable {
      double* ga = a.grad_mut().data();
      const double* g = out.grad().data();
      for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[i];
    });
  }
  return out;
}

Tensor Tape::concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t total_cols = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row count mismatch");
    }
    total_cols += p.cols();
    rg = rg || p.requires_grad();
  }
  Tensor out = make_traced({rows, total_cols}, grad_enabled_ && rg);
  double* po = out.value_mut().data();
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const double* pp = p.value().data();
    const std::size_t pc = p.cols();
    for (std::size_t i = 0; i < rows; ++i) {
      std::memcpy(po + i * total_cols + offset, pp + i * pc,
                  pc * sizeof(double));
    }
    offset += pc;
  }
  if (out.requires_grad()) {
    std::vector<Tensor> kept(parts.begin(), parts.end());
    record([kept, out, rows, total_cols]() mutable {
      const double* g = out.grad().data();
      std::size_t offset = 0;
      for (Tensor& p : kept) {
        const std::size_t pc = p.cols();
        if (p.requires_grad()) {
          double* gp = p.grad_mut().data();
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < pc; ++j) {
              gp[i * pc + j] += g[i * total_cols + offset + j];
            }
          }
        }
        offset += pc;
      }
    });
  }
  return out;
}

Tensor Tape::tile_rows(const Tensor& a, std::size_t times) {
  const std::size_t rows = a.rows(), cols = a.cols();
  Tensor out =
      make_traced({rows * times, cols}, grad_enabled_ && a.requires_grad());
  double* po = out.value_mut().data();
  const double* pa = a.value().data();
  for (std::size_t t = 0; t < times; ++t) {
    std::memcpy(po + t * rows * cols, pa, rows * cols * sizeof(double));
  }
  if (out.requires_grad()) {
    record([a, out, times, rows, cols]() mutable {
      double* ga = a.grad_mut().data();
      const double* g = out.grad().data();
      parallel_for(static_cast<std::int64_t>(rows * cols),
                   static_cast<double>(times), [=](std::int64_t i) {
                     double s = 0.0;
                     for (std::size_t t = 0; t < times; ++t) {
                       s += g[t * rows * cols + i];
                     }
                     ga[i] += s;
                   });
    });
  }
  return out;
}

Tensor Tape::sum_all(const Tensor& a) {
  Tensor out = make_traced({1, 1}, grad_enabled_ && a.requires_grad());
  double s = 0.0;
  for (double v : a.value()) s += v;
  out.value_mut()[0] = s;
  if (out.requires_grad()) {
    record([a, out]() mutable {
      const double g = out.grad()[0];
      double* ga = a.grad_mut().data();
      for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g;
    });
  }
  return out;
}

Tensor Tape::mean_all(const Tensor& a) {
  const double inv_n = 1.0 / static_cast<double>(a.size());
  return scale(sum_all(a), inv_n);
}

Tensor Tape::mse(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse");
  const std::size_t sz = pred.size();
  Tensor out = make_traced({1, 1}, grad_enabled_ && pred.requires_grad());
  const double* pp = pred.value().data();
  const double* pt = target.value().data();
  double s = 0.0;
  for (std::size_t i = 0; i < sz; ++i) {
    const double d = pp[i] - pt[i];
    s += d * d;
  }
  out.value_mut()[0] = s / static_cast<double>(sz);
  if (out.requires_grad()) {
    record([pred, target, out, sz]() mutable {
      const double g = out.grad()[0] * 2.0 / static_cast<double>(sz);
      double* gp = pred.grad_mut().data();
      const double* pp = pred.value().data();
      const double* pt = target.value().data();
      parallel_for(static_cast<std::int64_t>(sz), 3.0, [=](std::int64_t i) {
        gp[i] += g * (pp[i] - pt[i]);
      });
    });
  }
  return out;
}

}  // namespace loadcast::num
