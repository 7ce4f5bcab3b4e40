#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "loadcast/error.hpp"

namespace loadcast::num {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

// Dense row-major double matrix participating in reverse-mode gradient
// computation. Copies are shallow handles onto shared storage, so the
// mutating accessors are const: they change the pointed-to buffers, never the
// handle. The gradient buffer exists iff requires_grad is set.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar_of(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rows() const { return node_->shape.rows; }
  std::size_t cols() const { return node_->shape.cols; }
  std::size_t size() const { return node_->shape.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const double> value() const { return node_->value; }
  std::span<double> value_mut() const { return node_->value; }
  std::span<const double> grad() const;
  std::span<double> grad_mut() const;

  double operator()(std::size_t i, std::size_t j) const {
    return node_->value[i * cols() + j];
  }
  double& at(std::size_t i, std::size_t j) const {
    return node_->value[i * cols() + j];
  }
  double item() const;

  void zero_grad() const;

  // Deep copy with fresh storage (used for model cloning and checkpoints).
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Node> node_;
  friend class Tape;
};

// Ordered record of executed operations. Operations append a backward closure
// as they execute; backward() replays the closures in exact reverse execution
// order, accumulating each parameter's gradient as the sum over all paths.
// A tape and the tensors flowing through it belong to one worker at a time.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // --- core ops -----------------------------------------------------------
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, double factor);
  Tensor relu(const Tensor& a);
  // broadcast a trailing row vector v[1 x n] over every row of m
  Tensor add_row(const Tensor& m, const Tensor& v);
  Tensor softmax_rows(const Tensor& a);
  Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                    double eps = 1e-5);

  // --- structural ops ------------------------------------------------------
  Tensor reshape(const Tensor& a, Shape shape);
  Tensor concat_cols(std::span<const Tensor> parts);
  Tensor tile_rows(const Tensor& a, std::size_t times);

  // --- reductions ----------------------------------------------------------
  Tensor sum_all(const Tensor& a);
  Tensor mean_all(const Tensor& a);
  // mean squared error against a constant target (gradient flows to pred only)
  Tensor mse(const Tensor& pred, const Tensor& target);

  // Runs the recorded closures in reverse. Gradients of intermediates are
  // recomputed from scratch on every call; leaf gradients accumulate across
  // calls until zero_grad.
  void backward(const Tensor& loss);

  void clear();
  std::size_t recorded_ops() const { return records_.size(); }

  bool grad_enabled() const { return grad_enabled_; }
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }

  // Extension points for custom fused operations (see model::attend_batch):
  // outputs created here get their gradient re-zeroed at the start of every
  // backward, marking them as non-leaf.
  Tensor make_traced(Shape shape, bool requires_grad);
  void record(std::function<void()> backward_step);

 private:
  std::vector<std::function<void()>> records_;
  std::vector<Tensor> traced_;
  bool grad_enabled_ = true;
};

}  // namespace loadcast::num
