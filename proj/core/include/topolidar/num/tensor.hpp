#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace topolidar::num {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

// One recorded value. Leaves (parameters, inputs) have no backward closure;
// every op result that depends on a requires_grad input carries one.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t seq = 0;  // recording order on the creating thread
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// Dense row-major float64 array with optional participation in reverse-mode
/// differentiation. Copies share storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Direct write access, intended for optimizers and initializers. Never
  /// call this on a tensor that was recorded as an op input still awaiting
  /// backward.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Same values, detached from any recorded history.
  Tensor detach() const;
  /// Deep copy of data (and requires_grad flag), no history.
  Tensor clone() const;

  /// Reverse-mode sweep from this scalar. Gradients accumulate into every
  /// reachable tensor with requires_grad; the recorded history is released
  /// afterwards.
  void backward() const;

  const detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Ordered list of recorded operations reachable from a root, in recording
/// order. Replay visits them newest first.
class GradTape {
 public:
  struct Entry {
    std::uint64_t seq;
    const char* op;
    std::shared_ptr<detail::Node> node;
  };

  static GradTape collect(const Tensor& root);

  std::span<const Entry> entries() const { return entries_; }
  /// Runs every backward closure in exact reverse recording order.
  void replay() const;
  /// Drops closures and input links of the recorded nodes.
  void release() const;

 private:
  std::vector<Entry> entries_;
};

/// Whether ops record history on this thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// When on, every op checks its output for NaN/Inf and throws
/// NumericalError naming the op.
void set_finite_checks(bool on);
bool finite_checks();

namespace detail {

/// Builds an op result. History is recorded only when grad mode is on and
/// at least one input requires grad.
Tensor make_result(const char* op, Shape shape, std::vector<double> values,
                   std::vector<Tensor> inputs, std::function<void(Node&)> backward);

}  // namespace detail

}  // namespace topolidar::num
