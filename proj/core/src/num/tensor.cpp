#include "topolidar/num/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "topolidar/common/error.hpp"

namespace topolidar::num {

namespace {

thread_local bool t_grad_enabled = true;
thread_local std::uint64_t t_next_seq = 1;
bool g_finite_checks = false;

detail::Node& checked(const std::shared_ptr<detail::Node>& n) {
  if (!n) throw Error("use of an undefined tensor");
  return *n;
}

}  // namespace

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = numel_of(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto d : shape)
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + to_string(shape));
  if (numel_of(shape) != values.size())
    throw ShapeError("shape " + to_string(shape) + " does not hold " + std::to_string(values.size()) +
                     " values");
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return checked(node_).data.size(); }

std::span<const double> Tensor::data() const { return checked(node_).data; }
std::span<double> Tensor::mutable_data() { return checked(node_).data; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return node_->data[0];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  checked(node_).requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const {
  const auto& n = checked(node_);
  return !n.grad.empty() && n.grad.size() == n.data.size();
}

std::span<const double> Tensor::grad() const { return checked(node_).grad; }

std::span<double> Tensor::mutable_grad() {
  auto& n = checked(node_);
  n.ensure_grad();
  return n.grad;
}

void Tensor::zero_grad() {
  auto& n = checked(node_);
  n.grad.assign(n.data.size(), 0.0);
}

Tensor Tensor::detach() const {
  const auto& n = checked(node_);
  auto out = std::make_shared<detail::Node>();
  out->shape = n.shape;
  out->data = n.data;
  return Tensor(std::move(out));
}

Tensor Tensor::clone() const {
  Tensor t = detach();
  t.node_->requires_grad = node_->requires_grad;
  return t;
}

void Tensor::backward() const {
  auto& root = checked(node_);
  if (root.data.size() != 1) throw ShapeError("backward() requires a scalar, got " + to_string(root.shape));
  if (!root.requires_grad) return;
  root.ensure_grad();
  root.grad[0] += 1.0;
  auto tape = GradTape::collect(*this);
  tape.replay();
  tape.release();
}

GradTape GradTape::collect(const Tensor& root) {
  GradTape tape;
  if (!root.defined()) return tape;
  std::unordered_set<const detail::Node*> seen;
  std::vector<std::shared_ptr<detail::Node>> stack{root.node_ptr()};
  while (!stack.empty()) {
    auto n = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(n.get()).second) continue;
    if (n->requires_grad) n->ensure_grad();
    if (n->backward) tape.entries_.push_back({n->seq, n->op, n});
    for (const auto& in : n->inputs)
      if (in && in->requires_grad) stack.push_back(in);
  }
  std::sort(tape.entries_.begin(), tape.entries_.end(),
            [](const Entry& a, const Entry& b) { return a.seq < b.seq; });
  return tape;
}

void GradTape::replay() const {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    auto& n = *it->node;
    n.ensure_grad();
    for (const auto& in : n.inputs)
      if (in->requires_grad) in->ensure_grad();
    n.backward(n);
  }
}

void GradTape::release() const {
  for (const auto& e : entries_) {
    e.node->backward = nullptr;
    e.node->inputs.clear();
  }
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

void set_finite_checks(bool on) { g_finite_checks = on; }
bool finite_checks() { return g_finite_checks; }

namespace detail {

Tensor make_result(const char* op, Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  if (g_finite_checks) {
    for (double v : values)
      if (!std::isfinite(v)) throw NumericalError(std::string("non-finite value produced by ") + op);
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->op = op;
  bool needs = false;
  if (t_grad_enabled)
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (needs) {
    node->requires_grad = true;
    node->seq = t_next_seq++;
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.node_ptr());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

}  // namespace detail

}  // namespace topolidar::num
