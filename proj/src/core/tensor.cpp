#include "slotvid/core/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace slotvid {

void fail(const std::string& msg) { throw std::runtime_error(msg); }

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

namespace {
thread_local MathMode g_math_mode = MathMode::training;
thread_local Tape* g_active_tape = nullptr;

void check_shape(const Shape& s) {
  require(!s.empty(), "tensor shape must have at least one dimension");
  for (int64_t d : s)
    if (d <= 0) fail("tensor dimensions must be positive, got " + shape_str(s));
}
}  // namespace

MathMode math_mode() { return g_math_mode; }
void set_math_mode(MathMode m) { g_math_mode = m; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  check_shape(shape);
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value.assign(static_cast<size_t>(shape_numel(n->shape)), 0.0);
  n->requires_grad = requires_grad;
  if (requires_grad) n->grad.assign(n->value.size(), 0.0);
  return Tensor(std::move(n));
}

Tensor Tensor::full(Shape shape, Real v, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (Real& x : t.data()) x = v;
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<Real> data,
                         bool requires_grad) {
  check_shape(shape);
  require(shape_numel(shape) == static_cast<int64_t>(data.size()),
          "from_data: " + std::to_string(data.size()) +
              " values do not fill shape " + shape_str(shape));
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  if (requires_grad) n->grad.assign(n->value.size(), 0.0);
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(Real v, bool requires_grad) {
  return from_data({1}, {v}, requires_grad);
}

int64_t Tensor::size(int64_t axis) const {
  int64_t d = dim();
  if (axis < 0) axis += d;
  if (axis < 0 || axis >= d)
    fail("axis out of range for " + shape_str(shape()));
  return node_->shape[static_cast<size_t>(axis)];
}

std::vector<Real>& Tensor::grad() {
  require(requires_grad(), "grad() on a tensor without requires_grad");
  if (node_->grad.size() != node_->value.size())
    node_->grad.assign(node_->value.size(), 0.0);
  return node_->grad;
}

const std::vector<Real>& Tensor::grad() const {
  require(requires_grad(), "grad() on a tensor without requires_grad");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!requires_grad()) return;
  node_->grad.assign(node_->value.size(), 0.0);
}

Real Tensor::item() const {
  require(defined() && numel() == 1, "item() requires a scalar tensor");
  return node_->value[0];
}

Tensor Tensor::detach() const {
  require(defined(), "detach() on an undefined tensor");
  auto n = std::make_shared<TensorNode>();
  n->shape = node_->shape;
  n->value = node_->value;
  n->requires_grad = false;
  return Tensor(std::move(n));
}

Tensor make_op_output(Shape shape, bool requires_grad) {
  bool rg = requires_grad && Tape::active() != nullptr;
  return Tensor::zeros(std::move(shape), rg);
}

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::vector<std::shared_ptr<TensorNode>> touched,
                  std::function<void()> fn) {
  for (auto& n : touched)
    if (n && n->requires_grad) nodes_.push_back(n);
  ops_.push_back(std::move(fn));
}

void Tape::backward(const Tensor& loss) {
  require(loss.defined() && loss.numel() == 1,
          "backward: loss must be a scalar tensor");
  for (auto& n : nodes_) n->grad.assign(n->value.size(), 0.0);
  if (loss.requires_grad()) {
    auto& ln = *loss.node();
    ln.grad.assign(1, 1.0);
  }
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

Tape::Scope::Scope() : prev_(g_active_tape) { g_active_tape = &tape_; }

Tape::Scope::~Scope() { g_active_tape = prev_; }

void backward(const Tensor& loss) {
  require(Tape::active() != nullptr, "backward: no active tape scope");
  Tape::active()->backward(loss);
}

}  // namespace slotvid
