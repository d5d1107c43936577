#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace slotvid {

using Real = double;
using Shape = std::vector<int64_t>;

[[noreturn]] void fail(const std::string& msg);

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}
// Literal-message overload; avoids a std::string temporary on the hot path.
inline void require(bool cond, const char* msg) {
  if (!cond) fail(std::string(msg));
}

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Guard behaviour for log/div/sqrt at invalid arguments. In training mode the
// argument is clamped at kClampEps; in strict mode the op raises.
enum class MathMode { strict, training };

MathMode math_mode();
void set_math_mode(MathMode m);

class MathModeScope {
 public:
  explicit MathModeScope(MathMode m) : prev_(math_mode()) { set_math_mode(m); }
  ~MathModeScope() { set_math_mode(prev_); }
  MathModeScope(const MathModeScope&) = delete;
  MathModeScope& operator=(const MathModeScope&) = delete;

 private:
  MathMode prev_;
};

inline constexpr Real kClampEps = 1e-12;

struct TensorNode {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;  // sized only while requires_grad
  bool requires_grad = false;
};

// Shared-ownership handle to a dense f64 array. Values recorded on a tape are
// never mutated in place; every op allocates a fresh node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real v, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<Real> data,
                          bool requires_grad = false);
  static Tensor scalar(Real v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t dim() const { return static_cast<int64_t>(node_->shape.size()); }
  int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }
  int64_t size(int64_t axis) const;

  std::vector<Real>& data() { return node_->value; }
  const std::vector<Real>& data() const { return node_->value; }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  std::vector<Real>& grad();
  const std::vector<Real>& grad() const;
  void zero_grad();

  Real item() const;

  // Copy of the values, detached from any tape.
  Tensor detach() const;

  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
  std::shared_ptr<TensorNode> node_;

  friend class Tape;
  friend Tensor make_op_output(Shape shape, bool requires_grad);
};

// Creates a node for an op result; requires_grad only when a tape is active.
Tensor make_op_output(Shape shape, bool requires_grad);

// Ordered record of executed operations. backward() replays the closures in
// exact reverse execution order, which makes gradient accumulation
// deterministic (bitwise reproducible for identical forward passes).
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  // Registers a backward closure together with every node it may write to.
  void record(std::vector<std::shared_ptr<TensorNode>> touched,
              std::function<void()> fn);

  // loss must be scalar. Zeroes grads of all touched nodes, seeds the loss
  // grad with 1 and sweeps the tape backwards.
  void backward(const Tensor& loss);

  size_t num_ops() const { return ops_.size(); }

  class Scope;

 private:
  std::vector<std::function<void()>> ops_;
  std::vector<std::shared_ptr<TensorNode>> nodes_;
};

// RAII activation of a fresh tape; nests, restoring the previous one.
class Tape::Scope {
 public:
  Scope();
  ~Scope();
  Scope(const Scope&) = delete;
  Scope& operator=(const Scope&) = delete;
  Tape& tape() { return tape_; }

 private:
  Tape tape_;
  Tape* prev_;
};

// Backward through the active tape scope.
void backward(const Tensor& loss);

}  // namespace slotvid
