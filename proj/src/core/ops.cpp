#include "slotvid/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace slotvid {

namespace {

// Right-aligned broadcast plan: per-output-dim strides into each input,
// zero where the input is broadcast along that dim.
struct Bcast {
  Shape out;
  std::vector<int64_t> sa, sb;
  int64_t n = 0;
  bool same_shape = false;
};

std::vector<int64_t> natural_strides(const Shape& s) {
  std::vector<int64_t> st(s.size());
  int64_t acc = 1;
  for (int64_t d = static_cast<int64_t>(s.size()) - 1; d >= 0; --d) {
    st[static_cast<size_t>(d)] = acc;
    acc *= s[static_cast<size_t>(d)];
  }
  return st;
}

Bcast make_bcast(const Shape& a, const Shape& b, const char* op) {
  Bcast p;
  size_t nd = std::max(a.size(), b.size());
  p.out.assign(nd, 1);
  for (size_t d = 0; d < nd; ++d) {
    int64_t ia = static_cast<int64_t>(d) - static_cast<int64_t>(nd - a.size());
    int64_t ib = static_cast<int64_t>(d) - static_cast<int64_t>(nd - b.size());
    int64_t da = ia >= 0 ? a[static_cast<size_t>(ia)] : 1;
    int64_t db = ib >= 0 ? b[static_cast<size_t>(ib)] : 1;
    if (da != db && da != 1 && db != 1)
      fail(std::string(op) + ": shapes not broadcastable: " + shape_str(a) +
           " vs " + shape_str(b));
    p.out[d] = std::max(da, db);
  }
  auto sa_nat = natural_strides(a);
  auto sb_nat = natural_strides(b);
  p.sa.assign(nd, 0);
  p.sb.assign(nd, 0);
  for (size_t d = 0; d < nd; ++d) {
    int64_t ia = static_cast<int64_t>(d) - static_cast<int64_t>(nd - a.size());
    int64_t ib = static_cast<int64_t>(d) - static_cast<int64_t>(nd - b.size());
    if (ia >= 0 && a[static_cast<size_t>(ia)] == p.out[d])
      p.sa[d] = sa_nat[static_cast<size_t>(ia)];
    if (ib >= 0 && b[static_cast<size_t>(ib)] == p.out[d])
      p.sb[d] = sb_nat[static_cast<size_t>(ib)];
  }
  p.n = shape_numel(p.out);
  p.same_shape = (a == b);
  return p;
}

// Visits every output element with the matching input offsets.
template <class F>
void bcast_for_each(const Bcast& p, F&& f) {
  if (p.same_shape) {
    for (int64_t i = 0; i < p.n; ++i) f(i, i, i);
    return;
  }
  size_t nd = p.out.size();
  std::vector<int64_t> coord(nd, 0);
  int64_t ia = 0, ib = 0;
  for (int64_t io = 0; io < p.n; ++io) {
    f(io, ia, ib);
    for (int64_t d = static_cast<int64_t>(nd) - 1; d >= 0; --d) {
      size_t ud = static_cast<size_t>(d);
      ++coord[ud];
      ia += p.sa[ud];
      ib += p.sb[ud];
      if (coord[ud] < p.out[ud]) break;
      coord[ud] = 0;
      ia -= p.sa[ud] * p.out[ud];
      ib -= p.sb[ud] * p.out[ud];
    }
  }
}

Real div_denom(Real b) {
  if (b == 0.0 && math_mode() == MathMode::strict)
    fail("division by zero (strict mode)");
  if (std::abs(b) < kClampEps) return b >= 0.0 ? kClampEps : -kClampEps;
  return b;
}

enum class BinKind { add, sub, mul, div };

template <BinKind K>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name) {
  if (!a.defined() || !b.defined())
    fail(std::string(name) + ": undefined input");
  Bcast plan = make_bcast(a.shape(), b.shape(), name);
  bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = make_op_output(plan.out, rg);
  const Real* pa = a.data().data();
  const Real* pb = b.data().data();
  Real* po = out.data().data();
  bcast_for_each(plan, [&](int64_t io, int64_t ia, int64_t ib) {
    Real x = pa[ia], y = pb[ib];
    if constexpr (K == BinKind::add) po[io] = x + y;
    if constexpr (K == BinKind::sub) po[io] = x - y;
    if constexpr (K == BinKind::mul) po[io] = x * y;
    if constexpr (K == BinKind::div) po[io] = x / div_denom(y);
  });
  if (out.requires_grad()) {
    auto an = a.node(), bn = b.node(), on = out.node();
    Tape::active()->record({an, bn, on}, [an, bn, on, plan]() {
      const Real* d = on->grad.data();
      const Real* va = an->value.data();
      const Real* vb = bn->value.data();
      Real* ga = an->requires_grad ? an->grad.data() : nullptr;
      Real* gb = bn->requires_grad ? bn->grad.data() : nullptr;
      bcast_for_each(plan, [&](int64_t io, int64_t ia, int64_t ib) {
        Real g = d[io];
        if constexpr (K == BinKind::add) {
          if (ga) ga[ia] += g;
          if (gb) gb[ib] += g;
        }
        if constexpr (K == BinKind::sub) {
          if (ga) ga[ia] += g;
          if (gb) gb[ib] -= g;
        }
        if constexpr (K == BinKind::mul) {
          if (ga) ga[ia] += g * vb[ib];
          if (gb) gb[ib] += g * va[ia];
        }
        if constexpr (K == BinKind::div) {
          Real be = div_denom(vb[ib]);
          if (ga) ga[ia] += g / be;
          if (gb && std::abs(vb[ib]) >= kClampEps)
            gb[ib] -= g * va[ia] / (be * be);
        }
      });
    });
  }
  return out;
}

enum class UnKind { neg, exp, log, sqrt, relu, sigmoid, tanh };

template <UnKind K>
Tensor unary_op(const Tensor& a, const char* name) {
  if (!a.defined()) fail(std::string(name) + ": undefined input");
  Tensor out = make_op_output(a.shape(), a.requires_grad());
  const Real* pa = a.data().data();
  Real* po = out.data().data();
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) {
    Real x = pa[i];
    if constexpr (K == UnKind::neg) po[i] = -x;
    if constexpr (K == UnKind::exp) po[i] = std::exp(x);
    if constexpr (K == UnKind::log) {
      if (x <= 0.0 && math_mode() == MathMode::strict)
        fail("log of non-positive value (strict mode)");
      po[i] = std::log(std::max(x, kClampEps));
    }
    if constexpr (K == UnKind::sqrt) {
      if (x < 0.0 && math_mode() == MathMode::strict)
        fail("sqrt of negative value (strict mode)");
      po[i] = std::sqrt(std::max(x, 0.0));
    }
    if constexpr (K == UnKind::relu) po[i] = x > 0.0 ? x : 0.0;
    if constexpr (K == UnKind::sigmoid)
      po[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                       : std::exp(x) / (1.0 + std::exp(x));
    if constexpr (K == UnKind::tanh) po[i] = std::tanh(x);
  }
  if (out.requires_grad()) {
    auto an = a.node(), on = out.node();
    Tape::active()->record({an, on}, [an, on]() {
      if (!an->requires_grad) return;
      const Real* d = on->grad.data();
      const Real* x = an->value.data();
      const Real* y = on->value.data();
      Real* g = an->grad.data();
      int64_t n = static_cast<int64_t>(an->value.size());
      for (int64_t i = 0; i < n; ++i) {
        if constexpr (K == UnKind::neg) g[i] -= d[i];
        if constexpr (K == UnKind::exp) g[i] += d[i] * y[i];
        if constexpr (K == UnKind::log)
          g[i] += x[i] >= kClampEps ? d[i] / x[i] : 0.0;
        if constexpr (K == UnKind::sqrt)
          g[i] += x[i] > kClampEps ? d[i] * 0.5 / y[i] : 0.0;
        if constexpr (K == UnKind::relu) g[i] += x[i] > 0.0 ? d[i] : 0.0;
        if constexpr (K == UnKind::sigmoid) g[i] += d[i] * y[i] * (1.0 - y[i]);
        if constexpr (K == UnKind::tanh) g[i] += d[i] * (1.0 - y[i] * y[i]);
      }
    });
  }
  return out;
}

// Slice layout for one-axis ops: elements of a slice sit at
// base + l * inner with base = o * len * inner + i.
struct AxisPlan {
  int64_t outer = 1, len = 1, inner = 1;
};

AxisPlan make_axis_plan(const Shape& s, int64_t axis) {
  AxisPlan p;
  for (int64_t d = 0; d < axis; ++d) p.outer *= s[static_cast<size_t>(d)];
  p.len = s[static_cast<size_t>(axis)];
  for (size_t d = static_cast<size_t>(axis) + 1; d < s.size(); ++d)
    p.inner *= s[d];
  return p;
}

int64_t normalize_axis(const Tensor& t, int64_t axis, const char* name) {
  int64_t d = t.dim();
  if (axis < 0) axis += d;
  if (axis < 0 || axis >= d)
    fail(std::string(name) + ": axis out of range for " +
         shape_str(t.shape()));
  return axis;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op<BinKind::add>(a, b, "add");
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op<BinKind::sub>(a, b, "sub");
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op<BinKind::mul>(a, b, "mul");
}
Tensor divide(const Tensor& a, const Tensor& b) {
  return binary_op<BinKind::div>(a, b, "div");
}

Tensor neg(const Tensor& a) { return unary_op<UnKind::neg>(a, "neg"); }
Tensor exp(const Tensor& a) { return unary_op<UnKind::exp>(a, "exp"); }
Tensor log(const Tensor& a) { return unary_op<UnKind::log>(a, "log"); }
Tensor sqrt(const Tensor& a) { return unary_op<UnKind::sqrt>(a, "sqrt"); }
Tensor relu(const Tensor& a) { return unary_op<UnKind::relu>(a, "relu"); }
Tensor sigmoid(const Tensor& a) {
  return unary_op<UnKind::sigmoid>(a, "sigmoid");
}
Tensor tanh(const Tensor& a) { return unary_op<UnKind::tanh>(a, "tanh"); }

Tensor affine(const Tensor& a, Real mul_c, Real add_c) {
  require(a.defined(), "affine: undefined input");
  Tensor out = make_op_output(a.shape(), a.requires_grad());
  const Real* pa = a.data().data();
  Real* po = out.data().data();
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = mul_c * pa[i] + add_c;
  if (out.requires_grad()) {
    auto an = a.node(), on = out.node();
    Tape::active()->record({an, on}, [an, on, mul_c]() {
      if (!an->requires_grad) return;
      const Real* d = on->grad.data();
      Real* g = an->grad.data();
      int64_t n = static_cast<int64_t>(an->value.size());
      for (int64_t i = 0; i < n; ++i) g[i] += mul_c * d[i];
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (!a.defined() || !b.defined()) fail("matmul: undefined input");
  if (a.dim() < 2 || b.dim() < 2)
    fail("matmul: operands need at least 2 dims, got " + shape_str(a.shape()) +
         " x " + shape_str(b.shape()));
  int64_t m = a.size(-2), k = a.size(-1);
  int64_t k2 = b.size(-2), n = b.size(-1);
  if (k != k2)
    fail("matmul: inner dimension mismatch: " + shape_str(a.shape()) + " x " +
         shape_str(b.shape()));
  Shape abatch(a.shape().begin(), a.shape().end() - 2);
  Shape bbatch(b.shape().begin(), b.shape().end() - 2);
  if (abatch.empty()) abatch = {1};
  if (bbatch.empty()) bbatch = {1};
  Bcast plan = make_bcast(abatch, bbatch, "matmul");
  Shape out_shape;
  if (!(plan.out.size() == 1 && plan.out[0] == 1 && a.dim() <= 2 &&
        b.dim() <= 2))
    out_shape = plan.out;
  out_shape.push_back(m);
  out_shape.push_back(n);
  bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = make_op_output(out_shape, rg);

  const int64_t ablk = m * k, bblk = k * n, oblk = m * n;
  const Real* pa = a.data().data();
  const Real* pb = b.data().data();
  Real* po = out.data().data();
  bcast_for_each(plan, [&](int64_t io, int64_t ia, int64_t ib) {
    const Real* A = pa + ia * ablk;
    const Real* B = pb + ib * bblk;
    Real* C = po + io * oblk;
    for (int64_t i = 0; i < m; ++i) {
      const Real* arow = A + i * k;
      Real* crow = C + i * n;
      for (int64_t kk = 0; kk < k; ++kk) {
        Real av = arow[kk];
        const Real* brow = B + kk * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });

  if (out.requires_grad()) {
    auto an = a.node(), bn = b.node(), on = out.node();
    Tape::active()->record({an, bn, on}, [an, bn, on, plan, m, k, n, ablk,
                                          bblk, oblk]() {
      const Real* pa = an->value.data();
      const Real* pb = bn->value.data();
      const Real* pd = on->grad.data();
      Real* ga = an->requires_grad ? an->grad.data() : nullptr;
      Real* gb = bn->requires_grad ? bn->grad.data() : nullptr;
      // dA = D B^T; B is staged transposed so the inner loop streams along
      // rows of both operands instead of reducing down a column.
      std::vector<Real> bt;
      bcast_for_each(plan, [&](int64_t io, int64_t ia, int64_t ib) {
        const Real* A = pa + ia * ablk;
        const Real* B = pb + ib * bblk;
        const Real* D = pd + io * oblk;
        if (ga) {
          bt.resize(static_cast<size_t>(k * n));
          for (int64_t kk = 0; kk < k; ++kk)
            for (int64_t j = 0; j < n; ++j) bt[j * k + kk] = B[kk * n + j];
          Real* GA = ga + ia * ablk;
          for (int64_t i = 0; i < m; ++i) {
            const Real* drow = D + i * n;
            Real* garow = GA + i * k;
            for (int64_t j = 0; j < n; ++j) {
              Real dv = drow[j];
              const Real* btrow = bt.data() + j * k;
              for (int64_t kk = 0; kk < k; ++kk) garow[kk] += dv * btrow[kk];
            }
          }
        }
        if (gb) {
          Real* GB = gb + ib * bblk;
          for (int64_t i = 0; i < m; ++i) {
            const Real* arow = A + i * k;
            const Real* drow = D + i * n;
            for (int64_t kk = 0; kk < k; ++kk) {
              Real av = arow[kk];
              Real* gbrow = GB + kk * n;
              for (int64_t j = 0; j < n; ++j) gbrow[j] += av * drow[j];
            }
          }
        }
      });
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (!a.defined() || a.dim() < 2)
    fail("transpose: needs at least 2 dims, got " +
         (a.defined() ? shape_str(a.shape()) : std::string("undefined")));
  Shape s = a.shape();
  size_t nd = s.size();
  std::swap(s[nd - 2], s[nd - 1]);
  int64_t r = a.size(-2), c = a.size(-1);
  int64_t batches = a.numel() / (r * c);
  Tensor out = make_op_output(s, a.requires_grad());
  const Real* pa = a.data().data();
  Real* po = out.data().data();
  for (int64_t bidx = 0; bidx < batches; ++bidx) {
    const Real* A = pa + bidx * r * c;
    Real* O = po + bidx * r * c;
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < c; ++j) O[j * r + i] = A[i * c + j];
  }
  if (out.requires_grad()) {
    auto an = a.node(), on = out.node();
    Tape::active()->record({an, on}, [an, on, r, c, batches]() {
      if (!an->requires_grad) return;
      const Real* d = on->grad.data();
      Real* g = an->grad.data();
      for (int64_t bidx = 0; bidx < batches; ++bidx) {
        const Real* D = d + bidx * r * c;
        Real* G = g + bidx * r * c;
        for (int64_t i = 0; i < r; ++i)
          for (int64_t j = 0; j < c; ++j) G[i * c + j] += D[j * r + i];
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (!a.defined()) fail("reshape: undefined input");
  if (shape_numel(shape) != a.numel())
    fail("reshape: cannot view " + shape_str(a.shape()) + " as " +
         shape_str(shape));
  Tensor out = make_op_output(shape, a.requires_grad());
  out.data() = a.data();
  if (out.requires_grad()) {
    auto an = a.node(), on = out.node();
    Tape::active()->record({an, on}, [an, on]() {
      if (!an->requires_grad) return;
      const Real* d = on->grad.data();
      Real* g = an->grad.data();
      int64_t n = static_cast<int64_t>(an->value.size());
      for (int64_t i = 0; i < n; ++i) g[i] += d[i];
    });
  }
  return out;
}

Tensor stack(const std::vector<Tensor>& parts, int64_t axis) {
  require(!parts.empty(), "stack: no parts");
  const Shape& s0 = parts[0].shape();
  bool rg = false;
  for (const Tensor& p : parts) {
    if (!p.defined() || p.shape() != s0)
      fail("stack: parts disagree on shape: " + shape_str(s0) + " vs " +
           shape_str(p.shape()));
    rg = rg || p.requires_grad();
  }
  int64_t nd = static_cast<int64_t>(s0.size());
  if (axis < 0) axis += nd + 1;
  require(axis >= 0 && axis <= nd, "stack: axis out of range");
  int64_t outer = 1, inner = 1;
  for (int64_t d = 0; d < axis; ++d) outer *= s0[static_cast<size_t>(d)];
  for (int64_t d = axis; d < nd; ++d) inner *= s0[static_cast<size_t>(d)];
  int64_t np = static_cast<int64_t>(parts.size());
  Shape out_shape = s0;
  out_shape.insert(out_shape.begin() + axis, np);
  Tensor out = make_op_output(out_shape, rg);
  Real* po = out.data().data();
  for (int64_t p = 0; p < np; ++p) {
    const Real* pp = parts[static_cast<size_t>(p)].data().data();
    for (int64_t o = 0; o < outer; ++o)
      std::copy(pp + o * inner, pp + (o + 1) * inner,
                po + (o * np + p) * inner);
  }
  if (out.requires_grad()) {
    std::vector<std::shared_ptr<TensorNode>> touched;
    touched.reserve(parts.size() + 1);
    for (const Tensor& p : parts) touched.push_back(p.node());
    touched.push_back(out.node());
    auto on = out.node();
    auto nodes = touched;  // closure keeps all parts alive
    Tape::active()->record(touched, [nodes, on, outer, inner, np]() {
      const Real* d = on->grad.data();
      for (int64_t p = 0; p < np; ++p) {
        auto& pn = nodes[static_cast<size_t>(p)];
        if (!pn->requires_grad) continue;
        Real* g = pn->grad.data();
        for (int64_t o = 0; o < outer; ++o) {
          const Real* src = d + (o * np + p) * inner;
          Real* dst = g + o * inner;
          for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

Tensor index_select(const Tensor& a, const std::vector<int64_t>& indices) {
  require(a.defined(), "index_select: undefined input");
  require(!indices.empty(), "index_select: empty index list");
  int64_t rows = a.size(0);
  int64_t inner = a.numel() / rows;
  for (int64_t i : indices)
    require(i >= 0 && i < rows,
            "index_select: index " + std::to_string(i) + " out of range [0," +
                std::to_string(rows) + ")");
  Shape out_shape = a.shape();
  out_shape[0] = static_cast<int64_t>(indices.size());
  Tensor out = make_op_output(out_shape, a.requires_grad());
  Real* po = out.data().data();
  const Real* pa = a.data().data();
  for (size_t r = 0; r < indices.size(); ++r)
    std::copy(pa + indices[r] * inner, pa + (indices[r] + 1) * inner,
              po + static_cast<int64_t>(r) * inner);
  if (out.requires_grad()) {
    auto an = a.node(), on = out.node();
    Tape::active()->record({an, on}, [an, on, indices, inner]() {
      if (!an->requires_grad) return;
      const Real* d = on->grad.data();
      Real* g = an->grad.data();
      for (size_t r = 0; r < indices.size(); ++r) {
        const Real* src = d + static_cast<int64_t>(r) * inner;
        Real* dst = g + indices[r] * inner;
        for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

Tensor sum_all(const Tensor& a) {
  require(a.defined(), "sum: undefined input");
  Tensor out = make_op_output({1}, a.requires_grad());
  Real acc = 0.0;
  for (Real v : a.data()) acc += v;
  out.data()[0] = acc;
  if (out.requires_grad()) {
    auto an = a.node(), on = out.node();
    Tape::active()->record({an, on}, [an, on]() {
      if (!an->requires_grad) return;
      Real d = on->grad[0];
      for (Real& g : an->grad) g += d;
    });
  }
  return out;
}

Tensor mean_all(const Tensor& a) {
  return scale(sum_all(a), 1.0 / static_cast<Real>(a.numel()));
}

Tensor sum_axis(const Tensor& a, int64_t axis, bool keepdim) {
  require(a.defined(), "sum_axis: undefined input");
  axis = normalize_axis(a, axis, "sum_axis");
  AxisPlan p = make_axis_plan(a.shape(), axis);
  Shape out_shape = a.shape();
  if (keepdim) {
    out_shape[static_cast<size_t>(axis)] = 1;
  } else {
    out_shape.erase(out_shape.begin() + axis);
    if (out_shape.empty()) out_shape = {1};
  }
  Tensor out = make_op_output(out_shape, a.requires_grad());
  const Real* pa = a.data().data();
  Real* po = out.data().data();
  for (int64_t o = 0; o < p.outer; ++o)
    for (int64_t i = 0; i < p.inner; ++i) {
      Real acc = 0.0;
      const Real* base = pa + o * p.len * p.inner + i;
      for (int64_t l = 0; l < p.len; ++l) acc += base[l * p.inner];
      po[o * p.inner + i] = acc;
    }
  if (out.requires_grad()) {
    auto an = a.node(), on = out.node();
    Tape::active()->record({an, on}, [an, on, p]() {
      if (!an->requires_grad) return;
      const Real* d = on->grad.data();
      Real* g = an->grad.data();
      for (int64_t o = 0; o < p.outer; ++o)
        for (int64_t i = 0; i < p.inner; ++i) {
          Real dv = d[o * p.inner + i];
          Real* base = g + o * p.len * p.inner + i;
          for (int64_t l = 0; l < p.len; ++l) base[l * p.inner] += dv;
        }
    });
  }
  return out;
}

Tensor softmax(const Tensor& a, int64_t axis) {
  require(a.defined(), "softmax: undefined input");
  axis = normalize_axis(a, axis, "softmax");
  AxisPlan p = make_axis_plan(a.shape(), axis);
  Tensor out = make_op_output(a.shape(), a.requires_grad());
  const Real* pa = a.data().data();
  Real* po = out.data().data();
  for (int64_t o = 0; o < p.outer; ++o)
    for (int64_t i = 0; i < p.inner; ++i) {
      const Real* x = pa + o * p.len * p.inner + i;
      Real* y = po + o * p.len * p.inner + i;
      Real mx = x[0];
      for (int64_t l = 1; l < p.len; ++l) mx = std::max(mx, x[l * p.inner]);
      Real s = 0.0;
      for (int64_t l = 0; l < p.len; ++l) {
        Real e = std::exp(x[l * p.inner] - mx);
        y[l * p.inner] = e;
        s += e;
      }
      Real inv = 1.0 / s;
      for (int64_t l = 0; l < p.len; ++l) y[l * p.inner] *= inv;
    }
  if (out.requires_grad()) {
    auto an = a.node(), on = out.node();
    Tape::active()->record({an, on}, [an, on, p]() {
      if (!an->requires_grad) return;
      const Real* d = on->grad.data();
      const Real* y = on->value.data();
      Real* g = an->grad.data();
      for (int64_t o = 0; o < p.outer; ++o)
        for (int64_t i = 0; i < p.inner; ++i) {
          int64_t base = o * p.len * p.inner + i;
          Real dot = 0.0;
          for (int64_t l = 0; l < p.len; ++l)
            dot += d[base + l * p.inner] * y[base + l * p.inner];
          for (int64_t l = 0; l < p.len; ++l) {
            int64_t idx = base + l * p.inner;
            g[idx] += y[idx] * (d[idx] - dot);
          }
        }
    });
  }
  return out;
}

namespace {
constexpr Real kLayerNormEps = 1e-5;
}

Tensor layer_norm(const Tensor& a, int64_t axis, const Tensor& gain,
                  const Tensor& bias) {
  require(a.defined() && gain.defined() && bias.defined(),
          "layer_norm: undefined input");
  axis = normalize_axis(a, axis, "layer_norm");
  AxisPlan p = make_axis_plan(a.shape(), axis);
  require(gain.numel() == p.len && bias.numel() == p.len,
          "layer_norm: gain/bias must have length " + std::to_string(p.len) +
              ", got " + shape_str(gain.shape()) + " and " +
              shape_str(bias.shape()));
  bool rg = a.requires_grad() || gain.requires_grad() || bias.requires_grad();
  Tensor out = make_op_output(a.shape(), rg);
  const Real* pa = a.data().data();
  const Real* pg = gain.data().data();
  const Real* pbi = bias.data().data();
  Real* po = out.data().data();
  const Real invlen = 1.0 / static_cast<Real>(p.len);
  for (int64_t o = 0; o < p.outer; ++o)
    for (int64_t i = 0; i < p.inner; ++i) {
      const Real* x = pa + o * p.len * p.inner + i;
      Real* y = po + o * p.len * p.inner + i;
      Real mu = 0.0;
      for (int64_t l = 0; l < p.len; ++l) mu += x[l * p.inner];
      mu *= invlen;
      Real var = 0.0;
      for (int64_t l = 0; l < p.len; ++l) {
        Real c = x[l * p.inner] - mu;
        var += c * c;
      }
      var *= invlen;
      Real inv_sigma = 1.0 / std::sqrt(var + kLayerNormEps);
      for (int64_t l = 0; l < p.len; ++l)
        y[l * p.inner] =
            pg[l] * ((x[l * p.inner] - mu) * inv_sigma) + pbi[l];
    }
  if (out.requires_grad()) {
    auto an = a.node(), gn = gain.node(), bn = bias.node(), on = out.node();
    Tape::active()->record({an, gn, bn, on}, [an, gn, bn, on, p, invlen]() {
      const Real* d = on->grad.data();
      const Real* x = an->value.data();
      const Real* g = gn->value.data();
      Real* dx = an->requires_grad ? an->grad.data() : nullptr;
      Real* dg = gn->requires_grad ? gn->grad.data() : nullptr;
      Real* db = bn->requires_grad ? bn->grad.data() : nullptr;
      std::vector<Real> xhat(static_cast<size_t>(p.len));
      for (int64_t o = 0; o < p.outer; ++o)
        for (int64_t i = 0; i < p.inner; ++i) {
          int64_t base = o * p.len * p.inner + i;
          Real mu = 0.0;
          for (int64_t l = 0; l < p.len; ++l) mu += x[base + l * p.inner];
          mu *= invlen;
          Real var = 0.0;
          for (int64_t l = 0; l < p.len; ++l) {
            Real c = x[base + l * p.inner] - mu;
            var += c * c;
          }
          var *= invlen;
          Real inv_sigma = 1.0 / std::sqrt(var + kLayerNormEps);
          Real mean_gy = 0.0, mean_gyx = 0.0;
          for (int64_t l = 0; l < p.len; ++l) {
            Real xh = (x[base + l * p.inner] - mu) * inv_sigma;
            xhat[static_cast<size_t>(l)] = xh;
            Real gy = d[base + l * p.inner] * g[l];
            mean_gy += gy;
            mean_gyx += gy * xh;
          }
          mean_gy *= invlen;
          mean_gyx *= invlen;
          for (int64_t l = 0; l < p.len; ++l) {
            int64_t idx = base + l * p.inner;
            Real xh = xhat[static_cast<size_t>(l)];
            if (dx)
              dx[idx] +=
                  inv_sigma * (d[idx] * g[l] - mean_gy - xh * mean_gyx);
            if (dg) dg[l] += d[idx] * xh;
            if (db) db[l] += d[idx];
          }
        }
    });
  }
  return out;
}

Tensor gru_cell(const Tensor& input, const Tensor& hidden, const GruParams& p) {
  require(input.defined() && hidden.defined(), "gru_cell: undefined input");
  require(input.dim() == 2 && hidden.dim() == 2 &&
              input.shape() == hidden.shape(),
          "gru_cell: input/hidden must share shape [B,D], got " +
              shape_str(input.shape()) + " and " + shape_str(hidden.shape()));
  Tensor r = sigmoid(add(add(matmul(input, p.wr), matmul(hidden, p.ur)), p.br));
  Tensor z = sigmoid(add(add(matmul(input, p.wz), matmul(hidden, p.uz)), p.bz));
  Tensor n =
      tanh(add(add(matmul(input, p.wn), matmul(mul(r, hidden), p.un)), p.bn));
  return add(hidden, mul(z, sub(n, hidden)));
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  require(a.defined() && b.defined(), "cosine_similarity: undefined input");
  require(a.shape() == b.shape(),
          "cosine_similarity: shapes differ: " + shape_str(a.shape()) +
              " vs " + shape_str(b.shape()));
  Tensor dot = sum_axis(mul(a, b), -1, false);
  Tensor na = sqrt(affine(sum_axis(mul(a, a), -1, false), 1.0, kClampEps));
  Tensor nb = sqrt(affine(sum_axis(mul(b, b), -1, false), 1.0, kClampEps));
  return divide(dot, mul(na, nb));
}

Tensor l2_normalize(const Tensor& a) {
  require(a.defined(), "l2_normalize: undefined input");
  Tensor ss = sum_axis(mul(a, a), -1, true);
  return divide(a, sqrt(affine(ss, 1.0, kClampEps)));
}

}  // namespace slotvid
