#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "slotvid/core/gradcheck.hpp"
#include "slotvid/core/ops.hpp"
#include "slotvid/core/rng.hpp"
#include "support/grad_suite.hpp"

using namespace slotvid;

namespace {

bool throws_with(const std::function<void()>& f, const std::string& needle) {
  try {
    f();
  } catch (const std::exception& e) {
    return std::string(e.what()).find(needle) != std::string::npos;
  }
  return false;
}

}  // namespace

TEST_CASE("tensor factories enforce shape invariants") {
  Tensor t = Tensor::zeros({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.shape() == Shape{2, 3});
  CHECK_FALSE(t.requires_grad());

  Tensor g = Tensor::full({2, 2}, 1.5, true);
  CHECK(g.requires_grad());
  CHECK(g.grad().size() == 4);

  CHECK(throws_with([] { Tensor::zeros({2, 0}); }, "positive"));
  CHECK(throws_with([] { Tensor::zeros({-1, 3}); }, "positive"));
  CHECK(throws_with([] { Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}); },
                    "shape"));
  CHECK(Tensor::scalar(4.0).item() == 4.0);
}

TEST_CASE("elementwise arithmetic identities") {
  Tensor a = Tensor::from_data({2}, {1, 2});
  Tensor b = Tensor::from_data({2}, {3, 4});
  Tensor s = add(a, b);
  CHECK(s.data() == std::vector<Real>{4, 6});

  Tensor x = Tensor::from_data({2}, {0.5, -1.3});
  Tensor roundtrip = log(exp(x));
  CHECK(roundtrip.data()[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(roundtrip.data()[1] == doctest::Approx(-1.3).epsilon(1e-12));

  CHECK(sub(b, a).data() == std::vector<Real>{2, 2});
  CHECK(mul(a, b).data() == std::vector<Real>{3, 8});
  CHECK(divide(b, a).data() == std::vector<Real>{3, 2});
  CHECK(neg(a).data() == std::vector<Real>{-1, -2});
}

TEST_CASE("product rule through the tape") {
  Tape::Scope scope;
  Tensor x = Tensor::scalar(2.0, true);
  Tensor y = Tensor::scalar(3.0, true);
  Tensor loss = mul(x, y);
  scope.tape().backward(loss);
  CHECK(x.grad()[0] == 3.0);
  CHECK(y.grad()[0] == 2.0);
}

TEST_CASE("broadcasting follows trailing-dimension rules") {
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor row = Tensor::from_data({3}, {10, 20, 30});
  Tensor col = Tensor::from_data({2, 1}, {100, 200});
  CHECK(add(a, row).data() == std::vector<Real>{11, 22, 33, 14, 25, 36});
  CHECK(add(a, col).data() ==
        std::vector<Real>{101, 102, 103, 204, 205, 206});
  CHECK(add(row, a).data() == add(a, row).data());

  Tensor bad = Tensor::zeros({4});
  CHECK(throws_with([&] { add(a, bad); }, "[2,3]"));
  CHECK(throws_with([&] { add(a, bad); }, "[4]"));
}

TEST_CASE("division and log guard their singular points by math mode") {
  Tensor one = Tensor::scalar(1.0);
  Tensor zero = Tensor::scalar(0.0);

  {
    MathModeScope mode(MathMode::training);
    CHECK(divide(one, zero).item() == doctest::Approx(1e12).epsilon(1e-9));
    CHECK(log(zero).item() == doctest::Approx(std::log(1e-12)).epsilon(1e-12));
    CHECK(slotvid::sqrt(Tensor::scalar(-0.5)).item() == 0.0);
  }
  {
    MathModeScope mode(MathMode::strict);
    CHECK(throws_with([&] { divide(one, zero); }, "strict"));
    CHECK(throws_with([&] { log(zero); }, "strict"));
    CHECK(throws_with([&] { log(Tensor::scalar(-1.0)); }, "strict"));
    CHECK(throws_with([&] { slotvid::sqrt(Tensor::scalar(-0.5)); }, "strict"));
    CHECK(divide(one, Tensor::scalar(4.0)).item() == 0.25);
  }
}

TEST_CASE("clamped gradients vanish below the epsilon floor") {
  MathModeScope mode(MathMode::training);
  Tape::Scope scope;
  Tensor x = Tensor::from_data({2}, {0.0, 2.0}, true);
  Tensor loss = sum_all(log(x));
  scope.tape().backward(loss);
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 0.5);
}

TEST_CASE("matmul identities and arithmetic") {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from_data({2, 2}, {3, -1, 2, 7});
  CHECK(matmul(eye, m).data() == m.data());
  CHECK(matmul(m, eye).data() == m.data());

  Tensor a = Tensor::from_data({1, 2}, {1, 2});
  Tensor b = Tensor::from_data({2, 1}, {3, 4});
  Tensor c = matmul(a, b);
  CHECK(c.shape() == Shape{1, 1});
  CHECK(c.item() == 11.0);

  CHECK(throws_with([&] { matmul(a, a); }, "inner dimension"));
  CHECK(throws_with([&] { matmul(a, a); }, "[1,2]"));
}

TEST_CASE("matmul broadcasts leading batch dimensions") {
  Rng rng(7);
  Tensor a = Tensor::zeros({2, 3, 4});
  Tensor b = Tensor::zeros({4, 5});
  for (Real& v : a.data()) v = rng.uniform(-1, 1);
  for (Real& v : b.data()) v = rng.uniform(-1, 1);
  Tensor c = matmul(a, b);
  REQUIRE(c.shape() == Shape{2, 3, 5});
  for (int64_t bi = 0; bi < 2; ++bi)
    for (int64_t i = 0; i < 3; ++i)
      for (int64_t j = 0; j < 5; ++j) {
        Real acc = 0;
        for (int64_t k = 0; k < 4; ++k)
          acc += a.data()[(bi * 3 + i) * 4 + k] * b.data()[k * 5 + j];
        CHECK(c.data()[(bi * 3 + i) * 5 + j] ==
              doctest::Approx(acc).epsilon(1e-12));
      }
}

TEST_CASE("softmax symmetry, shift invariance and normalization") {
  Tensor z = softmax(Tensor::from_data({3}, {0, 0, 0}), 0);
  for (Real v : z.data()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

  Tensor x = Tensor::from_data({4}, {0.3, -1.2, 2.0, 0.7});
  Tensor shifted = Tensor::from_data({4}, {1000.3, 998.8, 1002.0, 1000.7});
  Tensor sx = softmax(x, 0);
  Tensor ss = softmax(shifted, 0);
  for (size_t i = 0; i < 4; ++i)
    CHECK(sx.data()[i] == doctest::Approx(ss.data()[i]).epsilon(1e-9));

  Rng rng(11);
  Tensor big = Tensor::zeros({5, 9});
  for (Real& v : big.data()) v = rng.uniform(-1e3, 1e3);
  Tensor sm = softmax(big, 1);
  for (int64_t r = 0; r < 5; ++r) {
    Real total = 0;
    for (int64_t cidx = 0; cidx < 9; ++cidx)
      total += sm.data()[r * 9 + cidx];
    CHECK(std::abs(total - 1.0) < 1e-6);
  }
}

TEST_CASE("layer_norm statistics") {
  Tensor bias = Tensor::from_data({3}, {0.5, -1.0, 2.0});
  Tensor gain = Tensor::full({3}, 2.0);

  Tensor constant = Tensor::full({2, 3}, 7.7);
  Tensor out = layer_norm(constant, 1, gain, bias);
  for (int64_t r = 0; r < 2; ++r)
    for (int64_t cidx = 0; cidx < 3; ++cidx)
      CHECK(out.data()[r * 3 + cidx] ==
            doctest::Approx(bias.data()[cidx]).epsilon(1e-12));

  Rng rng(3);
  Tensor x = Tensor::zeros({6, 16});
  for (Real& v : x.data()) v = rng.uniform(-4, 4);
  Tensor g16 = Tensor::full({16}, 2.0);
  Tensor b16 = Tensor::zeros({16});
  for (Real& v : b16.data()) v = rng.uniform(-1, 1);
  Real bias_mean = 0;
  for (Real v : b16.data()) bias_mean += v;
  bias_mean /= 16;
  Tensor y = layer_norm(x, 1, g16, b16);
  for (int64_t r = 0; r < 6; ++r) {
    Real mu = 0;
    for (int64_t cidx = 0; cidx < 16; ++cidx) mu += y.data()[r * 16 + cidx];
    mu /= 16;
    CHECK(mu == doctest::Approx(bias_mean).epsilon(1e-9));
    Real var = 0;
    for (int64_t cidx = 0; cidx < 16; ++cidx) {
      Real c = y.data()[r * 16 + cidx] - b16.data()[cidx] - (mu - bias_mean);
      var += c * c;
    }
    CHECK(std::sqrt(var / 16) == doctest::Approx(2.0).epsilon(1e-3));
  }
}

namespace {

GruParams gru_with_update_bias(Real bz_value) {
  auto zeros_mat = [] { return Tensor::zeros({3, 3}); };
  Rng rng(21);
  GruParams p;
  p.wr = zeros_mat();
  p.ur = zeros_mat();
  p.br = Tensor::zeros({3});
  p.wz = zeros_mat();
  p.uz = zeros_mat();
  p.bz = Tensor::full({3}, bz_value);
  p.wn = Tensor::zeros({3, 3});
  p.un = Tensor::zeros({3, 3});
  for (Real& v : p.wn.data()) v = rng.uniform(-1, 1);
  for (Real& v : p.un.data()) v = rng.uniform(-1, 1);
  p.bn = Tensor::zeros({3});
  return p;
}

}  // namespace

TEST_CASE("gru gate saturation") {
  Rng rng(5);
  Tensor x = Tensor::zeros({2, 3});
  Tensor h = Tensor::zeros({2, 3});
  for (Real& v : x.data()) v = rng.uniform(-1, 1);
  for (Real& v : h.data()) v = rng.uniform(-1, 1);

  // update gate pinned to 1: output equals the candidate
  GruParams open = gru_with_update_bias(50.0);
  Tensor out = gru_cell(x, h, open);
  Tensor r = sigmoid(add(add(matmul(x, open.wr), matmul(h, open.ur)), open.br));
  Tensor cand =
      tanh(add(add(matmul(x, open.wn), matmul(mul(r, h), open.un)), open.bn));
  for (size_t i = 0; i < out.data().size(); ++i)
    CHECK(out.data()[i] == doctest::Approx(cand.data()[i]).epsilon(1e-12));

  // update gate pinned to 0: output equals the previous hidden state
  GruParams closed = gru_with_update_bias(-50.0);
  Tensor keep = gru_cell(x, h, closed);
  for (size_t i = 0; i < keep.data().size(); ++i)
    CHECK(keep.data()[i] == doctest::Approx(h.data()[i]).epsilon(1e-12));

  CHECK(throws_with([&] { gru_cell(x, Tensor::zeros({2, 4}), open); },
                    "shape"));
}

TEST_CASE("cosine similarity identities") {
  Tensor x = Tensor::from_data({3}, {0.4, -1.1, 2.2});
  CHECK(cosine_similarity(x, x).item() == doctest::Approx(1.0).epsilon(1e-9));

  Tensor e1 = Tensor::from_data({2}, {1, 0});
  Tensor e2 = Tensor::from_data({2}, {0, 1});
  CHECK(cosine_similarity(e1, e2).item() == doctest::Approx(0.0).epsilon(1e-12));

  Tensor a = Tensor::from_data({2}, {1, 1});
  Tensor b = Tensor::from_data({2}, {2, 2});
  CHECK(cosine_similarity(a, b).item() == doctest::Approx(1.0).epsilon(1e-9));

  Tensor zero = Tensor::zeros({2});
  Real cz = cosine_similarity(zero, e1).item();
  CHECK(std::isfinite(cz));
  CHECK(cz == 0.0);

  Tensor rows = Tensor::from_data({2, 2}, {1, 0, 3, 3});
  Tensor cos_rows = cosine_similarity(rows, stack({e1, e1}, 0));
  CHECK(cos_rows.shape() == Shape{2});
  CHECK(cos_rows.data()[1] ==
        doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
}

TEST_CASE("backward linearity and power rule") {
  Tape::Scope scope;
  Tensor x = Tensor::from_data({4}, {0.5, -2, 3, 1}, true);
  scope.tape().backward(sum_all(x));
  for (Real g : x.grad()) CHECK(g == 1.0);

  Tensor loss = sum_all(mul(x, x));
  scope.tape().backward(loss);
  for (size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == 2.0 * x.data()[i]);
}

TEST_CASE("backward rejects non-scalar losses and zeroes unreachable leaves") {
  Tape::Scope scope;
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  Tensor y = Tensor::from_data({2}, {5, 6}, true);
  Tensor unused = mul(y, y);
  Tensor loss = sum_all(x);
  CHECK(throws_with([&] { scope.tape().backward(mul(x, x)); }, "scalar"));
  scope.tape().backward(loss);
  CHECK(y.grad() == std::vector<Real>{0, 0});
  CHECK(x.grad() == std::vector<Real>{1, 1});
  CHECK(unused.data() == std::vector<Real>{25, 36});
}

TEST_CASE("backward is deterministic and repeatable on one tape") {
  Tape::Scope scope;
  Rng rng(13);
  Tensor x = Tensor::zeros({4, 4}, true);
  for (Real& v : x.data()) v = rng.uniform(-1, 1);
  Tensor w = Tensor::zeros({4, 4}, true);
  for (Real& v : w.data()) v = rng.uniform(-1, 1);
  Tensor loss = sum_all(mul(softmax(matmul(x, w), 1), matmul(x, w)));
  scope.tape().backward(loss);
  std::vector<Real> gx = x.grad(), gw = w.grad();
  scope.tape().backward(loss);
  CHECK(x.grad() == gx);
  CHECK(w.grad() == gw);
}

TEST_CASE("ops never mutate taped inputs in place") {
  Tape::Scope scope;
  Tensor x = Tensor::from_data({3}, {1, 2, 3}, true);
  std::vector<Real> before = x.data();
  Tensor y = add(mul(x, x), x);
  Tensor z = softmax(y, 0);
  scope.tape().backward(sum_all(mul(z, y)));
  CHECK(x.data() == before);
  CHECK(y.data() == std::vector<Real>{2, 6, 12});
}

TEST_CASE("stack and index_select round values through") {
  Tensor a = Tensor::from_data({2}, {1, 2});
  Tensor b = Tensor::from_data({2}, {3, 4});
  Tensor s0 = stack({a, b}, 0);
  CHECK(s0.shape() == Shape{2, 2});
  CHECK(s0.data() == std::vector<Real>{1, 2, 3, 4});
  Tensor s1 = stack({a, b}, 1);
  CHECK(s1.data() == std::vector<Real>{1, 3, 2, 4});

  Tensor rows = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
  Tensor picked = index_select(rows, {2, 0});
  CHECK(picked.data() == std::vector<Real>{5, 6, 1, 2});
  CHECK(throws_with([&] { index_select(rows, {3}); }, "out of range"));
  CHECK(throws_with([&] { stack({a, Tensor::zeros({3})}, 0); }, "shape"));
}

TEST_CASE("reductions and reshape keep shapes honest") {
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(sum_all(a).item() == 21.0);
  CHECK(mean_all(a).item() == 3.5);

  Tensor s0 = sum_axis(a, 0, false);
  CHECK(s0.shape() == Shape{3});
  CHECK(s0.data() == std::vector<Real>{5, 7, 9});
  Tensor s1 = sum_axis(a, 1, true);
  CHECK(s1.shape() == Shape{2, 1});
  CHECK(s1.data() == std::vector<Real>{6, 15});
  Tensor s1d = sum_axis(Tensor::from_data({3}, {1, 2, 3}), 0, false);
  CHECK(s1d.shape() == Shape{1});
  CHECK(s1d.item() == 6.0);

  Tensor r = reshape(a, {3, 2});
  CHECK(r.shape() == Shape{3, 2});
  CHECK(r.data() == a.data());
  CHECK(throws_with([&] { reshape(a, {4, 2}); }, "[2,3]"));

  Tensor t = transpose(a);
  CHECK(t.shape() == Shape{3, 2});
  CHECK(t.data() == std::vector<Real>{1, 4, 2, 5, 3, 6});
}

TEST_CASE("finite difference oracle reproduces analytic derivatives") {
  Tensor x = Tensor::from_data({5}, {0.3, -1.2, 0.9, 2.1, -0.4});

  Tensor ones = finite_diff_grad(
      [](const Tensor& t) {
        Real acc = 0;
        for (Real v : t.data()) acc += v;
        return acc;
      },
      x);
  for (Real v : ones.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));

  Tensor cosx = finite_diff_grad(
      [](const Tensor& t) {
        Real acc = 0;
        for (Real v : t.data()) acc += std::sin(v);
        return acc;
      },
      x);
  for (size_t i = 0; i < 5; ++i)
    CHECK(cosx.data()[i] ==
          doctest::Approx(std::cos(x.data()[i])).epsilon(1e-8));
}

TEST_CASE("gradients of every op match central finite differences") {
  auto report = slotvid::testing::run_op_grad_suite(3);
  REQUIRE(!report.cases.empty());
  for (const auto& c : report.cases) {
    INFO(c.name, " rel err ", c.rel_err, " tol ", c.tol);
    CHECK(c.rel_err < c.tol);
  }
}

TEST_CASE("rng streams are deterministic and well scaled") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 200; ++i) {
    double ua = a.uniform(), ub = b.uniform();
    all_equal = all_equal && (ua == ub);
    any_diff = any_diff || (ua != c.uniform());
    CHECK(ua >= 0.0);
    CHECK(ua < 1.0);
  }
  CHECK(all_equal);
  CHECK(any_diff);

  Rng d(7);
  double mean = 0, var = 0;
  const int n = 20000;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = d.normal();
    mean += xs[i];
  }
  mean /= n;
  for (double v : xs) var += (v - mean) * (v - mean);
  var /= n;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);

  uint64_t s1 = seed_combine(99, 1);
  uint64_t s2 = seed_combine(99, 2);
  CHECK(s1 != s2);
  CHECK(seed_combine(99, 1) == s1);

  Rng e(3);
  for (int i = 0; i < 100; ++i) {
    int64_t v = e.uniform_int(10);
    CHECK(v >= 0);
    CHECK(v < 10);
  }
}
