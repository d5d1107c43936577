#include "grad_suite.hpp"

#include <cmath>
#include <functional>
#include <utility>

#include "slotvid/core/gradcheck.hpp"
#include "slotvid/core/ops.hpp"
#include "slotvid/core/rng.hpp"
#include "slotvid/losses/losses.hpp"

namespace slotvid::testing {

const GradCase* GradSuiteReport::worst() const {
  const GradCase* w = nullptr;
  for (const GradCase& c : cases)
    if (!w || c.rel_err / c.tol > w->rel_err / w->tol) w = &c;
  return w;
}

namespace {

constexpr Real kPrimTol = 1e-6;
constexpr Real kComposedTol = 1e-4;

Tensor rand_t(Rng& rng, Shape shape, Real lo, Real hi, bool rg = true) {
  Tensor t = Tensor::zeros(std::move(shape), rg);
  for (Real& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Magnitudes bounded away from zero so kinks and clamps stay untouched.
Tensor rand_signed(Rng& rng, Shape shape, Real lo_mag, Real hi_mag,
                   bool rg = true) {
  Tensor t = Tensor::zeros(std::move(shape), rg);
  for (Real& v : t.data()) {
    Real m = rng.uniform(lo_mag, hi_mag);
    v = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

Tensor grad_of(const Tensor& t) {
  return Tensor::from_data(t.shape(), t.grad());
}

using Builder = std::function<Tensor(const std::vector<Tensor>&)>;

struct Harness {
  Rng& rng;
  GradSuiteReport& report;

  void note(const std::string& name, Real rel, Real tol) {
    for (GradCase& c : report.cases)
      if (c.name == name) {
        c.rel_err = std::max(c.rel_err, rel);
        return;
      }
    report.cases.push_back({name, rel, tol});
  }

  // Verifies d(sum(build(inputs)*w))/d(input) for every input, against
  // central differences, with a fixed random weighting w.
  void check(const std::string& name, std::vector<Tensor> inputs, Real tol,
             const Builder& build) {
    Tensor w;
    std::vector<Tensor> analytic;
    {
      Tape::Scope scope;
      Tensor out = build(inputs);
      w = rand_t(rng, out.shape(), -1.0, 1.0, false);
      Tensor loss = sum_all(mul(out, w));
      scope.tape().backward(loss);
      for (const Tensor& in : inputs) analytic.push_back(grad_of(in));
    }
    for (size_t which = 0; which < inputs.size(); ++which) {
      auto f = [&, which](const Tensor& t) {
        std::vector<Tensor> probed = inputs;
        probed[which] = t;
        Tensor out = build(probed);
        Real acc = 0.0;
        for (size_t i = 0; i < out.data().size(); ++i)
          acc += out.data()[i] * w.data()[i];
        return acc;
      };
      Tensor numeric = finite_diff_grad(f, inputs[which]);
      note(name, grad_rel_err(analytic[which], numeric), tol);
    }
  }
};

void run_seed(Harness& h, Rng& rng, int seed_index) {
  const std::vector<std::pair<Shape, Shape>> bshapes = {
      {{2, 3, 4}, {2, 3, 4}}, {{2, 3, 4}, {3, 4}}, {{2, 3, 4}, {1, 4}},
      {{2, 3, 4}, {4}},       {{2, 3, 4}, {1}},    {{3, 1, 5}, {1, 4, 5}},
  };
  const auto& [sa, sb] = bshapes[static_cast<size_t>(seed_index) %
                                 bshapes.size()];

  h.check("add", {rand_t(rng, sa, -2, 2), rand_t(rng, sb, -2, 2)}, kPrimTol,
          [](const std::vector<Tensor>& in) { return add(in[0], in[1]); });
  h.check("sub", {rand_t(rng, sa, -2, 2), rand_t(rng, sb, -2, 2)}, kPrimTol,
          [](const std::vector<Tensor>& in) { return sub(in[0], in[1]); });
  h.check("mul", {rand_t(rng, sa, -2, 2), rand_t(rng, sb, -2, 2)}, kPrimTol,
          [](const std::vector<Tensor>& in) { return mul(in[0], in[1]); });
  h.check("div",
          {rand_t(rng, sa, -2, 2), rand_signed(rng, sb, 0.4, 2.5)}, kPrimTol,
          [](const std::vector<Tensor>& in) { return divide(in[0], in[1]); });

  h.check("neg", {rand_t(rng, {3, 4}, -2, 2)}, kPrimTol,
          [](const std::vector<Tensor>& in) { return neg(in[0]); });
  h.check("exp", {rand_t(rng, {3, 4}, -2, 2)}, kPrimTol,
          [](const std::vector<Tensor>& in) { return exp(in[0]); });
  h.check("log", {rand_t(rng, {3, 4}, 0.1, 3.0)}, kPrimTol,
          [](const std::vector<Tensor>& in) { return log(in[0]); });
  h.check("sqrt", {rand_t(rng, {3, 4}, 0.1, 4.0)}, kPrimTol,
          [](const std::vector<Tensor>& in) { return sqrt(in[0]); });
  h.check("relu", {rand_signed(rng, {3, 4}, 0.05, 2.0)}, kPrimTol,
          [](const std::vector<Tensor>& in) { return relu(in[0]); });
  h.check("sigmoid", {rand_t(rng, {3, 4}, -3, 3)}, kPrimTol,
          [](const std::vector<Tensor>& in) { return sigmoid(in[0]); });
  h.check("tanh", {rand_t(rng, {3, 4}, -3, 3)}, kPrimTol,
          [](const std::vector<Tensor>& in) { return tanh(in[0]); });
  h.check("affine", {rand_t(rng, {3, 4}, -2, 2)}, kPrimTol,
          [](const std::vector<Tensor>& in) {
            return affine(in[0], 1.7, -0.3);
          });

  const std::vector<std::pair<Shape, Shape>> mshapes = {
      {{3, 4}, {4, 2}},       {{2, 3, 4}, {2, 4, 2}}, {{2, 3, 4}, {4, 2}},
      {{3, 4}, {2, 4, 2}},    {{2, 1, 3, 4}, {3, 4, 2}},
  };
  const auto& [ma, mb] = mshapes[static_cast<size_t>(seed_index) %
                                 mshapes.size()];
  h.check("matmul", {rand_t(rng, ma, -1.5, 1.5), rand_t(rng, mb, -1.5, 1.5)},
          kPrimTol,
          [](const std::vector<Tensor>& in) { return matmul(in[0], in[1]); });

  h.check("transpose", {rand_t(rng, {2, 3, 4}, -2, 2)}, kPrimTol,
          [](const std::vector<Tensor>& in) { return transpose(in[0]); });
  h.check("reshape", {rand_t(rng, {2, 3, 4}, -2, 2)}, kPrimTol,
          [](const std::vector<Tensor>& in) {
            return reshape(in[0], {4, 6});
          });
  {
    int64_t axis = seed_index % 3;
    h.check("stack",
            {rand_t(rng, {2, 3}, -2, 2), rand_t(rng, {2, 3}, -2, 2),
             rand_t(rng, {2, 3}, -2, 2)},
            kPrimTol, [axis](const std::vector<Tensor>& in) {
              return stack(in, axis);
            });
  }
  h.check("index_select", {rand_t(rng, {5, 3}, -2, 2)}, kPrimTol,
          [](const std::vector<Tensor>& in) {
            return index_select(in[0], {4, 0, 2, 2});
          });

  h.check("sum", {rand_t(rng, {3, 4}, -2, 2)}, kPrimTol,
          [](const std::vector<Tensor>& in) { return sum_all(in[0]); });
  h.check("mean", {rand_t(rng, {3, 4}, -2, 2)}, kPrimTol,
          [](const std::vector<Tensor>& in) { return mean_all(in[0]); });
  {
    int64_t axis = seed_index % 3;
    bool keep = (seed_index / 3) % 2 == 0;
    h.check("sum_axis", {rand_t(rng, {2, 3, 4}, -2, 2)}, kPrimTol,
            [axis, keep](const std::vector<Tensor>& in) {
              return sum_axis(in[0], axis, keep);
            });
  }

  h.check("softmax", {rand_t(rng, {3, 7}, -3, 3)}, kPrimTol,
          [](const std::vector<Tensor>& in) { return softmax(in[0], 1); });
  {
    int64_t axis = seed_index % 3;
    h.check("softmax_3d", {rand_t(rng, {2, 3, 4}, -3, 3)}, kPrimTol,
            [axis](const std::vector<Tensor>& in) {
              return softmax(in[0], axis);
            });
  }

  h.check("layer_norm",
          {rand_t(rng, {4, 6}, -2, 2), rand_signed(rng, {6}, 0.5, 1.5),
           rand_t(rng, {6}, -1, 1)},
          kPrimTol, [](const std::vector<Tensor>& in) {
            return layer_norm(in[0], 1, in[1], in[2]);
          });
  h.check("layer_norm_mid_axis",
          {rand_t(rng, {2, 3, 5}, -2, 2), rand_signed(rng, {3}, 0.5, 1.5),
           rand_t(rng, {3}, -1, 1)},
          kPrimTol, [](const std::vector<Tensor>& in) {
            return layer_norm(in[0], 1, in[1], in[2]);
          });

  {
    std::vector<Tensor> in;
    in.push_back(rand_t(rng, {2, 5}, -1.5, 1.5));  // input
    in.push_back(rand_t(rng, {2, 5}, -1.5, 1.5));  // hidden
    for (int g = 0; g < 3; ++g) {
      in.push_back(rand_t(rng, {5, 5}, -0.8, 0.8));  // w
      in.push_back(rand_t(rng, {5, 5}, -0.8, 0.8));  // u
      in.push_back(rand_t(rng, {5}, -0.5, 0.5));     // b
    }
    h.check("gru_cell", in, kPrimTol, [](const std::vector<Tensor>& t) {
      GruParams p{t[2], t[3], t[4], t[5], t[6], t[7], t[8], t[9], t[10]};
      return gru_cell(t[0], t[1], p);
    });
  }

  h.check("cosine_similarity",
          {rand_signed(rng, {3, 4}, 0.3, 1.5), rand_signed(rng, {3, 4}, 0.3, 1.5)},
          kPrimTol, [](const std::vector<Tensor>& in) {
            return cosine_similarity(in[0], in[1]);
          });
  h.check("l2_normalize", {rand_signed(rng, {3, 4}, 0.3, 1.5)}, kPrimTol,
          [](const std::vector<Tensor>& in) { return l2_normalize(in[0]); });

  // Composed graph: two-layer net into layer_norm + softmax.
  h.check("composed_mlp",
          {rand_t(rng, {2, 6}, -1, 1), rand_t(rng, {6, 8}, -0.7, 0.7),
           rand_t(rng, {8}, -0.5, 0.5), rand_t(rng, {8, 4}, -0.7, 0.7),
           rand_signed(rng, {4}, 0.5, 1.5), rand_t(rng, {4}, -1, 1)},
          kComposedTol, [](const std::vector<Tensor>& in) {
            Tensor h1 = tanh(add(matmul(in[0], in[1]), in[2]));
            Tensor y = matmul(h1, in[3]);
            return softmax(layer_norm(y, 1, in[4], in[5]), 1);
          });

  // Composed graph: cosine into softmax into an entropy-style product.
  h.check("composed_entropy",
          {rand_signed(rng, {3, 4}, 0.3, 1.5), rand_signed(rng, {3, 4}, 0.3, 1.5)},
          kComposedTol, [](const std::vector<Tensor>& in) {
            Tensor p = softmax(cosine_similarity(in[0], in[1]), 0);
            return mul(p, log(p));
          });

  {
    // rotate through the ranking branches: full, empty related, empty negatives
    TernaryPartition part;
    part.anchor = 0;
    switch (seed_index % 3) {
      case 0:
        part.positives = {0, 6};
        part.related = {1, 4};
        part.negatives = {2, 3, 5, 7};
        break;
      case 1:
        part.positives = {0};
        part.negatives = {1, 2, 3, 4, 5, 6, 7};
        break;
      default:
        part.positives = {0, 2, 4};
        part.related = {1, 3, 5, 6, 7};
        break;
    }
    h.check("ranking_contrastive", {rand_t(rng, {8}, -1, 1)}, kComposedTol,
            [part](const std::vector<Tensor>& in) {
              return ranking_contrastive(in[0], part, 0.5);
            });
  }

  {
    PseudoLabels labels;
    labels.T = 2;
    labels.N = 3;
    for (int i = 0; i < 6; ++i) {
      labels.l_attn.push_back(static_cast<int32_t>(rng.uniform_int(3)));
      labels.l_mask.push_back(static_cast<int32_t>(rng.uniform_int(3)));
    }
    const std::vector<int64_t> anchors = {0, 2, 5};
    Tensor y = rand_t(rng, {2, 3, 4}, -1, 1, false);
    Tensor backbone = rand_t(rng, {2, 3, 4}, -1, 1, false);
    h.check("loss_cl_dec", {rand_t(rng, {2, 3, 4}, -1, 1)}, kComposedTol,
            [labels, anchors, y](const std::vector<Tensor>& in) {
              return loss_cl_dec(in[0], y, labels, anchors, 0.5);
            });
    h.check("loss_cl_enc", {rand_t(rng, {2, 3, 4}, -1, 1)}, kComposedTol,
            [labels, anchors, backbone](const std::vector<Tensor>& in) {
              return loss_cl_enc(in[0], backbone, labels, anchors, 2, 0.5);
            });
  }

  h.check("loss_slot_contrast", {rand_t(rng, {3, 3, 4}, -1, 1)},
          kComposedTol, [](const std::vector<Tensor>& in) {
            return loss_slot_contrast(in[0], 0.5);
          });

  {
    Tensor target = rand_t(rng, {2, 3, 4}, -1, 1, false);
    h.check("loss_recon", {rand_t(rng, {2, 3, 4}, -1, 1)}, kComposedTol,
            [target](const std::vector<Tensor>& in) {
              return loss_recon(in[0], target);
            });
  }

  h.check("loss_reg", {rand_t(rng, {4, 2, 5}, -2, 2)}, kComposedTol,
          [](const std::vector<Tensor>& in) {
            return loss_reg(softmax(in[0], 2), {1, 3});
          });
}

}  // namespace

GradSuiteReport run_op_grad_suite(int seeds) {
  GradSuiteReport report;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(seed_combine(0x9d5ful, static_cast<uint64_t>(s)));
    Harness h{rng, report};
    run_seed(h, rng, s);
  }
  return report;
}

}  // namespace slotvid::testing
