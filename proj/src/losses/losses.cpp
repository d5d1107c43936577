#include <algorithm>
#include <cmath>

#include "slotvid/losses/losses.hpp"

namespace slotvid {

namespace {

constexpr Real kMaskedOut = -1e9;

// Row-wise log-sum-exp with the per-row maximum folded in as a constant
// shift, so huge logits stay finite and gradients flow through the logits
// alone. st: [R, C] -> [R, 1].
Tensor lse_rows(const Tensor& st) {
  const int64_t R = st.size(0);
  const int64_t C = st.size(1);
  std::vector<Real> mv(static_cast<size_t>(R));
  for (int64_t r = 0; r < R; ++r) {
    Real m = st.data()[static_cast<size_t>(r * C)];
    for (int64_t c = 1; c < C; ++c)
      m = std::max(m, st.data()[static_cast<size_t>(r * C + c)]);
    mv[static_cast<size_t>(r)] = m;
  }
  Tensor shift = Tensor::from_data({R, 1}, std::move(mv));
  return add(shift, log(sum_axis(exp(sub(st, shift)), 1, true)));
}

// Log-sum-exp restricted to mask==1 columns. Excluded columns are pushed to
// a large negative constant before the shift, so they vanish from both the
// value and the gradient. Fully masked-out rows come back finite (and are
// expected to be weighted to zero by the caller).
Tensor masked_lse_rows(const Tensor& st, const Tensor& mask) {
  const int64_t R = st.size(0);
  const int64_t C = st.size(1);
  std::vector<Real> floor_v(static_cast<size_t>(R * C));
  for (size_t i = 0; i < floor_v.size(); ++i)
    floor_v[i] = mask.data()[i] > 0.5 ? 0.0 : kMaskedOut;
  Tensor floor_t = Tensor::from_data({R, C}, std::move(floor_v));
  return lse_rows(add(mul(st, mask), floor_t));
}

Tensor mean_selected(const Tensor& st, const std::vector<int64_t>& idx) {
  return mean_all(index_select(st, idx));
}

struct RankingMasks {
  Tensor p, qn, q, n;         // [A, M] membership
  Tensor inv_p, inv_q;        // [A, 1] reciprocal set sizes (0 when empty)
  Tensor w1, w2;              // [A, 1] term gates
};

RankingMasks build_masks(const std::vector<TernaryPartition>& parts,
                         int64_t m) {
  const int64_t a_count = static_cast<int64_t>(parts.size());
  const size_t total = static_cast<size_t>(a_count * m);
  std::vector<Real> pm(total, 0), qm(total, 0), nm(total, 0), qnm(total, 0);
  std::vector<Real> inv_p(static_cast<size_t>(a_count), 0),
      inv_q(static_cast<size_t>(a_count), 0),
      w1(static_cast<size_t>(a_count), 0),
      w2(static_cast<size_t>(a_count), 0);
  for (int64_t a = 0; a < a_count; ++a) {
    const auto& part = parts[static_cast<size_t>(a)];
    const size_t base = static_cast<size_t>(a * m);
    for (int64_t i : part.positives) pm[base + static_cast<size_t>(i)] = 1;
    for (int64_t i : part.related) {
      qm[base + static_cast<size_t>(i)] = 1;
      qnm[base + static_cast<size_t>(i)] = 1;
    }
    for (int64_t i : part.negatives) {
      nm[base + static_cast<size_t>(i)] = 1;
      qnm[base + static_cast<size_t>(i)] = 1;
    }
    inv_p[static_cast<size_t>(a)] =
        1.0 / static_cast<Real>(part.positives.size());
    if (!part.related.empty())
      inv_q[static_cast<size_t>(a)] =
          1.0 / static_cast<Real>(part.related.size());
    if (!part.related.empty() || !part.negatives.empty())
      w1[static_cast<size_t>(a)] = 1;
    if (!part.related.empty() && !part.negatives.empty())
      w2[static_cast<size_t>(a)] = 1;
  }
  RankingMasks out;
  out.p = Tensor::from_data({a_count, m}, std::move(pm));
  out.qn = Tensor::from_data({a_count, m}, std::move(qnm));
  out.q = Tensor::from_data({a_count, m}, std::move(qm));
  out.n = Tensor::from_data({a_count, m}, std::move(nm));
  out.inv_p = Tensor::from_data({a_count, 1}, std::move(inv_p));
  out.inv_q = Tensor::from_data({a_count, 1}, std::move(inv_q));
  out.w1 = Tensor::from_data({a_count, 1}, std::move(w1));
  out.w2 = Tensor::from_data({a_count, 1}, std::move(w2));
  return out;
}

// st: [A, M] anchor similarity rows already divided by tau.
Tensor batched_ranking(const Tensor& st,
                       const std::vector<TernaryPartition>& parts) {
  RankingMasks masks = build_masks(parts, st.size(1));
  Tensor mean_p = mul(sum_axis(mul(st, masks.p), 1, true), masks.inv_p);
  Tensor term1 = sub(masked_lse_rows(st, masks.qn), mean_p);
  Tensor mean_q = mul(sum_axis(mul(st, masks.q), 1, true), masks.inv_q);
  Tensor term2 = sub(masked_lse_rows(st, masks.n), mean_q);
  Tensor per_anchor = add(mul(masks.w1, term1), mul(masks.w2, term2));
  return scale(sum_all(per_anchor),
               1.0 / static_cast<Real>(parts.size()));
}

void check_projection(const char* what, const Tensor& t,
                      const PseudoLabels& labels) {
  if (t.dim() != 3 || t.size(0) != labels.T || t.size(1) != labels.N)
    fail(std::string(what) + " " + shape_str(t.shape()) +
         " does not match the labels' " + std::to_string(labels.T) + "x" +
         std::to_string(labels.N) + " patch grid");
}

}  // namespace

Tensor ranking_contrastive(const Tensor& sims, const TernaryPartition& part,
                           Real tau) {
  if (sims.dim() != 1)
    fail("ranking loss expects a flat similarity row, got " +
         shape_str(sims.shape()));
  if (tau <= 0.0) fail("temperature must be positive, got " +
                       std::to_string(tau));
  if (part.positives.empty()) fail("ranking loss needs positives");
  std::vector<int64_t> qn = part.related;
  qn.insert(qn.end(), part.negatives.begin(), part.negatives.end());
  if (qn.empty()) return Tensor::scalar(0.0);

  Tensor st = scale(sims, 1.0 / tau);
  auto lse_over = [&](const std::vector<int64_t>& idx) {
    Tensor sel = reshape(index_select(st, idx),
                         {1, static_cast<int64_t>(idx.size())});
    return reshape(lse_rows(sel), {1});
  };
  Tensor term1 = sub(lse_over(qn), mean_selected(st, part.positives));
  if (part.related.empty() || part.negatives.empty()) return term1;
  Tensor term2 =
      sub(lse_over(part.negatives), mean_selected(st, part.related));
  return add(term1, term2);
}

Tensor loss_recon(const Tensor& decoded, const Tensor& target) {
  if (decoded.shape() != target.shape())
    fail("reconstruction shapes differ: " + shape_str(decoded.shape()) +
         " vs " + shape_str(target.shape()));
  Tensor diff = sub(decoded, target);
  return mean_all(mul(diff, diff));
}

Tensor loss_slot_contrast(const Tensor& slots, Real tau) {
  if (slots.dim() != 3)
    fail("slot contrast expects slots [T,S,D], got " +
         shape_str(slots.shape()));
  if (slots.size(0) < 2)
    fail("slot contrast needs at least two frames, got " +
         std::to_string(slots.size(0)));
  if (tau <= 0.0) fail("temperature must be positive, got " +
                       std::to_string(tau));
  const int64_t T = slots.size(0);
  const int64_t S = slots.size(1);
  const int64_t D = slots.size(2);

  std::vector<Real> eye_v(static_cast<size_t>(S * S), 0.0);
  for (int64_t s = 0; s < S; ++s) eye_v[static_cast<size_t>(s * S + s)] = 1;
  Tensor eye = Tensor::from_data({S, S}, std::move(eye_v));

  Tensor acc = Tensor::scalar(0.0);
  for (int64_t t = 0; t + 1 < T; ++t) {
    Tensor a = l2_normalize(reshape(index_select(slots, {t}), {S, D}));
    Tensor b = l2_normalize(reshape(index_select(slots, {t + 1}), {S, D}));
    Tensor sim = scale(matmul(a, transpose(b)), 1.0 / tau);
    Tensor pos = sum_axis(mul(sim, eye), 1, true);  // [S, 1] diagonal
    acc = add(acc, sum_all(sub(lse_rows(sim), pos)));
  }
  return scale(acc, 1.0 / static_cast<Real>(S * (T - 1)));
}

Tensor loss_cl_dec(const Tensor& z, const Tensor& y,
                   const PseudoLabels& labels,
                   const std::vector<int64_t>& anchors, Real tau) {
  check_projection("decoder projection", z, labels);
  check_projection("target projection", y, labels);
  if (z.shape() != y.shape())
    fail("projection shapes differ: " + shape_str(z.shape()) + " vs " +
         shape_str(y.shape()));
  if (anchors.empty()) fail("ranking loss needs at least one anchor");
  if (tau <= 0.0) fail("temperature must be positive, got " +
                       std::to_string(tau));
  const int64_t m = labels.T * labels.N;
  const int64_t c = z.size(2);

  std::vector<TernaryPartition> parts;
  parts.reserve(anchors.size());
  for (int64_t a : anchors) parts.push_back(rank_partition_decoder(labels, a));

  Tensor zn = l2_normalize(reshape(z, {m, c}));
  Tensor yn = l2_normalize(reshape(y.detach(), {m, c}));
  Tensor sim = matmul(zn, transpose(yn));
  Tensor st = scale(index_select(sim, anchors), 1.0 / tau);
  return batched_ranking(st, parts);
}

Tensor loss_cl_enc(const Tensor& v, const Tensor& backbone,
                   const PseudoLabels& labels,
                   const std::vector<int64_t>& anchors,
                   int64_t num_neighbors, Real tau) {
  check_projection("encoder projection", v, labels);
  if (anchors.empty()) fail("ranking loss needs at least one anchor");
  if (tau <= 0.0) fail("temperature must be positive, got " +
                       std::to_string(tau));
  const int64_t m = labels.T * labels.N;
  const int64_t c = v.size(2);

  std::vector<TernaryPartition> parts;
  parts.reserve(anchors.size());
  for (int64_t a : anchors)
    parts.push_back(rank_partition_encoder(backbone, labels, a,
                                           num_neighbors));

  Tensor vn = l2_normalize(reshape(v, {m, c}));
  Tensor sim = matmul(vn, transpose(vn));
  Tensor st = scale(index_select(sim, anchors), 1.0 / tau);
  return batched_ranking(st, parts);
}

Tensor loss_reg(const Tensor& attn, const std::vector<int64_t>& penalized) {
  if (attn.dim() != 3)
    fail("spread regularizer expects attention [S,T,N], got " +
         shape_str(attn.shape()));
  if (penalized.empty())
    fail("spread regularizer needs at least one penalized slot");
  const int64_t T = attn.size(1);
  const int64_t N = attn.size(2);
  Tensor sel = index_select(attn, penalized);  // [M, T, N]
  Tensor p = divide(sel, sum_axis(sel, 2, true));
  Tensor kl = mul(p, log(scale(p, static_cast<Real>(N))));
  return scale(sum_all(kl),
               1.0 / static_cast<Real>(
                         static_cast<int64_t>(penalized.size()) * T));
}

Tensor stage_total(LossBreakdown& parts, Real eta, const StageSchedule& s) {
  if (!(eta >= 0.0 && eta <= 1.0))
    fail("training progress must lie in [0,1], got " + std::to_string(eta));
  if (!parts.recon.defined() || !parts.slot_contrast.defined())
    fail("staged objective needs reconstruction and slot-contrast terms");
  Tensor total = add(parts.recon, parts.slot_contrast);
  if (reg_active(eta, s)) {
    if (!parts.reg.defined())
      fail("warm-up stage needs the spread regularizer");
    total = add(total, scale(parts.reg, s.lambda_r));
  }
  if (cl_active(eta, s)) {
    if (!parts.cl_dec.defined() || !parts.cl_enc.defined())
      fail("final stage needs both ranking losses");
    total = add(total, scale(add(parts.cl_dec, parts.cl_enc), s.lambda_c));
  }
  parts.total = total;
  return total;
}

}  // namespace slotvid
