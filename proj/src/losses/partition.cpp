#include <algorithm>
#include <cmath>

#include "slotvid/losses/losses.hpp"

namespace slotvid {

namespace {

void check_anchor(const PseudoLabels& labels, int64_t anchor) {
  const int64_t m = labels.T * labels.N;
  if (m <= 0) fail("pseudo labels cover no patches");
  if (static_cast<int64_t>(labels.l_attn.size()) != m ||
      static_cast<int64_t>(labels.l_mask.size()) != m)
    fail("pseudo label buffers do not match T*N = " + std::to_string(m));
  if (anchor < 0 || anchor >= m)
    fail("anchor " + std::to_string(anchor) + " out of range [0," +
         std::to_string(m) + ")");
}

Real cos_rows(const std::vector<Real>& d, int64_t dim, int64_t a, int64_t b) {
  Real dot = 0, na = 0, nb = 0;
  const Real* ra = d.data() + a * dim;
  const Real* rb = d.data() + b * dim;
  for (int64_t i = 0; i < dim; ++i) {
    dot += ra[i] * rb[i];
    na += ra[i] * ra[i];
    nb += rb[i] * rb[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

TernaryPartition rank_partition_decoder(const PseudoLabels& labels,
                                        int64_t anchor) {
  check_anchor(labels, anchor);
  const int64_t m = labels.T * labels.N;
  TernaryPartition part;
  part.anchor = anchor;
  part.positives = {anchor};
  const int32_t lab = labels.l_attn[static_cast<size_t>(anchor)];
  for (int64_t i = 0; i < m; ++i) {
    if (i == anchor) continue;
    if (labels.l_attn[static_cast<size_t>(i)] == lab)
      part.related.push_back(i);
    else
      part.negatives.push_back(i);
  }
  return part;
}

TernaryPartition rank_partition_encoder(const Tensor& backbone,
                                        const PseudoLabels& labels,
                                        int64_t anchor,
                                        int64_t num_neighbors) {
  check_anchor(labels, anchor);
  if (backbone.dim() != 3 || backbone.size(0) != labels.T ||
      backbone.size(1) != labels.N)
    fail("backbone features " + shape_str(backbone.shape()) +
         " do not match the labels' " + std::to_string(labels.T) + "x" +
         std::to_string(labels.N) + " patch grid");
  const int64_t m = labels.T * labels.N;
  if (num_neighbors < 1 || num_neighbors > m - 1)
    fail("neighbor count " + std::to_string(num_neighbors) +
         " out of range [1," + std::to_string(m - 1) + "]");
  const int64_t dim = backbone.size(2);

  std::vector<std::pair<Real, int64_t>> scored;
  scored.reserve(static_cast<size_t>(m - 1));
  for (int64_t i = 0; i < m; ++i) {
    if (i == anchor) continue;
    scored.emplace_back(cos_rows(backbone.data(), dim, anchor, i), i);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;  // ties go to the lower index
  });

  TernaryPartition part;
  part.anchor = anchor;
  std::vector<char> in_p(static_cast<size_t>(m), 0);
  in_p[static_cast<size_t>(anchor)] = 1;
  for (int64_t k = 0; k < num_neighbors; ++k)
    in_p[static_cast<size_t>(scored[static_cast<size_t>(k)].second)] = 1;
  const int32_t lab = labels.l_mask[static_cast<size_t>(anchor)];
  for (int64_t i = 0; i < m; ++i) {
    if (in_p[static_cast<size_t>(i)])
      part.positives.push_back(i);
    else if (labels.l_mask[static_cast<size_t>(i)] == lab)
      part.related.push_back(i);
    else
      part.negatives.push_back(i);
  }
  return part;
}

std::vector<int64_t> select_penalized_slots(const Tensor& attn, int64_t m) {
  if (attn.dim() != 3)
    fail("slot selection expects attention [S,T,N], got " +
         shape_str(attn.shape()));
  const int64_t S = attn.size(0);
  const int64_t T = attn.size(1);
  const int64_t N = attn.size(2);
  if (S < 2)
    fail("slot selection needs at least two slots, got " + std::to_string(S));
  if (m < 1 || m > S - 1)
    fail("penalized count " + std::to_string(m) + " out of range [1," +
         std::to_string(S - 1) + "] for " + std::to_string(S) + " slots");

  const auto& d = attn.data();
  // distance of each slot's attention profile from uniform, averaged over t
  std::vector<Real> kl(static_cast<size_t>(S), 0.0);
  for (int64_t s = 0; s < S; ++s) {
    for (int64_t t = 0; t < T; ++t) {
      const Real* row = d.data() + (s * T + t) * N;
      Real total = 0;
      for (int64_t n = 0; n < N; ++n) total += row[n];
      if (total <= 0.0)
        fail("attention row for slot " + std::to_string(s) + ", frame " +
             std::to_string(t) + " sums to zero");
      Real acc = 0;
      for (int64_t n = 0; n < N; ++n) {
        const Real p = row[n] / total;
        if (p > 0.0) acc += p * std::log(p * static_cast<Real>(N));
      }
      kl[static_cast<size_t>(s)] += acc;
    }
    kl[static_cast<size_t>(s)] /= static_cast<Real>(T);
  }

  std::vector<char> alive(static_cast<size_t>(S), 1);
  std::vector<int64_t> picked;
  picked.reserve(static_cast<size_t>(m));
  for (int64_t round = 0; round < m; ++round) {
    int64_t bi = -1, bj = -1;
    Real best = 0;
    for (int64_t i = 0; i < S; ++i) {
      if (!alive[static_cast<size_t>(i)]) continue;
      for (int64_t j = i + 1; j < S; ++j) {
        if (!alive[static_cast<size_t>(j)]) continue;
        const Real c = cos_rows(d, T * N, i, j);
        if (bi < 0 || c > best) {  // ties keep the first pair in scan order
          best = c;
          bi = i;
          bj = j;
        }
      }
    }
    const int64_t join =
        kl[static_cast<size_t>(bi)] < kl[static_cast<size_t>(bj)]   ? bi
        : kl[static_cast<size_t>(bj)] < kl[static_cast<size_t>(bi)] ? bj
                                                                    : bi;
    picked.push_back(join);
    alive[static_cast<size_t>(join)] = 0;
  }
  return picked;
}

}  // namespace slotvid
