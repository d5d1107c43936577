#pragma once

#include <cstdint>
#include <vector>

#include "slotvid/core/ops.hpp"
#include "slotvid/model/model.hpp"

namespace slotvid {

// Three-way ranking over flattened patch indices (t * N + n): the anchor's
// positives should score above the related set, which in turn should score
// above the negatives.
struct TernaryPartition {
  int64_t anchor = 0;
  std::vector<int64_t> positives;  // ranked highest, includes the anchor
  std::vector<int64_t> related;    // same pseudo-label, ranked in between
  std::vector<int64_t> negatives;  // everything else
};

// Decoder-side partition: the anchor alone is positive; patches sharing its
// attention label are related; the rest are negatives.
TernaryPartition rank_partition_decoder(const PseudoLabels& labels,
                                        int64_t anchor);

// Encoder-side partition: the anchor plus its num_neighbors nearest patches
// by cosine similarity in backbone feature space are positives (ties break
// toward the lower flattened index); remaining patches sharing the anchor's
// mask label are related; the rest are negatives.
TernaryPartition rank_partition_encoder(const Tensor& backbone,
                                        const PseudoLabels& labels,
                                        int64_t anchor,
                                        int64_t num_neighbors);

// Two-term ranking loss over one anchor's similarity row (length T * N).
// Term one pulls positives above the related-plus-negative pool; term two
// pulls the related set above the negatives. A term whose candidate pool is
// empty contributes zero.
Tensor ranking_contrastive(const Tensor& sims, const TernaryPartition& part,
                           Real tau);

// Mean squared error between decoded and target features of equal shape.
Tensor loss_recon(const Tensor& decoded, const Tensor& target);

// Temporal slot identity: each slot at frame t should match itself at frame
// t+1 against all other slots of frame t+1 (the positive pair sits in the
// denominator too). slots: [T, S, D_s]; needs T >= 2.
Tensor loss_slot_contrast(const Tensor& slots, Real tau);

// Batched decoder-side ranking loss over sampled anchors. Similarities are
// cosines between rows of z and rows of y (both flattened to [T*N, C]);
// y acts as a fixed target and receives no gradient.
Tensor loss_cl_dec(const Tensor& z, const Tensor& y,
                   const PseudoLabels& labels,
                   const std::vector<int64_t>& anchors, Real tau);

// Batched encoder-side ranking loss: cosine similarities of v against
// itself, partitions built from backbone-space neighbors and mask labels.
// Both sides of every similarity carry gradient.
Tensor loss_cl_enc(const Tensor& v, const Tensor& backbone,
                   const PseudoLabels& labels,
                   const std::vector<int64_t>& anchors,
                   int64_t num_neighbors, Real tau);

// Greedy duplicate hunt on attention maps (values only): m times, take the
// most similar unpenalized pair of slots and penalize whichever of the two
// sits closer to a uniform attention profile. Returns slots in selection
// order. Requires 1 <= m <= S-1.
std::vector<int64_t> select_penalized_slots(const Tensor& attn, int64_t m);

// Mean KL divergence from uniform of the penalized slots' per-frame
// attention profiles; pushes redundant slots toward spreading out so they
// stop competing for objects. Differentiable through attn.
Tensor loss_reg(const Tensor& attn, const std::vector<int64_t>& penalized);

struct StageSchedule {
  Real lambda_r = 0.1;     // weight of the spread regularizer
  Real lambda_c = 0.1;     // weight of the two ranking losses
  Real tau = 0.1;          // shared softmax temperature
  Real reg_until = 0.1;    // regularizer active while eta < reg_until
  Real cl_from = 0.2;      // ranking losses active once eta >= cl_from
};

inline bool reg_active(Real eta, const StageSchedule& s) {
  return eta < s.reg_until;
}
inline bool cl_active(Real eta, const StageSchedule& s) {
  return eta >= s.cl_from;
}

struct LossBreakdown {
  Tensor recon, slot_contrast, cl_dec, cl_enc, reg;
  Tensor total;
};

// Combines the staged objective for training progress eta in [0, 1]:
// reconstruction and slot contrast always apply; the regularizer only in
// the warm-up stage; the ranking losses only in the final stage. Inactive
// components are ignored entirely (they may be left undefined).
Tensor stage_total(LossBreakdown& parts, Real eta, const StageSchedule& s);

}  // namespace slotvid
