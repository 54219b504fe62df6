#pragma once

#include <vector>

#include "ctxbias/corpus.hpp"
#include "ctxbias/linalg.hpp"
#include "ctxbias/rng.hpp"

namespace ctxbias {

// Learnable adversarial parameters, trained only by the noisy-head loss:
// one noise embedding row per ordered type pair (t -> t'), plus the noisy
// projection head over the shared hidden representation.
struct AdvParams {
  Matrix noise_embed;  // m x d, m = K * (K - 1)
  Matrix w_noisy;      // L x h
  Vec b_noisy;         // L
};

// Number of valid type switches for K types.
inline int noise_rows(int k) { return k * (k - 1); }

// Fixed bijection from ordered distinct type pairs onto [0, K*(K-1)).
int noise_index(int t, int t_prime, const TypeSet& ts);

// A per-epoch noisy relabeling of one sentence. labels differ from the
// original only inside flipped eligible mentions; every token of a flipped
// mention carries the same noise row.
struct NoisySequence {
  std::vector<std::string> labels;          // y'
  std::vector<int> noise_row;               // -1 = no noise
  std::vector<std::pair<Mention, int>> flipped;  // (original mention, t')
};

// For each eligible mention independently: with probability lambda, flip its
// type to one drawn uniformly from the other K-1 types. Non-eligible
// mentions are never flipped. Draw order is fixed (mentions by start index),
// so a given rng state yields one exact outcome.
NoisySequence sample_noisy_labels(const Sentence& s, const TypeSet& ts,
                                  double lambda, Rng& rng);

// Sum over tokens of CE(logits_i, y'_i) restricted to positions where the
// noisy label differs from the gold one. logits are pre-softmax rows, one
// per token.
double loss_noisy(const Matrix& noisy_logits, const std::vector<int>& y_noisy,
                  const std::vector<int>& y_gold);

inline constexpr const char* kMaskSym = "[MASK]";

// For every eligible mention, appends a copy of its sentence with the whole
// mention span replaced by a single [MASK] token labeled B-t. Originals are
// kept untouched; new sentences are flagged synthetic.
Dataset mask_augment(const Dataset& ds);

}  // namespace ctxbias
