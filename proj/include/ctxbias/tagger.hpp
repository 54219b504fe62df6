#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctxbias/corpus.hpp"
#include "ctxbias/linalg.hpp"
#include "ctxbias/parallel.hpp"
#include "ctxbias/rng.hpp"
#include "ctxbias/robust.hpp"

namespace ctxbias {

struct TaggerConfig {
  int embed_dim = 64;
  int window = 3;  // radius; encoder sees 2*window+1 tokens
  int hidden = 128;
  double lr = 0.1;
  double lr_decay = 0.9;  // per epoch
  int epochs = 20;
  int batch_size = 32;
  uint64_t seed = 1;
  bool freeze_embeddings = false;
  double lambda = 0.8;
  bool use_adv = false;
  bool use_mask = false;

  void validate() const;  // throws ConfigError
  int window_width() const { return 2 * window + 1; }
};

// Token vocabulary with reserved ids. Surfaces are kept case-sensitive;
// casing is modeled by the separate case-feature embedding.
struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kMask = 2;

  std::vector<std::string> words;
  std::unordered_map<std::string, int> index;

  static Vocab build(const Dataset& ds);
  int id(const std::string& surface) const;  // kUnk fallback
  size_t size() const { return words.size(); }
};

// IOB label ids: O=0, B-t=1+2t, I-t=2+2t. L = 2K+1.
int label_count(const TypeSet& ts);
int label_id(const std::string& label, const TypeSet& ts);
std::string label_name(int id, const TypeSet& ts);

// All trainable parameters of the true path (theta).
struct TaggerParams {
  Matrix embed;       // vocab x d
  Matrix case_embed;  // 2 x d
  Matrix w1;          // hidden x (2r+1)*d
  Vec b1;             // hidden
  Matrix w_out;       // L x hidden
  Vec b_out;          // L
};

// Uniform init in [-0.1, 0.1]; deterministic draw order given the rng state.
std::pair<TaggerParams, AdvParams> init_params(const TaggerConfig& cfg,
                                               const Vocab& vocab,
                                               const TypeSet& ts, Rng& rng);

// A sentence mapped to model inputs. noisy/noise_row start equal to
// gold/-1 and are refreshed per epoch when adversarial noise is on.
struct EncodedSentence {
  std::vector<int> ids;
  std::vector<uint8_t> upper;
  std::vector<int> gold;
  std::vector<int> noisy;
  std::vector<int> noise_row;
  bool has_noise = false;

  size_t size() const { return ids.size(); }
};

EncodedSentence encode_sentence(const Sentence& s, const Vocab& vocab,
                                const TypeSet& ts);
void apply_noise(EncodedSentence& es, const NoisySequence& ns, const TypeSet& ts);
void clear_noise(EncodedSentence& es);

struct ForwardCache {
  Matrix u;      // n x d input representations (noise included)
  Vec u_pad;     // d, representation of out-of-sentence positions
  Matrix h;      // n x hidden
  Matrix logits_true;   // n x L
  Matrix logits_noisy;  // n x L; empty when adv == nullptr
};

// adv == nullptr skips the noisy head (inference path). Inference callers
// must pass sentences without noise assignments.
ForwardCache forward(const TaggerParams& params, const AdvParams* adv,
                     const EncodedSentence& s, const TaggerConfig& cfg);

// Unnormalized gradient sums over a batch plus the loss bookkeeping needed
// to normalize them (L_true is a token mean, L_noisy a sentence mean).
struct Gradients {
  Matrix d_embed, d_case, d_w1, d_w_out;
  Vec d_b1, d_b_out;
  Matrix d_noise_embed, d_w_noisy;
  Vec d_b_noisy;
  double loss_true_sum = 0.0;
  double loss_noisy_sum = 0.0;
  uint64_t tokens = 0;
  uint64_t sentences = 0;

  double loss_true() const { return tokens ? loss_true_sum / static_cast<double>(tokens) : 0.0; }
  double loss_noisy() const { return sentences ? loss_noisy_sum / static_cast<double>(sentences) : 0.0; }
};

// Computes both losses' gradients over the batch. The reduction follows a
// fixed tree (8-sentence chunks combined in order), so Serial and Parallel
// agree bit-for-bit at any thread count. use_adv=false leaves the adv slots
// untouched at zero.
Gradients accumulate_gradients(const TaggerParams& params, const AdvParams& adv,
                               const std::vector<const EncodedSentence*>& batch,
                               const TaggerConfig& cfg, Exec exec = Exec::Parallel);

// SGD application. The theta update never touches AdvParams; the adv update
// never touches TaggerParams; freeze keeps the token embedding table fixed.
void apply_theta_update(TaggerParams& params, const Gradients& g, double lr,
                        bool freeze_embeddings);
void apply_adv_update(AdvParams& adv, const Gradients& g, double lr);

struct StepLosses {
  double l_true = 0.0;
  double l_noisy = 0.0;
};

// One optimizer step over a batch: theta from L_true, theta' from L_noisy.
StepLosses train_step(TaggerParams& params, AdvParams& adv,
                      const std::vector<const EncodedSentence*>& batch,
                      const TaggerConfig& cfg, double lr, Exec exec = Exec::Parallel);

// Losses only (shared forward pass); used for diagnostics and testing.
StepLosses compute_losses(const TaggerParams& params, const AdvParams& adv,
                          const std::vector<const EncodedSentence*>& batch,
                          const TaggerConfig& cfg);

// Rewrites per-token label ids into a valid IOB2 sequence: an I- label that
// cannot continue its predecessor becomes B-.
std::vector<std::string> repair_iob(const std::vector<int>& label_ids,
                                    const TypeSet& ts);

// Per-token argmax over the true head followed by repair_iob. Output always
// validates.
std::vector<std::string> predict(const TaggerParams& params, const Vocab& vocab,
                                 const TypeSet& ts, const Sentence& s,
                                 const TaggerConfig& cfg);

std::vector<std::vector<std::string>> predict_dataset(const TaggerParams& params,
                                                      const Vocab& vocab,
                                                      const TypeSet& ts,
                                                      const Dataset& ds,
                                                      const TaggerConfig& cfg,
                                                      Exec exec = Exec::Parallel);

struct TrainLogEntry {
  int epoch = 0;
  double l_true = 0.0;
  double l_noisy = 0.0;
  double dev_f1 = -1.0;  // -1 when no dev set was given
};

struct TrainedTagger {
  TaggerConfig config;
  Vocab vocab;
  TypeSet typeset;
  TaggerParams params;
  AdvParams adv;
  std::vector<TrainLogEntry> log;
};

// Full training run: optional mask augmentation, per-epoch noise resampling,
// shuffled batches, decayed SGD. Deterministic given config.seed and the
// dataset order.
TrainedTagger train_tagger(const Dataset& train, const Dataset* dev,
                           const TaggerConfig& cfg, Exec exec = Exec::Parallel);

void save_tagger(const TrainedTagger& model, const std::string& path);
TrainedTagger load_tagger(const std::string& path);

}  // namespace ctxbias
