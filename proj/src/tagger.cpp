#include "ctxbias/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ctxbias/evalkit.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ctxbias {

void TaggerConfig::validate() const {
  if (embed_dim < 1 || window < 1 || hidden < 1 || epochs < 1 || batch_size < 1)
    throw ConfigError("embed_dim, window, hidden, epochs and batch_size must be >= 1");
  if (lambda < 0.0 || lambda > 1.0)
    throw ConfigError("lambda must be in [0,1], got " + std::to_string(lambda));
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (lr_decay <= 0.0 || lr_decay > 1.0) throw ConfigError("lr decay must be in (0,1]");
}

Vocab Vocab::build(const Dataset& ds) {
  Vocab v;
  v.words = {"<pad>", "<unk>", kMaskSym};
  for (size_t i = 0; i < v.words.size(); ++i) v.index[v.words[i]] = static_cast<int>(i);
  for (const Sentence& s : ds.sentences) {
    for (const Token& t : s.tokens) {
      if (v.index.emplace(t.surface, static_cast<int>(v.words.size())).second)
        v.words.push_back(t.surface);
    }
  }
  return v;
}

int Vocab::id(const std::string& surface) const {
  auto it = index.find(surface);
  return it == index.end() ? kUnk : it->second;
}

int label_count(const TypeSet& ts) { return 2 * static_cast<int>(ts.size()) + 1; }

int label_id(const std::string& label, const TypeSet& ts) {
  LabelParts p = parse_label(label, ts);
  if (p.prefix == 'O') return 0;
  return (p.prefix == 'B' ? 1 : 2) + 2 * p.type;
}

std::string label_name(int id, const TypeSet& ts) {
  if (id == 0) return "O";
  int t = (id - 1) / 2;
  return make_label((id - 1) % 2 == 0 ? 'B' : 'I', t, ts);
}

std::pair<TaggerParams, AdvParams> init_params(const TaggerConfig& cfg,
                                               const Vocab& vocab,
                                               const TypeSet& ts, Rng& rng) {
  cfg.validate();
  if (vocab.size() == 0) throw ConfigError("empty vocabulary");
  const size_t d = static_cast<size_t>(cfg.embed_dim);
  const size_t h = static_cast<size_t>(cfg.hidden);
  const size_t win = static_cast<size_t>(cfg.window_width());
  const size_t labels = static_cast<size_t>(label_count(ts));
  const size_t m = static_cast<size_t>(noise_rows(static_cast<int>(ts.size())));

  auto uniform_fill = [&rng](Vec& v) {
    for (double& x : v) x = rand_u01(rng) * 0.2 - 0.1;
  };

  TaggerParams p;
  p.embed = Matrix(vocab.size(), d);
  p.case_embed = Matrix(2, d);
  p.w1 = Matrix(h, win * d);
  p.b1.assign(h, 0.0);
  p.w_out = Matrix(labels, h);
  p.b_out.assign(labels, 0.0);

  AdvParams a;
  a.noise_embed = Matrix(m, d);
  a.w_noisy = Matrix(labels, h);
  a.b_noisy.assign(labels, 0.0);

  uniform_fill(p.embed.data);
  uniform_fill(p.case_embed.data);
  uniform_fill(p.w1.data);
  uniform_fill(p.b1);
  uniform_fill(p.w_out.data);
  uniform_fill(p.b_out);
  uniform_fill(a.noise_embed.data);
  uniform_fill(a.w_noisy.data);
  uniform_fill(a.b_noisy);
  return {std::move(p), std::move(a)};
}

EncodedSentence encode_sentence(const Sentence& s, const Vocab& vocab,
                                const TypeSet& ts) {
  EncodedSentence es;
  es.ids.reserve(s.size());
  es.upper.reserve(s.size());
  es.gold.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    es.ids.push_back(vocab.id(s.tokens[i].surface));
    es.upper.push_back(s.tokens[i].starts_upper ? 1 : 0);
    es.gold.push_back(label_id(s.labels[i], ts));
  }
  es.noisy = es.gold;
  es.noise_row.assign(s.size(), -1);
  return es;
}

void apply_noise(EncodedSentence& es, const NoisySequence& ns, const TypeSet& ts) {
  es.noisy.resize(es.size());
  for (size_t i = 0; i < es.size(); ++i) es.noisy[i] = label_id(ns.labels[i], ts);
  es.noise_row = ns.noise_row;
  es.has_noise = !ns.flipped.empty();
}

void clear_noise(EncodedSentence& es) {
  es.noisy = es.gold;
  es.noise_row.assign(es.size(), -1);
  es.has_noise = false;
}

ForwardCache forward(const TaggerParams& params, const AdvParams* adv,
                     const EncodedSentence& s, const TaggerConfig& cfg) {
  const size_t n = s.size();
  const size_t d = static_cast<size_t>(cfg.embed_dim);
  const size_t h = params.w1.rows;
  const size_t labels = params.w_out.rows;
  const int r = cfg.window;
  const size_t win = static_cast<size_t>(cfg.window_width());

  ForwardCache c;
  c.u = Matrix(n, d);
  for (size_t i = 0; i < n; ++i) {
    const double* e = params.embed.row(static_cast<size_t>(s.ids[i]));
    const double* ce = params.case_embed.row(s.upper[i]);
    double* u = c.u.row(i);
    for (size_t k = 0; k < d; ++k) u[k] = e[k] + ce[k];
    if (s.noise_row[i] >= 0 && adv != nullptr) {
      const double* ne = adv->noise_embed.row(static_cast<size_t>(s.noise_row[i]));
      for (size_t k = 0; k < d; ++k) u[k] += ne[k];
    }
  }
  c.u_pad.assign(d, 0.0);
  {
    const double* e = params.embed.row(Vocab::kPad);
    const double* ce = params.case_embed.row(0);
    for (size_t k = 0; k < d; ++k) c.u_pad[k] = e[k] + ce[k];
  }

  c.h = Matrix(n, h);
  c.logits_true = Matrix(n, labels);
  if (adv != nullptr) c.logits_noisy = Matrix(n, labels);

  Vec window_buf(win * d);
  for (size_t i = 0; i < n; ++i) {
    for (size_t slot = 0; slot < win; ++slot) {
      const int j = static_cast<int>(i) - r + static_cast<int>(slot);
      const double* src = (j < 0 || j >= static_cast<int>(n))
                              ? c.u_pad.data()
                              : c.u.row(static_cast<size_t>(j));
      std::memcpy(window_buf.data() + slot * d, src, d * sizeof(double));
    }
    double* hi = c.h.row(i);
    matvec(params.w1, window_buf.data(), hi);
    for (size_t k = 0; k < h; ++k) hi[k] = std::tanh(hi[k] + params.b1[k]);

    double* f = c.logits_true.row(i);
    matvec(params.w_out, hi, f);
    for (size_t k = 0; k < labels; ++k) f[k] += params.b_out[k];

    if (adv != nullptr) {
      double* fn = c.logits_noisy.row(i);
      matvec(adv->w_noisy, hi, fn);
      for (size_t k = 0; k < labels; ++k) fn[k] += adv->b_noisy[k];
    }
  }
  return c;
}

namespace {

// Per-chunk accumulation buffer. Dense tensors carry running sums; embedding
// deltas are kept as (row, vector) appends in a canonical order so the merge
// into the batch-level gradient is order-stable.
struct ChunkGrad {
  Matrix w1, w_out, w_noisy;
  Vec b1, b_out, b_noisy;
  std::vector<std::pair<int, Vec>> embed_rows;
  std::vector<std::pair<int, Vec>> case_rows;
  std::vector<std::pair<int, Vec>> noise_rows;
  double loss_true_sum = 0.0;
  double loss_noisy_sum = 0.0;
  uint64_t tokens = 0;
  uint64_t sentences = 0;

  ChunkGrad(const TaggerParams& p, const AdvParams& a)
      : w1(p.w1.rows, p.w1.cols),
        w_out(p.w_out.rows, p.w_out.cols),
        w_noisy(a.w_noisy.rows, a.w_noisy.cols),
        b1(p.b1.size(), 0.0),
        b_out(p.b_out.size(), 0.0),
        b_noisy(a.b_noisy.size(), 0.0) {}
};

void backward_sentence(const TaggerParams& params, const AdvParams& adv,
                       const EncodedSentence& s, const TaggerConfig& cfg,
                       bool use_adv, ChunkGrad& g) {
  const ForwardCache c = forward(params, use_adv ? &adv : nullptr, s, cfg);
  const size_t n = s.size();
  const size_t d = static_cast<size_t>(cfg.embed_dim);
  const size_t h = params.w1.rows;
  const size_t labels = params.w_out.rows;
  const int r = cfg.window;
  const size_t win = static_cast<size_t>(cfg.window_width());

  Matrix du_true(n, d);
  Vec du_pad_true(d, 0.0);
  Matrix du_noisy;
  if (use_adv && s.has_noise) du_noisy = Matrix(n, d);

  Vec prob(labels), g_out(labels), dh(h), da(h), dwin(win * d), window_buf(win * d);

  for (size_t i = 0; i < n; ++i) {
    for (size_t slot = 0; slot < win; ++slot) {
      const int j = static_cast<int>(i) - r + static_cast<int>(slot);
      const double* src = (j < 0 || j >= static_cast<int>(n))
                              ? c.u_pad.data()
                              : c.u.row(static_cast<size_t>(j));
      std::memcpy(window_buf.data() + slot * d, src, d * sizeof(double));
    }
    const double* hi = c.h.row(i);

    // True head: token-level cross entropy against the gold label.
    {
      const double* f = c.logits_true.row(i);
      g.loss_true_sum += log_sum_exp(f, labels) - f[s.gold[i]];
      softmax(f, labels, prob.data());
      for (size_t k = 0; k < labels; ++k) g_out[k] = prob[k];
      g_out[static_cast<size_t>(s.gold[i])] -= 1.0;

      outer_add(g.w_out, g_out.data(), hi);
      vec_add(g.b_out, g_out);

      std::fill(dh.begin(), dh.end(), 0.0);
      matvec_transpose_add(params.w_out, g_out.data(), dh.data());
      for (size_t k = 0; k < h; ++k) da[k] = (1.0 - hi[k] * hi[k]) * dh[k];

      outer_add(g.w1, da.data(), window_buf.data());
      vec_add(g.b1, da);

      std::fill(dwin.begin(), dwin.end(), 0.0);
      matvec_transpose_add(params.w1, da.data(), dwin.data());
      for (size_t slot = 0; slot < win; ++slot) {
        const int j = static_cast<int>(i) - r + static_cast<int>(slot);
        double* dst = (j < 0 || j >= static_cast<int>(n))
                          ? du_pad_true.data()
                          : du_true.row(static_cast<size_t>(j));
        const double* piece = dwin.data() + slot * d;
        for (size_t k = 0; k < d; ++k) dst[k] += piece[k];
      }
    }

    // Noisy head: only flipped positions contribute; gradients flow to the
    // noisy projection and, through the frozen encoder, to noise embeddings.
    if (use_adv && s.has_noise && s.noisy[i] != s.gold[i]) {
      const double* fn = c.logits_noisy.row(i);
      g.loss_noisy_sum += log_sum_exp(fn, labels) - fn[s.noisy[i]];
      softmax(fn, labels, prob.data());
      for (size_t k = 0; k < labels; ++k) g_out[k] = prob[k];
      g_out[static_cast<size_t>(s.noisy[i])] -= 1.0;

      outer_add(g.w_noisy, g_out.data(), hi);
      vec_add(g.b_noisy, g_out);

      std::fill(dh.begin(), dh.end(), 0.0);
      matvec_transpose_add(adv.w_noisy, g_out.data(), dh.data());
      for (size_t k = 0; k < h; ++k) da[k] = (1.0 - hi[k] * hi[k]) * dh[k];

      std::fill(dwin.begin(), dwin.end(), 0.0);
      matvec_transpose_add(params.w1, da.data(), dwin.data());
      for (size_t slot = 0; slot < win; ++slot) {
        const int j = static_cast<int>(i) - r + static_cast<int>(slot);
        if (j < 0 || j >= static_cast<int>(n)) continue;  // pads carry no noise
        double* dst = du_noisy.row(static_cast<size_t>(j));
        const double* piece = dwin.data() + slot * d;
        for (size_t k = 0; k < d; ++k) dst[k] += piece[k];
      }
    }
  }

  for (size_t j = 0; j < n; ++j) {
    g.embed_rows.emplace_back(s.ids[j], Vec(du_true.row(j), du_true.row(j) + d));
    g.case_rows.emplace_back(s.upper[j], Vec(du_true.row(j), du_true.row(j) + d));
  }
  g.embed_rows.emplace_back(Vocab::kPad, du_pad_true);
  g.case_rows.emplace_back(0, std::move(du_pad_true));
  if (use_adv && s.has_noise) {
    for (size_t j = 0; j < n; ++j) {
      if (s.noise_row[j] < 0) continue;
      g.noise_rows.emplace_back(s.noise_row[j], Vec(du_noisy.row(j), du_noisy.row(j) + d));
    }
  }

  g.tokens += n;
  g.sentences += 1;
}

constexpr size_t kChunkSize = 8;

}  // namespace

Gradients accumulate_gradients(const TaggerParams& params, const AdvParams& adv,
                               const std::vector<const EncodedSentence*>& batch,
                               const TaggerConfig& cfg, Exec exec) {
  const size_t d = static_cast<size_t>(cfg.embed_dim);
  Gradients g;
  g.d_embed = Matrix(params.embed.rows, d);
  g.d_case = Matrix(2, d);
  g.d_w1 = Matrix(params.w1.rows, params.w1.cols);
  g.d_b1.assign(params.b1.size(), 0.0);
  g.d_w_out = Matrix(params.w_out.rows, params.w_out.cols);
  g.d_b_out.assign(params.b_out.size(), 0.0);
  g.d_noise_embed = Matrix(adv.noise_embed.rows, adv.noise_embed.cols);
  g.d_w_noisy = Matrix(adv.w_noisy.rows, adv.w_noisy.cols);
  g.d_b_noisy.assign(adv.b_noisy.size(), 0.0);

  const size_t nchunks = (batch.size() + kChunkSize - 1) / kChunkSize;
  std::vector<ChunkGrad> partials;
  partials.reserve(nchunks);
  for (size_t i = 0; i < nchunks; ++i) partials.emplace_back(params, adv);

  const int64_t nc = static_cast<int64_t>(nchunks);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
#endif
  for (int64_t ci = 0; ci < nc; ++ci) {
    const size_t begin = static_cast<size_t>(ci) * kChunkSize;
    const size_t end = std::min(begin + kChunkSize, batch.size());
    for (size_t si = begin; si < end; ++si)
      backward_sentence(params, adv, *batch[si], cfg, cfg.use_adv,
                        partials[static_cast<size_t>(ci)]);
  }
  (void)exec;

  // Merge partials in chunk order; appends replay in insertion order. This
  // summation tree is what both execution policies produce.
  for (ChunkGrad& p : partials) {
    g.d_w1.add(p.w1);
    vec_add(g.d_b1, p.b1);
    g.d_w_out.add(p.w_out);
    vec_add(g.d_b_out, p.b_out);
    g.d_w_noisy.add(p.w_noisy);
    vec_add(g.d_b_noisy, p.b_noisy);
    for (const auto& [row, vec] : p.embed_rows) {
      double* dst = g.d_embed.row(static_cast<size_t>(row));
      for (size_t k = 0; k < d; ++k) dst[k] += vec[k];
    }
    for (const auto& [row, vec] : p.case_rows) {
      double* dst = g.d_case.row(static_cast<size_t>(row));
      for (size_t k = 0; k < d; ++k) dst[k] += vec[k];
    }
    for (const auto& [row, vec] : p.noise_rows) {
      double* dst = g.d_noise_embed.row(static_cast<size_t>(row));
      for (size_t k = 0; k < d; ++k) dst[k] += vec[k];
    }
    g.loss_true_sum += p.loss_true_sum;
    g.loss_noisy_sum += p.loss_noisy_sum;
    g.tokens += p.tokens;
    g.sentences += p.sentences;
  }
  return g;
}

void apply_theta_update(TaggerParams& params, const Gradients& g, double lr,
                        bool freeze_embeddings) {
  if (g.tokens == 0) return;
  const double scale = lr / static_cast<double>(g.tokens);
  auto axpy = [scale](Vec& dst, const Vec& src) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] -= scale * src[i];
  };
  if (!freeze_embeddings) axpy(params.embed.data, g.d_embed.data);
  axpy(params.case_embed.data, g.d_case.data);
  axpy(params.w1.data, g.d_w1.data);
  axpy(params.b1, g.d_b1);
  axpy(params.w_out.data, g.d_w_out.data);
  axpy(params.b_out, g.d_b_out);
}

void apply_adv_update(AdvParams& adv, const Gradients& g, double lr) {
  if (g.sentences == 0) return;
  const double scale = lr / static_cast<double>(g.sentences);
  auto axpy = [scale](Vec& dst, const Vec& src) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] -= scale * src[i];
  };
  axpy(adv.noise_embed.data, g.d_noise_embed.data);
  axpy(adv.w_noisy.data, g.d_w_noisy.data);
  axpy(adv.b_noisy, g.d_b_noisy);
}

StepLosses train_step(TaggerParams& params, AdvParams& adv,
                      const std::vector<const EncodedSentence*>& batch,
                      const TaggerConfig& cfg, double lr, Exec exec) {
  Gradients g = accumulate_gradients(params, adv, batch, cfg, exec);
  StepLosses losses{g.loss_true(), g.loss_noisy()};
  if (!std::isfinite(losses.l_true) || !std::isfinite(losses.l_noisy))
    throw ValidationError("non-finite loss in train_step");
  apply_theta_update(params, g, lr, cfg.freeze_embeddings);
  if (cfg.use_adv) apply_adv_update(adv, g, lr);
  return losses;
}

StepLosses compute_losses(const TaggerParams& params, const AdvParams& adv,
                          const std::vector<const EncodedSentence*>& batch,
                          const TaggerConfig& cfg) {
  StepLosses out;
  uint64_t tokens = 0;
  for (const EncodedSentence* s : batch) {
    ForwardCache c = forward(params, cfg.use_adv ? &adv : nullptr, *s, cfg);
    const size_t labels = params.w_out.rows;
    for (size_t i = 0; i < s->size(); ++i) {
      const double* f = c.logits_true.row(i);
      out.l_true += log_sum_exp(f, labels) - f[s->gold[i]];
      if (cfg.use_adv && s->noisy[i] != s->gold[i]) {
        const double* fn = c.logits_noisy.row(i);
        out.l_noisy += log_sum_exp(fn, labels) - fn[s->noisy[i]];
      }
    }
    tokens += s->size();
  }
  if (tokens) out.l_true /= static_cast<double>(tokens);
  if (!batch.empty()) out.l_noisy /= static_cast<double>(batch.size());
  return out;
}

std::vector<std::string> repair_iob(const std::vector<int>& label_ids,
                                    const TypeSet& ts) {
  std::vector<std::string> out(label_ids.size());
  char prev_prefix = 'O';
  int prev_type = -1;
  for (size_t i = 0; i < label_ids.size(); ++i) {
    const int id = label_ids[i];
    if (id == 0) {
      out[i] = "O";
      prev_prefix = 'O';
      prev_type = -1;
      continue;
    }
    int t = (id - 1) / 2;
    char prefix = (id - 1) % 2 == 0 ? 'B' : 'I';
    if (prefix == 'I' && !(prev_prefix != 'O' && prev_type == t)) prefix = 'B';
    out[i] = make_label(prefix, t, ts);
    prev_prefix = prefix;
    prev_type = t;
  }
  return out;
}

std::vector<std::string> predict(const TaggerParams& params, const Vocab& vocab,
                                 const TypeSet& ts, const Sentence& s,
                                 const TaggerConfig& cfg) {
  EncodedSentence es = encode_sentence(s, vocab, ts);
  ForwardCache c = forward(params, nullptr, es, cfg);
  const size_t labels = params.w_out.rows;

  std::vector<int> ids(es.size());
  for (size_t i = 0; i < es.size(); ++i) {
    const double* f = c.logits_true.row(i);
    int best = 0;
    for (size_t k = 1; k < labels; ++k)
      if (f[k] > f[best]) best = static_cast<int>(k);
    ids[i] = best;
  }
  return repair_iob(ids, ts);
}

std::vector<std::vector<std::string>> predict_dataset(const TaggerParams& params,
                                                      const Vocab& vocab,
                                                      const TypeSet& ts,
                                                      const Dataset& ds,
                                                      const TaggerConfig& cfg,
                                                      Exec exec) {
  std::vector<std::vector<std::string>> out(ds.sentences.size());
  const int64_t n = static_cast<int64_t>(ds.sentences.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
#endif
  for (int64_t i = 0; i < n; ++i)
    out[static_cast<size_t>(i)] =
        predict(params, vocab, ts, ds.sentences[static_cast<size_t>(i)], cfg);
  (void)exec;
  return out;
}

TrainedTagger train_tagger(const Dataset& train, const Dataset* dev,
                           const TaggerConfig& cfg, Exec exec) {
  cfg.validate();
  TrainedTagger model;
  model.config = cfg;
  model.typeset = train.typeset;

  Dataset data = cfg.use_mask ? mask_augment(train) : train;
  model.vocab = Vocab::build(data);

  std::vector<EncodedSentence> sents;
  sents.reserve(data.sentences.size());
  for (const Sentence& s : data.sentences)
    sents.push_back(encode_sentence(s, model.vocab, model.typeset));

  Rng rng = make_rng(cfg.seed);
  auto [params, adv] = init_params(cfg, model.vocab, model.typeset, rng);

  const size_t n = sents.size();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr * std::pow(cfg.lr_decay, epoch);

    // Fresh noisy relabeling every epoch, drawn in dataset order.
    if (cfg.use_adv) {
      for (size_t i = 0; i < n; ++i) {
        NoisySequence ns =
            sample_noisy_labels(data.sentences[i], model.typeset, cfg.lambda, rng);
        apply_noise(sents[i], ns, model.typeset);
      }
    }

    std::vector<size_t> order = random_permutation(n, rng);
    double epoch_true = 0.0, epoch_noisy = 0.0;
    size_t batches = 0;
    for (size_t begin = 0; begin < n; begin += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(begin + static_cast<size_t>(cfg.batch_size), n);
      std::vector<const EncodedSentence*> batch;
      batch.reserve(end - begin);
      for (size_t k = begin; k < end; ++k) batch.push_back(&sents[order[k]]);
      StepLosses losses;
      try {
        losses = train_step(params, adv, batch, cfg, lr, exec);
      } catch (const ValidationError& e) {
        throw ValidationError(std::string(e.what()) + " (epoch " +
                              std::to_string(epoch) + ", batch " +
                              std::to_string(batches) + ")");
      }
      epoch_true += losses.l_true;
      epoch_noisy += losses.l_noisy;
      ++batches;
    }

    TrainLogEntry entry;
    entry.epoch = epoch;
    entry.l_true = batches ? epoch_true / static_cast<double>(batches) : 0.0;
    entry.l_noisy = batches ? epoch_noisy / static_cast<double>(batches) : 0.0;
    if (dev != nullptr) {
      auto preds = predict_dataset(params, model.vocab, model.typeset, *dev, cfg, exec);
      entry.dev_f1 = mention_prf(*dev, preds).overall.f1;
    }
    model.log.push_back(entry);
  }

  model.params = std::move(params);
  model.adv = std::move(adv);
  return model;
}

namespace {

constexpr uint32_t kTaggerMagic = 0x47544243;  // "CBTG"
constexpr uint32_t kTaggerVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("truncated checkpoint");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  uint64_t len = get<uint64_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw ParseError("truncated checkpoint");
  return s;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  put<uint64_t>(out, m.rows);
  put<uint64_t>(out, m.cols);
  out.write(reinterpret_cast<const char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

Matrix get_matrix(std::istream& in) {
  uint64_t rows = get<uint64_t>(in);
  uint64_t cols = get<uint64_t>(in);
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data.data()),
          static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  if (!in) throw ParseError("truncated checkpoint");
  return m;
}

void put_vec(std::ostream& out, const Vec& v) {
  put<uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Vec get_vec(std::istream& in) {
  uint64_t n = get<uint64_t>(in);
  Vec v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ParseError("truncated checkpoint");
  return v;
}

}  // namespace

void save_tagger(const TrainedTagger& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  put(out, kTaggerMagic);
  put(out, kTaggerVersion);
  const TaggerConfig& c = model.config;
  put<int32_t>(out, c.embed_dim);
  put<int32_t>(out, c.window);
  put<int32_t>(out, c.hidden);
  put(out, c.lr);
  put(out, c.lr_decay);
  put<int32_t>(out, c.epochs);
  put<int32_t>(out, c.batch_size);
  put<uint64_t>(out, c.seed);
  put<uint8_t>(out, c.freeze_embeddings ? 1 : 0);
  put(out, c.lambda);
  put<uint8_t>(out, c.use_adv ? 1 : 0);
  put<uint8_t>(out, c.use_mask ? 1 : 0);
  put<uint64_t>(out, model.typeset.size());
  for (const auto& t : model.typeset.types) put_string(out, t);
  put<uint64_t>(out, model.vocab.size());
  for (const auto& w : model.vocab.words) put_string(out, w);
  put_matrix(out, model.params.embed);
  put_matrix(out, model.params.case_embed);
  put_matrix(out, model.params.w1);
  put_vec(out, model.params.b1);
  put_matrix(out, model.params.w_out);
  put_vec(out, model.params.b_out);
  put_matrix(out, model.adv.noise_embed);
  put_matrix(out, model.adv.w_noisy);
  put_vec(out, model.adv.b_noisy);
  if (!out) throw IoError("write failed: " + path);
}

TrainedTagger load_tagger(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  if (get<uint32_t>(in) != kTaggerMagic)
    throw ParseError(path + ": not a tagger checkpoint");
  if (get<uint32_t>(in) != kTaggerVersion)
    throw ParseError(path + ": unsupported checkpoint version");
  TrainedTagger model;
  TaggerConfig& c = model.config;
  c.embed_dim = get<int32_t>(in);
  c.window = get<int32_t>(in);
  c.hidden = get<int32_t>(in);
  c.lr = get<double>(in);
  c.lr_decay = get<double>(in);
  c.epochs = get<int32_t>(in);
  c.batch_size = get<int32_t>(in);
  c.seed = get<uint64_t>(in);
  c.freeze_embeddings = get<uint8_t>(in) != 0;
  c.lambda = get<double>(in);
  c.use_adv = get<uint8_t>(in) != 0;
  c.use_mask = get<uint8_t>(in) != 0;
  uint64_t ntypes = get<uint64_t>(in);
  std::vector<std::string> names;
  for (uint64_t i = 0; i < ntypes; ++i) names.push_back(get_string(in));
  model.typeset = TypeSet(names);
  uint64_t nvocab = get<uint64_t>(in);
  for (uint64_t i = 0; i < nvocab; ++i) {
    model.vocab.words.push_back(get_string(in));
    model.vocab.index[model.vocab.words.back()] = static_cast<int>(i);
  }
  model.params.embed = get_matrix(in);
  model.params.case_embed = get_matrix(in);
  model.params.w1 = get_matrix(in);
  model.params.b1 = get_vec(in);
  model.params.w_out = get_matrix(in);
  model.params.b_out = get_vec(in);
  model.adv.noise_embed = get_matrix(in);
  model.adv.w_noisy = get_matrix(in);
  model.adv.b_noisy = get_vec(in);
  return model;
}

}  // namespace ctxbias
