#include "ctxbias/robust.hpp"

#include <cmath>

namespace ctxbias {

int noise_index(int t, int t_prime, const TypeSet& ts) {
  const int k = static_cast<int>(ts.size());
  if (t == t_prime) throw ConfigError("noise_index: no self-switch row exists");
  if (t < 0 || t >= k || t_prime < 0 || t_prime >= k)
    throw ConfigError("noise_index: type out of range");
  return t * (k - 1) + (t_prime < t ? t_prime : t_prime - 1);
}

NoisySequence sample_noisy_labels(const Sentence& s, const TypeSet& ts,
                                  double lambda, Rng& rng) {
  if (lambda < 0.0 || lambda > 1.0)
    throw ConfigError("lambda must be in [0,1]");
  NoisySequence out;
  out.labels = s.labels;
  out.noise_row.assign(s.size(), -1);

  const int k = static_cast<int>(ts.size());
  for (const Mention& m : extract_mentions(s, ts)) {
    if (!is_eligible(s, m)) continue;
    const double p = rand_u01(rng);
    if (lambda == 0.0 || p > lambda) continue;
    // t' uniform over the K-1 remaining types.
    int draw = static_cast<int>(rand_below(rng, static_cast<uint64_t>(k - 1)));
    int t_prime = draw < m.type ? draw : draw + 1;
    int row = noise_index(m.type, t_prime, ts);
    out.labels[static_cast<size_t>(m.start)] = make_label('B', t_prime, ts);
    for (int i = m.start + 1; i <= m.end; ++i)
      out.labels[static_cast<size_t>(i)] = make_label('I', t_prime, ts);
    for (int i = m.start; i <= m.end; ++i)
      out.noise_row[static_cast<size_t>(i)] = row;
    out.flipped.emplace_back(m, t_prime);
  }
  return out;
}

double loss_noisy(const Matrix& noisy_logits, const std::vector<int>& y_noisy,
                  const std::vector<int>& y_gold) {
  if (noisy_logits.rows != y_noisy.size() || y_noisy.size() != y_gold.size())
    throw ValidationError("loss_noisy: misaligned inputs");
  double loss = 0.0;
  for (size_t i = 0; i < y_noisy.size(); ++i) {
    if (y_noisy[i] == y_gold[i]) continue;
    const double* f = noisy_logits.row(i);
    loss += log_sum_exp(f, noisy_logits.cols) - f[y_noisy[i]];
  }
  return loss;
}

Dataset mask_augment(const Dataset& ds) {
  Dataset out;
  out.typeset = ds.typeset;
  out.sentences = ds.sentences;
  for (const Sentence& s : ds.sentences) {
    for (const Mention& m : eligible_mentions(s, ds.typeset)) {
      Sentence masked;
      masked.doc_id = s.doc_id;
      masked.synthetic = true;
      for (int i = 0; i < static_cast<int>(s.size()); ++i) {
        if (i == m.start) {
          masked.tokens.push_back(make_token(kMaskSym));
          masked.labels.push_back(make_label('B', m.type, ds.typeset));
          i = m.end;  // loop ++ skips past the span
          continue;
        }
        masked.tokens.push_back(s.tokens[static_cast<size_t>(i)]);
        masked.labels.push_back(s.labels[static_cast<size_t>(i)]);
      }
      out.sentences.push_back(std::move(masked));
    }
  }
  return out;
}

}  // namespace ctxbias
