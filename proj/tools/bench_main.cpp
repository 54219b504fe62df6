// Compares the serial reference path of each data-parallel kernel against
// its OpenMP version on synthetic workloads and verifies that the outputs
// are bit-identical.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "ctxbias/benchgen.hpp"
#include "ctxbias/evalkit.hpp"
#include "ctxbias/lm.hpp"
#include "ctxbias/parallel.hpp"
#include "ctxbias/tagger.hpp"

using namespace ctxbias;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch())
      .count();
}

template <typename F>
double time_ms(F&& fn, int reps) {
  double best = 1e18;
  for (int i = 0; i < reps; ++i) {
    const double t0 = now_ms();
    fn();
    best = std::min(best, now_ms() - t0);
  }
  return best;
}

void report(const char* kernel, double serial_ms, double parallel_ms, bool bitexact) {
  std::printf("%-22s serial %9.2f ms   openmp %9.2f ms   speedup %5.2fx   bitexact %s\n",
              kernel, serial_ms, parallel_ms, serial_ms / parallel_ms,
              bitexact ? "yes" : "NO");
}

bool same_bits(const Vec& a, const Vec& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

int main(int argc, char** argv) {
  int scale = 1;
  if (argc > 1) scale = std::max(1, std::atoi(argv[1]));
  std::printf("ctxbias kernel benchmark (scale %d, %d threads)\n\n", scale,
              max_threads());

  Rng rng = make_rng(7);
  SynthSpec spec;
  spec.train_size = 512 * scale;
  spec.test_size = 64;
  spec.challenge_size = 64;
  SynthData data = gen_synthetic_bias(spec, rng);

  // Tagger gradient accumulation.
  {
    TaggerConfig cfg;
    cfg.use_adv = true;
    Vocab vocab = Vocab::build(data.train);
    Rng prng = make_rng(11);
    auto [params, adv] = init_params(cfg, vocab, data.train.typeset, prng);
    std::vector<EncodedSentence> sents;
    for (const Sentence& s : data.train.sentences) {
      EncodedSentence es = encode_sentence(s, vocab, data.train.typeset);
      NoisySequence ns = sample_noisy_labels(s, data.train.typeset, cfg.lambda, prng);
      apply_noise(es, ns, data.train.typeset);
      sents.push_back(std::move(es));
    }
    std::vector<const EncodedSentence*> batch;
    for (const auto& s : sents) batch.push_back(&s);

    Gradients gs, gp;
    const double ts = time_ms(
        [&] { gs = accumulate_gradients(params, adv, batch, cfg, Exec::Serial); }, 3);
    const double tp = time_ms(
        [&] { gp = accumulate_gradients(params, adv, batch, cfg, Exec::Parallel); }, 3);
    const bool ok = same_bits(gs.d_w1.data, gp.d_w1.data) &&
                    same_bits(gs.d_embed.data, gp.d_embed.data) &&
                    same_bits(gs.d_noise_embed.data, gp.d_noise_embed.data) &&
                    gs.loss_true_sum == gp.loss_true_sum;
    report("batch gradients", ts, tp, ok);
  }

  // LM scoring.
  {
    TokenStream stream = abstract_entities(data.train);
    KNModel lm = train_kn(stream, 5, data.train.typeset.types);
    std::vector<std::vector<std::string>> queries;
    for (int rep = 0; rep < 24 * scale; ++rep)
      for (const Sentence& s : data.test.sentences) {
        std::vector<std::string> toks;
        for (const Token& t : s.tokens) toks.push_back(t.surface);
        queries.push_back(std::move(toks));
      }
    std::vector<ScoreResult> rs, rp;
    const double ts = time_ms([&] { rs = score_sentences(lm, queries, Exec::Serial); }, 3);
    const double tp = time_ms([&] { rp = score_sentences(lm, queries, Exec::Parallel); }, 3);
    bool ok = rs.size() == rp.size();
    for (size_t i = 0; ok && i < rs.size(); ++i)
      ok = rs[i].logprob == rp[i].logprob && rs[i].perplexity == rp[i].perplexity;
    report("kn scoring", ts, tp, ok);
  }

  // Candidate selection.
  {
    TokenStream stream = abstract_entities(data.train);
    KNModel lm = train_kn(stream, 5, data.train.typeset.types);
    std::vector<Candidate> candidates;
    Rng crng = make_rng(23);
    for (int rep = 0; rep < 12 * scale; ++rep)
      for (const Sentence& s : data.challenge.sentences) {
        auto mentions = extract_mentions(s, data.challenge.typeset);
        if (mentions.empty()) continue;
        Candidate c;
        for (const Token& t : s.tokens) c.tokens.push_back(t.surface);
        c.start = mentions[0].start;
        c.end = mentions[0].end;
        c.gold_type = data.challenge.typeset.name(mentions[0].type);
        c.weak_label = data.challenge.typeset.name(
            static_cast<int>(rand_below(crng, data.challenge.typeset.size())));
        c.weak_conf = rand_u01(crng);
        candidates.push_back(std::move(c));
      }
    SelectionThresholds th;
    std::vector<size_t> ss, sp;
    const double ts =
        time_ms([&] { ss = select_nrb(candidates, lm, th, true, Exec::Serial); }, 3);
    const double tp =
        time_ms([&] { sp = select_nrb(candidates, lm, th, true, Exec::Parallel); }, 3);
    report("nrb selection", ts, tp, ss == sp);
  }

  // Mention-level scoring.
  {
    Dataset big;
    big.typeset = data.train.typeset;
    for (int rep = 0; rep < 64 * scale; ++rep)
      for (const Sentence& s : data.train.sentences) big.sentences.push_back(s);
    auto labels = [&] {
      std::vector<std::vector<std::string>> out;
      for (const auto& s : big.sentences) out.push_back(s.labels);
      return out;
    }();
    EvalResult es, ep;
    const double ts = time_ms([&] { es = mention_prf(big, labels, Exec::Serial); }, 3);
    const double tp = time_ms([&] { ep = mention_prf(big, labels, Exec::Parallel); }, 3);
    report("mention prf", ts, tp,
           es.overall.tp == ep.overall.tp && es.overall.fp == ep.overall.fp &&
               es.overall.fn == ep.overall.fn);
  }

  return 0;
}
