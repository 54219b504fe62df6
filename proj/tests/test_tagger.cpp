#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "ctxbias/tagger.hpp"
#include "oracles.hpp"

using namespace ctxbias;

namespace {

Sentence make_sentence(const std::vector<std::string>& tokens,
                       const std::vector<std::string>& labels) {
  Sentence s;
  for (const auto& t : tokens) s.tokens.push_back(make_token(t));
  s.labels = labels;
  return s;
}

struct Fixture {
  TypeSet ts = TypeSet::default_types();
  Dataset data;
  TaggerConfig cfg;
  Vocab vocab;
  TaggerParams params;
  AdvParams adv;
  std::vector<EncodedSentence> sents;
  std::vector<const EncodedSentence*> batch;

  explicit Fixture(bool with_noise, uint64_t seed = 9) {
    data.typeset = ts;
    data.sentences.push_back(
        make_sentence({"Gonzales", "is", "a", "small", "city"},
                      {"B-LOC", "O", "O", "O", "O"}));
    data.sentences.push_back(
        make_sentence({"he", "met", "West", "Bromwich", "fans", "at", "dawn"},
                      {"O", "O", "B-ORG", "I-ORG", "O", "O", "O"}));
    cfg.embed_dim = 5;
    cfg.window = 2;
    cfg.hidden = 7;
    cfg.use_adv = with_noise;
    cfg.epochs = 1;
    vocab = Vocab::build(data);
    Rng rng = make_rng(seed);
    std::tie(params, adv) = init_params(cfg, vocab, ts, rng);
    for (const Sentence& s : data.sentences) {
      EncodedSentence es = encode_sentence(s, vocab, ts);
      if (with_noise) {
        NoisySequence ns = sample_noisy_labels(s, ts, 1.0, rng);
        apply_noise(es, ns, ts);
      }
      sents.push_back(std::move(es));
    }
    for (const auto& s : sents) batch.push_back(&s);
  }
};

bool same_bits(const Vec& a, const Vec& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("tagger") {

TEST_CASE("init determinism and shapes") {
  Fixture f(false);
  Rng r1 = make_rng(9), r2 = make_rng(9);
  auto [p1, a1] = init_params(f.cfg, f.vocab, f.ts, r1);
  auto [p2, a2] = init_params(f.cfg, f.vocab, f.ts, r2);
  CHECK(same_bits(p1.embed.data, p2.embed.data));
  CHECK(same_bits(p1.w1.data, p2.w1.data));
  CHECK(same_bits(a1.noise_embed.data, a2.noise_embed.data));

  // Shape arithmetic.
  CHECK(p1.embed.rows == f.vocab.size());
  CHECK(p1.embed.cols == 5);
  CHECK(p1.case_embed.rows == 2);
  CHECK(p1.w1.rows == 7);
  CHECK(p1.w1.cols == 5uLL * 5uLL);  // (2r+1)*d
  CHECK(p1.w_out.rows == 7);         // L = 2K+1
  CHECK(p1.w_out.cols == 7);
  CHECK(a1.noise_embed.rows == 6);   // m = K*(K-1)
  CHECK(a1.noise_embed.cols == 5);
  CHECK(a1.w_noisy.rows == 7);
  for (double x : p1.embed.data) {
    CHECK(x >= -0.1);
    CHECK(x <= 0.1);
  }
}

TEST_CASE("forward identities") {
  Fixture f(false);
  const EncodedSentence& s = f.sents[0];

  // Without noise the input representation is embedding + case embedding.
  ForwardCache c = forward(f.params, &f.adv, s, f.cfg);
  for (size_t i = 0; i < s.size(); ++i)
    for (size_t k = 0; k < 5; ++k)
      CHECK(c.u(i, k) == f.params.embed(static_cast<size_t>(s.ids[i]), k) +
                             f.params.case_embed(s.upper[i], k));

  // All-zero weights give a uniform true-head softmax.
  TaggerParams zero = f.params;
  zero.embed.fill(0.0);
  zero.case_embed.fill(0.0);
  zero.w1.fill(0.0);
  std::fill(zero.b1.begin(), zero.b1.end(), 0.0);
  zero.w_out.fill(0.0);
  std::fill(zero.b_out.begin(), zero.b_out.end(), 0.0);
  ForwardCache zc = forward(zero, nullptr, s, f.cfg);
  const size_t labels = zero.w_out.rows;
  Vec prob(labels);
  for (size_t i = 0; i < s.size(); ++i) {
    softmax(zc.logits_true.row(i), labels, prob.data());
    for (size_t k = 0; k < labels; ++k)
      CHECK(prob[k] == doctest::Approx(1.0 / static_cast<double>(labels)).epsilon(1e-12));
  }
}

TEST_CASE("noise embedding locality") {
  Fixture f(true);
  // Pick the noise row used by sentence 0 and one not used by it.
  int used_row = -1;
  for (int row : f.sents[0].noise_row)
    if (row >= 0) used_row = row;
  REQUIRE(used_row >= 0);
  int other_row = (used_row + 1) % 6;
  for (int row : f.sents[0].noise_row) REQUIRE(row != other_row);
  bool other_used_by_s1 = false;
  for (int row : f.sents[1].noise_row) other_used_by_s1 |= row == other_row;

  ForwardCache before0 = forward(f.params, &f.adv, f.sents[0], f.cfg);
  ForwardCache before1 = forward(f.params, &f.adv, f.sents[1], f.cfg);
  AdvParams perturbed = f.adv;
  perturbed.noise_embed(static_cast<size_t>(other_row), 2) += 0.05;
  ForwardCache after0 = forward(f.params, &perturbed, f.sents[0], f.cfg);
  ForwardCache after1 = forward(f.params, &perturbed, f.sents[1], f.cfg);

  CHECK(same_bits(before0.logits_true.data, after0.logits_true.data));
  if (other_used_by_s1)
    CHECK(!same_bits(before1.logits_true.data, after1.logits_true.data));
}

TEST_CASE("gradients match central finite differences") {
  Fixture f(true);
  const auto loss_true = [&] {
    return compute_losses(f.params, f.adv, f.batch, f.cfg).l_true;
  };
  const auto loss_noisy = [&] {
    return compute_losses(f.params, f.adv, f.batch, f.cfg).l_noisy;
  };

  Gradients g = accumulate_gradients(f.params, f.adv, f.batch, f.cfg, Exec::Serial);
  REQUIRE(g.loss_noisy_sum > 0.0);  // fixture flipped something
  const double tok = static_cast<double>(g.tokens);
  const double sent = static_cast<double>(g.sentences);

  auto check_tensor = [&](Vec& values, const Vec& accum, double scale,
                          const std::function<double()>& loss) {
    Vec analytic(accum.size());
    for (size_t i = 0; i < accum.size(); ++i) analytic[i] = accum[i] / scale;
    Vec numeric = oracle::fd_gradient(values, loss);
    CHECK(oracle::max_rel_err(analytic, numeric) < 1e-4);
  };

  // L_true w.r.t. every theta tensor.
  check_tensor(f.params.embed.data, g.d_embed.data, tok, loss_true);
  check_tensor(f.params.case_embed.data, g.d_case.data, tok, loss_true);
  check_tensor(f.params.w1.data, g.d_w1.data, tok, loss_true);
  check_tensor(f.params.b1, g.d_b1, tok, loss_true);
  check_tensor(f.params.w_out.data, g.d_w_out.data, tok, loss_true);
  check_tensor(f.params.b_out, g.d_b_out, tok, loss_true);

  // L_noisy w.r.t. theta' (noise embeddings chain through the encoder).
  check_tensor(f.adv.noise_embed.data, g.d_noise_embed.data, sent, loss_noisy);
  check_tensor(f.adv.w_noisy.data, g.d_w_noisy.data, sent, loss_noisy);
  check_tensor(f.adv.b_noisy, g.d_b_noisy, sent, loss_noisy);
}

TEST_CASE("stop-gradient contract") {
  Fixture f(true);
  Gradients g = accumulate_gradients(f.params, f.adv, f.batch, f.cfg, Exec::Serial);

  AdvParams adv_before = f.adv;
  apply_theta_update(f.params, g, 0.1, false);
  CHECK(same_bits(f.adv.noise_embed.data, adv_before.noise_embed.data));
  CHECK(same_bits(f.adv.w_noisy.data, adv_before.w_noisy.data));
  CHECK(same_bits(f.adv.b_noisy, adv_before.b_noisy));

  TaggerParams params_before = f.params;
  apply_adv_update(f.adv, g, 0.1);
  CHECK(same_bits(f.params.embed.data, params_before.embed.data));
  CHECK(same_bits(f.params.w1.data, params_before.w1.data));
  CHECK(same_bits(f.params.w_out.data, params_before.w_out.data));
  CHECK(!same_bits(f.adv.noise_embed.data, adv_before.noise_embed.data));
}

TEST_CASE("use_adv off leaves adv parameters untouched") {
  Fixture f(false);
  AdvParams before = f.adv;
  for (int step = 0; step < 5; ++step)
    train_step(f.params, f.adv, f.batch, f.cfg, 0.1);
  CHECK(same_bits(f.adv.noise_embed.data, before.noise_embed.data));
  CHECK(same_bits(f.adv.w_noisy.data, before.w_noisy.data));
}

TEST_CASE("frozen embeddings stay bit-identical through training") {
  TypeSet ts = TypeSet::default_types();
  Dataset data;
  data.typeset = ts;
  for (int i = 0; i < 12; ++i)
    data.sentences.push_back(make_sentence(
        {"Name" + std::to_string(i), "was", "seen", "there"}, {"B-PER", "O", "O", "O"}));

  TaggerConfig cfg;
  cfg.embed_dim = 8;
  cfg.hidden = 12;
  cfg.epochs = 6;
  cfg.seed = 3;
  cfg.freeze_embeddings = true;
  cfg.use_adv = true;

  TrainedTagger model = train_tagger(data, nullptr, cfg, Exec::Serial);
  Rng rng = make_rng(cfg.seed);
  auto [init, init_adv] = init_params(cfg, model.vocab, ts, rng);
  (void)init_adv;
  CHECK(same_bits(model.params.embed.data, init.embed.data));
  CHECK(!same_bits(model.params.w1.data, init.w1.data));
}

TEST_CASE("training determinism") {
  TypeSet ts = TypeSet::default_types();
  Dataset data;
  data.typeset = ts;
  for (int i = 0; i < 10; ++i) {
    data.sentences.push_back(make_sentence(
        {"Name" + std::to_string(i), "was", "seen", "there"}, {"B-PER", "O", "O", "O"}));
    data.sentences.push_back(make_sentence(
        {"Org" + std::to_string(i), "shares", "rose", "today"}, {"B-ORG", "O", "O", "O"}));
  }
  TaggerConfig cfg;
  cfg.embed_dim = 8;
  cfg.hidden = 10;
  cfg.epochs = 4;
  cfg.seed = 11;
  cfg.use_adv = true;

  TrainedTagger a = train_tagger(data, nullptr, cfg);
  TrainedTagger b = train_tagger(data, nullptr, cfg);
  CHECK(same_bits(a.params.embed.data, b.params.embed.data));
  CHECK(same_bits(a.params.w1.data, b.params.w1.data));
  CHECK(same_bits(a.params.w_out.data, b.params.w_out.data));
  CHECK(same_bits(a.adv.noise_embed.data, b.adv.noise_embed.data));
}

TEST_CASE("memorization drives the loss down") {
  TypeSet ts = TypeSet::default_types();
  Dataset data;
  data.typeset = ts;
  const char* names[] = {"Ada", "Bern", "Cato", "Dira", "Elba",
                         "Futa", "Gor", "Hilm", "Ina", "Jova"};
  for (int i = 0; i < 10; ++i)
    data.sentences.push_back(make_sentence(
        {names[i], "went", "to", "work"}, {i % 2 ? "B-PER" : "B-LOC", "O", "O", "O"}));

  TaggerConfig cfg;
  cfg.embed_dim = 24;
  cfg.hidden = 48;
  cfg.epochs = 200;
  cfg.lr = 0.5;
  cfg.lr_decay = 0.99;
  cfg.seed = 5;

  TrainedTagger model = train_tagger(data, nullptr, cfg);
  CHECK(model.log.back().l_true < 0.05);
}

TEST_CASE("repair_iob") {
  TypeSet ts = TypeSet::default_types();
  const int O = 0;
  const int B_PER = label_id("B-PER", ts);
  const int I_PER = label_id("I-PER", ts);
  const int I_LOC = label_id("I-LOC", ts);

  CHECK(repair_iob({O, I_PER}, ts) == std::vector<std::string>{"O", "B-PER"});
  CHECK(repair_iob({B_PER, I_PER}, ts) == std::vector<std::string>{"B-PER", "I-PER"});
  CHECK(repair_iob({B_PER, I_LOC}, ts) == std::vector<std::string>{"B-PER", "B-LOC"});
  CHECK(repair_iob({I_PER}, ts) == std::vector<std::string>{"B-PER"});

  Rng rng = make_rng(41);
  const int L = label_count(ts);
  for (int iter = 0; iter < 1000; ++iter) {
    std::vector<int> ids;
    const size_t n = 1 + rand_below(rng, 12);
    for (size_t i = 0; i < n; ++i) ids.push_back(static_cast<int>(rand_below(rng, L)));
    auto labels = repair_iob(ids, ts);
    CHECK(validate_iob(labels, ts).empty());
    // Valid sequences survive repair untouched.
    auto again = repair_iob(
        [&] {
          std::vector<int> v;
          for (const auto& l : labels) v.push_back(label_id(l, ts));
          return v;
        }(),
        ts);
    CHECK(again == labels);
  }
}

TEST_CASE("predict always emits valid IOB") {
  Fixture f(false);
  Rng rng = make_rng(2);
  for (int iter = 0; iter < 50; ++iter) {
    auto [p, a] = init_params(f.cfg, f.vocab, f.ts, rng);
    (void)a;
    for (const Sentence& s : f.data.sentences) {
      auto labels = predict(p, f.vocab, f.ts, s, f.cfg);
      CHECK(validate_iob(labels, f.ts).empty());
    }
  }
}

TEST_CASE("checkpoint round trip") {
  Fixture f(true);
  TrainedTagger model;
  model.config = f.cfg;
  model.vocab = f.vocab;
  model.typeset = f.ts;
  model.params = f.params;
  model.adv = f.adv;

  const std::string path = "test_tagger_ckpt.bin";
  save_tagger(model, path);
  TrainedTagger loaded = load_tagger(path);
  CHECK(loaded.config.embed_dim == f.cfg.embed_dim);
  CHECK(loaded.config.use_adv == f.cfg.use_adv);
  CHECK(loaded.vocab.words == f.vocab.words);
  CHECK(loaded.typeset == f.ts);
  CHECK(same_bits(loaded.params.embed.data, f.params.embed.data));
  CHECK(same_bits(loaded.params.w1.data, f.params.w1.data));
  CHECK(same_bits(loaded.adv.noise_embed.data, f.adv.noise_embed.data));

  for (const Sentence& s : f.data.sentences)
    CHECK(predict(loaded.params, loaded.vocab, loaded.typeset, s, loaded.config) ==
          predict(f.params, f.vocab, f.ts, s, f.cfg));
  std::remove(path.c_str());
}

TEST_CASE("non-finite loss aborts with diagnostics") {
  Fixture f(false);
  f.params.w_out.fill(std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(train_step(f.params, f.adv, f.batch, f.cfg, 0.1), ValidationError);
}

}  // TEST_SUITE
