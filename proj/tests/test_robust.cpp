#include "doctest.h"

#include <cmath>
#include <set>

#include "ctxbias/robust.hpp"
#include "oracles.hpp"

using namespace ctxbias;

namespace {

Sentence eligible_sentence(const std::string& name, const std::string& type) {
  Sentence s;
  for (const auto& w : {name, std::string("was"), std::string("seen"), std::string("there")})
    s.tokens.push_back(make_token(w));
  s.labels = {"B-" + type, "O", "O", "O"};
  return s;
}

Sentence ineligible_sentence(const std::string& name, const std::string& type) {
  Sentence s;
  for (const auto& w : {std::string("at"), name, std::string("today")})
    s.tokens.push_back(make_token(w));
  s.labels = {"O", "B-" + type, "O"};
  return s;
}

}  // namespace

TEST_SUITE("robust") {

TEST_CASE("noise_index bijection") {
  TypeSet ts = TypeSet::default_types();
  CHECK(noise_index(ts.index_of("PER"), ts.index_of("LOC"), ts) == 0);
  CHECK_THROWS_AS(noise_index(1, 1, ts), ConfigError);

  // All ordered pairs cover 0..m-1 exactly once, for K in 2..6.
  for (int k = 2; k <= 6; ++k) {
    std::vector<std::string> names;
    for (int i = 0; i < k; ++i) names.push_back("T" + std::to_string(i));
    TypeSet set(names);
    std::set<int> seen;
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        if (a == b) continue;
        int idx = noise_index(a, b, set);
        CHECK(idx >= 0);
        CHECK(idx < noise_rows(k));
        CHECK(seen.insert(idx).second);
      }
    CHECK(static_cast<int>(seen.size()) == k * (k - 1));
  }
}

TEST_CASE("sample_noisy_labels extremes") {
  TypeSet ts = TypeSet::default_types();
  Sentence s = eligible_sentence("Gonzales", "LOC");
  Rng rng = make_rng(1);

  NoisySequence zero = sample_noisy_labels(s, ts, 0.0, rng);
  CHECK(zero.labels == s.labels);
  CHECK(zero.flipped.empty());
  for (int row : zero.noise_row) CHECK(row == -1);

  for (int iter = 0; iter < 200; ++iter) {
    NoisySequence all = sample_noisy_labels(s, ts, 1.0, rng);
    REQUIRE(all.flipped.size() == 1);
    CHECK(all.labels[0] != "B-LOC");
    CHECK(all.labels[0].substr(0, 2) == "B-");
    CHECK(all.noise_row[0] ==
          noise_index(ts.index_of("LOC"), all.flipped[0].second, ts));
  }

  // Ineligible mentions are never flipped.
  Sentence inel = ineligible_sentence("Smith", "PER");
  for (int iter = 0; iter < 100; ++iter) {
    NoisySequence ns = sample_noisy_labels(inel, ts, 1.0, rng);
    CHECK(ns.labels == inel.labels);
    CHECK(ns.flipped.empty());
  }
}

TEST_CASE("sampling statistics at lambda 0.8") {
  TypeSet ts = TypeSet::default_types();
  Rng rng = make_rng(2024);
  const int n = 10000;
  int flips = 0;
  std::map<std::string, int> replacement;
  for (int i = 0; i < n; ++i) {
    Sentence s = eligible_sentence("Gonzales", "LOC");
    NoisySequence ns = sample_noisy_labels(s, ts, 0.8, rng);
    if (ns.flipped.empty()) continue;
    ++flips;
    const std::string alt = ts.name(ns.flipped[0].second);
    CHECK(alt != "LOC");  // never a self flip
    ++replacement[alt];
  }
  const double rate = static_cast<double>(flips) / n;
  CHECK(rate >= 0.78);
  CHECK(rate <= 0.82);
  // Convergence bound |rate - lambda| < 3*sqrt(l(1-l)/N).
  CHECK(std::fabs(rate - 0.8) < 3.0 * std::sqrt(0.8 * 0.2 / n));
  for (const auto& [alt, count] : replacement) {
    (void)alt;
    const double freq = static_cast<double>(count) / flips;
    CHECK(std::fabs(freq - 0.5) < 0.03);
  }
}

TEST_CASE("noisy sequence invariants under fuzz") {
  TypeSet ts = TypeSet::default_types();
  Rng rng = make_rng(31337);
  for (int iter = 0; iter < 10000; ++iter) {
    auto labels = oracle::random_valid_iob2(1 + rand_below(rng, 10), ts.types, rng);
    Sentence s;
    for (size_t i = 0; i < labels.size(); ++i) s.tokens.push_back(make_token("w"));
    s.labels = labels;

    NoisySequence ns = sample_noisy_labels(s, ts, 0.8, rng);
    REQUIRE(ns.labels.size() == labels.size());
    CHECK(validate_iob(ns.labels, ts).empty());

    auto eligible = eligible_mentions(s, ts);
    for (const auto& [m, alt] : ns.flipped) {
      CHECK(std::find(eligible.begin(), eligible.end(), m) != eligible.end());
      CHECK(alt != m.type);
      const int row = noise_index(m.type, alt, ts);
      for (int i = m.start; i <= m.end; ++i) {
        CHECK(ns.noise_row[static_cast<size_t>(i)] == row);
        CHECK(ns.labels[static_cast<size_t>(i)] ==
              make_label(i == m.start ? 'B' : 'I', alt, ts));
      }
    }
    // Tokens outside flipped mentions are untouched.
    std::vector<bool> inside(labels.size(), false);
    for (const auto& [m, alt] : ns.flipped) {
      (void)alt;
      for (int i = m.start; i <= m.end; ++i) inside[static_cast<size_t>(i)] = true;
    }
    for (size_t i = 0; i < labels.size(); ++i) {
      if (inside[i]) continue;
      CHECK(ns.labels[i] == labels[i]);
      CHECK(ns.noise_row[i] == -1);
    }
  }
}

TEST_CASE("flip sets differ across epochs") {
  TypeSet ts = TypeSet::default_types();
  Dataset ds;
  ds.typeset = ts;
  for (int i = 0; i < 100; ++i)
    ds.sentences.push_back(eligible_sentence("Name" + std::to_string(i), "PER"));

  Rng rng = make_rng(8);
  std::vector<std::vector<std::string>> epochs;
  for (int e = 0; e < 20; ++e) {
    std::vector<std::string> flat;
    for (const auto& s : ds.sentences) {
      NoisySequence ns = sample_noisy_labels(s, ts, 0.8, rng);
      flat.push_back(ns.labels[0]);
    }
    epochs.push_back(std::move(flat));
  }
  int distinct_pairs = 0;
  for (int e = 1; e < 20; ++e)
    if (epochs[static_cast<size_t>(e)] != epochs[0]) ++distinct_pairs;
  CHECK(distinct_pairs >= 1);

  // Same seed, same outcome.
  Rng r1 = make_rng(55), r2 = make_rng(55);
  for (const auto& s : ds.sentences) {
    NoisySequence a = sample_noisy_labels(s, ts, 0.8, r1);
    NoisySequence b = sample_noisy_labels(s, ts, 0.8, r2);
    CHECK(a.labels == b.labels);
    CHECK(a.noise_row == b.noise_row);
  }
}

TEST_CASE("loss_noisy") {
  TypeSet ts = TypeSet::default_types();
  const size_t labels = static_cast<size_t>(2 * ts.size() + 1);

  // y' == y -> exactly zero.
  Matrix logits(4, labels);
  Rng rng = make_rng(4);
  for (double& x : logits.data) x = rand_u01(rng) * 4.0 - 2.0;
  std::vector<int> y{0, 1, 2, 0};
  CHECK(loss_noisy(logits, y, y) == 0.0);

  // One flipped token with uniform logits: loss = ln L.
  Matrix uniform(1, labels);
  uniform.fill(0.7);
  CHECK(loss_noisy(uniform, {3}, {1}) ==
        doctest::Approx(std::log(static_cast<double>(labels))).epsilon(1e-12));

  // Random case against a direct summation.
  for (int iter = 0; iter < 200; ++iter) {
    const size_t n = 1 + rand_below(rng, 8);
    Matrix f(n, labels);
    for (double& x : f.data) x = rand_u01(rng) * 6.0 - 3.0;
    std::vector<int> gold, noisy;
    for (size_t i = 0; i < n; ++i) {
      gold.push_back(static_cast<int>(rand_below(rng, labels)));
      noisy.push_back(static_cast<int>(rand_below(rng, labels)));
    }
    double want = 0.0;
    for (size_t i = 0; i < n; ++i) {
      if (noisy[i] == gold[i]) continue;
      double z = 0.0;
      for (size_t k = 0; k < labels; ++k) z += std::exp(f(i, k));
      want += std::log(z) - f(i, static_cast<size_t>(noisy[i]));
    }
    CHECK(loss_noisy(f, noisy, gold) == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("mask_augment") {
  TypeSet ts = TypeSet::default_types();
  Dataset ds;
  ds.typeset = ts;

  // No eligible mention -> no new sentence.
  ds.sentences.push_back(ineligible_sentence("Solo", "PER"));
  // Two eligible mentions -> two masked copies.
  Sentence two;
  for (const auto& w : {"Alpha", "went", "far", "away", "with", "Beta", "and", "all", "others"})
    two.tokens.push_back(make_token(w));
  two.labels = {"B-PER", "O", "O", "O", "O", "B-PER", "O", "O", "O"};
  ds.sentences.push_back(two);

  Dataset aug = mask_augment(ds);
  REQUIRE(aug.sentences.size() == 4);
  CHECK(to_conll(Dataset{{aug.sentences[0], aug.sentences[1]}, ts}) ==
        to_conll(ds));  // originals retained byte-identically

  const Sentence& m1 = aug.sentences[2];
  CHECK(m1.synthetic);
  CHECK(m1.tokens[0].surface == kMaskSym);
  CHECK(m1.labels[0] == "B-PER");
  CHECK(m1.tokens[5].surface == "Beta");

  const Sentence& m2 = aug.sentences[3];
  CHECK(m2.tokens[5].surface == kMaskSym);
  CHECK(m2.labels[5] == "B-PER");
  CHECK(m2.tokens[0].surface == "Alpha");

  // Multi-token span collapses to a single [MASK].
  Dataset multi;
  multi.typeset = ts;
  Sentence span;
  for (const auto& w : {"West", "Bromwich", "hosted", "the", "match"})
    span.tokens.push_back(make_token(w));
  span.labels = {"B-LOC", "I-LOC", "O", "O", "O"};
  multi.sentences.push_back(span);
  Dataset maug = mask_augment(multi);
  REQUIRE(maug.sentences.size() == 2);
  CHECK(maug.sentences[1].size() == 4);
  CHECK(maug.sentences[1].tokens[0].surface == kMaskSym);
  CHECK(maug.sentences[1].labels[0] == "B-LOC");

  // 35% eligible accounting.
  Dataset frac;
  frac.typeset = ts;
  for (int i = 0; i < 35; ++i) {
    Sentence s;
    for (const auto& w : {"Name", "did", "go", "there"}) s.tokens.push_back(make_token(w));
    s.labels = {"B-PER", "O", "O", "O"};
    frac.sentences.push_back(s);
  }
  for (int i = 0; i < 65; ++i) frac.sentences.push_back(ineligible_sentence("Name", "PER"));
  Dataset faug = mask_augment(frac);
  CHECK(faug.sentences.size() == frac.sentences.size() + 35);
}

}  // TEST_SUITE
