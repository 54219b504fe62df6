#include "ctxbias/benchgen.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ctxbias {

void SelectionThresholds::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(weak_conf_min) || !in_unit(nrb_gap_min) || !in_unit(wts_gap_max))
    throw ConfigError("selection thresholds must lie in [0,1]");
  if (!(wts_gap_max < nrb_gap_min))
    throw ConfigError("wts_gap_max must be smaller than nrb_gap_min");
}

std::vector<Candidate> candidates_from_jsonl(const std::string& text) {
  std::vector<Candidate> out;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("candidates line " + std::to_string(lineno) + ": " + e.what());
    }
    Candidate c;
    c.tokens = j.at("tokens").get<std::vector<std::string>>();
    c.start = j.at("span").at(0).get<int>();
    c.end = j.at("span").at(1).get<int>();
    c.gold_type = j.at("gold_type").get<std::string>();
    c.weak_label = j.at("weak_label").get<std::string>();
    c.weak_conf = j.at("weak_conf").get<double>();
    if (c.tokens.empty() || c.start < 0 || c.end < c.start ||
        static_cast<size_t>(c.end) >= c.tokens.size())
      throw ValidationError("candidates line " + std::to_string(lineno) +
                            ": span out of bounds");
    if (c.weak_conf < 0.0 || c.weak_conf > 1.0)
      throw ValidationError("candidates line " + std::to_string(lineno) +
                            ": weak_conf outside [0,1]");
    out.push_back(std::move(c));
  }
  return out;
}

std::string candidates_to_jsonl(const std::vector<Candidate>& candidates) {
  std::ostringstream out;
  for (const Candidate& c : candidates) {
    nlohmann::json j;
    j["tokens"] = c.tokens;
    j["span"] = {c.start, c.end};
    j["gold_type"] = c.gold_type;
    j["weak_label"] = c.weak_label;
    j["weak_conf"] = c.weak_conf;
    out << j.dump() << "\n";
  }
  return out.str();
}

std::vector<Candidate> load_candidates_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return candidates_from_jsonl(ss.str());
}

bool nrb_predicate(const Candidate& c, const TypeDistribution& dist,
                   const SelectionThresholds& th, bool single_token_only) {
  if (single_token_only && c.end != c.start) return false;
  const bool weak_wrong = c.weak_label != c.gold_type;
  const bool weak_confident = c.weak_conf > th.weak_conf_min;
  const bool context_right = dist.top() == c.gold_type;
  const bool context_decisive = dist.gap >= th.nrb_gap_min;
  return weak_wrong && weak_confident && context_right && context_decisive;
}

bool wts_predicate(const Candidate& c, const TypeDistribution& dist,
                   const SelectionThresholds& th, bool single_token_only) {
  if (single_token_only && c.end != c.start) return false;
  const bool weak_right = c.weak_label == c.gold_type;
  const bool weak_confident = c.weak_conf > th.weak_conf_min;
  const bool context_right = dist.top() == c.gold_type;
  const bool context_open = dist.gap < th.wts_gap_max;
  return weak_right && weak_confident && context_right && context_open;
}

std::vector<TypeDistribution> score_candidates(const KNModel& lm,
                                               const std::vector<Candidate>& candidates,
                                               Exec exec) {
  if (lm.type_names.empty())
    throw ConfigError("context tagger has no slot types; train it with a typeset");
  std::vector<TypeDistribution> out(candidates.size());
  const int64_t n = static_cast<int64_t>(candidates.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
#endif
  for (int64_t i = 0; i < n; ++i) {
    const Candidate& c = candidates[static_cast<size_t>(i)];
    out[static_cast<size_t>(i)] = tag_slot(lm, c.tokens, c.start, c.end);
  }
  (void)exec;
  return out;
}

namespace {

std::vector<size_t> select_scored(const std::vector<Candidate>& candidates,
                                  const std::vector<TypeDistribution>& dists,
                                  const SelectionThresholds& th, bool single_token_only,
                                  bool nrb) {
  th.validate();
  if (candidates.size() != dists.size())
    throw ValidationError("candidate/distribution count mismatch");
  std::vector<size_t> out;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const bool keep = nrb ? nrb_predicate(candidates[i], dists[i], th, single_token_only)
                          : wts_predicate(candidates[i], dists[i], th, single_token_only);
    if (keep) out.push_back(i);
  }
  return out;
}

}  // namespace

std::vector<size_t> select_nrb_scored(const std::vector<Candidate>& candidates,
                                      const std::vector<TypeDistribution>& dists,
                                      const SelectionThresholds& th,
                                      bool single_token_only) {
  return select_scored(candidates, dists, th, single_token_only, true);
}

std::vector<size_t> select_wts_scored(const std::vector<Candidate>& candidates,
                                      const std::vector<TypeDistribution>& dists,
                                      const SelectionThresholds& th,
                                      bool single_token_only) {
  return select_scored(candidates, dists, th, single_token_only, false);
}

std::vector<size_t> select_nrb(const std::vector<Candidate>& candidates,
                               const KNModel& lm, const SelectionThresholds& th,
                               bool single_token_only, Exec exec) {
  return select_nrb_scored(candidates, score_candidates(lm, candidates, exec), th,
                           single_token_only);
}

std::vector<size_t> select_wts(const std::vector<Candidate>& candidates,
                               const KNModel& lm, const SelectionThresholds& th,
                               bool single_token_only, Exec exec) {
  return select_wts_scored(candidates, score_candidates(lm, candidates, exec), th,
                           single_token_only);
}

Dataset candidates_to_dataset(const std::vector<Candidate>& candidates,
                              const std::vector<size_t>& selected,
                              const TypeSet& ts) {
  Dataset ds;
  ds.typeset = ts;
  for (size_t idx : selected) {
    const Candidate& c = candidates[idx];
    int t = ts.index_of(c.gold_type);
    if (t < 0) throw ValidationError("candidate gold type '" + c.gold_type +
                                     "' not in typeset");
    Sentence s;
    for (const auto& tok : c.tokens) s.tokens.push_back(make_token(tok));
    s.labels.assign(c.tokens.size(), "O");
    s.labels[static_cast<size_t>(c.start)] = make_label('B', t, ts);
    for (int i = c.start + 1; i <= c.end; ++i)
      s.labels[static_cast<size_t>(i)] = make_label('I', t, ts);
    ds.sentences.push_back(std::move(s));
  }
  validate_dataset(ds);
  return ds;
}

Dataset permute_mentions(const Dataset& ds, Rng& rng) {
  // Gather every mention surface in canonical order (sentence, start).
  std::vector<std::vector<std::string>> surfaces;
  for (const Sentence& s : ds.sentences) {
    for (const Mention& m : extract_mentions(s, ds.typeset)) {
      std::vector<std::string> toks;
      for (int i = m.start; i <= m.end; ++i)
        toks.push_back(s.tokens[static_cast<size_t>(i)].surface);
      surfaces.push_back(std::move(toks));
    }
  }
  if (surfaces.size() < 2) return ds;  // nothing to permute

  std::vector<size_t> perm = random_permutation(surfaces.size(), rng);

  Dataset out;
  out.typeset = ds.typeset;
  out.sentences.reserve(ds.sentences.size());
  size_t slot = 0;
  for (const Sentence& s : ds.sentences) {
    auto mentions = extract_mentions(s, ds.typeset);
    Sentence ns;
    ns.doc_id = s.doc_id;
    ns.synthetic = s.synthetic;
    size_t mi = 0;
    for (size_t i = 0; i < s.size();) {
      if (mi < mentions.size() && static_cast<int>(i) == mentions[mi].start) {
        const auto& incoming = surfaces[perm[slot]];
        for (size_t k = 0; k < incoming.size(); ++k) {
          ns.tokens.push_back(make_token(incoming[k]));
          ns.labels.push_back(make_label(k == 0 ? 'B' : 'I', mentions[mi].type,
                                         ds.typeset));
        }
        i = static_cast<size_t>(mentions[mi].end) + 1;
        ++mi;
        ++slot;
      } else {
        ns.tokens.push_back(s.tokens[i]);
        ns.labels.push_back(s.labels[i]);
        ++i;
      }
    }
    out.sentences.push_back(std::move(ns));
  }
  validate_dataset(out);
  return out;
}

Dataset lowres_sample(const Dataset& ds, size_t k, Rng& rng) {
  std::vector<size_t> pool;
  for (size_t i = 0; i < ds.sentences.size(); ++i)
    if (!eligible_mentions(ds.sentences[i], ds.typeset).empty()) pool.push_back(i);
  if (k > pool.size())
    throw ValidationError("lowres_sample: k=" + std::to_string(k) +
                          " exceeds eligible sentence count " +
                          std::to_string(pool.size()));
  shuffle_inplace(pool, rng);
  pool.resize(k);
  Dataset out;
  out.typeset = ds.typeset;
  for (size_t idx : pool) out.sentences.push_back(ds.sentences[idx]);
  return out;
}

namespace {

const std::vector<std::string> kSyllables = {
    "ba", "do", "ri", "ka", "lu", "mo", "ta", "ne",
    "vi", "so", "gu", "pe", "ra", "mi", "to", "za"};

const std::vector<std::string> kGlue = {"the", "a",  "of",   "and", "was",
                                        "in",  "it", "near", "then"};

std::string compose_word(Rng& rng, int syllables) {
  std::string w;
  for (int i = 0; i < syllables; ++i)
    w += kSyllables[static_cast<size_t>(rand_below(rng, kSyllables.size()))];
  return w;
}

// Distinct pseudo-words; 3 syllables and capitalized for names, 2 syllables
// lowercase for context words, so the pools can never collide.
std::vector<std::string> draw_words(Rng& rng, size_t count, bool name,
                                    std::set<std::string>& used) {
  std::vector<std::string> out;
  while (out.size() < count) {
    std::string w = compose_word(rng, name ? 3 : 2);
    if (name) w[0] = static_cast<char>(w[0] - 'a' + 'A');
    if (!used.insert(w).second) continue;
    out.push_back(std::move(w));
  }
  return out;
}

struct Template {
  std::vector<std::string> before;  // tokens left of the slot
  std::vector<std::string> after;   // tokens right of the slot
};

// Each template keeps 3 evidence words adjacent to the slot (inside both the
// tagger window and the n-gram horizon) and guarantees eligibility: the
// evidence side is 3 O tokens long or more.
Template make_template(Rng& rng, const std::vector<std::string>& evidence_pool) {
  Template t;
  std::vector<std::string> ev;
  std::vector<size_t> picks = random_permutation(evidence_pool.size(), rng);
  for (size_t i = 0; i < 3; ++i) ev.push_back(evidence_pool[picks[i]]);
  const bool evidence_after = rand_u01(rng) < 0.5;
  const size_t extra_glue = 1 + rand_below(rng, 2);
  std::vector<std::string> glue;
  for (size_t i = 0; i < extra_glue; ++i)
    glue.push_back(kGlue[static_cast<size_t>(rand_below(rng, kGlue.size()))]);
  if (evidence_after) {
    t.after = ev;
    t.after.insert(t.after.end(), glue.begin(), glue.end());
  } else {
    t.before = glue;
    t.before.insert(t.before.end(), ev.begin(), ev.end());
  }
  return t;
}

Sentence instantiate(const Template& t, const std::string& name, int type,
                     const TypeSet& ts) {
  Sentence s;
  for (const auto& w : t.before) {
    s.tokens.push_back(make_token(w));
    s.labels.push_back("O");
  }
  s.tokens.push_back(make_token(name));
  s.labels.push_back(make_label('B', type, ts));
  for (const auto& w : t.after) {
    s.tokens.push_back(make_token(w));
    s.labels.push_back("O");
  }
  return s;
}

}  // namespace

void SynthSpec::validate() const {
  if (num_types < 2) throw ConfigError("synthetic spec needs >= 2 types");
  if (names_per_type < 1 || templates_per_type < 1)
    throw ConfigError("synthetic pools must be non-empty");
  if (train_size < 1 || test_size < 1 || challenge_size < 1)
    throw ConfigError("synthetic split sizes must be positive");
  if (generic_rate < 0.0 || generic_rate > 1.0 || leak_rate < 0.0 || leak_rate > 1.0)
    throw ConfigError("generic_rate and leak_rate must be in [0,1]");
  if (generic_rate > 0.0 && generic_templates < 1)
    throw ConfigError("generic_rate > 0 requires generic templates");
}

SynthData gen_synthetic_bias(const SynthSpec& spec, Rng& rng) {
  spec.validate();
  const int k = spec.num_types;

  TypeSet ts = k == 3 ? TypeSet::default_types() : [&] {
    std::vector<std::string> names;
    for (int i = 0; i < k; ++i) names.push_back("T" + std::to_string(i + 1));
    return TypeSet(names);
  }();

  std::set<std::string> used;
  std::vector<std::vector<std::string>> names(static_cast<size_t>(k));
  std::vector<std::vector<std::string>> evidence(static_cast<size_t>(k));
  for (int t = 0; t < k; ++t) {
    names[static_cast<size_t>(t)] =
        draw_words(rng, static_cast<size_t>(spec.names_per_type), true, used);
    evidence[static_cast<size_t>(t)] = draw_words(rng, 24, false, used);
  }
  std::vector<std::string> generic_pool = draw_words(rng, 24, false, used);

  std::vector<std::vector<Template>> distinctive(static_cast<size_t>(k));
  for (int t = 0; t < k; ++t)
    for (int i = 0; i < spec.templates_per_type; ++i)
      distinctive[static_cast<size_t>(t)].push_back(
          make_template(rng, evidence[static_cast<size_t>(t)]));
  std::vector<Template> generic;
  for (int i = 0; i < spec.generic_templates; ++i)
    generic.push_back(make_template(rng, generic_pool));

  auto pick = [&rng](const auto& v) -> const auto& {
    return v[static_cast<size_t>(rand_below(rng, v.size()))];
  };

  // An in-domain sentence pairs a name with its own type (template type
  // follows the name, whether or not the context is distinctive).
  auto gen_in_domain = [&](int) {
    const int t = static_cast<int>(rand_below(rng, static_cast<uint64_t>(k)));
    const std::string& name = pick(names[static_cast<size_t>(t)]);
    const bool use_generic = spec.generic_rate > 0.0 && rand_u01(rng) < spec.generic_rate;
    const Template& tpl =
        use_generic ? pick(generic) : pick(distinctive[static_cast<size_t>(t)]);
    return instantiate(tpl, name, t, ts);
  };

  // A challenge sentence pairs a name of type a with a distinctive template
  // of type b != a; the gold label follows the template.
  auto gen_challenge = [&]() {
    const int a = static_cast<int>(rand_below(rng, static_cast<uint64_t>(k)));
    int b = static_cast<int>(rand_below(rng, static_cast<uint64_t>(k - 1)));
    if (b >= a) ++b;
    const std::string& name = pick(names[static_cast<size_t>(a)]);
    const Template& tpl = pick(distinctive[static_cast<size_t>(b)]);
    return instantiate(tpl, name, b, ts);
  };

  SynthData out;
  out.train.typeset = out.test.typeset = out.challenge.typeset = ts;
  for (int i = 0; i < spec.train_size; ++i) {
    const bool leak = spec.leak_rate > 0.0 && rand_u01(rng) < spec.leak_rate;
    out.train.sentences.push_back(leak ? gen_challenge() : gen_in_domain(i));
  }
  for (int i = 0; i < spec.test_size; ++i)
    out.test.sentences.push_back(gen_in_domain(i));
  for (int i = 0; i < spec.challenge_size; ++i)
    out.challenge.sentences.push_back(gen_challenge());

  validate_dataset(out.train);
  validate_dataset(out.test);
  validate_dataset(out.challenge);
  return out;
}

}  // namespace ctxbias
