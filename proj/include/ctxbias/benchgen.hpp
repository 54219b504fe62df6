#pragma once

#include <string>
#include <vector>

#include "ctxbias/corpus.hpp"
#include "ctxbias/lm.hpp"
#include "ctxbias/parallel.hpp"
#include "ctxbias/rng.hpp"

namespace ctxbias {

// One item of the candidate stream: a sentence with a query span, the type
// asserted by the knowledge source, and the weak tagger's verdict. Any
// upstream harvester can emit these; the toolkit reads them as JSONL.
struct Candidate {
  std::vector<std::string> tokens;
  int start = 0;
  int end = 0;
  std::string gold_type;
  std::string weak_label;  // type name or "O"
  double weak_conf = 0.0;
};

struct SelectionThresholds {
  double weak_conf_min = 0.85;
  double nrb_gap_min = 0.25;
  double wts_gap_max = 0.1;

  void validate() const;
};

std::vector<Candidate> candidates_from_jsonl(const std::string& text);
std::string candidates_to_jsonl(const std::vector<Candidate>& candidates);
std::vector<Candidate> load_candidates_file(const std::string& path);

// NRB membership: the weak tagger is confidently wrong while the
// context-only tagger is right with a decisive gap. Scored variants take
// precomputed type distributions (one per candidate) so callers can reuse or
// replay LM queries; the model-backed variants compute them via tag_slot.
bool nrb_predicate(const Candidate& c, const TypeDistribution& dist,
                   const SelectionThresholds& th, bool single_token_only = true);
// WTS membership: both taggers right, context barely decisive.
bool wts_predicate(const Candidate& c, const TypeDistribution& dist,
                   const SelectionThresholds& th, bool single_token_only = true);

std::vector<TypeDistribution> score_candidates(const KNModel& lm,
                                               const std::vector<Candidate>& candidates,
                                               Exec exec = Exec::Parallel);

std::vector<size_t> select_nrb_scored(const std::vector<Candidate>& candidates,
                                      const std::vector<TypeDistribution>& dists,
                                      const SelectionThresholds& th,
                                      bool single_token_only = true);
std::vector<size_t> select_wts_scored(const std::vector<Candidate>& candidates,
                                      const std::vector<TypeDistribution>& dists,
                                      const SelectionThresholds& th,
                                      bool single_token_only = true);

std::vector<size_t> select_nrb(const std::vector<Candidate>& candidates,
                               const KNModel& lm, const SelectionThresholds& th,
                               bool single_token_only = true,
                               Exec exec = Exec::Parallel);
std::vector<size_t> select_wts(const std::vector<Candidate>& candidates,
                               const KNModel& lm, const SelectionThresholds& th,
                               bool single_token_only = true,
                               Exec exec = Exec::Parallel);

// Converts selected candidates into a one-mention-per-sentence dataset
// labeled with the gold types.
Dataset candidates_to_dataset(const std::vector<Candidate>& candidates,
                              const std::vector<size_t>& selected,
                              const TypeSet& ts);

// Applies one uniform dataset-wide permutation to mention surfaces, keeping
// every slot's type labels; spans are resized to the incoming surface.
Dataset permute_mentions(const Dataset& ds, Rng& rng);

// Uniform sample without replacement of k sentences among those containing
// at least one eligible mention.
Dataset lowres_sample(const Dataset& ds, size_t k, Rng& rng);

// Synthetic corpus with a designed name/type correlation. Train and test
// pair names with templates of their own type; the challenge split pairs
// names with templates of a different type and labels them by the template,
// so context is the only valid cue.
struct SynthSpec {
  int num_types = 3;
  int names_per_type = 40;
  int templates_per_type = 12;  // type-distinctive templates
  int generic_templates = 8;    // shared templates with no type signal
  double generic_rate = 0.35;   // fraction of train/test built on generic templates
  int train_size = 2400;
  int test_size = 600;
  int challenge_size = 600;
  double leak_rate = 0.0;  // fraction of train built challenge-style

  void validate() const;
};

struct SynthData {
  Dataset train;
  Dataset test;
  Dataset challenge;
};

SynthData gen_synthetic_bias(const SynthSpec& spec, Rng& rng);

}  // namespace ctxbias
