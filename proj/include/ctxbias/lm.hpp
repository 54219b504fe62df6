#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctxbias/corpus.hpp"
#include "ctxbias/parallel.hpp"

namespace ctxbias {

// Flat token stream with explicit <s>/</s> sentence boundaries, the training
// input for the n-gram model.
struct TokenStream {
  std::vector<std::string> tokens;
};

inline constexpr const char* kBosSym = "<s>";
inline constexpr const char* kEosSym = "</s>";
inline constexpr const char* kUnkSym = "<unk>";

// Slot symbol that stands in for a mention of the given type, e.g. "<LOC>".
std::string slot_symbol(const std::string& type_name);

// Replaces every mention span with the slot symbol of its type and brackets
// each sentence with <s>/</s>.
TokenStream abstract_entities(const Dataset& ds);

TokenStream load_stream_file(const std::string& path);
void save_stream_file(const TokenStream& stream, const std::string& path);

// Per-context statistics derived from the count tables.
struct CtxStat {
  uint64_t denom = 0;     // sum of effective counts of all continuations
  uint32_t distinct = 0;  // number of distinct continuations
};

using GramTable = std::unordered_map<std::string, uint64_t>;
using CtxTable = std::unordered_map<std::string, CtxStat>;

// Interpolated Kneser-Ney n-gram model with one absolute discount per order.
// Lower orders use continuation counts, except that k-grams starting with
// <s> keep their raw counts (they cannot be extended to the left). <s> is
// never predicted and carries zero probability mass.
struct KNModel {
  int order = 5;
  std::vector<double> discounts;  // discounts[k-1] applies to order k

  std::vector<std::string> vocab;  // id -> surface; 0=<s>, 1=</s>, 2=<unk>
  std::unordered_map<std::string, uint32_t> vocab_index;
  std::vector<std::string> type_names;  // types this model can slot-tag

  // raw[k] / eff[k] keyed by packed id tuples of length k; ctx[k] keyed by
  // the k-1 length context prefix. Index 0 is unused.
  std::vector<GramTable> raw;
  std::vector<GramTable> eff;
  std::vector<CtxTable> ctx;

  std::vector<double> unigram_prob;  // dense, unigram_prob[0] == 0 for <s>

  static constexpr uint32_t kBos = 0;
  static constexpr uint32_t kEos = 1;
  static constexpr uint32_t kUnk = 2;

  uint32_t lookup(const std::string& word) const;  // <unk> fallback
  size_t vocab_size() const { return vocab.size(); }

  // P(word | context), context ordered oldest..newest, truncated internally
  // to order-1 ids. Sums to 1 over the vocabulary minus <s>.
  double word_prob_ids(uint32_t word, std::span<const uint32_t> context) const;
  double word_prob(const std::string& word,
                   const std::vector<std::string>& context) const;
};

// Packs an id tuple into a byte-string key for the count tables.
std::string gram_key(std::span<const uint32_t> ids);

// Trains the model. `type_names` reserves one slot symbol per type; slot
// symbols and reserved symbols are exempt from the <unk> rewrite that maps
// count-1 word types to <unk>. order must be >= 2.
KNModel train_kn(const TokenStream& stream, int order,
                 const std::vector<std::string>& type_names = {},
                 double discount = 0.75);

struct ScoreResult {
  double logprob = 0.0;    // natural log, </s> scored, <s> not
  double perplexity = 0.0; // exp(-logprob / positions)
  int positions = 0;
};

ScoreResult sequence_score(const KNModel& model, const std::vector<std::string>& tokens);

std::vector<ScoreResult> score_sentences(const KNModel& model,
                                         const std::vector<std::vector<std::string>>& sentences,
                                         Exec exec = Exec::Parallel);

// Distribution over entity types for one slot query.
struct TypeDistribution {
  std::vector<std::string> types;
  std::vector<double> probs;  // aligned with types, sums to 1
  int argmax = 0;
  double gap = 0.0;  // top1 - top2 probability

  const std::string& top() const { return types[static_cast<size_t>(argmax)]; }
  double prob_of(const std::string& type) const;
};

// Scores the sentence with the span [i, j] replaced by each type's slot
// symbol and softmaxes the negated length-normalized cross-entropies.
TypeDistribution tag_slot(const KNModel& model, const std::vector<std::string>& tokens,
                          int i, int j);

void save_kn(const KNModel& model, const std::string& path);
KNModel load_kn(const std::string& path);

// Plain-text dump of counts and parameters, stable across runs, for diffing.
std::string dump_kn_text(const KNModel& model);

}  // namespace ctxbias
