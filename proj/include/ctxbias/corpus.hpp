#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxbias/errors.hpp"

namespace ctxbias {

// One whitespace-free token. starts_upper is derived from the surface at
// construction time and is the only casing signal the tagger sees.
struct Token {
  std::string surface;
  bool starts_upper = false;
};

Token make_token(std::string surface);

// Ordered set of entity type names. Index positions are stable for the
// lifetime of every model trained against the set.
struct TypeSet {
  std::vector<std::string> types;

  TypeSet() = default;
  explicit TypeSet(std::vector<std::string> names);

  static TypeSet default_types();  // PER, LOC, ORG

  size_t size() const { return types.size(); }
  const std::string& name(int t) const { return types[static_cast<size_t>(t)]; }
  // -1 when absent.
  int index_of(const std::string& name) const;
  bool operator==(const TypeSet& o) const { return types == o.types; }
};

// Maximal span of tokens [start, end] labeled with one type.
struct Mention {
  int start = 0;  // inclusive token index
  int end = 0;    // inclusive token index
  int type = 0;   // index into the TypeSet
  std::string surface;

  bool operator==(const Mention& o) const {
    return start == o.start && end == o.end && type == o.type;
  }
};

struct Sentence {
  std::vector<Token> tokens;
  std::vector<std::string> labels;  // IOB2, aligned with tokens
  std::string doc_id;               // empty = unknown
  bool synthetic = false;           // true for augmentation products

  size_t size() const { return tokens.size(); }
};

struct Dataset {
  std::vector<Sentence> sentences;
  TypeSet typeset;

  size_t total_mentions() const;
};

// Decomposed IOB label. prefix is 'O', 'B' or 'I'; type is -1 for 'O'.
struct LabelParts {
  char prefix = 'O';
  int type = -1;
};

// Throws ParseError for malformed labels, ValidationError for types outside
// the set.
LabelParts parse_label(const std::string& label, const TypeSet& ts);

std::string make_label(char prefix, int type, const TypeSet& ts);

struct IobViolation {
  size_t index = 0;
  std::string label;
  std::string reason;
};

// Empty result iff `labels` is a valid IOB2 sequence over `ts`.
std::vector<IobViolation> validate_iob(const std::vector<std::string>& labels,
                                       const TypeSet& ts);

// Throws ValidationError describing the first offending sentence.
void validate_dataset(const Dataset& ds);

enum class LabelScheme {
  Auto,  // normalize IOB1-style span starts to IOB2 (leaves valid IOB2 intact)
  IOB2,  // strict: any invalid transition is an error
};

// Parses column-format text: token in the first column, label in the last,
// blank line between sentences, -DOCSTART- rows delimit documents and are
// dropped. Comment lines starting with '#' are consumed; the marker written
// by to_conll for synthetic sentences is recognized on input.
Dataset parse_conll(const std::string& text, const TypeSet& ts,
                    LabelScheme scheme = LabelScheme::Auto);

Dataset load_conll_file(const std::string& path, const TypeSet& ts,
                        LabelScheme scheme = LabelScheme::Auto);

std::string to_conll(const Dataset& ds);
void save_conll_file(const Dataset& ds, const std::string& path);

// JSON round-trip used by tooling; schema documented in the README.
std::string dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(const std::string& text);

// Maximal B/I runs in order of start index.
std::vector<Mention> extract_mentions(const Sentence& s, const TypeSet& ts);

// Rebuilds the label sequence implied by a mention list (inverse of
// extract_mentions on valid input).
std::vector<std::string> labels_from_mentions(size_t n,
                                              const std::vector<Mention>& mentions,
                                              const TypeSet& ts);

// A mention is context-eligible when at least 3 contiguous O-labeled tokens
// sit immediately before it or immediately after it within the sentence.
bool is_eligible(const Sentence& s, const Mention& m);
std::vector<Mention> eligible_mentions(const Sentence& s, const TypeSet& ts);

// Target name that removes a type during map_types.
inline constexpr const char* kDropType = "DROP";

// Rewrites every label through `mapping` (source type name -> target name or
// DROP). The mapping must cover every type present in the dataset. The
// result's TypeSet lists targets in first-mapped order of the source set.
Dataset map_types(const Dataset& ds, const std::map<std::string, std::string>& mapping);

}  // namespace ctxbias
