#include "ctxbias/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ctxbias {

namespace {

const std::string kDocstart = "-DOCSTART-";
const std::string kSyntheticMarker = "# synthetic";

bool ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> cols;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) cols.push_back(line.substr(i, j - i));
    i = j;
  }
  return cols;
}

}  // namespace

Token make_token(std::string surface) {
  Token t;
  t.starts_upper = !surface.empty() && ascii_upper(surface[0]);
  t.surface = std::move(surface);
  return t;
}

TypeSet::TypeSet(std::vector<std::string> names) : types(std::move(names)) {
  if (types.size() < 2) throw ConfigError("TypeSet needs at least 2 types");
  std::set<std::string> seen;
  for (const auto& t : types) {
    if (t.empty() || t == kDropType)
      throw ConfigError("invalid type name: '" + t + "'");
    if (!seen.insert(t).second) throw ConfigError("duplicate type name: " + t);
  }
}

TypeSet TypeSet::default_types() { return TypeSet({"PER", "LOC", "ORG"}); }

int TypeSet::index_of(const std::string& name) const {
  for (size_t i = 0; i < types.size(); ++i)
    if (types[i] == name) return static_cast<int>(i);
  return -1;
}

size_t Dataset::total_mentions() const {
  size_t n = 0;
  for (const auto& s : sentences) n += extract_mentions(s, typeset).size();
  return n;
}

LabelParts parse_label(const std::string& label, const TypeSet& ts) {
  if (label == "O") return {'O', -1};
  if (label.size() < 3 || (label[0] != 'B' && label[0] != 'I') || label[1] != '-')
    throw ParseError("malformed label '" + label + "'");
  int t = ts.index_of(label.substr(2));
  if (t < 0) throw ValidationError("unknown type in label '" + label + "'");
  return {label[0], t};
}

std::string make_label(char prefix, int type, const TypeSet& ts) {
  if (prefix == 'O') return "O";
  return std::string(1, prefix) + "-" + ts.name(type);
}

std::vector<IobViolation> validate_iob(const std::vector<std::string>& labels,
                                       const TypeSet& ts) {
  std::vector<IobViolation> out;
  char prev_prefix = 'O';
  int prev_type = -1;
  for (size_t i = 0; i < labels.size(); ++i) {
    LabelParts p;
    try {
      p = parse_label(labels[i], ts);
    } catch (const Error& e) {
      out.push_back({i, labels[i], e.what()});
      prev_prefix = 'O';
      prev_type = -1;
      continue;
    }
    if (p.prefix == 'I' && !(prev_prefix != 'O' && prev_type == p.type)) {
      out.push_back({i, labels[i], "I- not preceded by same-type B-/I-"});
    }
    prev_prefix = p.prefix;
    prev_type = p.type;
  }
  return out;
}

void validate_dataset(const Dataset& ds) {
  for (size_t si = 0; si < ds.sentences.size(); ++si) {
    const Sentence& s = ds.sentences[si];
    if (s.tokens.empty())
      throw ValidationError("sentence " + std::to_string(si) + " is empty");
    if (s.tokens.size() != s.labels.size())
      throw ValidationError("sentence " + std::to_string(si) +
                            ": token/label count mismatch");
    for (const Token& t : s.tokens) {
      if (t.surface.empty() ||
          t.surface.find_first_of(" \t\n\r") != std::string::npos)
        throw ValidationError("sentence " + std::to_string(si) +
                              ": bad token surface");
    }
    auto viol = validate_iob(s.labels, ds.typeset);
    if (!viol.empty())
      throw ValidationError("sentence " + std::to_string(si) + ", token " +
                            std::to_string(viol[0].index) + ": " +
                            viol[0].reason + " (" + viol[0].label + ")");
  }
}

Dataset parse_conll(const std::string& text, const TypeSet& ts, LabelScheme scheme) {
  Dataset ds;
  ds.typeset = ts;

  Sentence cur;
  std::string doc_id;
  int doc_count = 0;
  bool next_synthetic = false;

  auto flush = [&]() {
    if (cur.tokens.empty()) return;
    cur.doc_id = doc_id;
    cur.synthetic = next_synthetic;
    next_synthetic = false;

    // Normalize IOB1-style starts: an I-t opening a new span becomes B-t.
    char prev_prefix = 'O';
    int prev_type = -1;
    for (auto& label : cur.labels) {
      LabelParts p = parse_label(label, ts);
      if (p.prefix == 'I' && !(prev_prefix != 'O' && prev_type == p.type)) {
        if (scheme == LabelScheme::IOB2)
          throw ValidationError("invalid IOB2 transition at label '" + label + "'");
        label = make_label('B', p.type, ts);
        p.prefix = 'B';
      }
      prev_prefix = p.prefix;
      prev_type = p.type;
    }
    ds.sentences.push_back(std::move(cur));
    cur = Sentence{};
  };

  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') {
      if (line == kSyntheticMarker) next_synthetic = true;
      continue;
    }
    auto cols = split_ws(line);
    if (cols.empty()) {  // whitespace-only line acts as a break
      flush();
      continue;
    }
    if (cols[0] == kDocstart) {
      flush();
      doc_id = "doc" + std::to_string(doc_count++);
      continue;
    }
    if (cols.size() < 2)
      throw ParseError("line " + std::to_string(lineno) +
                       ": expected at least 2 columns, got " +
                       std::to_string(cols.size()));
    cur.tokens.push_back(make_token(cols[0]));
    cur.labels.push_back(cols.back());
  }
  flush();

  validate_dataset(ds);
  return ds;
}

Dataset load_conll_file(const std::string& path, const TypeSet& ts, LabelScheme scheme) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_conll(ss.str(), ts, scheme);
}

std::string to_conll(const Dataset& ds) {
  std::ostringstream out;
  std::string cur_doc;
  bool first = true;
  for (const Sentence& s : ds.sentences) {
    if (s.doc_id != cur_doc && !s.doc_id.empty()) {
      if (!first) out << "\n";
      out << kDocstart << " O\n\n";
      cur_doc = s.doc_id;
      first = false;
    } else if (!first) {
      out << "\n";
    }
    if (s.synthetic) out << kSyntheticMarker << "\n";
    for (size_t i = 0; i < s.tokens.size(); ++i)
      out << s.tokens[i].surface << " " << s.labels[i] << "\n";
    first = false;
  }
  return out.str();
}

void save_conll_file(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << to_conll(ds);
}

std::string dataset_to_json(const Dataset& ds) {
  nlohmann::json j;
  j["typeset"] = ds.typeset.types;
  auto& sents = j["sentences"] = nlohmann::json::array();
  for (const Sentence& s : ds.sentences) {
    nlohmann::json js;
    auto& toks = js["tokens"] = nlohmann::json::array();
    for (const Token& t : s.tokens) toks.push_back(t.surface);
    js["labels"] = s.labels;
    if (!s.doc_id.empty()) js["doc_id"] = s.doc_id;
    if (s.synthetic) js["synthetic"] = true;
    sents.push_back(std::move(js));
  }
  return j.dump(2);
}

Dataset dataset_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad dataset JSON: ") + e.what());
  }
  Dataset ds;
  ds.typeset = TypeSet(j.at("typeset").get<std::vector<std::string>>());
  for (const auto& js : j.at("sentences")) {
    Sentence s;
    for (const auto& tok : js.at("tokens"))
      s.tokens.push_back(make_token(tok.get<std::string>()));
    s.labels = js.at("labels").get<std::vector<std::string>>();
    if (js.contains("doc_id")) s.doc_id = js.at("doc_id").get<std::string>();
    if (js.contains("synthetic")) s.synthetic = js.at("synthetic").get<bool>();
    ds.sentences.push_back(std::move(s));
  }
  validate_dataset(ds);
  return ds;
}

std::vector<Mention> extract_mentions(const Sentence& s, const TypeSet& ts) {
  std::vector<Mention> out;
  int start = -1;
  int type = -1;
  auto close = [&](int end) {
    if (start < 0) return;
    Mention m;
    m.start = start;
    m.end = end;
    m.type = type;
    for (int k = start; k <= end; ++k) {
      if (k > start) m.surface += ' ';
      m.surface += s.tokens[static_cast<size_t>(k)].surface;
    }
    out.push_back(std::move(m));
    start = -1;
  };
  for (size_t i = 0; i < s.labels.size(); ++i) {
    const std::string& label = s.labels[i];
    if (label == "O") {
      close(static_cast<int>(i) - 1);
      continue;
    }
    if (label[0] == 'B') {
      close(static_cast<int>(i) - 1);
      start = static_cast<int>(i);
      type = ts.index_of(label.substr(2));
    }
  }
  close(static_cast<int>(s.labels.size()) - 1);
  return out;
}

std::vector<std::string> labels_from_mentions(size_t n,
                                              const std::vector<Mention>& mentions,
                                              const TypeSet& ts) {
  std::vector<std::string> labels(n, "O");
  for (const Mention& m : mentions) {
    labels[static_cast<size_t>(m.start)] = make_label('B', m.type, ts);
    for (int k = m.start + 1; k <= m.end; ++k)
      labels[static_cast<size_t>(k)] = make_label('I', m.type, ts);
  }
  return labels;
}

bool is_eligible(const Sentence& s, const Mention& m) {
  const int n = static_cast<int>(s.size());
  bool before = m.start >= 3;
  for (int k = m.start - 3; before && k < m.start; ++k)
    if (s.labels[static_cast<size_t>(k)] != "O") before = false;
  bool after = m.end + 3 < n;
  for (int k = m.end + 1; after && k <= m.end + 3; ++k)
    if (s.labels[static_cast<size_t>(k)] != "O") after = false;
  return before || after;
}

std::vector<Mention> eligible_mentions(const Sentence& s, const TypeSet& ts) {
  std::vector<Mention> out;
  for (const Mention& m : extract_mentions(s, ts))
    if (is_eligible(s, m)) out.push_back(m);
  return out;
}

Dataset map_types(const Dataset& ds, const std::map<std::string, std::string>& mapping) {
  // Build the target set in first-mapped order over the source set.
  std::vector<std::string> target_names;
  for (const auto& src : ds.typeset.types) {
    auto it = mapping.find(src);
    if (it == mapping.end()) continue;  // checked below, only if actually used
    if (it->second == kDropType) continue;
    if (std::find(target_names.begin(), target_names.end(), it->second) ==
        target_names.end())
      target_names.push_back(it->second);
  }
  if (target_names.size() < 2) {
    // Keep the TypeSet invariant satisfiable for degenerate mappings.
    for (const auto& [src, dst] : mapping) {
      (void)src;
      if (dst != kDropType &&
          std::find(target_names.begin(), target_names.end(), dst) ==
              target_names.end())
        target_names.push_back(dst);
    }
  }

  Dataset out;
  out.typeset = TypeSet(target_names);
  out.sentences.reserve(ds.sentences.size());
  for (const Sentence& s : ds.sentences) {
    Sentence ns = s;
    for (size_t i = 0; i < ns.labels.size(); ++i) {
      LabelParts p = parse_label(s.labels[i], ds.typeset);
      if (p.prefix == 'O') continue;
      const std::string& src = ds.typeset.name(p.type);
      auto it = mapping.find(src);
      if (it == mapping.end())
        throw ValidationError("map_types: unmapped type '" + src + "'");
      if (it->second == kDropType) {
        ns.labels[i] = "O";
      } else {
        int nt = out.typeset.index_of(it->second);
        ns.labels[i] = make_label(p.prefix, nt, out.typeset);
      }
    }
    out.sentences.push_back(std::move(ns));
  }
  validate_dataset(out);
  return out;
}

}  // namespace ctxbias
