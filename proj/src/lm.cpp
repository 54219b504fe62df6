#include "ctxbias/lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ctxbias {

std::string slot_symbol(const std::string& type_name) {
  return "<" + type_name + ">";
}

TokenStream abstract_entities(const Dataset& ds) {
  TokenStream out;
  for (const Sentence& s : ds.sentences) {
    out.tokens.push_back(kBosSym);
    auto mentions = extract_mentions(s, ds.typeset);
    size_t mi = 0;
    for (size_t i = 0; i < s.tokens.size();) {
      if (mi < mentions.size() && static_cast<int>(i) == mentions[mi].start) {
        out.tokens.push_back(slot_symbol(ds.typeset.name(mentions[mi].type)));
        i = static_cast<size_t>(mentions[mi].end) + 1;
        ++mi;
      } else {
        out.tokens.push_back(s.tokens[i].surface);
        ++i;
      }
    }
    out.tokens.push_back(kEosSym);
  }
  return out;
}

TokenStream load_stream_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  TokenStream out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    std::vector<std::string> toks;
    while (ls >> tok) toks.push_back(tok);
    if (toks.empty()) continue;
    if (toks.front() != kBosSym) out.tokens.push_back(kBosSym);
    out.tokens.insert(out.tokens.end(), toks.begin(), toks.end());
    if (toks.back() != kEosSym) out.tokens.push_back(kEosSym);
  }
  return out;
}

void save_stream_file(const TokenStream& stream, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (size_t i = 0; i < stream.tokens.size(); ++i) {
    out << stream.tokens[i];
    out << (stream.tokens[i] == kEosSym ? '\n' : ' ');
  }
}

std::string gram_key(std::span<const uint32_t> ids) {
  std::string key(ids.size() * sizeof(uint32_t), '\0');
  std::memcpy(key.data(), ids.data(), key.size());
  return key;
}

namespace {

std::vector<uint32_t> unpack_key(const std::string& key) {
  std::vector<uint32_t> ids(key.size() / sizeof(uint32_t));
  std::memcpy(ids.data(), key.data(), key.size());
  return ids;
}

// Splits a flat marker-delimited stream into id sentences (markers stripped).
std::vector<std::vector<std::string>> split_sentences(const TokenStream& stream) {
  std::vector<std::vector<std::string>> sentences;
  std::vector<std::string> cur;
  bool open = false;
  for (const std::string& tok : stream.tokens) {
    if (tok == kBosSym) {
      if (open) throw ParseError("nested <s> in token stream");
      open = true;
      cur.clear();
      continue;
    }
    if (tok == kEosSym) {
      if (!open) throw ParseError("</s> without matching <s>");
      open = false;
      sentences.push_back(cur);
      continue;
    }
    if (!open) throw ParseError("token outside <s>...</s>: " + tok);
    cur.push_back(tok);
  }
  if (open) throw ParseError("unterminated sentence in token stream");
  return sentences;
}

void build_derived(KNModel& m) {
  const int order = m.order;
  m.eff.assign(static_cast<size_t>(order) + 1, GramTable{});
  m.ctx.assign(static_cast<size_t>(order) + 1, CtxTable{});

  // Effective counts: raw at the top order; continuation counts below, with
  // raw counts kept for grams that start with <s>.
  m.eff[static_cast<size_t>(order)] = m.raw[static_cast<size_t>(order)];
  for (int k = order - 1; k >= 1; --k) {
    auto& ek = m.eff[static_cast<size_t>(k)];
    for (const auto& [key, cnt] : m.raw[static_cast<size_t>(k + 1)]) {
      (void)cnt;
      ek[key.substr(sizeof(uint32_t))] += 1;
    }
    for (const auto& [key, cnt] : m.raw[static_cast<size_t>(k)]) {
      uint32_t first;
      std::memcpy(&first, key.data(), sizeof(uint32_t));
      if (first == KNModel::kBos) {
        if (k == 1)
          ek.erase(key);  // <s> is never predicted
        else
          ek[key] = cnt;
      }
    }
  }

  for (int k = 1; k <= order; ++k) {
    auto& ck = m.ctx[static_cast<size_t>(k)];
    for (const auto& [key, cnt] : m.eff[static_cast<size_t>(k)]) {
      std::string prefix = key.substr(0, key.size() - sizeof(uint32_t));
      CtxStat& st = ck[prefix];
      st.denom += cnt;
      st.distinct += 1;
    }
  }

  // Dense unigram distribution with a uniform base over vocab minus <s>.
  const double d1 = m.discounts[0];
  const CtxStat& root = m.ctx[1].at(std::string());
  const double uniform = 1.0 / static_cast<double>(m.vocab.size() - 1);
  const double backoff = d1 * static_cast<double>(root.distinct) /
                         static_cast<double>(root.denom);
  m.unigram_prob.assign(m.vocab.size(), backoff * uniform);
  m.unigram_prob[KNModel::kBos] = 0.0;
  for (const auto& [key, cnt] : m.eff[1]) {
    uint32_t w;
    std::memcpy(&w, key.data(), sizeof(uint32_t));
    m.unigram_prob[w] = (static_cast<double>(cnt) - d1) /
                            static_cast<double>(root.denom) +
                        backoff * uniform;
  }
}

}  // namespace

uint32_t KNModel::lookup(const std::string& word) const {
  auto it = vocab_index.find(word);
  return it == vocab_index.end() ? kUnk : it->second;
}

double KNModel::word_prob_ids(uint32_t word, std::span<const uint32_t> context) const {
  if (word == kBos) return 0.0;
  double p = unigram_prob[word];
  const size_t usable = std::min(context.size(), static_cast<size_t>(order - 1));
  std::vector<uint32_t> gram;
  gram.reserve(usable + 1);
  for (int k = 2; k <= static_cast<int>(usable) + 1; ++k) {
    // history = last k-1 context ids
    gram.assign(context.end() - (k - 1), context.end());
    const auto& ck = ctx[static_cast<size_t>(k)];
    auto cit = ck.find(gram_key(gram));
    if (cit == ck.end()) continue;  // unseen context: weight-1 backoff
    const CtxStat& st = cit->second;
    const double dk = discounts[static_cast<size_t>(k - 1)];
    gram.push_back(word);
    const auto& ek = eff[static_cast<size_t>(k)];
    auto eit = ek.find(gram_key(gram));
    const double numer =
        eit == ek.end() ? 0.0
                        : std::max(static_cast<double>(eit->second) - dk, 0.0);
    const double denom = static_cast<double>(st.denom);
    p = numer / denom +
        dk * static_cast<double>(st.distinct) / denom * p;
    gram.pop_back();
  }
  return p;
}

double KNModel::word_prob(const std::string& word,
                          const std::vector<std::string>& context) const {
  std::vector<uint32_t> ctx_ids;
  ctx_ids.reserve(context.size());
  for (const auto& w : context) ctx_ids.push_back(lookup(w));
  return word_prob_ids(lookup(word), ctx_ids);
}

KNModel train_kn(const TokenStream& stream, int order,
                 const std::vector<std::string>& type_names, double discount) {
  if (order < 2) throw ConfigError("n-gram order must be >= 2");
  if (discount <= 0.0 || discount >= 1.0)
    throw ConfigError("discount must be in (0,1)");
  auto sentences = split_sentences(stream);
  if (sentences.empty()) throw ValidationError("empty token stream");

  KNModel m;
  m.order = order;
  m.discounts.assign(static_cast<size_t>(order), discount);
  m.type_names = type_names;

  // Reserved symbols first, then slot symbols, then corpus words in first
  // occurrence order. Word types with total count 1 are rewritten to <unk>;
  // reserved and slot symbols are exempt.
  m.vocab = {kBosSym, kEosSym, kUnkSym};
  for (const auto& t : type_names) m.vocab.push_back(slot_symbol(t));
  for (size_t i = 0; i < m.vocab.size(); ++i) m.vocab_index[m.vocab[i]] = static_cast<uint32_t>(i);
  const size_t reserved = m.vocab.size();

  std::unordered_map<std::string, uint64_t> freq;
  for (const auto& sent : sentences)
    for (const auto& w : sent) ++freq[w];

  for (const auto& sent : sentences) {
    for (const auto& w : sent) {
      if (m.vocab_index.count(w)) continue;
      if (freq[w] <= 1) continue;
      m.vocab_index[w] = static_cast<uint32_t>(m.vocab.size());
      m.vocab.push_back(w);
    }
  }

  m.raw.assign(static_cast<size_t>(order) + 1, GramTable{});
  std::vector<uint32_t> ids;
  for (const auto& sent : sentences) {
    ids.clear();
    ids.push_back(KNModel::kBos);
    for (const auto& w : sent) {
      auto it = m.vocab_index.find(w);
      ids.push_back(it == m.vocab_index.end() ? KNModel::kUnk : it->second);
    }
    ids.push_back(KNModel::kEos);
    const size_t n = ids.size();
    for (int k = 1; k <= order; ++k) {
      if (n < static_cast<size_t>(k)) break;
      for (size_t i = 0; i + static_cast<size_t>(k) <= n; ++i)
        ++m.raw[static_cast<size_t>(k)][gram_key(
            std::span<const uint32_t>(ids.data() + i, static_cast<size_t>(k)))];
    }
  }
  (void)reserved;

  build_derived(m);
  return m;
}

ScoreResult sequence_score(const KNModel& model, const std::vector<std::string>& tokens) {
  std::vector<uint32_t> ids;
  ids.reserve(tokens.size() + 2);
  ids.push_back(KNModel::kBos);
  for (const auto& w : tokens) ids.push_back(model.lookup(w));
  ids.push_back(KNModel::kEos);

  ScoreResult r;
  for (size_t t = 1; t < ids.size(); ++t) {
    const size_t ctx_begin = t > static_cast<size_t>(model.order - 1)
                                 ? t - static_cast<size_t>(model.order - 1)
                                 : 0;
    double p = model.word_prob_ids(
        ids[t], std::span<const uint32_t>(ids.data() + ctx_begin, t - ctx_begin));
    r.logprob += std::log(p);
    ++r.positions;
  }
  r.perplexity = std::exp(-r.logprob / static_cast<double>(r.positions));
  return r;
}

std::vector<ScoreResult> score_sentences(const KNModel& model,
                                         const std::vector<std::vector<std::string>>& sentences,
                                         Exec exec) {
  std::vector<ScoreResult> out(sentences.size());
  const int64_t n = static_cast<int64_t>(sentences.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
#endif
  for (int64_t i = 0; i < n; ++i)
    out[static_cast<size_t>(i)] = sequence_score(model, sentences[static_cast<size_t>(i)]);
  (void)exec;
  return out;
}

double TypeDistribution::prob_of(const std::string& type) const {
  for (size_t i = 0; i < types.size(); ++i)
    if (types[i] == type) return probs[i];
  return 0.0;
}

TypeDistribution tag_slot(const KNModel& model, const std::vector<std::string>& tokens,
                          int i, int j) {
  if (model.type_names.empty())
    throw ConfigError("model has no slot types; train with type_names");
  if (i < 0 || j < i || static_cast<size_t>(j) >= tokens.size())
    throw ValidationError("tag_slot: span out of bounds");

  TypeDistribution dist;
  dist.types = model.type_names;
  std::vector<double> neg_xent(dist.types.size());
  std::vector<std::string> candidate;
  for (size_t t = 0; t < dist.types.size(); ++t) {
    candidate.assign(tokens.begin(), tokens.begin() + i);
    candidate.push_back(slot_symbol(dist.types[t]));
    candidate.insert(candidate.end(), tokens.begin() + j + 1, tokens.end());
    ScoreResult r = sequence_score(model, candidate);
    neg_xent[t] = r.logprob / static_cast<double>(r.positions);
  }
  dist.probs.resize(dist.types.size());
  softmax(neg_xent.data(), neg_xent.size(), dist.probs.data());

  dist.argmax = 0;
  for (size_t t = 1; t < dist.probs.size(); ++t)
    if (dist.probs[t] > dist.probs[static_cast<size_t>(dist.argmax)])
      dist.argmax = static_cast<int>(t);
  double top1 = 0.0, top2 = 0.0;
  for (double p : dist.probs) {
    if (p > top1) {
      top2 = top1;
      top1 = p;
    } else if (p > top2) {
      top2 = p;
    }
  }
  dist.gap = top1 - top2;
  return dist;
}

namespace {

constexpr uint32_t kMagic = 0x4e4b4243;  // "CBKN"
constexpr uint32_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("truncated model file");
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  uint64_t n = read_pod<uint64_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw ParseError("truncated model file");
  return s;
}

}  // namespace

void save_kn(const KNModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_pod(out, kMagic);
  write_pod(out, kFormatVersion);
  write_pod<uint32_t>(out, static_cast<uint32_t>(model.order));
  for (double d : model.discounts) write_pod(out, d);
  write_pod<uint64_t>(out, model.type_names.size());
  for (const auto& t : model.type_names) write_string(out, t);
  write_pod<uint64_t>(out, model.vocab.size());
  for (const auto& w : model.vocab) write_string(out, w);
  for (int k = 1; k <= model.order; ++k) {
    const auto& tab = model.raw[static_cast<size_t>(k)];
    std::vector<std::pair<std::string, uint64_t>> entries(tab.begin(), tab.end());
    std::sort(entries.begin(), entries.end());
    write_pod<uint64_t>(out, entries.size());
    for (const auto& [key, cnt] : entries) {
      out.write(key.data(), static_cast<std::streamsize>(key.size()));
      write_pod(out, cnt);
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

KNModel load_kn(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  if (read_pod<uint32_t>(in) != kMagic) throw ParseError(path + ": not a KN model file");
  if (read_pod<uint32_t>(in) != kFormatVersion)
    throw ParseError(path + ": unsupported model version");
  KNModel m;
  m.order = static_cast<int>(read_pod<uint32_t>(in));
  if (m.order < 2 || m.order > 16) throw ParseError(path + ": bad order");
  m.discounts.resize(static_cast<size_t>(m.order));
  for (double& d : m.discounts) d = read_pod<double>(in);
  uint64_t ntypes = read_pod<uint64_t>(in);
  for (uint64_t i = 0; i < ntypes; ++i) m.type_names.push_back(read_string(in));
  uint64_t nvocab = read_pod<uint64_t>(in);
  for (uint64_t i = 0; i < nvocab; ++i) {
    m.vocab.push_back(read_string(in));
    m.vocab_index[m.vocab.back()] = static_cast<uint32_t>(i);
  }
  m.raw.assign(static_cast<size_t>(m.order) + 1, GramTable{});
  for (int k = 1; k <= m.order; ++k) {
    uint64_t n = read_pod<uint64_t>(in);
    auto& tab = m.raw[static_cast<size_t>(k)];
    tab.reserve(n);
    const size_t key_bytes = static_cast<size_t>(k) * sizeof(uint32_t);
    for (uint64_t i = 0; i < n; ++i) {
      std::string key(key_bytes, '\0');
      in.read(key.data(), static_cast<std::streamsize>(key_bytes));
      uint64_t cnt = read_pod<uint64_t>(in);
      tab.emplace(std::move(key), cnt);
    }
  }
  build_derived(m);
  return m;
}

std::string dump_kn_text(const KNModel& model) {
  std::ostringstream out;
  out << "kn order=" << model.order << " discount=" << model.discounts[0]
      << " vocab=" << model.vocab.size() << "\n";
  out << "types:";
  for (const auto& t : model.type_names) out << " " << t;
  out << "\n";
  for (int k = 1; k <= model.order; ++k) {
    std::vector<std::pair<std::vector<uint32_t>, uint64_t>> entries;
    for (const auto& [key, cnt] : model.raw[static_cast<size_t>(k)])
      entries.emplace_back(unpack_key(key), cnt);
    std::sort(entries.begin(), entries.end());
    out << "order " << k << " (" << entries.size() << " grams)\n";
    for (const auto& [ids, cnt] : entries) {
      for (uint32_t id : ids) out << model.vocab[id] << " ";
      out << cnt << "\n";
    }
  }
  return out.str();
}

}  // namespace ctxbias
