#include "ctxbias/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace ctxbias {

PRF make_prf(uint64_t tp, uint64_t fp, uint64_t fn) {
  PRF r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

namespace {

struct Counts {
  uint64_t tp = 0, fp = 0, fn = 0;
};

// Match mentions of one sentence; type_sensitive toggles boundary-only mode.
Counts match_sentence(const std::vector<Mention>& gold,
                      const std::vector<Mention>& pred, bool type_sensitive,
                      int restrict_type = -1) {
  Counts c;
  std::vector<bool> gold_used(gold.size(), false);
  for (const Mention& p : pred) {
    if (restrict_type >= 0 && p.type != restrict_type) continue;
    bool hit = false;
    for (size_t i = 0; i < gold.size(); ++i) {
      if (gold_used[i]) continue;
      const Mention& g = gold[i];
      if (restrict_type >= 0 && g.type != restrict_type) continue;
      if (g.start == p.start && g.end == p.end &&
          (!type_sensitive || g.type == p.type)) {
        gold_used[i] = true;
        hit = true;
        break;
      }
    }
    if (hit)
      ++c.tp;
    else
      ++c.fp;
  }
  for (size_t i = 0; i < gold.size(); ++i) {
    if (restrict_type >= 0 && gold[i].type != restrict_type) continue;
    if (!gold_used[i]) ++c.fn;
  }
  return c;
}

void check_alignment(const Dataset& gold,
                     const std::vector<std::vector<std::string>>& pred) {
  if (gold.sentences.size() != pred.size())
    throw ValidationError("gold/pred sentence count mismatch: " +
                          std::to_string(gold.sentences.size()) + " vs " +
                          std::to_string(pred.size()));
  for (size_t i = 0; i < pred.size(); ++i)
    if (gold.sentences[i].size() != pred[i].size())
      throw ValidationError("gold/pred length mismatch at sentence " +
                            std::to_string(i));
}

std::vector<Mention> pred_mentions(const Sentence& gold_sentence,
                                   const std::vector<std::string>& labels,
                                   const TypeSet& ts) {
  Sentence s;
  s.tokens = gold_sentence.tokens;
  s.labels = labels;
  // Predictions from files may use IOB1-style starts; normalize like the
  // parser does before segmenting.
  char prev_prefix = 'O';
  int prev_type = -1;
  for (auto& label : s.labels) {
    LabelParts p = parse_label(label, ts);
    if (p.prefix == 'I' && !(prev_prefix != 'O' && prev_type == p.type)) {
      label = make_label('B', p.type, ts);
      p.prefix = 'B';
    }
    prev_prefix = p.prefix;
    prev_type = p.type;
  }
  return extract_mentions(s, ts);
}

}  // namespace

EvalResult mention_prf(const Dataset& gold,
                       const std::vector<std::vector<std::string>>& pred,
                       Exec exec) {
  check_alignment(gold, pred);
  const int k = static_cast<int>(gold.typeset.size());
  const int64_t n = static_cast<int64_t>(gold.sentences.size());

  uint64_t tp = 0, fp = 0, fn = 0;
  std::vector<Counts> type_counts(static_cast<size_t>(k));

#ifdef _OPENMP
#pragma omp parallel if (exec == Exec::Parallel)
#endif
  {
    uint64_t ltp = 0, lfp = 0, lfn = 0;
    std::vector<Counts> ltype(static_cast<size_t>(k));
#ifdef _OPENMP
#pragma omp for schedule(static) nowait
#endif
    for (int64_t i = 0; i < n; ++i) {
      const Sentence& s = gold.sentences[static_cast<size_t>(i)];
      auto g = extract_mentions(s, gold.typeset);
      auto p = pred_mentions(s, pred[static_cast<size_t>(i)], gold.typeset);
      Counts c = match_sentence(g, p, true);
      ltp += c.tp;
      lfp += c.fp;
      lfn += c.fn;
      for (int t = 0; t < k; ++t) {
        Counts ct = match_sentence(g, p, true, t);
        ltype[static_cast<size_t>(t)].tp += ct.tp;
        ltype[static_cast<size_t>(t)].fp += ct.fp;
        ltype[static_cast<size_t>(t)].fn += ct.fn;
      }
    }
#ifdef _OPENMP
#pragma omp critical
#endif
    {
      tp += ltp;
      fp += lfp;
      fn += lfn;
      for (int t = 0; t < k; ++t) {
        type_counts[static_cast<size_t>(t)].tp += ltype[static_cast<size_t>(t)].tp;
        type_counts[static_cast<size_t>(t)].fp += ltype[static_cast<size_t>(t)].fp;
        type_counts[static_cast<size_t>(t)].fn += ltype[static_cast<size_t>(t)].fn;
      }
    }
  }
  (void)exec;

  EvalResult out;
  out.overall = make_prf(tp, fp, fn);
  for (int t = 0; t < k; ++t) {
    const Counts& c = type_counts[static_cast<size_t>(t)];
    out.per_type[gold.typeset.name(t)] = make_prf(c.tp, c.fp, c.fn);
  }
  return out;
}

PRF boundary_prf(const Dataset& gold,
                 const std::vector<std::vector<std::string>>& pred, Exec exec) {
  check_alignment(gold, pred);
  const int64_t n = static_cast<int64_t>(gold.sentences.size());
  uint64_t tp = 0, fp = 0, fn = 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : tp, fp, fn) \
    if (exec == Exec::Parallel)
#endif
  for (int64_t i = 0; i < n; ++i) {
    const Sentence& s = gold.sentences[static_cast<size_t>(i)];
    auto g = extract_mentions(s, gold.typeset);
    auto p = pred_mentions(s, pred[static_cast<size_t>(i)], gold.typeset);
    Counts c = match_sentence(g, p, false);
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
  }
  (void)exec;
  return make_prf(tp, fp, fn);
}

namespace {

// Continued-fraction evaluation of I_x(a,b) (Lentz's algorithm).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("paired_t_test: unequal lengths");
  const size_t n = a.size();
  if (n < 2) throw ValidationError("paired_t_test: need at least 2 pairs");

  double mean = 0.0;
  for (size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double var = ss / static_cast<double>(n - 1);
  if (var == 0.0)
    throw ValidationError("paired_t_test: zero variance in differences");

  TTestResult r;
  r.df = static_cast<int>(n) - 1;
  r.t = mean / std::sqrt(var / static_cast<double>(n));
  const double nu = static_cast<double>(r.df);
  // Two-sided p: P(|T| >= |t|) = I_{nu/(nu+t^2)}(nu/2, 1/2).
  r.p = incomplete_beta(nu / 2.0, 0.5, nu / (nu + r.t * r.t));
  return r;
}

namespace {

nlohmann::json prf_json(const PRF& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},
          {"tp", p.tp},               {"fp", p.fp},         {"fn", p.fn}};
}

}  // namespace

std::string report_json(const EvalResult& mention, const PRF& boundary,
                        const std::map<std::string, std::string>& metadata) {
  nlohmann::json j;
  j["mention"] = prf_json(mention.overall);
  for (const auto& [name, prf] : mention.per_type) j["per_type"][name] = prf_json(prf);
  j["boundary"] = prf_json(boundary);
  for (const auto& [k, v] : metadata) j["metadata"][k] = v;
  return j.dump(2);
}

std::string report_tsv(const EvalResult& mention, const PRF& boundary) {
  std::ostringstream out;
  out << "scope\tprecision\trecall\tf1\ttp\tfp\tfn\n";
  auto row = [&out](const std::string& scope, const PRF& p) {
    out << scope << "\t" << p.precision << "\t" << p.recall << "\t" << p.f1
        << "\t" << p.tp << "\t" << p.fp << "\t" << p.fn << "\n";
  };
  row("mention", mention.overall);
  for (const auto& [name, prf] : mention.per_type) row(name, prf);
  row("boundary", boundary);
  return out.str();
}

}  // namespace ctxbias
