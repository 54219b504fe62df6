#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctxbias/corpus.hpp"
#include "ctxbias/parallel.hpp"

namespace ctxbias {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  uint64_t tp = 0;
  uint64_t fp = 0;
  uint64_t fn = 0;
};

PRF make_prf(uint64_t tp, uint64_t fp, uint64_t fn);

struct EvalResult {
  PRF overall;
  std::map<std::string, PRF> per_type;
};

// Exact-match mention scoring: a prediction counts iff (start, end, type)
// matches a gold mention of the same sentence. Counting is per-sentence with
// an associative integer reduction, so Serial and Parallel agree exactly.
EvalResult mention_prf(const Dataset& gold,
                       const std::vector<std::vector<std::string>>& pred,
                       Exec exec = Exec::Parallel);

// Same but matching on (start, end) only.
PRF boundary_prf(const Dataset& gold,
                 const std::vector<std::vector<std::string>>& pred,
                 Exec exec = Exec::Parallel);

struct TTestResult {
  double t = 0.0;
  double p = 0.0;  // two-sided
  int df = 0;
};

// Classical paired t-test with n-1 degrees of freedom; p from the Student-t
// CDF evaluated through the regularized incomplete beta function (target
// accuracy 1e-10). Throws ConfigError when n < 2 or the differences have
// zero variance.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Regularized incomplete beta I_x(a, b); exposed for the significance test
// and its quadrature-based oracle.
double incomplete_beta(double a, double b, double x);

// Machine-readable report of an evaluation run.
std::string report_json(const EvalResult& mention, const PRF& boundary,
                        const std::map<std::string, std::string>& metadata);
std::string report_tsv(const EvalResult& mention, const PRF& boundary);

}  // namespace ctxbias
