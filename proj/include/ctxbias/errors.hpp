#pragma once

#include <stdexcept>
#include <string>

namespace ctxbias {

// Base class for all toolkit errors. The CLI maps these to exit code 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file (CoNLL, JSONL, model file).
struct ParseError : Error {
  using Error::Error;
};

// Data that violates a documented invariant (bad IOB sequence, shape
// mismatch, misaligned gold/pred).
struct ValidationError : Error {
  using Error::Error;
};

// Out-of-range or inconsistent parameter values.
struct ConfigError : Error {
  using Error::Error;
};

// Filesystem failures.
struct IoError : Error {
  using Error::Error;
};

}  // namespace ctxbias
