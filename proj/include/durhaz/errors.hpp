// Copyright (c) the durhaz authors.
// Licensed under the Apache License, Version 2.0; see
// http://www.apache.org/licenses/LICENSE-2.0 for the full text.

#pragma once

#include <stdexcept>
#include <string>

namespace durhaz {

/// Base class for all durhaz errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad caller-supplied values (quantile out of range, cap < 1, ...).
class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

// A transition probability outside [floor, 1].
class InvalidHazardError : public Error {
 public:
  using Error::Error;
};

// Probability mass exhausted before the distribution's support ends.
class DegenerateDistributionError : public Error {
 public:
  using Error::Error;
};

// Layer widths do not chain, or recurrent layer in an illegal position.
class InvalidArchitectureError : public Error {
 public:
  using Error::Error;
};

// Input row width or target length does not match the network.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// Gradient buffer shape does not match the network parameters.
class InvalidGradientError : public Error {
 public:
  using Error::Error;
};

// Malformed alignment/feature/config file; message carries the line number.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Missing files, mismatched utterance ids, incompatible corpora.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during training; message names epoch and utterance.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A model of the wrong system kind passed to a generation routine.
class InvalidModelError : public Error {
 public:
  using Error::Error;
};

// compare_systems called on metric tables from different test sets.
class InvalidComparisonError : public Error {
 public:
  using Error::Error;
};

// Every evaluation pair was silence.
class EmptyEvaluationError : public Error {
 public:
  using Error::Error;
};

}  // namespace durhaz
