#pragma once

#include <stdexcept>
#include <string>

namespace modeiv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Column-role assignment is inconsistent with the file or dataset.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A cell could not be parsed, or holds a non-finite value.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values (fractions, counts, flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix sizes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// File system failure; the message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Least-squares design lost rank and no ridge penalty was given.
class SingularDesignError : public Error {
 public:
  using Error::Error;
};

/// A sample-size or basis-size precondition failed before fitting.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// First-stage F statistic fell below the configured threshold.
class WeakInstrumentError : public Error {
 public:
  WeakInstrumentError(int instrument, double f_statistic, double threshold)
      : Error("weak instrument z_" + std::to_string(instrument + 1) +
              ": first-stage F = " + std::to_string(f_statistic) +
              " below threshold " + std::to_string(threshold)),
        instrument_(instrument),
        f_statistic_(f_statistic) {}

  int instrument() const { return instrument_; }
  double f_statistic() const { return f_statistic_; }

 private:
  int instrument_;
  double f_statistic_;
};

/// Every member of the modal interval carries zero weight.
class DegenerateWeightsError : public Error {
 public:
  using Error::Error;
};

}  // namespace modeiv
