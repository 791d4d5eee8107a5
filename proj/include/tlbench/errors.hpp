#pragma once

#include <stdexcept>
#include <string>

namespace tlbench {

/// Base class for every recoverable error raised by the library. The CLI maps
/// these to exit code 1; anything else escaping a subcommand is a bug.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// data_model
class SchemaError : public Error {
  public:
    using Error::Error;
};
class RowError : public Error {
  public:
    RowError(std::size_t row, const std::string& what)
        : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
    std::size_t row() const { return row_; }

  private:
    std::size_t row_;
};
class ImputationError : public Error {
  public:
    using Error::Error;
};
class RangeError : public Error {
  public:
    using Error::Error;
};
class EmptyDatasetError : public Error {
  public:
    using Error::Error;
};

// pipeline
class DecodeError : public Error {
  public:
    using Error::Error;
};
class PlanError : public Error {
  public:
    using Error::Error;
};
class PartialPlanError : public Error {
  public:
    using Error::Error;
};

// modelzoo / trainer
class RegistryError : public Error {
  public:
    using Error::Error;
};
class BackboneUnavailableError : public Error {
  public:
    using Error::Error;
};
class ConfigError : public Error {
  public:
    using Error::Error;
};
class DivergedError : public Error {
  public:
    using Error::Error;
};

// evaluation / explain
class ShapeError : public Error {
  public:
    using Error::Error;
};
class UndefinedMetricError : public Error {
  public:
    using Error::Error;
};
class LayerSelectionError : public Error {
  public:
    using Error::Error;
};

// cli
class MissingArtifactError : public Error {
  public:
    using Error::Error;
};
class IoError : public Error {
  public:
    using Error::Error;
};

} // namespace tlbench
