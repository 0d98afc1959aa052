#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace histanno {

// Base class for every failure raised by the library. Data-level problems
// (tag violations, disagreements) are returned as values, not thrown.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files, bad configuration, inconsistent inventories.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A stage ran before the stage that produces its inputs.
class MissingArtifactError : public Error {
 public:
  MissingArtifactError(std::string stage, const std::string& detail)
      : Error("missing artifact: " + stage + (detail.empty() ? "" : " (" + detail + ")")),
        stage_(std::move(stage)) {}

  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Transport-level failure talking to an annotation provider.
class ProviderError : public Error {
 public:
  using Error::Error;
};

}  // namespace histanno
