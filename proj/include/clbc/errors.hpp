#pragma once

#include <stdexcept>
#include <string>

namespace clbc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A value node that has no canonical encoding (float NaN/Inf, bad UTF-8,
// out-of-range numerics). Always a bug upstream, never coerced.
struct UnsupportedValue : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct NegativeTurn : Error {
  using Error::Error;
};

struct ZeroOptions : Error {
  using Error::Error;
};

struct EmptyCatalog : Error {
  using Error::Error;
};

struct RenderCollision : Error {
  using Error::Error;
};

struct StateSpaceTooLarge : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct InsufficientSamples : Error {
  using Error::Error;
};

struct NoFeasibleStrategy : Error {
  using Error::Error;
};

struct MissingTurn : Error {
  using Error::Error;
};

// Fail-closed aggregation reasons. Each aborts a staged run.
struct StaleArtifact : Error {
  using Error::Error;
};

struct PolicyHashDrift : Error {
  using Error::Error;
};

struct MalformedSummary : Error {
  using Error::Error;
};

}  // namespace clbc
