#pragma once

#include <stdexcept>

namespace fgmgt {

// Exit-code contract for the CLI: ConfigError maps to 2, every other
// failure to 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Malformed or schema-violating corpus/report files.
struct DataError : Error {
  using Error::Error;
};

// Endpoint unreachable or persistently failing after retries.
struct TransportError : Error {
  using Error::Error;
};

// Endpoint replied but the completion is unusable (e.g. empty).
struct GenerationError : Error {
  using Error::Error;
};

// Model bundle files inconsistent with their manifest.
struct IntegrityError : Error {
  using Error::Error;
};

}  // namespace fgmgt
