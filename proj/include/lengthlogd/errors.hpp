#pragma once

#include <stdexcept>
#include <string>

namespace lengthlogd {

// The three families map onto distinct CLI exit codes.

/// Invalid configuration or arguments; detected before any work is done.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data that cannot be used (bad CSV columns, unparseable SMILES,
/// schema mismatches, too few records).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lengthlogd
