#pragma once

#include <stdexcept>
#include <string>

namespace loren {

// Error taxonomy mirrors the CLI exit codes: bad configuration 2, missing
// artifact 3, numerical divergence 4, file I/O 5.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Contract violation inside the library (shape mismatch, bad argument).
class ShapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace loren
