#pragma once

#include <stdexcept>
#include <string>

namespace rircoh {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// Input/data group (CLI exit code 2).
class InputError : public Error {
public:
  using Error::Error;
};

// A type invariant was violated at construction.
class ValidationError : public InputError {
public:
  using InputError::InputError;
};

class ConfigError : public InputError {
public:
  using InputError::InputError;
};

class IoError : public InputError {
public:
  using InputError::InputError;
};

class ManifestError : public InputError {
public:
  using InputError::InputError;
};

// Analysis group (CLI exit code 3).
class AnalysisError : public Error {
public:
  using Error::Error;
};

class InputTooShortError : public AnalysisError {
public:
  using AnalysisError::AnalysisError;
};

// Two signals/curves/grids that must share an axis, band or rate do not.
class PairingError : public AnalysisError {
public:
  using AnalysisError::AnalysisError;
};

// SNR is below the truncation threshold already at the onset.
class NoUsableRegionError : public AnalysisError {
public:
  using AnalysisError::AnalysisError;
};

class InsufficientDecayError : public AnalysisError {
public:
  using AnalysisError::AnalysisError;
};

// The noise floor cannot be estimated from the recording itself.
class NoiseFloorError : public AnalysisError {
public:
  using AnalysisError::AnalysisError;
};

}  // namespace rircoh
