#pragma once

#include <stdexcept>
#include <string>

namespace hsp {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Coplanar / collinear / otherwise degenerate input geometry.
class DegeneracyError : public Error {
public:
  using Error::Error;
};

// Non-manifold or non-watertight meshes where a closed manifold is required.
class TopologyError : public Error {
public:
  using Error::Error;
};

// Out-of-range arguments and shape mismatches.
class ParameterError : public Error {
public:
  using Error::Error;
};

class CoverageError : public Error {
public:
  using Error::Error;
};

// Non-finite loss during an optimization; carries the step index.
class OptimizationError : public Error {
public:
  OptimizationError(const std::string& what, int step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  int step() const noexcept { return step_; }

private:
  int step_;
};

// UV atlas failed its invariants, or too many points fell outside it.
class AtlasError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

// Pipeline failure tagged with the stage that raised it.
class StageError : public Error {
public:
  StageError(std::string stage, const std::string& what, std::string checkpoint)
      : Error("[" + stage + "] " + what +
              (checkpoint.empty() ? std::string() : " (last checkpoint: " + checkpoint + ")")),
        stage_(std::move(stage)),
        checkpoint_(std::move(checkpoint)) {}
  const std::string& stage() const noexcept { return stage_; }
  const std::string& checkpoint() const noexcept { return checkpoint_; }

private:
  std::string stage_;
  std::string checkpoint_;
};

}  // namespace hsp
