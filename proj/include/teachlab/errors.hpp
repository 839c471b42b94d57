#pragma once

#include <stdexcept>
#include <string>

namespace teachlab {

/// Out-of-range index, non-finite input or an empty sample where one is required.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A collaborator broke its contract (e.g. a teacher emitted |r| > r_max).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A session log does not reproduce under replay.
class LogCorruptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// The requested post-update rank needs a reward outside [-r_max, r_max].
class InfeasibleRealization : public std::runtime_error {
 public:
  InfeasibleRealization(const std::string& what, double required)
      : std::runtime_error(what), required_(required) {}
  double required_reward() const { return required_; }

 private:
  double required_;
};

// Service-facing errors; the HTTP layer maps each onto a status code.
class RequestError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class ConflictError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ForbiddenError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace teachlab
