#pragma once

#include <stdexcept>
#include <string>

namespace chiralrate {

// Base class for all library errors. `tag` is a stable, machine-checkable
// label (e.g. "NegativeRate", "StepSizeUnderflow"); the what() string starts
// with the tag followed by a human-readable explanation.
class error : public std::runtime_error {
 public:
  error(std::string tag, const std::string& what_arg)
      : std::runtime_error(tag + ": " + what_arg), tag_(std::move(tag)) {}

  [[nodiscard]] const std::string& tag() const noexcept { return tag_; }

 private:
  std::string tag_;
};

// Invalid parameters, states, or operation preconditions.
class domain_error : public error {
 public:
  using error::error;
};

// Time stepping failed; carries the time at which the failure occurred.
class integration_error : public error {
 public:
  integration_error(std::string tag, const std::string& what_arg, double t)
      : error(std::move(tag), what_arg + " (t = " + std::to_string(t) + " s)"),
        t_(t) {}

  [[nodiscard]] double time() const noexcept { return t_; }

 private:
  double t_ = 0;
};

// Iterative search (steady state) failed to reach its tolerance.
class convergence_error : public error {
 public:
  convergence_error(const std::string& what_arg, double residual, int iterations)
      : error("NoConvergence",
              what_arg + " (residual = " + std::to_string(residual) +
                  ", iterations = " + std::to_string(iterations) + ")"),
        residual_(residual),
        iterations_(iterations) {}

  [[nodiscard]] double residual() const noexcept { return residual_; }
  [[nodiscard]] int iterations() const noexcept { return iterations_; }

 private:
  double residual_ = 0;
  int iterations_ = 0;
};

}  // namespace chiralrate
