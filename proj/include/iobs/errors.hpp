#pragma once

#include <stdexcept>
#include <string>

namespace iobs {

struct invalid_input : std::runtime_error {
  explicit invalid_input(const std::string& what) : std::runtime_error(what) {}
};

struct internal_error : std::runtime_error {
  explicit internal_error(const std::string& what) : std::runtime_error(what) {}
};

struct domain_escape : std::runtime_error {
  explicit domain_escape(const std::string& what) : std::runtime_error(what) {}
};

struct synthesis_infeasible : std::runtime_error {
  explicit synthesis_infeasible(const std::string& what) : std::runtime_error(what) {}
};

struct solver_failure : std::runtime_error {
  explicit solver_failure(const std::string& what) : std::runtime_error(what) {}
};

struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

struct budget_exhausted : std::runtime_error {
  explicit budget_exhausted(const std::string& what) : std::runtime_error(what) {}
};

// CLI exit codes.
enum exit_code : int {
  exit_ok = 0,
  exit_unsound = 1,
  exit_infeasible = 2,
  exit_budget = 3,
  exit_config = 4,
};

}  // namespace iobs
