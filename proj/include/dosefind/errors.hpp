#pragma once

#include <stdexcept>
#include <string>

namespace dosefind {

// Requested value lies outside the attainable range of a shape function.
struct no_solution_error : std::domain_error {
  using std::domain_error::domain_error;
};

// Design/weight combination cannot identify the linear parameters.
struct rank_deficiency_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Information or sandwich matrix is numerically singular where a full-rank
// matrix is required.
struct singular_information_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// More than the tolerated fraction of bootstrap refits failed.
struct bootstrap_failure_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed user input (CSV/JSON); message carries a line or field hint.
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dosefind
