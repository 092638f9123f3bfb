#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "branch/evaluation.hpp"

namespace branch {

// `train` | `test:<dataset-id-or-path>` | `split:<fraction>:<seed>`.
// Throws Error(BadFraction) for an out-of-range fraction and
// Error(BadRequest) for anything else the grammar rejects.
EvalMode parse_mode_spec(std::string_view spec);

// Exit codes: 0 success, 1 data or validation error, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace branch
