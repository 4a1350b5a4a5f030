#pragma once

#include <string>
#include <vector>

namespace aspectkg::cli {

/// Exit codes: 0 success, 1 usage, 2 data/validation, 3 numeric failure.
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace aspectkg::cli
