#pragma once

#include <string>
#include <vector>

namespace ecgdg::cli {

// Dispatches a full argv (excluding the program name). Exit 0 on success, 1
// on domain errors (rendered as "error_code: message" on stderr), 2 on usage
// errors.
int run(const std::vector<std::string>& args);

}  // namespace ecgdg::cli
