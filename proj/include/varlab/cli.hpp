#pragma once

#include <string>
#include <vector>

namespace varlab {

/// Entry point behind the varlab binary; returns the process exit code.
/// Errors surface as one machine-readable JSON object on stderr.
int cli_run(const std::vector<std::string>& args);

}  // namespace varlab
