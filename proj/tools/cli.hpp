#pragma once

#include <iosfwd>

namespace hsp {

// Entry point of the `hsp` tool. `environment` feeds HSP_* overrides (may be null).
int run_cli(int argc, const char* const* argv, char** environment, std::ostream& out, std::ostream& err);

}  // namespace hsp
