#pragma once

namespace kg {

// Entry point shared by the binary and the CLI tests. Returns the process
// exit status: 0 all gates passed, 1 gate/runtime failure, 2 config error.
int cli_run(int argc, const char* const* argv);

}  // namespace kg
