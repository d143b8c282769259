#pragma once

#include <atomic>
#include <exception>
#include <iosfwd>

namespace vrpanel {

enum ExitCode { kExitOk = 0, kExitRuntime = 1, kExitBadInput = 2, kExitNetwork = 3 };

int exit_code_for(const std::exception& e);

// Raised by SIGINT; long-running subcommands poll it and shut down cleanly.
std::atomic<bool>& interrupt_flag();

// Entry point of the `vrpanel` tool. Errors are reported on `err` and mapped
// onto exit codes; nothing escapes.
int vrpanel_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vrpanel
