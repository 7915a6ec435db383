#pragma once

namespace mmfuse {

// Full command-line entry point; returns the process exit code.
// 0 success, 2 configuration error, 3 numerical abort, 1 other failure.
int cli_main(int argc, const char* const* argv);

}  // namespace mmfuse
