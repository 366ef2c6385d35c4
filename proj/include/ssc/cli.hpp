#pragma once

namespace ssc {

// Command-line entry point. Exit codes: 0 success, 1 usage, 2 bad data or
// file format (messages carry byte offsets where known), 3 numeric failure
// (divergence, singular transforms, failed gradient checks).
int run_cli(int argc, const char* const* argv);

}  // namespace ssc
