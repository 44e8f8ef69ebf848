#pragma once

// Entry point shared by the caada binary and the test suites. Returns the
// process exit code: 0 success, 1 usage error, 2 data error, 3 divergence,
// 4 verification failure.
int run_cli(int argc, const char* const* argv);
