#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <vector>

namespace aupair {

struct ProcessResult {
  int exit_code = -1;     // valid when !signaled && !timed_out
  bool signaled = false;  // terminated by a signal we did not send
  bool timed_out = false;
  bool output_limit_exceeded = false;
  std::string stdout_data;
  std::string stderr_data;  // truncated to the same byte cap
};

// Runs argv[0] (looked up on PATH) in its own process group. The group is
// killed when the wall timeout elapses or stdout grows past `max_output_bytes`.
// Throws EnvironmentError when the program cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv,
                          std::chrono::milliseconds wall_timeout, std::size_t max_output_bytes);

// Absolute path of an executable, searching PATH for bare names. Empty if absent.
std::string find_executable(const std::string& name);

}  // namespace aupair
