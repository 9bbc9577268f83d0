// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "xengine/problem.hpp"

namespace testsup {

inline std::string fixture_path(const std::string& name) {
  return std::string(XENGINE_FIXTURE_DIR) + "/" + name;
}

inline std::string data_path(const std::string& name) {
  return std::string(XENGINE_TEST_DATA_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(static_cast<bool>(in), "missing file: ", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline xengine::Problem load_fixture(const std::string& name) {
  return xengine::load_problem(read_file(fixture_path(name)));
}

// Per-test scratch directory provided by ctest; falls back to the cwd so the
// binaries also run standalone.
inline std::string scratch_dir() {
  const char* env = std::getenv("XENGINE_WORKDIR");
  return env && *env ? std::string(env) : std::string(".");
}

inline std::string solver_cmd() {
  const char* env = std::getenv("XENGINE_SOLVER_CMD");
  return env ? std::string(env) : std::string();
}

}  // namespace testsup
