// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "arsl/cli.hpp"

int main(int argc, char** argv) {
  return arsl::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
