// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "instseg/commands.hpp"

int main(int argc, char** argv) {
  return instseg::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
