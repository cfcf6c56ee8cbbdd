// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#include "wolf/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return wolf::cli::run(argc, argv, std::cout, std::cerr); }
