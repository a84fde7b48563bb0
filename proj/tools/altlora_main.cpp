// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "altlora/cli.hpp"

int main(int argc, char** argv) {
  return altlora::cli::run(argc, argv, std::cout, std::cerr);
}
