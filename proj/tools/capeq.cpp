// SPDX-License-Identifier: MIT
#include "capeq/cli.hpp"

int main(int argc, char** argv) { return capeq::cli::run(argc, argv); }
