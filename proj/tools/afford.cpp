// SPDX-License-Identifier: Apache-2.0

#include "afford/cli.hpp"

int main(int argc, char** argv) { return afford::cli::run(argc, argv); }
