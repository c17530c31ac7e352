// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#include "dlv/cli.hpp"

int main(int argc, char** argv) { return dlv::cli_main(argc, argv); }
