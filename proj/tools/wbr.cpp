// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#include "wbr/cli.hpp"

int main(int argc, char** argv) { return wbr::run_cli(argc, argv); }
