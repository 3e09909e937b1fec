// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace wbr {

/// Entry point of the `wbr` command line tool. Returns the process exit code:
/// 0 on success, 2 for usage or configuration errors (the message names the
/// offending field), 1 for any other failure.
int run_cli(int argc, const char* const* argv);

}  // namespace wbr
