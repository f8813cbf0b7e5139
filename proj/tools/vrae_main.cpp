// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "vrae/cli.hpp"

int main(int argc, char** argv) { return vrae::cli::run(argc, argv); }
