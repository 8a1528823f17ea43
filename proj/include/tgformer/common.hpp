// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tgf {

using NodeId = std::int64_t;
using EdgeId = std::int64_t;
using Time = double;

// Bad caller input: out-of-range ids, inconsistent shapes, invalid config.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unparseable text input (CSV rows, config files).
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Corrupt or unrecognized binary file.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tgf
