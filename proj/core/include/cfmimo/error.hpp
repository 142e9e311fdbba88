// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cfmimo {

/// Base of every error thrown by the library. `error_class()` is a stable,
/// machine-readable tag used by the CLI on failure.
class Error : public std::runtime_error {
 public:
  Error(std::string error_class, const std::string& what)
      : std::runtime_error(what), class_(std::move(error_class)) {}
  const std::string& error_class() const noexcept { return class_; }

 private:
  std::string class_;
};

#define CFMIMO_DEFINE_ERROR(Name, tag)                                        \
  class Name : public Error {                                                \
   public:                                                                   \
    explicit Name(const std::string& what) : Error(tag, what) {}             \
  };

CFMIMO_DEFINE_ERROR(ShapeError, "shape_mismatch")
CFMIMO_DEFINE_ERROR(DomainError, "domain_error")
CFMIMO_DEFINE_ERROR(ConfigError, "invalid_config")
CFMIMO_DEFINE_ERROR(SingularSystemError, "singular_system")
CFMIMO_DEFINE_ERROR(BisectionError, "bisection_failure")
CFMIMO_DEFINE_ERROR(DivergenceError, "divergence")
CFMIMO_DEFINE_ERROR(IoError, "io_error")
CFMIMO_DEFINE_ERROR(FormatVersionError, "version_mismatch")
CFMIMO_DEFINE_ERROR(TruncatedPayloadError, "truncated_payload")
CFMIMO_DEFINE_ERROR(ChecksumError, "checksum_failure")
CFMIMO_DEFINE_ERROR(ParseError, "malformed_file")

#undef CFMIMO_DEFINE_ERROR

}  // namespace cfmimo
