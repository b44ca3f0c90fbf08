// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace lumentrack {

// Every failure raised by the library carries a stable machine-readable code
// so the CLI can emit it in its error record.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define LUMENTRACK_DEFINE_ERROR(Name)                                \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  };

LUMENTRACK_DEFINE_ERROR(DegenerateVector)
LUMENTRACK_DEFINE_ERROR(SingularInnovation)
LUMENTRACK_DEFINE_ERROR(MalformedTree)
LUMENTRACK_DEFINE_ERROR(AboveRoot)
LUMENTRACK_DEFINE_ERROR(UnknownLabel)
LUMENTRACK_DEFINE_ERROR(MissingEmbedding)
LUMENTRACK_DEFINE_ERROR(ZeroVector)
LUMENTRACK_DEFINE_ERROR(NoVotes)
LUMENTRACK_DEFINE_ERROR(DisconnectedPath)
LUMENTRACK_DEFINE_ERROR(MisalignedFrames)
LUMENTRACK_DEFINE_ERROR(ProviderFailure)
LUMENTRACK_DEFINE_ERROR(ConfigError)
LUMENTRACK_DEFINE_ERROR(FormatError)

#undef LUMENTRACK_DEFINE_ERROR

}  // namespace lumentrack
