// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace relubound {

enum class ErrorCode {
  Parse,
  DimensionMismatch,
  NonFinite,
  UnsupportedActivation,
  InvalidArgument,
  RejectionBudgetExceeded,
  DegenerateTail,
  TooManyUnstable,
  LpFailure,
  Unsplittable,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace relubound
