// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace splatover {

enum class ErrorCode {
    InvalidArgument,
    DegenerateLookAt,
    FileNotFound,
    MalformedSplatFile,
    LabelLengthMismatch,
    InvalidSpec,
    EmptySelection,
    TooFewPoints,
    EmptyScene,
    NoNormals,
    EmptyHandCloud,
    SamplingExhausted,
    CenteringFailed,
    IoError,
    SchemaVersionMismatch,
    ShapeMismatch,
    NonFiniteLoss,
    EmptyDataset,
    DivergedLoss,
    ArchitectureMismatch,
    ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-checkable ErrorCode alongside the message.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string &message);

    [[nodiscard]] ErrorCode code() const noexcept { return mCode; }

  private:
    ErrorCode mCode;
};

} // namespace splatover
