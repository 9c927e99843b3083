// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "splatover/error.hpp"

namespace splatover {

std::string_view
to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateLookAt: return "DegenerateLookAt";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::MalformedSplatFile: return "MalformedSplatFile";
    case ErrorCode::LabelLengthMismatch: return "LabelLengthMismatch";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::EmptyScene: return "EmptyScene";
    case ErrorCode::NoNormals: return "NoNormals";
    case ErrorCode::EmptyHandCloud: return "EmptyHandCloud";
    case ErrorCode::SamplingExhausted: return "SamplingExhausted";
    case ErrorCode::CenteringFailed: return "CenteringFailed";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::ArchitectureMismatch: return "ArchitectureMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string &message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), mCode(code) {}

} // namespace splatover
