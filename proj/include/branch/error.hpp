#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace branch {

// Stable machine codes; names are part of the HTTP and CLI surface.
enum class ErrorCode {
    MalformedCsv,
    BadClassColumn,
    EmptyDataset,
    BadFraction,
    TooFewSamples,
    UnknownFeature,
    KindMismatch,
    SignatureMismatch,
    CyclicReference,
    UnresolvableTreeRef,
    InvalidRule,
    InvalidLeaf,
    SchemaViolation,
    DegenerateData,
    NonFiniteLoss,
    BadHyperparameters,
    OneClassOnly,
    NotOwner,
    NotFound,
    InUse,
    ValidationFailed,
    Unauthorized,
    BadRequest,
    StoreIo,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string location = {})
        : std::runtime_error(message), code_(code), location_(std::move(location)) {}

    ErrorCode code() const noexcept { return code_; }
    // JSON path for schema errors, empty otherwise.
    const std::string& location() const noexcept { return location_; }

private:
    ErrorCode code_;
    std::string location_;
};

}  // namespace branch
