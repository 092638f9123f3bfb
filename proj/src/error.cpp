#include "branch/error.hpp"

namespace branch {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MalformedCsv: return "MalformedCsv";
        case ErrorCode::BadClassColumn: return "BadClassColumn";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::BadFraction: return "BadFraction";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::UnknownFeature: return "UnknownFeature";
        case ErrorCode::KindMismatch: return "KindMismatch";
        case ErrorCode::SignatureMismatch: return "SignatureMismatch";
        case ErrorCode::CyclicReference: return "CyclicReference";
        case ErrorCode::UnresolvableTreeRef: return "UnresolvableTreeRef";
        case ErrorCode::InvalidRule: return "InvalidRule";
        case ErrorCode::InvalidLeaf: return "InvalidLeaf";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::DegenerateData: return "DegenerateData";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::BadHyperparameters: return "BadHyperparameters";
        case ErrorCode::OneClassOnly: return "OneClassOnly";
        case ErrorCode::NotOwner: return "NotOwner";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::InUse: return "InUse";
        case ErrorCode::ValidationFailed: return "ValidationFailed";
        case ErrorCode::Unauthorized: return "Unauthorized";
        case ErrorCode::BadRequest: return "BadRequest";
        case ErrorCode::StoreIo: return "StoreIo";
    }
    return "Unknown";
}

}  // namespace branch
