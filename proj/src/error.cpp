#include "stlpinn/error.hpp"

namespace stlpinn {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::SingularMatrix: return "SingularMatrix";
        case Errc::NotSymmetric: return "NotSymmetric";
        case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::InvalidWidths: return "InvalidWidths";
        case Errc::NonFiniteLoss: return "NonFiniteLoss";
        case Errc::UnknownFamily: return "UnknownFamily";
        case Errc::InvalidAlpha: return "InvalidAlpha";
        case Errc::Unsupported: return "Unsupported";
        case Errc::ZeroEigenvalue: return "ZeroEigenvalue";
        case Errc::RepeatedRoot: return "RepeatedRoot";
        case Errc::ResonantFrequency: return "ResonantFrequency";
        case Errc::OutOfDomain: return "OutOfDomain";
        case Errc::AlreadyLinear: return "AlreadyLinear";
        case Errc::InvalidCounts: return "InvalidCounts";
        case Errc::InvalidConfig: return "InvalidConfig";
        case Errc::Diverged: return "Diverged";
        case Errc::GeometryMismatch: return "GeometryMismatch";
        case Errc::SingularM: return "SingularM";
        case Errc::InvalidOrder: return "InvalidOrder";
        case Errc::NonFiniteSeries: return "NonFiniteSeries";
        case Errc::StepUnderflow: return "StepUnderflow";
        case Errc::MaxStepsExceeded: return "MaxStepsExceeded";
        case Errc::NewtonDivergence: return "NewtonDivergence";
        case Errc::CFLViolation: return "CFLViolation";
        case Errc::ZeroReference: return "ZeroReference";
        case Errc::IoError: return "IoError";
        case Errc::SchemaVersionMismatch: return "SchemaVersionMismatch";
        case Errc::CorruptFloatArray: return "CorruptFloatArray";
    }
    return "Unknown";
}

bool is_numerical(Errc code) noexcept {
    switch (code) {
        case Errc::SingularMatrix:
        case Errc::NotPositiveDefinite:
        case Errc::NonFiniteLoss:
        case Errc::ZeroEigenvalue:
        case Errc::RepeatedRoot:
        case Errc::ResonantFrequency:
        case Errc::Diverged:
        case Errc::SingularM:
        case Errc::NonFiniteSeries:
        case Errc::StepUnderflow:
        case Errc::MaxStepsExceeded:
        case Errc::NewtonDivergence:
        case Errc::CFLViolation:
        case Errc::ZeroReference:
            return true;
        default:
            return false;
    }
}

}  // namespace stlpinn
