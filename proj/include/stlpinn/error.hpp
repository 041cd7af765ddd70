#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stlpinn {

/// Error categories raised across the library. The CLI maps them to exit codes.
enum class Errc {
    SingularMatrix,
    NotSymmetric,
    NotPositiveDefinite,
    DimensionMismatch,
    ShapeMismatch,
    InvalidWidths,
    NonFiniteLoss,
    UnknownFamily,
    InvalidAlpha,
    Unsupported,
    ZeroEigenvalue,
    RepeatedRoot,
    ResonantFrequency,
    OutOfDomain,
    AlreadyLinear,
    InvalidCounts,
    InvalidConfig,
    Diverged,
    GeometryMismatch,
    SingularM,
    InvalidOrder,
    NonFiniteSeries,
    StepUnderflow,
    MaxStepsExceeded,
    NewtonDivergence,
    CFLViolation,
    ZeroReference,
    IoError,
    SchemaVersionMismatch,
    CorruptFloatArray,
};

std::string_view errc_name(Errc code) noexcept;

/// True for errors that come out of a numerical routine rather than bad input.
bool is_numerical(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace stlpinn
