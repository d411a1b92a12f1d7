#pragma once

#include <stdexcept>
#include <string>

namespace ura {

struct UraError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidConfig : UraError {
    using UraError::UraError;
};

struct SizeOverflow : UraError {
    using UraError::UraError;
};

struct ConstructionFailed : UraError {
    using UraError::UraError;
};

struct DimensionMismatch : UraError {
    using UraError::UraError;
};

struct OddLength : UraError {
    using UraError::UraError;
};

struct WindowOutOfRange : UraError {
    using UraError::UraError;
};

struct OverlapMismatch : UraError {
    using UraError::UraError;
};

struct AmbiguousSplice : UraError {
    using UraError::UraError;
};

struct SingularCovariance : UraError {
    using UraError::UraError;
};

struct IoError : UraError {
    using UraError::UraError;
};

} // namespace ura
