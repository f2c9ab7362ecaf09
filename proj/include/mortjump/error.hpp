#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mortjump {

enum class Errc {
    GridIncomplete,
    InvalidExposure,
    DuplicateCell,
    ZeroDeathCell,
    TooFewYears,
    ParseError,
    InvalidCoefficient,
    ShapeError,
    InvalidStart,
    PinnedIndex,
    InvalidSettings,
    DegenerateScale,
    NoJump,
    InconsistentPath,
    NoAdmissibleRoot,
    AmbiguousRoot,
    DegenerateChains,
    ChainTooShort,
    InvalidLogLik,
    InvalidHorizon,
    YearRangeMismatch,
    IncompatibleFits,
    InvalidConfig,
    IoError,
};

std::string_view errc_name(Errc code) noexcept;

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace mortjump
