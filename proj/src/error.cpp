#include "mortjump/error.hpp"

namespace mortjump {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::GridIncomplete: return "GridIncomplete";
        case Errc::InvalidExposure: return "InvalidExposure";
        case Errc::DuplicateCell: return "DuplicateCell";
        case Errc::ZeroDeathCell: return "ZeroDeathCell";
        case Errc::TooFewYears: return "TooFewYears";
        case Errc::ParseError: return "ParseError";
        case Errc::InvalidCoefficient: return "InvalidCoefficient";
        case Errc::ShapeError: return "ShapeError";
        case Errc::InvalidStart: return "InvalidStart";
        case Errc::PinnedIndex: return "PinnedIndex";
        case Errc::InvalidSettings: return "InvalidSettings";
        case Errc::DegenerateScale: return "DegenerateScale";
        case Errc::NoJump: return "NoJump";
        case Errc::InconsistentPath: return "InconsistentPath";
        case Errc::NoAdmissibleRoot: return "NoAdmissibleRoot";
        case Errc::AmbiguousRoot: return "AmbiguousRoot";
        case Errc::DegenerateChains: return "DegenerateChains";
        case Errc::ChainTooShort: return "ChainTooShort";
        case Errc::InvalidLogLik: return "InvalidLogLik";
        case Errc::InvalidHorizon: return "InvalidHorizon";
        case Errc::YearRangeMismatch: return "YearRangeMismatch";
        case Errc::IncompatibleFits: return "IncompatibleFits";
        case Errc::InvalidConfig: return "InvalidConfig";
        case Errc::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace mortjump
