#include "openinc/error.hpp"

namespace openinc {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::shape_mismatch: return "ShapeMismatch";
        case Errc::degenerate_vector: return "DegenerateVector";
        case Errc::empty_input: return "EmptyInput";
        case Errc::non_scalar_root: return "NonScalarRoot";
        case Errc::batch_too_small: return "BatchTooSmall";
        case Errc::non_unit_rows: return "NonUnitRows";
        case Errc::label_out_of_range: return "LabelOutOfRange";
        case Errc::degenerate_triplet: return "DegenerateTriplet";
        case Errc::alpha_out_of_range: return "AlphaOutOfRange";
        case Errc::invalid_count: return "InvalidCount";
        case Errc::quota_exceeds_class: return "QuotaExceedsClass";
        case Errc::empty_class: return "EmptyClass";
        case Errc::memory_too_small: return "MemoryTooSmall";
        case Errc::duplicate_class: return "DuplicateClass";
        case Errc::empty_store: return "EmptyStore";
        case Errc::no_classes: return "NoClasses";
        case Errc::missing_threshold: return "MissingThreshold";
        case Errc::empty_side: return "EmptySide";
        case Errc::single_class: return "SingleClass";
        case Errc::zero_inter_spread: return "ZeroInterSpread";
        case Errc::invalid_spec: return "InvalidSpec";
        case Errc::parse_error: return "ParseError";
        case Errc::missing_column: return "MissingColumn";
        case Errc::indivisible_split: return "IndivisibleSplit";
        case Errc::file_not_found: return "FileNotFound";
        case Errc::validation_error: return "ValidationError";
        case Errc::io_error: return "IoError";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

ParseError::ParseError(std::size_t line, const std::string& message)
    : Error(Errc::parse_error, "line " + std::to_string(line) + ": " + message), line_(line) {}

ValidationError::ValidationError(std::string key, const std::string& message)
    : Error(Errc::validation_error, "'" + key + "': " + message), key_(std::move(key)) {}

}  // namespace openinc
