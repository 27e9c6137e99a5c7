#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace openinc {

enum class Errc {
    shape_mismatch,
    degenerate_vector,
    empty_input,
    non_scalar_root,
    batch_too_small,
    non_unit_rows,
    label_out_of_range,
    degenerate_triplet,
    alpha_out_of_range,
    invalid_count,
    quota_exceeds_class,
    empty_class,
    memory_too_small,
    duplicate_class,
    empty_store,
    no_classes,
    missing_threshold,
    empty_side,
    single_class,
    zero_inter_spread,
    invalid_spec,
    parse_error,
    missing_column,
    indivisible_split,
    file_not_found,
    validation_error,
    io_error,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message);

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

/// Raised by the CSV reader; `line()` is 1-based and counts the header.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message);

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Raised by config parsing; `key()` names the offending entry.
class ValidationError : public Error {
public:
    ValidationError(std::string key, const std::string& message);

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

}  // namespace openinc
