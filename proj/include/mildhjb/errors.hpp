#pragma once

#include <stdexcept>
#include <string>

namespace mildhjb {

// Configuration / input-file problems. `tag` is the one-word machine
// readable code surfaced on stderr and through the C API.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string tag, const std::string& what)
        : std::runtime_error(what), tag_(std::move(tag)) {}
    const std::string& tag() const noexcept { return tag_; }

private:
    std::string tag_;
};

// Typed numerical failures (non-contraction, null-controllability failure,
// fit-span refusal, ellipticity violation, ...). These map to exit code 2.
class NumericalError : public std::runtime_error {
public:
    NumericalError(std::string tag, const std::string& what)
        : std::runtime_error(what), tag_(std::move(tag)) {}
    const std::string& tag() const noexcept { return tag_; }

private:
    std::string tag_;
};

// Plain misuse of an in-process API (bad sizes, s > t, too few samples).
class ArgumentError : public std::invalid_argument {
public:
    explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

namespace tags {
inline constexpr const char* config_missing_file = "CONFIG_MISSING_FILE";
inline constexpr const char* config_parse = "CONFIG_PARSE";
inline constexpr const char* config_unknown_key = "CONFIG_UNKNOWN_KEY";
inline constexpr const char* config_value = "CONFIG_VALUE";
inline constexpr const char* ellipticity = "ELLIPTICITY";
inline constexpr const char* noise_bound = "NOISE_BOUND";
inline constexpr const char* null_controllability = "NULL_CONTROLLABILITY";
inline constexpr const char* non_contraction = "NON_CONTRACTION";
inline constexpr const char* fit_span = "FIT_SPAN";
inline constexpr const char* rank_deficient = "RANK_DEFICIENT";
inline constexpr const char* degenerate_window = "DEGENERATE_WINDOW";
inline constexpr const char* io_error = "IO_ERROR";
}  // namespace tags

}  // namespace mildhjb
