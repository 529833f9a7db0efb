#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mmo {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mismatched lengths or out-of-range indices between related objects.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid user configuration (bad flag values, unknown preset, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Carries the 1-based line number when known.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t line)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A computation refused because its cost would be exponential in the input.
class ScaleGuardError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss during training.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t epoch, std::size_t batch)
        : Error(what + " (epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ")"),
          epoch_(epoch), batch_(batch) {}

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t batch() const noexcept { return batch_; }

private:
    std::size_t epoch_;
    std::size_t batch_;
};

/// A search that produced no usable candidate.
class SearchError : public Error {
public:
    using Error::Error;
};

enum class RatioSite { micro, label, instance };

/// A metric ratio whose denominator is not strictly positive.
class DegenerateDenominator : public Error {
public:
    DegenerateDenominator(RatioSite site, std::size_t index)
        : Error(describe(site, index)), site_(site), index_(index) {}

    RatioSite site() const noexcept { return site_; }
    std::size_t index() const noexcept { return index_; }

private:
    static std::string describe(RatioSite site, std::size_t index) {
        switch (site) {
        case RatioSite::label:
            return "degenerate denominator for label " + std::to_string(index);
        case RatioSite::instance:
            return "degenerate denominator for instance " + std::to_string(index);
        default:
            return "degenerate denominator in micro-averaged ratio";
        }
    }

    RatioSite site_;
    std::size_t index_;
};

}  // namespace mmo
