#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "mmo/types.hpp"

namespace mmo {

class LinearModel;

struct Instance {
    SparseVector x;
    LabelVector y;

    friend bool operator==(const Instance&, const Instance&) = default;
};

/// Multi-label sample with sparse features.
struct Dataset {
    std::size_t l = 0;
    std::size_t d = 0;
    std::vector<Instance> instances;

    std::size_t size() const noexcept { return instances.size(); }
    bool empty() const noexcept { return instances.empty(); }

    /// Throws ShapeError if any instance violates the l/d invariants.
    void validate() const;

    /// Label vectors in instance order.
    std::vector<LabelVector> labels() const;

    /// Instances at the given positions, in that order.
    Dataset subset(const std::vector<std::size_t>& positions) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// ---------------------------------------------------------------------------
// .mlsvm text format
//
//   #ml l=<int> d=<int>
//   <labels> <idx>:<val> <idx>:<val> ...
//
// <labels> is a comma-separated list of 0-based positive label indices, or
// "-" when no label is positive. Feature indices are 0-based and strictly
// increasing. Other lines starting with '#' and blank lines are ignored.
// ---------------------------------------------------------------------------

Dataset parse_mlsvm(std::istream& in);
Dataset load_mlsvm(const std::filesystem::path& path);

/// Values are written in shortest round-trip form, so save/load is lossless.
void write_mlsvm(std::ostream& out, const Dataset& data);
void save_mlsvm(const std::filesystem::path& path, const Dataset& data);

struct SynthLinearOptions {
    std::size_t l = 10;
    std::size_t d = 50;
    std::size_t m = 1000;
    double positive_rate = 0.1;
    /// Temperature of the logistic label response; 0 gives sign labels.
    double noise = 0.0;
    std::uint64_t seed = 0;
    /// Norm of each planted weight vector.
    double planted_scale = 4.0;
};

/// Gaussian features, planted per-label linear scorers whose biases are
/// calibrated to the requested marginal positive rate.
std::pair<Dataset, LinearModel> synth_linear(const SynthLinearOptions& options);

// ---------------------------------------------------------------------------
// Finite distributions for exhaustive verification.
// ---------------------------------------------------------------------------

/// Per-label independent P(y_k = +1).
struct Marginals {
    std::vector<double> p;
};

/// Full table over {+1,-1}^l in configuration-index order.
struct ConditionalTable {
    std::vector<double> p;
};

using Conditional = std::variant<Marginals, ConditionalTable>;

struct SupportPoint {
    std::string id;
    double weight = 0.0;
    Conditional conditional;
};

class DiscreteDistribution {
public:
    /// Validates weights, table normalization and marginal ranges.
    DiscreteDistribution(std::size_t l, std::vector<SupportPoint> points);

    std::size_t l() const noexcept { return l_; }
    std::size_t support_size() const noexcept { return points_.size(); }
    const std::vector<SupportPoint>& points() const noexcept { return points_; }

    /// E[y_k | x_i].
    double label_mean(std::size_t i, std::size_t k) const;

    /// P(y | x_i) as a full table in configuration-index order.
    std::vector<double> table(std::size_t i) const;

private:
    std::size_t l_;
    std::vector<SupportPoint> points_;
};

inline constexpr double kNormalizationTolerance = 1e-12;

/// Parses the distribution grammar:
///
///   point <id> w=<weight>
///   marginals <p_1> ... <p_l>        (or)
///   table <p_0> ... <p_{2^l - 1}>
///
/// Tokens may span lines; '#' starts a comment running to end of line.
DiscreteDistribution parse_distribution(std::string_view text);
DiscreteDistribution load_distribution(const std::filesystem::path& path);

}  // namespace mmo
