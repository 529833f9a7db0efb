#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmo/types.hpp"

namespace mmo {

class DiscreteDistribution;
struct TabularClassifier;

enum class Averaging { micro, macro, instance };

std::string_view to_string(Averaging a);
/// Throws ConfigError on unknown names.
Averaging parse_averaging(std::string_view name);

/// One four-tuple per label.
using MetricCoefficients = std::vector<FourTuple>;

/// A linear-fractional metric: ratio of sum(l_alpha) to sum(l_beta), averaged
/// per `averaging`.
struct MetricSpec {
    std::string name;
    std::size_t l = 0;
    MetricCoefficients alpha;
    MetricCoefficients beta;
    Averaging averaging = Averaging::micro;

    /// Throws ShapeError if alpha/beta lengths differ from l.
    void validate() const;
};

/// l_{mu,k} = mu.c_hy*h*y + mu.c_y*y + mu.c_h*h + mu.c_1.
constexpr double ell_mu_k(const FourTuple& mu, int h, int y) noexcept { return mu.eval(h, y); }

/// Confusion-count indicators expressed in the (hy, y, h, 1) basis.
namespace confusion {
inline constexpr FourTuple tp{0.25, 0.25, 0.25, 0.25};
inline constexpr FourTuple fp{-0.25, -0.25, 0.25, 0.25};
inline constexpr FourTuple fn{-0.25, 0.25, -0.25, 0.25};
inline constexpr FourTuple tn{0.25, -0.25, -0.25, 0.25};
inline constexpr FourTuple one{0.0, 0.0, 0.0, 1.0};
}  // namespace confusion

/// Presets: "f1", "jaccard", "precision", "accuracy". The tuples are built
/// from the confusion identities above. Throws ConfigError on unknown names.
MetricSpec preset(std::string_view name, std::size_t l, Averaging averaging);

std::vector<std::string> preset_names();

enum class DegeneratePolicy {
    raise,  ///< throw DegenerateDenominator
    skip,   ///< drop the label/instance from macro/instance averages
};

/// Empirical metric over paired truth/prediction label vectors.
double empirical_metric(std::span<const LabelVector> truth, std::span<const LabelVector> predictions,
                        const MetricSpec& spec, DegeneratePolicy policy = DegeneratePolicy::raise);

struct ConfusionCounts {
    std::vector<std::int64_t> tp, fp, tn, fn;

    std::size_t labels() const noexcept { return tp.size(); }
    std::int64_t total_tp() const noexcept;
    std::int64_t total_fp() const noexcept;
    std::int64_t total_tn() const noexcept;
    std::int64_t total_fn() const noexcept;
};

ConfusionCounts confusion_counts(std::span<const LabelVector> truth, std::span<const LabelVector> predictions);

/// Expected l_alpha and l_beta sums under a finite distribution, per label.
struct PopulationTerms {
    std::vector<double> alpha;
    std::vector<double> beta;

    double alpha_total() const noexcept;
    double beta_total() const noexcept;
};

PopulationTerms population_terms(const DiscreteDistribution& dist, const TabularClassifier& classifier,
                                 const MetricSpec& spec);

/// Population metric: ratio of expectations (micro and instance), or mean of
/// per-label ratios (macro).
double population_metric(const DiscreteDistribution& dist, const TabularClassifier& classifier,
                         const MetricSpec& spec);

}  // namespace mmo
