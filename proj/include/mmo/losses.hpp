#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mmo/metrics.hpp"
#include "mmo/types.hpp"

namespace mmo {

/// Cost coefficients gamma_k = lambda * beta_k - alpha_k of the linearized
/// metric loss.
struct CostCoefficients {
    std::vector<FourTuple> per_label;
    double lambda = 0.0;

    std::size_t l() const noexcept { return per_label.size(); }
};

/// Throws ShapeError when alpha and beta differ in length.
CostCoefficients gamma_from(const MetricCoefficients& alpha, const MetricCoefficients& beta, double lambda);
inline CostCoefficients gamma_from(const MetricSpec& spec, double lambda) {
    return gamma_from(spec.alpha, spec.beta, lambda);
}

/// L_gamma(prediction, y) = sum_k gamma_k(h_k, y_k).
double target_loss(const CostCoefficients& gamma, const LabelVector& prediction, const LabelVector& y);

/// Phi_tau(u): log(u) at tau = 0, (1 - u^-tau) / tau for tau > 0.
/// Throws DomainError for u <= 0 or tau < 0.
double phi_tau(double tau, double u);

enum class OffsetMode {
    all_pairs,  ///< S = sum over all (y', y) pairs of the shifted cost; 4^(l-1) * sigma
    sigma,        ///< S = sigma = sum_k sum_{a,b} shifted per-label cost
};

enum class Normalization {
    raw,         ///< literal sum over configurations
    per_config,  ///< raw divided by 2^(l-2)
};

std::string_view to_string(OffsetMode m);
std::string_view to_string(Normalization n);
OffsetMode parse_offset_mode(std::string_view s);
Normalization parse_normalization(std::string_view s);

struct SurrogateParams {
    double tau = 0.0;
    OffsetMode offset_mode = OffsetMode::sigma;
    Normalization normalization = Normalization::per_config;
    /// Total constant C0 added to L_gamma, split evenly over labels. When
    /// unset, label k is shifted by sum_j |gamma_k^j|.
    std::optional<double> nonneg_shift;

    void validate() const;
};

/// Shifted per-label cost table: cell [a][b] holds Lbar_k(y'_k, y_k) with
/// index 0 for +1 and 1 for -1.
using CostTable = std::array<std::array<double, 2>, 2>;

constexpr std::size_t sign_slot(int v) noexcept { return v > 0 ? 0 : 1; }

/// Per-label shifted costs; throws DomainError if the configured shift
/// leaves a negative cell.
std::vector<CostTable> shifted_costs(const CostCoefficients& gamma, const SurrogateParams& params);

/// The weight offset S.
double cost_offset(const CostCoefficients& gamma, const SurrogateParams& params);

/// Multiplier that turns a raw surrogate value into the configured
/// normalization (1 or 2^-(l-2)).
double normalization_factor(std::size_t l, const SurrogateParams& params);

inline constexpr std::size_t kNaiveMaxLabels = 12;
inline constexpr std::size_t kRawMaxLabels = 30;

/// Direct double sum over all 2^l x 2^l configurations. Oracle only.
double surrogate_naive(const CostCoefficients& gamma, const SurrogateParams& params, std::span<const double> scores,
                       const LabelVector& y);

/// Precomputed per-label costs and offset for one (gamma, params) pair.
/// Evaluates the surrogate and its score gradient in O(l).
class SurrogateEvaluator {
public:
    SurrogateEvaluator(const CostCoefficients& gamma, const SurrogateParams& params);

    std::size_t l() const noexcept { return costs_.size(); }
    double offset() const noexcept { return offset_; }
    const SurrogateParams& params() const noexcept { return params_; }

    double loss(std::span<const double> scores, const LabelVector& y) const;

    /// Writes d loss / d scores into `grad` and returns the loss.
    double loss_and_gradient(std::span<const double> scores, const LabelVector& y, std::span<double> grad) const;

private:
    double evaluate(std::span<const double> scores, const LabelVector& y, std::span<double> grad) const;

    SurrogateParams params_;
    std::vector<CostTable> costs_;
    double offset_ = 0.0;
    double norm_ = 1.0;
};

double surrogate_factorized(const CostCoefficients& gamma, const SurrogateParams& params,
                            std::span<const double> scores, const LabelVector& y);

std::vector<double> surrogate_gradient(const CostCoefficients& gamma, const SurrogateParams& params,
                                       std::span<const double> scores, const LabelVector& y);

/// log(1 + e^t) without overflow.
double softplus(double t) noexcept;
double sigmoid(double t) noexcept;

}  // namespace mmo
