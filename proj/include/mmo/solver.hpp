#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmo/data.hpp"
#include "mmo/losses.hpp"
#include "mmo/metrics.hpp"
#include "mmo/models.hpp"

namespace mmo {

enum class Optimizer { gd, adaptive_moments };

std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view s);

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 128;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    double tau = 0.0;
    Optimizer optimizer = Optimizer::adaptive_moments;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    OffsetMode offset_mode = OffsetMode::sigma;
    Normalization normalization = Normalization::per_config;

    /// Throws ConfigError on any out-of-range field.
    void validate() const;
    SurrogateParams surrogate_params() const;
};

struct TrainResult {
    LinearModel model;
    /// Mean per-instance training loss of each epoch, measured on the batches
    /// as they were visited.
    std::vector<double> epoch_losses;
};

/// Mini-batch minimization of the factorized surrogate for fixed costs,
/// starting from the all-zero model. Throws DivergenceError on a non-finite
/// loss and ShapeError/ConfigError on bad inputs.
TrainResult train_surrogate(const Dataset& train, const CostCoefficients& gamma, const TrainConfig& cfg);

/// Per-label logistic loss log(1 + exp(-y h)) with the same optimizer,
/// schedule and initialization. The reference point for metric optimization.
TrainResult train_logistic_baseline(const Dataset& train, const TrainConfig& cfg);

enum class SearchStrategy { oracle_bisect, surrogate_bisect, cv_grid, ema };

std::string_view to_string(SearchStrategy s);

struct SearchConfig {
    double lambda_min = 0.0;
    double lambda_max = 1.0;
    /// Lambda resolution. Unset picks the strategy default: 1e-3 for oracle
    /// bisection, 0.1 for the grid, eps_m / (2 * max l_beta) for surrogate
    /// bisection.
    std::optional<double> epsilon;
    double epsilon_m = 1e-2;
    SearchStrategy strategy = SearchStrategy::ema;
    double ema_gamma = 0.7;
    double lambda0 = 0.5;
    /// How the grid scores a candidate whose validation metric has a zero
    /// denominator somewhere.
    DegeneratePolicy degenerate = DegeneratePolicy::raise;

    void validate() const;
};

struct CandidateRecord {
    double lambda = 0.0;
    /// Mean training surrogate of the candidate model (NaN for oracle runs).
    double surrogate = 0.0;
    /// Mean empirical (or, for oracle runs, minimum expected) l^lambda.
    double ell_lambda = 0.0;
    /// Validation metric; -inf when degenerate, NaN when not evaluated.
    double metric = 0.0;
    /// "shrink_upper", "shrink_lower", "band", or empty.
    std::string branch;
};

struct SearchReport {
    SearchStrategy strategy = SearchStrategy::ema;
    double chosen_lambda = 0.0;
    double epsilon = 0.0;
    std::vector<CandidateRecord> candidates;
    std::size_t iterations = 0;
    std::string termination;
    /// Lambda after every optimizer step (ema only).
    std::vector<double> lambda_trace;
};

struct SearchResult {
    LinearModel model;
    SearchReport report;
};

/// ceil(log2(range / eps)), the bisection iteration bound.
std::size_t bisection_bound(double range, double epsilon);
/// floor(range / eps) + 1, the grid size.
std::size_t grid_size(double range, double epsilon);

/// Bisection on the sign of min_h E[l^lambda(h)] over every tabular
/// classifier of `dist`. Micro and instance averaging only.
SearchReport lambda_oracle_bisect(const DiscreteDistribution& dist, const MetricSpec& spec, const SearchConfig& cfg);

/// Trains a surrogate model at each midpoint and branches on its empirical
/// l^lambda against the band [-eps_m, eps_m].
SearchResult lambda_surrogate_bisect(const Dataset& train, const MetricSpec& spec, const TrainConfig& train_cfg,
                                     const SearchConfig& cfg);

/// One model per grid point from lambda_max downward; keeps the first
/// candidate with the strictly best validation metric. Throws SearchError
/// when every candidate is degenerate.
SearchResult lambda_cv_grid(const Dataset& train, const Dataset& validation, const MetricSpec& spec,
                            const TrainConfig& train_cfg, const SearchConfig& cfg);

double ema_update(double lambda_old, double batch_metric, double gamma) noexcept;

/// Single training run where lambda tracks the micro batch metric: before
/// each step lambda is updated from the current model's batch predictions,
/// the costs are rebuilt and one step is taken on the new costs.
SearchResult train_ema(const Dataset& train, const MetricSpec& spec, const TrainConfig& train_cfg,
                       const SearchConfig& cfg);

std::vector<LabelVector> predict_all(const LinearModel& model, const Dataset& data);

/// Mean over instances of sum_k l^lambda_k at the model's sign predictions.
double empirical_ell_lambda(const LinearModel& model, const Dataset& data, const CostCoefficients& gamma);
/// Mean factorized surrogate over the dataset.
double empirical_surrogate(const LinearModel& model, const Dataset& data, const CostCoefficients& gamma,
                           const SurrogateParams& params);

}  // namespace mmo
