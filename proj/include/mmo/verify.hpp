#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmo/data.hpp"
#include "mmo/losses.hpp"
#include "mmo/metrics.hpp"
#include "mmo/models.hpp"

namespace mmo {

/// The trial that produced a check's largest violation.
struct TrialDetail {
    std::uint64_t seed = 0;
    std::uint64_t trial = 0;
    std::string summary;
};

struct VerifyReport {
    std::string check;
    std::size_t trials = 0;
    /// Largest positive part of any trial violation.
    double max_violation = 0.0;
    double tolerance = 0.0;
    bool passed = true;
    /// Set when some reported quantity only bounds the true value from one side.
    bool lower_bound = false;
    std::optional<TrialDetail> worst;
    /// Named auxiliary numbers (timings, ratios, counts).
    std::vector<std::pair<std::string, double>> measurements;

    /// Records one trial; keeps the worst and updates `passed`.
    void observe(double violation, std::uint64_t seed, std::uint64_t trial, const std::string& summary);
    /// Merges another report's trials into this one.
    void absorb(const VerifyReport& other);
};

struct LambdaStar {
    double lambda = 0.0;
    TabularClassifier argmax;
};

/// Exact sup of the population metric over every tabular classifier. Ties go
/// to the lowest enumeration index. Throws DegenerateDenominator when no
/// classifier has a positive denominator.
LambdaStar lambda_star_exhaustive(const DiscreteDistribution& dist, const MetricSpec& spec);

/// At lambda*: min over classifiers of E[l^lambda] is zero and is attained by
/// the ratio argmax; every classifier h satisfies
/// L* - L(h) = eta / E[l_beta(h)] with eta = E[l^lambda*(h)].
VerifyReport check_equivalence(const DiscreteDistribution& dist, const MetricSpec& spec, double tolerance);

/// sign(min E[l^lambda]) = sign(lambda - lambda*) at lambda* + (j - 10) / 20,
/// j = 0..20. A mismatch counts as violation 1; at lambda* itself the
/// violation is |min E|.
VerifyReport check_sign_sweep(const DiscreteDistribution& dist, const MetricSpec& spec, double tolerance);

/// Random finite distribution with support in [1, max_support] and l in
/// [1, max_l]; each point uses independent marginals or a full table at random.
DiscreteDistribution random_distribution(std::mt19937_64& rng, std::size_t max_support, std::size_t max_l);

inline constexpr std::size_t kRegretMaxLabels = 6;
inline constexpr std::size_t kNumericRegretMaxLabels = 3;

/// Lowest-index configuration minimizing sum_y p(y) Lbar(y', y).
LabelVector best_response(std::span<const double> cond, const CostCoefficients& gamma);

/// c_h - min_y' c_y' with c_y' = sum_y p(y) Lbar(y', y). Throws DomainError if
/// `cond` does not sum to 1 and ScaleGuardError for l > 6.
double conditional_regret_target(std::span<const double> cond, const CostCoefficients& gamma,
                                 const LabelVector& prediction);

struct SurrogateRegret {
    double value = 0.0;
    /// True when the infimum was approximated numerically, so `value` is
    /// at most the true regret.
    bool lower_bound = false;
};

/// sum_y p(y) L_tau(scores, y) in the units selected by `params`.
double conditional_surrogate(std::span<const double> cond, const SurrogateEvaluator& eval,
                             std::span<const double> scores);

/// Surrogate conditional regret over free score vectors. l = 1 uses closed
/// forms for every tau; l in {2, 3} uses 32 seeded starts of 500 descent
/// steps, one of them at `scores`.
SurrogateRegret conditional_regret_surrogate(std::span<const double> cond, const CostCoefficients& gamma,
                                             const SurrogateParams& params, std::span<const double> scores,
                                             std::uint64_t seed = 0);

/// Gamma(t) = 2 sqrt(lsum n^tau t) for tau < 1, tau n^tau t for tau >= 1,
/// with n = 2^l.
double consistency_gamma(double t, double tau, std::size_t l, double lsum);

/// Target regret <= Gamma(surrogate regret) on random tables, costs and
/// scores, with all_pairs offsets and raw units. Tolerance 1e-9 at l = 1,
/// additive slack 1e-3 at l in {2, 3}.
VerifyReport check_hconsistency_bound(std::size_t l, double tau, std::size_t trials, std::uint64_t seed);

inline constexpr double kFactorizationTaus[] = {0.0, 0.3, 0.5, 1.0, 2.0};

/// Factorized (all_pairs, raw) against the naive double sum for
/// l = 1..l_max and every tau in kFactorizationTaus; relative error
/// |f - n| / max(1, |n|) <= 1e-9.
VerifyReport check_factorization(std::size_t l_max, std::size_t trials, std::uint64_t seed);

/// Analytic gradient against central differences (step 1e-4). Trial t uses
/// l = 1 + t % 8 and tau = {0, 0.5, 1}[(t / 8) % 3], sigma offsets, and
/// alternates per_config and raw units.
VerifyReport check_gradient(std::size_t trials, std::uint64_t seed);

/// Median per-call time of the factorized loss for each l; fails when any
/// consecutive time(l_next) / time(l) exceeds 2 * l_next / l.
VerifyReport check_runtime_scaling(std::span<const std::size_t> l_list, std::size_t repeats, std::uint64_t seed);

}  // namespace mmo
