#include "mmo/losses.hpp"

#include <cmath>
#include <string>

#include "mmo/errors.hpp"

namespace mmo {

CostCoefficients gamma_from(const MetricCoefficients& alpha, const MetricCoefficients& beta, double lambda) {
    if (alpha.size() != beta.size()) throw ShapeError("alpha and beta differ in length");
    CostCoefficients g;
    g.lambda = lambda;
    g.per_label.reserve(alpha.size());
    for (std::size_t k = 0; k < alpha.size(); ++k) g.per_label.push_back(beta[k] * lambda - alpha[k]);
    return g;
}

double target_loss(const CostCoefficients& gamma, const LabelVector& prediction, const LabelVector& y) {
    if (prediction.size() != gamma.l() || y.size() != gamma.l()) throw ShapeError("label vectors must have length l");
    double total = 0.0;
    for (std::size_t k = 0; k < gamma.l(); ++k) total += gamma.per_label[k].eval(prediction[k], y[k]);
    return total;
}

double phi_tau(double tau, double u) {
    if (!(tau >= 0.0)) throw DomainError("tau must be >= 0");
    if (!(u > 0.0)) throw DomainError("Phi_tau needs u > 0");
    if (tau == 0.0) return std::log(u);
    return -std::expm1(-tau * std::log(u)) / tau;
}

std::string_view to_string(OffsetMode m) { return m == OffsetMode::all_pairs ? "all_pairs" : "sigma"; }
std::string_view to_string(Normalization n) { return n == Normalization::raw ? "raw" : "per_config"; }

OffsetMode parse_offset_mode(std::string_view s) {
    if (s == "all_pairs" || s == "exact") return OffsetMode::all_pairs;
    if (s == "sigma") return OffsetMode::sigma;
    throw ConfigError("unknown offset mode '" + std::string(s) + "' (expected all_pairs or sigma)");
}

Normalization parse_normalization(std::string_view s) {
    if (s == "raw") return Normalization::raw;
    if (s == "per_config") return Normalization::per_config;
    throw ConfigError("unknown normalization '" + std::string(s) + "' (expected raw or per_config)");
}

void SurrogateParams::validate() const {
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be a finite value >= 0");
    if (nonneg_shift && !(*nonneg_shift >= 0.0)) throw ConfigError("nonneg_shift must be >= 0");
}

std::vector<CostTable> shifted_costs(const CostCoefficients& gamma, const SurrogateParams& params) {
    params.validate();
    const std::size_t l = gamma.l();
    if (l == 0) throw ShapeError("cost coefficients are empty");
    std::vector<CostTable> out(l);
    for (std::size_t k = 0; k < l; ++k) {
        const FourTuple& g = gamma.per_label[k];
        if (!g.finite()) throw DomainError("non-finite cost coefficient for label " + std::to_string(k));
        const double shift = params.nonneg_shift
                                 ? *params.nonneg_shift / static_cast<double>(l)
                                 : std::abs(g.c_hy) + std::abs(g.c_y) + std::abs(g.c_h) + std::abs(g.c_1);
        for (int a : {1, -1}) {
            for (int b : {1, -1}) {
                const double v = g.eval(a, b) + shift;
                if (v < 0.0) {
                    throw DomainError("nonneg_shift leaves a negative cost for label " + std::to_string(k));
                }
                out[k][sign_slot(a)][sign_slot(b)] = v;
            }
        }
    }
    return out;
}

namespace {

double sigma_of(const std::vector<CostTable>& costs) {
    double sigma = 0.0;
    for (const auto& t : costs) sigma += t[0][0] + t[0][1] + t[1][0] + t[1][1];
    return sigma;
}

double offset_from(const std::vector<CostTable>& costs, const SurrogateParams& params) {
    const double sigma = sigma_of(costs);
    if (params.offset_mode == OffsetMode::sigma) return sigma;
    const std::size_t l = costs.size();
    if (l > kRawMaxLabels) throw ScaleGuardError("all_pairs offset overflows for l > 30; use sigma mode");
    // Each per-label cell appears in 4^(l-1) of the (y', y) pairs.
    return std::ldexp(sigma, 2 * static_cast<int>(l - 1));
}

}  // namespace

double cost_offset(const CostCoefficients& gamma, const SurrogateParams& params) {
    return offset_from(shifted_costs(gamma, params), params);
}

double normalization_factor(std::size_t l, const SurrogateParams& params) {
    if (params.normalization == Normalization::raw) return 1.0;
    return std::ldexp(1.0, 2 - static_cast<int>(l));
}

double softplus(double t) noexcept { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double sigmoid(double t) noexcept {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double surrogate_naive(const CostCoefficients& gamma, const SurrogateParams& params, std::span<const double> scores,
                       const LabelVector& y) {
    const std::size_t l = gamma.l();
    if (l > kNaiveMaxLabels) throw ScaleGuardError("naive surrogate limited to l <= 12");
    if (scores.size() != l || y.size() != l) throw ShapeError("scores and y must have length l");
    const auto costs = shifted_costs(gamma, params);
    const double offset = offset_from(costs, params);
    const std::uint64_t n = std::uint64_t{1} << l;

    std::vector<LabelVector> configs;
    configs.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) configs.push_back(config_from_index(i, l));

    double total = 0.0;
    for (const LabelVector& yp : configs) {
        double cost = 0.0;
        for (std::size_t k = 0; k < l; ++k) cost += costs[k][sign_slot(yp[k])][sign_slot(y[k])];
        double u = 0.0;
        for (const LabelVector& ypp : configs) {
            double e = 0.0;
            for (std::size_t i = 0; i < l; ++i) e += (ypp[i] - yp[i]) * scores[i];
            u += std::exp(e);
        }
        total += (offset - cost) * phi_tau(params.tau, u);
    }
    return total * normalization_factor(l, params);
}

SurrogateEvaluator::SurrogateEvaluator(const CostCoefficients& gamma, const SurrogateParams& params)
    : params_(params), costs_(shifted_costs(gamma, params)) {
    if (params_.normalization == Normalization::raw && costs_.size() > kRawMaxLabels) {
        throw ScaleGuardError("raw normalization overflows for l > 30; use per_config");
    }
    offset_ = offset_from(costs_, params_);
    norm_ = normalization_factor(costs_.size(), params_);
}

double SurrogateEvaluator::loss(std::span<const double> scores, const LabelVector& y) const {
    return evaluate(scores, y, {});
}

double SurrogateEvaluator::loss_and_gradient(std::span<const double> scores, const LabelVector& y,
                                             std::span<double> grad) const {
    if (grad.size() != l()) throw ShapeError("gradient buffer must have length l");
    return evaluate(scores, y, grad);
}

// Both branches compute Q = raw / 2^(l-2); the result is Q * 2^(l-2) * norm.
double SurrogateEvaluator::evaluate(std::span<const double> scores, const LabelVector& y,
                                    std::span<double> grad) const {
    const std::size_t l = costs_.size();
    if (scores.size() != l || y.size() != l) throw ShapeError("scores and y must have length l");
    const double share = offset_ / static_cast<double>(l);
    const bool want_grad = !grad.empty();

    // c_j(a) and softplus(-2 a h_j) for a = +1 (slot 0) and a = -1 (slot 1).
    auto label_cost = [&](std::size_t j, std::size_t slot) { return share - costs_[j][slot][sign_slot(y[j])]; };

    double q = 0.0;
    if (params_.tau == 0.0) {
        double sum_a = 0.0, sum_b = 0.0, sum_ab = 0.0, sum_c = 0.0;
        for (std::size_t j = 0; j < l; ++j) {
            const double cp = label_cost(j, 0), cm = label_cost(j, 1);
            const double zp = softplus(-2.0 * scores[j]), zm = softplus(2.0 * scores[j]);
            const double a = cp + cm, b = zp + zm;
            sum_a += a;
            sum_b += b;
            sum_ab += a * b;
            sum_c += cp * zp + cm * zm;
        }
        q = sum_a * sum_b - sum_ab + 2.0 * sum_c;
        if (want_grad) {
            for (std::size_t j = 0; j < l; ++j) {
                const double cp = label_cost(j, 0), cm = label_cost(j, 1);
                const double rest = sum_a - (cp + cm);
                const double gp = -2.0 * sigmoid(-2.0 * scores[j]);
                const double gm = 2.0 * sigmoid(2.0 * scores[j]);
                grad[j] = (2.0 * cp + rest) * gp + (2.0 * cm + rest) * gm;
            }
        }
    } else {
        const double tau = params_.tau;
        double sum_a = 0.0, log_half_total = 0.0, ratio_total = 0.0;
        std::vector<double> wp(l), wm(l), half(l), dk(l);
        for (std::size_t j = 0; j < l; ++j) {
            const double cp = label_cost(j, 0), cm = label_cost(j, 1);
            wp[j] = std::exp(-tau * softplus(-2.0 * scores[j]));
            wm[j] = std::exp(-tau * softplus(2.0 * scores[j]));
            half[j] = 0.5 * (wp[j] + wm[j]);
            dk[j] = cp * wp[j] + cm * wm[j];
            sum_a += cp + cm;
            log_half_total += std::log(half[j]);
            ratio_total += dk[j] / (2.0 * half[j]);
        }
        double cross = 0.0;
        for (std::size_t j = 0; j < l; ++j) cross += dk[j] * std::exp(log_half_total - std::log(half[j]));
        q = 2.0 / tau * (sum_a - cross);
        if (want_grad) {
            for (std::size_t j = 0; j < l; ++j) {
                const double cp = label_cost(j, 0), cm = label_cost(j, 1);
                const double others = ratio_total - dk[j] / (2.0 * half[j]);
                const double rest = std::exp(log_half_total - std::log(half[j]));
                const double gp = -2.0 * sigmoid(-2.0 * scores[j]);
                const double gm = 2.0 * sigmoid(2.0 * scores[j]);
                grad[j] = 2.0 * rest * (wp[j] * gp * (cp + others) + wm[j] * gm * (cm + others));
            }
        }
    }

    const double scale = std::ldexp(norm_, static_cast<int>(l) - 2);
    if (want_grad && scale != 1.0) {
        for (auto& g : grad) g *= scale;
    }
    return q * scale;
}

double surrogate_factorized(const CostCoefficients& gamma, const SurrogateParams& params,
                            std::span<const double> scores, const LabelVector& y) {
    return SurrogateEvaluator(gamma, params).loss(scores, y);
}

std::vector<double> surrogate_gradient(const CostCoefficients& gamma, const SurrogateParams& params,
                                       std::span<const double> scores, const LabelVector& y) {
    std::vector<double> grad(gamma.l());
    SurrogateEvaluator(gamma, params).loss_and_gradient(scores, y, grad);
    return grad;
}

}  // namespace mmo
