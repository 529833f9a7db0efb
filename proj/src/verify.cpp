#include "mmo/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mmo/errors.hpp"
#include "mmo/parallel.hpp"
#include "mmo/random.hpp"
#include "text_util.hpp"

namespace mmo {

void VerifyReport::observe(double violation, std::uint64_t seed, std::uint64_t trial, const std::string& summary) {
    ++trials;
    if (std::isnan(violation)) violation = std::numeric_limits<double>::infinity();
    if (violation > max_violation || (!worst && violation == max_violation && violation > 0.0)) {
        max_violation = violation;
        worst = TrialDetail{seed, trial, summary};
    }
    passed = max_violation <= tolerance;
}

void VerifyReport::absorb(const VerifyReport& other) {
    trials += other.trials;
    if (other.max_violation > max_violation) {
        max_violation = other.max_violation;
        worst = other.worst;
    }
    lower_bound = lower_bound || other.lower_bound;
    passed = passed && other.passed && max_violation <= tolerance;
    measurements.insert(measurements.end(), other.measurements.begin(), other.measurements.end());
}

namespace {

struct Terms {
    double alpha = 0.0;
    double beta = 0.0;
};

std::vector<Terms> all_terms(const DiscreteDistribution& dist, const MetricSpec& spec,
                             const TabularEnumeration& classifiers) {
    std::vector<Terms> out;
    out.reserve(classifiers.count());
    for (const auto& h : classifiers) {
        const auto t = population_terms(dist, h, spec);
        out.push_back({t.alpha_total(), t.beta_total()});
    }
    return out;
}

double min_ell(const std::vector<Terms>& terms, double lambda) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : terms) best = std::min(best, lambda * t.beta - t.alpha);
    return best;
}

void require_single_ratio(const MetricSpec& spec) {
    if (spec.averaging == Averaging::macro) {
        throw ConfigError("this check needs a single ratio of expectations; macro averaging is not supported");
    }
}

std::string fmt(double v) { return detail::format_double(v); }

}  // namespace

LambdaStar lambda_star_exhaustive(const DiscreteDistribution& dist, const MetricSpec& spec) {
    const TabularEnumeration classifiers(dist.support_size(), dist.l());
    std::optional<LambdaStar> best;
    for (std::uint64_t i = 0; i < classifiers.count(); ++i) {
        TabularClassifier h = classifiers.at(i);
        double value;
        try {
            value = population_metric(dist, h, spec);
        } catch (const DegenerateDenominator&) {
            continue;
        }
        if (!best || value > best->lambda) best = LambdaStar{value, std::move(h)};
    }
    if (!best) throw DegenerateDenominator(RatioSite::micro, 0);
    return *best;
}

VerifyReport check_equivalence(const DiscreteDistribution& dist, const MetricSpec& spec, double tolerance) {
    require_single_ratio(spec);
    const auto star = lambda_star_exhaustive(dist, spec);
    const TabularEnumeration classifiers(dist.support_size(), dist.l());
    const auto terms = all_terms(dist, spec, classifiers);

    VerifyReport report;
    report.check = "equiv";
    report.tolerance = tolerance;
    const double lambda = star.lambda;
    const double floor = min_ell(terms, lambda);
    report.observe(std::abs(floor), 0, 0, "min E[l^lambda*] = " + fmt(floor));

    const auto arg = population_terms(dist, star.argmax, spec);
    const double at_argmax = lambda * arg.beta_total() - arg.alpha_total();
    report.observe(at_argmax - floor, 0, 1, "E[l^lambda*](argmax) - min = " + fmt(at_argmax - floor));

    for (std::uint64_t i = 0; i < terms.size(); ++i) {
        if (!(terms[i].beta > 0.0)) continue;
        const double gap = lambda - terms[i].alpha / terms[i].beta;
        const double eta = lambda * terms[i].beta - terms[i].alpha;
        const double diff = gap - eta / terms[i].beta;
        report.observe(std::abs(diff), 0, 2 + i,
                       "classifier " + std::to_string(i) + ": gap " + fmt(gap) + " vs eta/E[l_beta] " +
                           fmt(eta / terms[i].beta));
    }
    report.measurements.emplace_back("lambda_star", lambda);
    return report;
}

VerifyReport check_sign_sweep(const DiscreteDistribution& dist, const MetricSpec& spec, double tolerance) {
    require_single_ratio(spec);
    const auto star = lambda_star_exhaustive(dist, spec);
    const TabularEnumeration classifiers(dist.support_size(), dist.l());
    const auto terms = all_terms(dist, spec, classifiers);

    VerifyReport report;
    report.check = "sign";
    report.tolerance = tolerance;
    for (int j = 0; j <= 20; ++j) {
        const double lambda = star.lambda + (j - 10) / 20.0;
        const double m = min_ell(terms, lambda);
        double violation;
        if (j == 10) {
            violation = std::abs(m);
        } else {
            const int expected = j > 10 ? 1 : -1;
            const int got = m > tolerance ? 1 : (m < -tolerance ? -1 : 0);
            violation = got == expected ? 0.0 : 1.0;
        }
        report.observe(violation, 0, static_cast<std::uint64_t>(j),
                       "lambda " + fmt(lambda) + " min E " + fmt(m));
    }
    report.measurements.emplace_back("lambda_star", star.lambda);
    return report;
}

DiscreteDistribution random_distribution(std::mt19937_64& rng, std::size_t max_support, std::size_t max_l) {
    if (max_support == 0 || max_l == 0) throw ConfigError("random distribution needs support and l >= 1");
    std::uniform_int_distribution<std::size_t> support_draw(1, max_support), l_draw(1, max_l);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);
    const std::size_t support = support_draw(rng);
    const std::size_t l = l_draw(rng);

    std::vector<SupportPoint> points(support);
    double total = 0.0;
    for (auto& p : points) {
        p.weight = 0.05 + unit(rng);
        total += p.weight;
    }
    for (std::size_t i = 0; i < support; ++i) {
        auto& p = points[i];
        p.id = "x" + std::to_string(i);
        p.weight /= total;
        if (unit(rng) < 0.5) {
            Marginals m;
            for (std::size_t k = 0; k < l; ++k) m.p.push_back(unit(rng));
            p.conditional = std::move(m);
        } else {
            ConditionalTable t;
            double sum = 0.0;
            for (std::size_t c = 0; c < (std::size_t{1} << l); ++c) {
                t.p.push_back(expo(rng));
                sum += t.p.back();
            }
            for (double& v : t.p) v /= sum;
            p.conditional = std::move(t);
        }
    }
    return DiscreteDistribution(l, std::move(points));
}

namespace {

std::size_t labels_of_table(std::span<const double> cond, std::size_t l) {
    if (cond.size() != (std::size_t{1} << l)) throw ShapeError("conditional table must have 2^l entries");
    double sum = 0.0;
    for (double p : cond) {
        if (!(p >= 0.0)) throw DomainError("conditional probabilities must be >= 0");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kNormalizationTolerance) throw DomainError("conditional table does not sum to 1");
    return l;
}

/// c_y' for every configuration y'.
std::vector<double> conditional_costs(std::span<const double> cond, const CostCoefficients& gamma) {
    const std::size_t l = gamma.l();
    if (l > kRegretMaxLabels) throw ScaleGuardError("conditional regret limited to l <= 6");
    labels_of_table(cond, l);
    const auto costs = shifted_costs(gamma, SurrogateParams{});
    const std::size_t n = std::size_t{1} << l;
    std::vector<LabelVector> configs;
    for (std::size_t c = 0; c < n; ++c) configs.push_back(config_from_index(c, l));
    std::vector<double> out(n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            if (cond[b] == 0.0) continue;
            double cost = 0.0;
            for (std::size_t k = 0; k < l; ++k) cost += costs[k][sign_slot(configs[a][k])][sign_slot(configs[b][k])];
            out[a] += cond[b] * cost;
        }
    }
    return out;
}

}  // namespace

LabelVector best_response(std::span<const double> cond, const CostCoefficients& gamma) {
    const auto c = conditional_costs(cond, gamma);
    const auto it = std::min_element(c.begin(), c.end());
    return config_from_index(static_cast<std::uint64_t>(it - c.begin()), gamma.l());
}

double conditional_regret_target(std::span<const double> cond, const CostCoefficients& gamma,
                                 const LabelVector& prediction) {
    if (prediction.size() != gamma.l()) throw ShapeError("prediction must have length l");
    const auto c = conditional_costs(cond, gamma);
    return c[config_index(prediction)] - *std::min_element(c.begin(), c.end());
}

double conditional_surrogate(std::span<const double> cond, const SurrogateEvaluator& eval,
                             std::span<const double> scores) {
    double total = 0.0;
    for (std::size_t c = 0; c < cond.size(); ++c) {
        if (cond[c] == 0.0) continue;
        total += cond[c] * eval.loss(scores, config_from_index(c, eval.l()));
    }
    return total;
}

namespace {

double conditional_surrogate_grad(std::span<const double> cond, const SurrogateEvaluator& eval,
                                  std::span<const double> scores, std::span<double> grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    std::vector<double> g(grad.size());
    double total = 0.0;
    for (std::size_t c = 0; c < cond.size(); ++c) {
        if (cond[c] == 0.0) continue;
        total += cond[c] * eval.loss_and_gradient(scores, config_from_index(c, eval.l()), g);
        for (std::size_t k = 0; k < g.size(); ++k) grad[k] += cond[c] * g[k];
    }
    return total;
}

/// inf over s in (0, 1) of w+ Phi(1/s) + w- Phi(1/(1 - s)).
double binary_infimum(double wp, double wm, double tau) {
    if (wp <= 0.0 || wm <= 0.0) return 0.0;
    if (tau == 0.0) {
        const double s = wp / (wp + wm);
        return -(wp * std::log(s) + wm * std::log1p(-s));
    }
    if (tau < 1.0) {
        const double r = 1.0 / (1.0 - tau);
        return (wp + wm - std::pow(std::pow(wp, r) + std::pow(wm, r), 1.0 - tau)) / tau;
    }
    return std::min(wp, wm) / tau;
}

/// Best value reached by backtracking descent from `start`.
double descend(std::span<const double> cond, const SurrogateEvaluator& eval, std::vector<double> h, double scale,
               std::size_t steps) {
    const std::size_t l = h.size();
    std::vector<double> g(l), trial(l), g_trial(l);
    double f = conditional_surrogate_grad(cond, eval, h, g) / scale;
    for (double& v : g) v /= scale;
    double lr = 0.1;
    for (std::size_t step = 0; step < steps; ++step) {
        for (std::size_t k = 0; k < l; ++k) trial[k] = h[k] - lr * g[k];
        const double ft = conditional_surrogate_grad(cond, eval, trial, g_trial) / scale;
        if (ft < f) {
            h.swap(trial);
            g.swap(g_trial);
            for (double& v : g) v /= scale;
            f = ft;
            lr = std::min(lr * 1.5, 1e3);
        } else {
            lr *= 0.5;
            if (lr < 1e-14) break;
        }
    }
    return f * scale;
}

}  // namespace

SurrogateRegret conditional_regret_surrogate(std::span<const double> cond, const CostCoefficients& gamma,
                                             const SurrogateParams& params, std::span<const double> scores,
                                             std::uint64_t seed) {
    const std::size_t l = gamma.l();
    if (scores.size() != l) throw ShapeError("scores must have length l");
    if (l > kNumericRegretMaxLabels) throw ScaleGuardError("surrogate conditional regret limited to l <= 3");
    labels_of_table(cond, l);
    const SurrogateEvaluator eval(gamma, params);
    const double value = conditional_surrogate(cond, eval, scores);

    if (l == 1) {
        const auto costs = shifted_costs(gamma, params);
        const double s = eval.offset();
        double w[2];
        for (std::size_t a = 0; a < 2; ++a) w[a] = cond[0] * (s - costs[0][a][0]) + cond[1] * (s - costs[0][a][1]);
        const double inf = binary_infimum(w[0], w[1], params.tau) * normalization_factor(1, params);
        return {std::max(0.0, value - inf), false};
    }

    const double scale = std::max(1.0, std::abs(value));
    double best = value;
    constexpr std::size_t kStarts = 32, kSteps = 500;
    for (std::size_t start = 0; start < kStarts; ++start) {
        std::vector<double> h(scores.begin(), scores.end());
        if (start > 0) {
            auto rng = stream_rng(seed, start);
            std::normal_distribution<double> normal(0.0, 2.0);
            for (double& v : h) v = normal(rng);
        }
        best = std::min(best, descend(cond, eval, std::move(h), scale, kSteps));
    }
    return {std::max(0.0, value - best), true};
}

double consistency_gamma(double t, double tau, std::size_t l, double lsum) {
    t = std::max(t, 0.0);
    const double n_tau = std::pow(std::ldexp(1.0, static_cast<int>(l)), tau);
    if (tau < 1.0) return 2.0 * std::sqrt(lsum * n_tau * t);
    return tau * n_tau * t;
}

VerifyReport check_hconsistency_bound(std::size_t l, double tau, std::size_t trials, std::uint64_t seed) {
    if (l == 0 || l > kNumericRegretMaxLabels) throw ScaleGuardError("bound check supports l in {1, 2, 3}");
    if (!(tau >= 0.0)) throw ConfigError("tau must be >= 0");
    SurrogateParams params;
    params.tau = tau;
    params.offset_mode = OffsetMode::all_pairs;
    params.normalization = Normalization::raw;

    std::vector<double> violation(trials), target(trials), surrogate(trials);
    parallel_for(trials, [&](std::size_t t) {
        auto rng = stream_rng(seed, t);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::exponential_distribution<double> expo(1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const std::size_t n = std::size_t{1} << l;
        std::vector<double> cond(n);
        for (double& p : cond) p = expo(rng);
        if (unit(rng) < 0.2) cond[static_cast<std::size_t>(unit(rng) * static_cast<double>(n)) % n] = 0.0;
        const double sum = std::accumulate(cond.begin(), cond.end(), 0.0);
        if (sum == 0.0) cond[0] = 1.0;
        else for (double& p : cond) p /= sum;

        CostCoefficients gamma;
        for (std::size_t k = 0; k < l; ++k) gamma.per_label.push_back({normal(rng), normal(rng), normal(rng), normal(rng)});
        std::vector<double> scores(l);
        for (double& s : scores) s = 2.0 * normal(rng);
        LabelVector pred(l);
        for (std::size_t k = 0; k < l; ++k) pred.set(k, sign_of(scores[k]));

        const double dt = conditional_regret_target(cond, gamma, pred);
        const auto ds = conditional_regret_surrogate(cond, gamma, params, scores, mix64(seed) ^ t);
        const double lsum = cost_offset(gamma, params);
        target[t] = dt;
        surrogate[t] = ds.value;
        violation[t] = dt - consistency_gamma(ds.value, tau, l, lsum);
    });

    VerifyReport report;
    report.check = "bound";
    report.tolerance = l == 1 ? 1e-9 : 1e-3;
    report.lower_bound = l > 1;
    std::size_t nonzero = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        if (violation[t] > report.tolerance) ++nonzero;
        std::ostringstream s;
        s << "l=" << l << " tau=" << fmt(tau) << " target regret " << fmt(target[t]) << " surrogate regret "
          << fmt(surrogate[t]);
        report.observe(violation[t], seed, t, s.str());
    }
    report.measurements.emplace_back("l", static_cast<double>(l));
    report.measurements.emplace_back("tau", tau);
    report.measurements.emplace_back("violations", static_cast<double>(nonzero));
    return report;
}

VerifyReport check_factorization(std::size_t l_max, std::size_t trials, std::uint64_t seed) {
    if (l_max == 0 || l_max > 8) throw ScaleGuardError("factorization check supports l_max in [1, 8]");
    constexpr std::size_t kTaus = std::size(kFactorizationTaus);
    const std::size_t total = l_max * kTaus * trials;
    std::vector<double> err(total);
    parallel_for(total, [&](std::size_t index) {
        const std::size_t l = 1 + index / (kTaus * trials);
        const double tau = kFactorizationTaus[(index / trials) % kTaus];
        auto rng = stream_rng(seed, index);
        std::normal_distribution<double> normal(0.0, 1.0);
        CostCoefficients gamma;
        for (std::size_t k = 0; k < l; ++k) gamma.per_label.push_back({normal(rng), normal(rng), normal(rng), normal(rng)});
        std::vector<double> scores(l);
        for (double& s : scores) s = 1.5 * normal(rng);
        LabelVector y(l);
        for (std::size_t k = 0; k < l; ++k) y.set(k, sign_of(normal(rng)));
        SurrogateParams params;
        params.tau = tau;
        params.offset_mode = OffsetMode::all_pairs;
        params.normalization = Normalization::raw;
        const double naive = surrogate_naive(gamma, params, scores, y);
        const double fact = surrogate_factorized(gamma, params, scores, y);
        err[index] = std::abs(fact - naive) / std::max(1.0, std::abs(naive));
    });

    VerifyReport report;
    report.check = "factorization";
    report.tolerance = 1e-9;
    for (std::size_t index = 0; index < total; ++index) {
        const std::size_t l = 1 + index / (kTaus * trials);
        const double tau = kFactorizationTaus[(index / trials) % kTaus];
        report.observe(err[index], seed, index, "l=" + std::to_string(l) + " tau=" + fmt(tau));
    }
    return report;
}

VerifyReport check_gradient(std::size_t trials, std::uint64_t seed) {
    constexpr double kTaus[] = {0.0, 0.5, 1.0};
    constexpr double kStep = 1e-4;
    std::vector<double> err(trials);
    parallel_for(trials, [&](std::size_t t) {
        const std::size_t l = 1 + t % 8;
        auto rng = stream_rng(seed, t);
        std::normal_distribution<double> normal(0.0, 1.0);
        SurrogateParams params;
        params.tau = kTaus[(t / 8) % 3];
        // all_pairs offsets put the loss near 4^l while the gradient stays
        // O(1); step-1e-4 differences would then measure rounding, not slope.
        if (t % 2 == 1) params.normalization = Normalization::raw;
        CostCoefficients gamma;
        for (std::size_t k = 0; k < l; ++k) gamma.per_label.push_back({normal(rng), normal(rng), normal(rng), normal(rng)});
        std::vector<double> scores(l);
        for (double& s : scores) s = 1.5 * normal(rng);
        LabelVector y(l);
        for (std::size_t k = 0; k < l; ++k) y.set(k, sign_of(normal(rng)));

        const SurrogateEvaluator eval(gamma, params);
        std::vector<double> analytic(l);
        eval.loss_and_gradient(scores, y, analytic);
        double diff = 0.0, size = 1.0;
        for (std::size_t k = 0; k < l; ++k) {
            auto up = scores, down = scores;
            up[k] += kStep;
            down[k] -= kStep;
            const double fd = (eval.loss(up, y) - eval.loss(down, y)) / (2.0 * kStep);
            diff = std::max(diff, std::abs(fd - analytic[k]));
            size = std::max(size, std::abs(analytic[k]));
        }
        err[t] = diff / size;
    });

    VerifyReport report;
    report.check = "gradient";
    report.tolerance = 1e-5;
    for (std::size_t t = 0; t < trials; ++t) {
        report.observe(err[t], seed, t,
                       "l=" + std::to_string(1 + t % 8) + " tau=" + fmt(kTaus[(t / 8) % 3]) +
                           (t % 2 ? " sigma/raw" : " sigma/per_config"));
    }
    return report;
}

VerifyReport check_runtime_scaling(std::span<const std::size_t> l_list, std::size_t repeats, std::uint64_t seed) {
    if (l_list.size() < 2) throw ConfigError("runtime check needs at least two label counts");
    for (std::size_t i = 0; i + 1 < l_list.size(); ++i) {
        if (l_list[i] == 0 || l_list[i + 1] <= l_list[i]) throw ConfigError("label counts must be increasing");
    }
    if (repeats == 0) throw ConfigError("repeats must be >= 1");

    VerifyReport report;
    report.check = "runtime";
    report.tolerance = 0.0;
    for (double tau : {0.0, 0.5}) {
        std::vector<double> per_call;
        for (std::size_t idx = 0; idx < l_list.size(); ++idx) {
            const std::size_t l = l_list[idx];
            auto rng = stream_rng(seed, l);
            std::normal_distribution<double> normal(0.0, 1.0);
            CostCoefficients gamma;
            for (std::size_t k = 0; k < l; ++k) gamma.per_label.push_back({normal(rng), normal(rng), normal(rng), normal(rng)});
            std::vector<double> scores(l);
            for (double& s : scores) s = normal(rng);
            LabelVector y(l);
            for (std::size_t k = 0; k < l; ++k) y.set(k, sign_of(normal(rng)));
            SurrogateParams params;
            params.tau = tau;
            const SurrogateEvaluator eval(gamma, params);

            const std::size_t calls = std::max<std::size_t>(16, (std::size_t{1} << 19) / l);
            std::vector<double> samples;
            volatile double sink = 0.0;
            for (std::size_t r = 0; r < repeats; ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                for (std::size_t c = 0; c < calls; ++c) sink = sink + eval.loss(scores, y);
                const auto t1 = std::chrono::steady_clock::now();
                samples.push_back(std::chrono::duration<double>(t1 - t0).count() / static_cast<double>(calls));
            }
            std::nth_element(samples.begin(), samples.begin() + samples.size() / 2, samples.end());
            per_call.push_back(samples[samples.size() / 2]);
            report.measurements.emplace_back("seconds_per_call tau=" + fmt(tau) + " l=" + std::to_string(l),
                                             per_call.back());
        }
        for (std::size_t i = 0; i + 1 < l_list.size(); ++i) {
            const double ratio = per_call[i + 1] / per_call[i];
            const double limit = 2.0 * static_cast<double>(l_list[i + 1]) / static_cast<double>(l_list[i]);
            report.measurements.emplace_back("ratio tau=" + fmt(tau) + " l=" + std::to_string(l_list[i]) + "->" +
                                                 std::to_string(l_list[i + 1]),
                                             ratio);
            report.observe(ratio - limit, seed, i,
                           "tau=" + fmt(tau) + " l " + std::to_string(l_list[i]) + "->" +
                               std::to_string(l_list[i + 1]) + " ratio " + fmt(ratio) + " limit " + fmt(limit));
        }
    }
    return report;
}

}  // namespace mmo
