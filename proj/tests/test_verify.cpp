#include <doctest.h>

#include <cmath>
#include <vector>

#include "mmo/data.hpp"
#include "mmo/errors.hpp"
#include "mmo/losses.hpp"
#include "mmo/metrics.hpp"
#include "mmo/random.hpp"
#include "mmo/verify.hpp"

using namespace mmo;

namespace {

const FourTuple kZeroOne{-0.5, 0.0, 0.0, 0.5};  // 1 on a mismatch, 0 on a match

CostCoefficients single(const FourTuple& t) { return CostCoefficients{{t}, 0.0}; }

// Golden-section search on [lo, hi] after a coarse scan.
template <typename F>
double minimize_1d(F f, double lo, double hi) {
    const int n = 4000;
    double best_x = lo, best = f(lo);
    for (int i = 1; i <= n; ++i) {
        const double x = lo + (hi - lo) * i / n;
        const double v = f(x);
        if (v < best) best = v, best_x = x;
    }
    double a = best_x - (hi - lo) / n, b = best_x + (hi - lo) / n;
    const double r = (std::sqrt(5.0) - 1) / 2;
    for (int it = 0; it < 200; ++it) {
        const double c = b - r * (b - a), d = a + r * (b - a);
        if (f(c) < f(d)) b = d;
        else a = c;
    }
    return std::min(best, f(0.5 * (a + b)));
}

}  // namespace

TEST_SUITE("verify") {
    TEST_CASE("exhaustive optimum on small instances") {
        const auto spec = preset("f1", 1, Averaging::micro);
        const auto star = lambda_star_exhaustive(parse_distribution("point x1 w=1 marginals 0.8"), spec);
        CHECK(star.lambda == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
        CHECK(star.argmax.assignment[0] == LabelVector{1});

        const auto det = parse_distribution("point a w=0.5 marginals 1 0\npoint b w=0.5 marginals 0 1");
        CHECK(lambda_star_exhaustive(det, preset("f1", 2, Averaging::micro)).lambda == doctest::Approx(1.0));
        CHECK(lambda_star_exhaustive(det, preset("jaccard", 2, Averaging::micro)).lambda == doctest::Approx(1.0));

        CHECK(lambda_star_exhaustive(parse_distribution("point x w=1 marginals 0"), spec).lambda == 0.0);
    }

    TEST_CASE("regret identity on the single-point instance") {
        const auto d = parse_distribution("point x1 w=1 marginals 0.8");
        const auto spec = preset("f1", 1, Averaging::micro);
        const double star = 8.0 / 9.0;
        TabularClassifier best{{LabelVector{1}}}, worse{{LabelVector{-1}}};
        const auto tb = population_terms(d, best, spec);
        CHECK(std::abs(star * tb.beta_total() - tb.alpha_total()) <= 1e-12);
        const auto tw = population_terms(d, worse, spec);
        const double eta = star * tw.beta_total() - tw.alpha_total();
        CHECK(star - population_metric(d, worse, spec) == doctest::Approx(eta / tw.beta_total()).epsilon(1e-14));

        const auto r = check_equivalence(d, spec, 1e-12);
        CHECK(r.passed);
        CHECK(check_sign_sweep(d, spec, 1e-12).passed);
    }

    TEST_CASE("random instances pass both exhaustive checks") {
        for (std::uint64_t i = 0; i < 40; ++i) {
            auto rng = stream_rng(51, i);
            const auto d = random_distribution(rng, 3, 2);
            CHECK(d.support_size() >= 1);
            CHECK(d.support_size() <= 3);
            CHECK(d.l() <= 2);
            for (const char* name : {"f1", "jaccard"}) {
                const auto spec = preset(name, d.l(), Averaging::micro);
                try {
                    lambda_star_exhaustive(d, spec);
                } catch (const DegenerateDenominator&) {
                    continue;
                }
                CHECK(check_equivalence(d, spec, 1e-9).passed);
                CHECK(check_sign_sweep(d, spec, 1e-9).passed);
            }
        }
    }

    TEST_CASE("sign equivalence needs positive denominators everywhere") {
        // Precision: predicting -1 has E[l_beta] = 0, so above lambda* the
        // minimum stays at 0 instead of turning positive.
        const auto d = parse_distribution("point x1 w=1 marginals 0.8");
        const auto spec = preset("precision", 1, Averaging::micro);
        CHECK(lambda_star_exhaustive(d, spec).lambda == doctest::Approx(0.8));
        CHECK_FALSE(check_sign_sweep(d, spec, 1e-9).passed);
    }

    TEST_CASE("conditional target regret") {
        const auto g = single(kZeroOne);
        const std::vector<double> cond{0.9, 0.1};
        CHECK(conditional_regret_target(cond, g, LabelVector{-1}) == doctest::Approx(0.8).epsilon(1e-14));
        CHECK(conditional_regret_target(cond, g, LabelVector{1}) == 0.0);
        CHECK(best_response(cond, g) == LabelVector{1});
        CHECK_THROWS_AS(conditional_regret_target(std::vector<double>{0.5, 0.6}, g, LabelVector{1}), DomainError);

        CostCoefficients seven{std::vector<FourTuple>(7, kZeroOne), 0.0};
        std::vector<double> uniform(128, 1.0 / 128);
        CHECK_THROWS_AS(conditional_regret_target(uniform, seven, LabelVector(7)), ScaleGuardError);
    }

    TEST_CASE("target regret is zero exactly at minimizing configurations") {
        for (std::uint64_t t = 0; t < 200; ++t) {
            auto rng = stream_rng(52, t);
            std::normal_distribution<double> normal(0.0, 1.0);
            const std::size_t l = 1 + t % 3, n = std::size_t{1} << l;
            CostCoefficients g;
            for (std::size_t k = 0; k < l; ++k) g.per_label.push_back({normal(rng), normal(rng), normal(rng), normal(rng)});
            std::vector<double> cond(n);
            double z = 0;
            for (double& p : cond) z += (p = std::exp(normal(rng)));
            for (double& p : cond) p /= z;
            std::vector<double> cost(n, 0.0);
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = 0; b < n; ++b) cost[a] += cond[b] * target_loss(g, config_from_index(a, l), config_from_index(b, l));
            const double best = *std::min_element(cost.begin(), cost.end());
            for (std::size_t a = 0; a < n; ++a) {
                const double r = conditional_regret_target(cond, g, config_from_index(a, l));
                CHECK(r >= 0.0);
                CHECK(r == doctest::Approx(cost[a] - best).epsilon(1e-9).scale(1.0));
            }
        }
    }

    TEST_CASE("single-label surrogate regret against a numeric minimizer") {
        for (std::uint64_t t = 0; t < 60; ++t) {
            auto rng = stream_rng(53, t);
            std::normal_distribution<double> normal(0.0, 1.0);
            const auto g = single({normal(rng), normal(rng), normal(rng), normal(rng)});
            const double p = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            const std::vector<double> cond{p, 1 - p};
            SurrogateParams params;
            params.tau = std::vector<double>{0.0, 0.3, 0.5, 1.0, 2.0}[t % 5];
            params.normalization = t % 2 ? Normalization::raw : Normalization::per_config;
            const SurrogateEvaluator eval(g, params);
            auto f = [&](double h) { return conditional_surrogate(cond, eval, std::vector<double>{h}); };
            const double inf = minimize_1d(f, -30.0, 30.0);
            const double h0 = normal(rng);
            const auto r = conditional_regret_surrogate(cond, g, params, std::vector<double>{h0});
            CHECK_FALSE(r.lower_bound);
            CHECK(r.value == doctest::Approx(f(h0) - inf).epsilon(1e-6).scale(std::max(1.0, std::abs(inf))));
        }
    }

    TEST_CASE("surrogate regret vanishes at the single-label optimum") {
        const auto g = single({0.3, -0.2, 0.1, 0.4});
        const std::vector<double> cond{0.7, 0.3};
        SurrogateParams params;
        const auto cells = shifted_costs(g, params);
        const double S = cost_offset(g, params);
        const double wp = cond[0] * (S - cells[0][0][0]) + cond[1] * (S - cells[0][0][1]);
        const double wm = cond[0] * (S - cells[0][1][0]) + cond[1] * (S - cells[0][1][1]);
        // w+ softplus(-2h) + w- softplus(2h) is minimized at sigmoid(2h) = w+ / (w+ + w-).
        const double h = 0.5 * std::log(wp / wm);
        CHECK(conditional_regret_surrogate(cond, g, params, std::vector<double>{h}).value <= 1e-9);

        // Symmetric weights: the optimum is at zero.
        const auto sym = single(kZeroOne);
        CHECK(conditional_regret_surrogate(std::vector<double>{0.5, 0.5}, sym, params, std::vector<double>{0.0}).value <=
              1e-12);
    }

    TEST_CASE("numeric surrogate regret is flagged and nonnegative") {
        auto rng = stream_rng(54, 0);
        std::normal_distribution<double> normal(0.0, 1.0);
        CostCoefficients g;
        for (int k = 0; k < 2; ++k) g.per_label.push_back({normal(rng), normal(rng), normal(rng), normal(rng)});
        const std::vector<double> cond{0.1, 0.2, 0.3, 0.4};
        const auto r = conditional_regret_surrogate(cond, g, SurrogateParams{}, std::vector<double>{0.3, -0.2}, 5);
        CHECK(r.lower_bound);
        CHECK(r.value >= 0.0);
        const auto again = conditional_regret_surrogate(cond, g, SurrogateParams{}, std::vector<double>{0.3, -0.2}, 5);
        CHECK(again.value == r.value);
    }

    TEST_CASE("bound function") {
        CHECK(consistency_gamma(0.25, 0.0, 1, 4.0) == doctest::Approx(2.0));
        CHECK(consistency_gamma(0.5, 0.5, 2, 2.0) == doctest::Approx(2.0 * std::sqrt(2.0 * 2.0 * 0.5)));
        CHECK(consistency_gamma(0.3, 1.0, 1, 123.0) == doctest::Approx(0.6));
        CHECK(consistency_gamma(0.1, 2.0, 2, 1.0) == doctest::Approx(2.0 * 16.0 * 0.1));
        CHECK(consistency_gamma(-1e-15, 0.5, 1, 1.0) == 0.0);
    }

    TEST_CASE("checks pass on small runs and are reproducible") {
        const auto f = check_factorization(4, 20, 3);
        CHECK(f.passed);
        CHECK(f.trials == 4 * 5 * 20);
        const auto g1 = check_gradient(48, 3), g2 = check_gradient(48, 3);
        CHECK(g1.passed);
        CHECK(g1.max_violation == g2.max_violation);
        for (double tau : {0.0, 0.5, 1.0}) CHECK(check_hconsistency_bound(1, tau, 2000, 4).passed);
        const auto b = check_hconsistency_bound(2, 0.0, 20, 4);
        CHECK(b.passed);
        CHECK(b.lower_bound);
    }

    TEST_CASE("reports keep the worst trial") {
        VerifyReport r;
        r.tolerance = 0.1;
        r.observe(0.05, 9, 0, "fine");
        CHECK(r.passed);
        r.observe(0.5, 9, 1, "bad");
        r.observe(0.2, 9, 2, "less bad");
        CHECK_FALSE(r.passed);
        REQUIRE(r.worst);
        CHECK(r.worst->trial == 1);
        CHECK(r.worst->seed == 9);
        CHECK(r.max_violation == 0.5);
        CHECK(r.trials == 3);
        VerifyReport nan;
        nan.observe(std::nan(""), 1, 0, "nan");
        CHECK_FALSE(nan.passed);
    }

    TEST_CASE("argument guards") {
        CHECK_THROWS_AS(check_factorization(9, 1, 0), ScaleGuardError);
        CHECK_THROWS_AS(check_hconsistency_bound(4, 0.0, 1, 0), ScaleGuardError);
        const std::vector<std::size_t> one{64}, unsorted{256, 64};
        CHECK_THROWS_AS(check_runtime_scaling(one, 3, 0), ConfigError);
        CHECK_THROWS_AS(check_runtime_scaling(unsorted, 3, 0), ConfigError);
    }
}
