#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mmo/errors.hpp"
#include "mmo/losses.hpp"
#include "mmo/metrics.hpp"
#include "mmo/random.hpp"

using namespace mmo;

namespace {

CostCoefficients random_gamma(std::mt19937_64& rng, std::size_t l) {
    std::normal_distribution<double> normal(0.0, 1.0);
    CostCoefficients g;
    for (std::size_t k = 0; k < l; ++k) g.per_label.push_back({normal(rng), normal(rng), normal(rng), normal(rng)});
    return g;
}

std::vector<double> random_scores(std::mt19937_64& rng, std::size_t l, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    std::vector<double> s(l);
    for (double& v : s) v = normal(rng);
    return s;
}

LabelVector random_labels(std::mt19937_64& rng, std::size_t l) {
    LabelVector y(l);
    for (std::size_t k = 0; k < l; ++k) y.set(k, rng() % 2 ? 1 : -1);
    return y;
}

// Configuration bit b of mask m as a sign: bit set means -1, first label on
// the most significant bit.
int sign_at(std::uint64_t mask, std::size_t k, std::size_t l) { return (mask >> (l - 1 - k)) & 1 ? -1 : 1; }

// Shifted per-label cost Lbar_k(a, b) rebuilt from gamma and the shift rule.
double shifted_cell(const FourTuple& g, int a, int b, double shift) { return g.eval(a, b) + shift; }

double default_shift(const FourTuple& g) { return std::abs(g.c_hy) + std::abs(g.c_y) + std::abs(g.c_h) + std::abs(g.c_1); }

// Literal definition: sum over y' of (S - Lbar(y', y)) * Phi(sum_y'' exp(h.(y'' - y'))),
// with S either the sum of all four cells per label or the sum over all
// (y', y) pairs.
double brute_surrogate(const CostCoefficients& gamma, double tau, bool exact, bool raw,
                       const std::vector<double>& h, const LabelVector& y) {
    const std::size_t l = gamma.l();
    const std::uint64_t n = std::uint64_t{1} << l;
    auto lbar = [&](std::uint64_t yp, std::uint64_t yt) {
        double s = 0.0;
        for (std::size_t k = 0; k < l; ++k) {
            s += shifted_cell(gamma.per_label[k], sign_at(yp, k, l), sign_at(yt, k, l), default_shift(gamma.per_label[k]));
        }
        return s;
    };
    double S = 0.0;
    if (exact) {
        for (std::uint64_t a = 0; a < n; ++a)
            for (std::uint64_t b = 0; b < n; ++b) S += lbar(a, b);
    } else {
        for (std::size_t k = 0; k < l; ++k)
            for (int a : {1, -1})
                for (int b : {1, -1}) S += shifted_cell(gamma.per_label[k], a, b, default_shift(gamma.per_label[k]));
    }
    std::uint64_t ymask = 0;
    for (std::size_t k = 0; k < l; ++k) ymask = (ymask << 1) | (y[k] < 0 ? 1 : 0);
    auto score = [&](std::uint64_t m) {
        double s = 0.0;
        for (std::size_t k = 0; k < l; ++k) s += h[k] * sign_at(m, k, l);
        return s;
    };
    double total = 0.0;
    for (std::uint64_t yp = 0; yp < n; ++yp) {
        double u = 0.0;
        for (std::uint64_t ypp = 0; ypp < n; ++ypp) u += std::exp(score(ypp) - score(yp));
        const double phi = tau == 0.0 ? std::log(u) : (1.0 - std::pow(u, -tau)) / tau;
        total += (S - lbar(yp, ymask)) * phi;
    }
    return raw ? total : total / std::pow(2.0, static_cast<double>(l) - 2.0);
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_SUITE("losses") {
    TEST_CASE("cost coefficients from alpha and beta") {
        const auto spec = preset("f1", 3, Averaging::micro);
        const auto g0 = gamma_from(spec, 0.0);
        for (std::size_t k = 0; k < 3; ++k) CHECK(g0.per_label[k] == spec.alpha[k] * -1.0);
        const auto same = gamma_from(spec.alpha, spec.alpha, 1.0);
        for (const auto& t : same.per_label) CHECK(t == FourTuple{});
        CHECK_THROWS_AS(gamma_from(spec.alpha, MetricCoefficients(2), 0.5), ShapeError);
    }

    TEST_CASE("f1 target costs per confusion cell") {
        const auto g = gamma_from(preset("f1", 1, Averaging::micro), 0.7);
        CHECK(target_loss(g, LabelVector{1}, LabelVector{1}) == doctest::Approx(-0.6).epsilon(1e-15));
        CHECK(target_loss(g, LabelVector{1}, LabelVector{-1}) == doctest::Approx(0.7).epsilon(1e-15));
        CHECK(target_loss(g, LabelVector{-1}, LabelVector{1}) == doctest::Approx(0.7).epsilon(1e-15));
        CHECK(target_loss(g, LabelVector{-1}, LabelVector{-1}) == doctest::Approx(0.0));
        CostCoefficients zero{std::vector<FourTuple>(4), 0.0};
        CHECK(target_loss(zero, LabelVector(4, 1), LabelVector(4, -1)) == 0.0);
    }

    TEST_CASE("phi values") {
        CHECK(phi_tau(0.0, 1.0) == 0.0);
        CHECK(phi_tau(1.0, 2.0) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(phi_tau(0.5, 4.0) == doctest::Approx(1.0).epsilon(1e-15));
        for (double tau : {0.1, 0.3, 1.0, 2.0, 7.0}) {
            for (double u : {0.01, 0.5, 1.0, 3.0, 1e6}) {
                CHECK(phi_tau(tau, u) == doctest::Approx((1.0 - std::pow(u, -tau)) / tau).epsilon(1e-13));
            }
        }
        CHECK_THROWS_AS(phi_tau(0.5, 0.0), DomainError);
        CHECK_THROWS_AS(phi_tau(0.5, -1.0), DomainError);
        CHECK_THROWS_AS(phi_tau(-0.1, 2.0), DomainError);
    }

    TEST_CASE("phi is continuous at tau = 0") {
        for (int i = 0; i <= 200; ++i) {
            const double u = 0.1 + (10.0 - 0.1) * i / 200.0;
            CHECK(std::abs(phi_tau(1e-8, u) - std::log(u)) <= 1e-6);
        }
    }

    TEST_CASE("phi is strictly increasing in u") {
        for (double tau : {0.0, 1e-8, 0.3, 0.5, 1.0, 2.0, 5.0}) {
            double prev = -std::numeric_limits<double>::infinity();
            for (int i = 0; i <= 250; ++i) {  // u in [0.05, 81]: clear of the saturation at 1/tau
                const double u = 0.05 * std::pow(1.03, i);
                const double v = phi_tau(tau, u);
                CHECK(v > prev);
                prev = v;
            }
        }
    }

    TEST_CASE("shifted costs, offsets and nonnegative weights") {
        for (std::uint64_t t = 0; t < 100; ++t) {
            auto rng = stream_rng(21, t);
            const std::size_t l = 1 + t % 6;
            const auto gamma = random_gamma(rng, l);
            const std::uint64_t n = std::uint64_t{1} << l;
            for (auto mode : {OffsetMode::sigma, OffsetMode::all_pairs}) {
                SurrogateParams p;
                p.offset_mode = mode;
                const auto cells = shifted_costs(gamma, p);
                const double S = cost_offset(gamma, p);
                double all_pairs = 0.0, sigma = 0.0, min_weight = std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < l; ++k)
                    for (int a : {1, -1})
                        for (int b : {1, -1}) {
                            const double v = shifted_cell(gamma.per_label[k], a, b, default_shift(gamma.per_label[k]));
                            CHECK(v >= 0.0);
                            CHECK(cells[k][sign_slot(a)][sign_slot(b)] == doctest::Approx(v).epsilon(1e-14));
                            sigma += v;
                        }
                for (std::uint64_t a = 0; a < n; ++a) {
                    for (std::uint64_t b = 0; b < n; ++b) {
                        double lb = 0.0;
                        for (std::size_t k = 0; k < l; ++k) lb += cells[k][sign_slot(sign_at(a, k, l))][sign_slot(sign_at(b, k, l))];
                        all_pairs += lb;
                        min_weight = std::min(min_weight, S - lb);
                    }
                }
                CHECK(min_weight >= -1e-12);
                CHECK(S == doctest::Approx(mode == OffsetMode::sigma ? sigma : all_pairs).epsilon(1e-12));
            }
        }
    }

    TEST_CASE("constant shifted cost") {
        // gamma = (0, 0, 0, c) with no shift: every cell is c.
        for (std::size_t l : {1, 2, 3, 5}) {
            const double c = 0.75;
            CostCoefficients g{std::vector<FourTuple>(l, FourTuple{0, 0, 0, c}), 0.0};
            SurrogateParams p;
            p.nonneg_shift = 0.0;
            CHECK(cost_offset(g, p) == doctest::Approx(4.0 * l * c));
            p.offset_mode = OffsetMode::all_pairs;
            // 4^l pairs, each with Lbar = l * c.
            CHECK(cost_offset(g, p) == doctest::Approx(std::pow(4.0, l) * l * c));
        }
    }

    TEST_CASE("explicit shift is split evenly and must cover negative cells") {
        CostCoefficients g{{FourTuple{0, 0, 0, -1.0}, FourTuple{0, 0, 0, -1.0}}, 0.0};
        SurrogateParams p;
        p.nonneg_shift = 4.0;
        const auto cells = shifted_costs(g, p);
        CHECK(cells[0][0][0] == doctest::Approx(1.0));
        p.nonneg_shift = 1.0;
        CHECK_THROWS_AS(shifted_costs(g, p), DomainError);
        p.nonneg_shift = -1.0;
        CHECK_THROWS_AS(shifted_costs(g, p), ConfigError);
    }

    TEST_CASE("factorized matches the literal definition") {
        for (std::uint64_t t = 0; t < 300; ++t) {
            auto rng = stream_rng(22, t);
            const std::size_t l = 1 + t % 6;
            const double tau = std::vector<double>{0.0, 0.3, 0.5, 1.0, 2.0}[t % 5];
            const bool exact = t % 2, raw = (t / 2) % 2;
            const auto gamma = random_gamma(rng, l);
            const auto h = random_scores(rng, l);
            const auto y = random_labels(rng, l);
            SurrogateParams p;
            p.tau = tau;
            p.offset_mode = exact ? OffsetMode::all_pairs : OffsetMode::sigma;
            p.normalization = raw ? Normalization::raw : Normalization::per_config;
            const double oracle = brute_surrogate(gamma, tau, exact, raw, h, y);
            CHECK(rel_err(surrogate_factorized(gamma, p, h, y), oracle) <= 1e-9);
            CHECK(rel_err(surrogate_naive(gamma, p, h, y), oracle) <= 1e-9);
        }
    }

    TEST_CASE("single label at tau = 0 reduces to two logistic terms") {
        auto rng = stream_rng(23, 0);
        for (int t = 0; t < 50; ++t) {
            const auto gamma = random_gamma(rng, 1);
            const double h = random_scores(rng, 1, 3.0)[0];
            const LabelVector y{rng() % 2 ? 1 : -1};
            SurrogateParams p;
            p.normalization = Normalization::raw;
            const auto cells = shifted_costs(gamma, p);
            const double S = cost_offset(gamma, p);
            const double cp = S - cells[0][0][sign_slot(y[0])], cm = S - cells[0][1][sign_slot(y[0])];
            const double expect = cp * std::log1p(std::exp(-2 * h)) + cm * std::log1p(std::exp(2 * h));
            CHECK(surrogate_factorized(gamma, p, std::vector<double>{h}, y) == doctest::Approx(expect).epsilon(1e-12));
        }
    }

    TEST_CASE("zero costs give zero surrogate") {
        for (std::size_t l : {1, 4, 9}) {
            CostCoefficients g{std::vector<FourTuple>(l), 0.0};
            std::vector<double> h(l, 0.3);
            for (double tau : {0.0, 0.5, 2.0}) {
                SurrogateParams p;
                p.tau = tau;
                CHECK(surrogate_factorized(g, p, h, LabelVector(l)) == 0.0);
                CHECK(surrogate_naive(g, p, h, LabelVector(l)) == 0.0);
            }
        }
    }

    TEST_CASE("normalization rescales without moving the minimizer") {
        for (std::uint64_t t = 0; t < 30; ++t) {
            auto rng = stream_rng(24, t);
            const std::size_t l = 2 + t % 2;
            const auto gamma = random_gamma(rng, l);
            const auto y = random_labels(rng, l);
            SurrogateParams a, b;
            a.tau = b.tau = t % 3 == 0 ? 0.0 : 0.5;
            b.normalization = Normalization::raw;
            std::size_t best_a = 0, best_b = 0;
            double va = INFINITY, vb = INFINITY;
            const std::size_t steps = 9, total = static_cast<std::size_t>(std::pow(steps, l));
            for (std::size_t idx = 0; idx < total; ++idx) {
                std::vector<double> h(l);
                std::size_t r = idx;
                for (std::size_t k = 0; k < l; ++k, r /= steps) h[k] = -2.0 + 0.5 * static_cast<double>(r % steps);
                const double fa = surrogate_factorized(gamma, a, h, y), fb = surrogate_factorized(gamma, b, h, y);
                if (fa < va) va = fa, best_a = idx;
                if (fb < vb) vb = fb, best_b = idx;
            }
            CHECK(best_a == best_b);
        }
    }

    TEST_CASE("gradient in large offset units against extrapolated differences") {
        // All-pairs offsets make the loss huge relative to its slope, so
        // the plain central difference loses digits; Richardson steps fix that.
        double worst = 0.0;
        for (std::uint64_t t = 0; t < 96; ++t) {
            auto rng = stream_rng(25, t);
            const std::size_t l = 1 + t % 8;
            SurrogateParams p;
            p.tau = std::vector<double>{0.0, 0.5, 1.0}[(t / 8) % 3];
            p.offset_mode = OffsetMode::all_pairs;
            p.normalization = (t / 24) % 2 ? Normalization::raw : Normalization::per_config;
            const auto gamma = random_gamma(rng, l);
            const auto h = random_scores(rng, l);
            const auto y = random_labels(rng, l);
            const auto grad = surrogate_gradient(gamma, p, h, y);
            const SurrogateEvaluator eval(gamma, p);
            auto central = [&](std::size_t k, double step) {
                auto hp = h, hm = h;
                hp[k] += step;
                hm[k] -= step;
                return (eval.loss(hp, y) - eval.loss(hm, y)) / (2 * step);
            };
            double scale = 1.0, err = 0.0;
            for (double g : grad) scale = std::max(scale, std::abs(g));
            for (std::size_t k = 0; k < l; ++k) {
                const double d1 = central(k, 1e-2), d2 = central(k, 5e-3);
                err = std::max(err, std::abs((4 * d2 - d1) / 3 - grad[k]));
            }
            worst = std::max(worst, err / scale);
        }
        CHECK(worst <= 1e-5);
    }

    TEST_CASE("scale guards") {
        CostCoefficients big{std::vector<FourTuple>(13, FourTuple{0.1, 0, 0, 0}), 0.0};
        std::vector<double> h(13, 0.0);
        CHECK_THROWS_AS(surrogate_naive(big, SurrogateParams{}, h, LabelVector(13)), ScaleGuardError);

        CostCoefficients huge{std::vector<FourTuple>(31, FourTuple{0.1, 0, 0, 0}), 0.0};
        SurrogateParams raw;
        raw.normalization = Normalization::raw;
        CHECK_THROWS_AS(SurrogateEvaluator(huge, raw), ScaleGuardError);
        SurrogateParams exact;
        exact.offset_mode = OffsetMode::all_pairs;
        CHECK_THROWS_AS(cost_offset(huge, exact), ScaleGuardError);
        std::vector<double> h31(31, 0.1);
        CHECK(std::isfinite(surrogate_factorized(huge, SurrogateParams{}, h31, LabelVector(31))));
    }

    TEST_CASE("evaluator stays finite at large l and extreme scores") {
        auto rng = stream_rng(26, 0);
        const auto gamma = random_gamma(rng, 4096);
        auto h = random_scores(rng, 4096, 50.0);
        const auto y = random_labels(rng, 4096);
        for (double tau : {0.0, 0.5, 1.0}) {
            SurrogateParams p;
            p.tau = tau;
            std::vector<double> g(4096);
            const double v = SurrogateEvaluator(gamma, p).loss_and_gradient(h, y, g);
            CHECK(std::isfinite(v));
            for (double x : g) REQUIRE(std::isfinite(x));
        }
    }

    TEST_CASE("softplus and sigmoid at the extremes") {
        CHECK(softplus(-1000.0) == 0.0);
        CHECK(softplus(1000.0) == 1000.0);
        CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
        CHECK(sigmoid(-1000.0) == 0.0);
        CHECK(sigmoid(1000.0) == 1.0);
        CHECK(sigmoid(0.0) == 0.5);
    }

    TEST_CASE("mode names") {
        CHECK(parse_offset_mode("all_pairs") == OffsetMode::all_pairs);
        CHECK(parse_offset_mode("sigma") == OffsetMode::sigma);
        CHECK(parse_normalization("raw") == Normalization::raw);
        CHECK_THROWS_AS(parse_normalization("unit"), ConfigError);
        CHECK(to_string(Normalization::per_config) == "per_config");
    }
}
