#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mmo/data.hpp"
#include "mmo/errors.hpp"
#include "mmo/metrics.hpp"
#include "mmo/models.hpp"
#include "mmo/random.hpp"

using namespace mmo;

namespace {

int ind(bool b) { return b ? 1 : 0; }
int tp(int h, int y) { return ind(h == 1 && y == 1); }
int fp(int h, int y) { return ind(h == 1 && y == -1); }
int fn(int h, int y) { return ind(h == -1 && y == 1); }
int tn(int h, int y) { return ind(h == -1 && y == -1); }

// Numerator and denominator of each preset straight from the counts.
std::pair<double, double> count_formula(const std::string& name, int h, int y) {
    if (name == "f1") return {2.0 * tp(h, y), 2.0 * tp(h, y) + fp(h, y) + fn(h, y)};
    if (name == "jaccard") return {1.0 * tp(h, y), 1.0 * tp(h, y) + fp(h, y) + fn(h, y)};
    if (name == "precision") return {1.0 * tp(h, y), 1.0 * tp(h, y) + fp(h, y)};
    return {1.0 * tp(h, y) + tn(h, y), 1.0};
}

// Closed-form ratios from confusion totals; the independent side of the
// linearity check.
double ratio_from_counts(const std::string& name, double TP, double FP, double FN, double TN) {
    if (name == "f1") return 2 * TP / (2 * TP + FP + FN);
    if (name == "jaccard") return TP / (TP + FP + FN);
    if (name == "precision") return TP / (TP + FP);
    return (TP + TN) / (TP + FP + FN + TN);
}

}  // namespace

TEST_SUITE("metrics") {
    TEST_CASE("four-term form by substitution") {
        const FourTuple half{0.5, 0.5, 0.5, 0.5};
        CHECK(ell_mu_k(half, 1, 1) == 2.0);
        CHECK(ell_mu_k(half, 1, -1) == 0.0);
        for (int h : {1, -1})
            for (int y : {1, -1}) CHECK(ell_mu_k(FourTuple{}, h, y) == 0.0);
    }

    TEST_CASE("confusion identities are indicators") {
        for (int h : {1, -1}) {
            for (int y : {1, -1}) {
                CHECK(confusion::tp.eval(h, y) == tp(h, y));
                CHECK(confusion::fp.eval(h, y) == fp(h, y));
                CHECK(confusion::fn.eval(h, y) == fn(h, y));
                CHECK(confusion::tn.eval(h, y) == tn(h, y));
            }
        }
    }

    TEST_CASE("every preset matches its count formula on all four cells") {
        for (const auto& name : preset_names()) {
            const auto spec = preset(name, 3, Averaging::micro);
            REQUIRE(spec.alpha.size() == 3);
            for (std::size_t k = 0; k < 3; ++k) {
                for (int h : {1, -1}) {
                    for (int y : {1, -1}) {
                        const auto [num, den] = count_formula(name, h, y);
                        CHECK(std::abs(spec.alpha[k].eval(h, y) - num) <= 1e-12);
                        CHECK(std::abs(spec.beta[k].eval(h, y) - den) <= 1e-12);
                    }
                }
            }
        }
    }

    TEST_CASE("published f1 tuples") {
        const auto spec = preset("f1", 2, Averaging::micro);
        for (const auto& a : spec.alpha) CHECK(a == FourTuple{0.5, 0.5, 0.5, 0.5});
        for (const auto& b : spec.beta) CHECK(b == FourTuple{0.0, 0.5, 0.5, 1.0});
    }

    TEST_CASE("jaccard and accuracy tuples") {
        const auto j = preset("jaccard", 1, Averaging::micro);
        CHECK(j.alpha[0] == FourTuple{0.25, 0.25, 0.25, 0.25});
        CHECK(j.beta[0] == FourTuple{-0.25, 0.25, 0.25, 0.75});
        // A false positive must count in the denominator; the tuple with the
        // h and y coefficients swapped in sign would give 0 there.
        CHECK(j.beta[0].eval(1, -1) == 1.0);
        CHECK(FourTuple{0.25, 0.25, -0.25, 0.75}.eval(1, -1) == 0.0);
        const auto a = preset("accuracy", 1, Averaging::micro);
        CHECK(a.alpha[0] == FourTuple{0.5, 0.0, 0.0, 0.5});
        CHECK(a.beta[0] == FourTuple{0.0, 0.0, 0.0, 1.0});
    }

    TEST_CASE("unknown names are rejected") {
        CHECK_THROWS_AS(preset("recall@5", 1, Averaging::micro), ConfigError);
        CHECK_THROWS_AS(parse_averaging("weighted"), ConfigError);
        CHECK(parse_averaging("macro") == Averaging::macro);
    }

    TEST_CASE("single-instance examples") {
        const std::vector<LabelVector> truth{{1, -1}};
        const std::vector<LabelVector> pred{{1, 1}};
        CHECK(empirical_metric(truth, pred, preset("f1", 2, Averaging::micro)) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
        CHECK(empirical_metric(truth, pred, preset("jaccard", 2, Averaging::micro)) == doctest::Approx(0.5).epsilon(1e-15));
        const auto c = confusion_counts(truth, pred);
        CHECK(c.tp[0] == 1);
        CHECK(c.fp[1] == 1);
        CHECK(c.total_fn() == 0);
    }

    TEST_CASE("all negative counts as true negatives") {
        std::vector<LabelVector> y(7, LabelVector(3, -1));
        const auto c = confusion_counts(y, y);
        for (std::size_t k = 0; k < 3; ++k) CHECK(c.tn[k] == 7);
    }

    TEST_CASE("perfect predictions give f1 = 1 under every averaging") {
        auto rng = stream_rng(3, 0);
        std::vector<LabelVector> y;
        for (int i = 0; i < 20; ++i) {
            LabelVector v(4);
            for (std::size_t k = 0; k < 4; ++k) v.set(k, rng() % 2 ? 1 : -1);
            v.set(i % 4, 1);  // every instance and label has a positive
            y.push_back(v);
        }
        for (auto a : {Averaging::micro, Averaging::macro, Averaging::instance}) {
            CHECK(empirical_metric(y, y, preset("f1", 4, a)) == doctest::Approx(1.0).epsilon(1e-15));
        }
    }

    TEST_CASE("averaging modes collapse for one instance and one label") {
        for (const auto& name : preset_names()) {
            for (int h : {1, -1}) {
                for (int yv : {1, -1}) {
                    const std::vector<LabelVector> y{{yv}}, p{{h}};
                    const auto den = count_formula(name, h, yv).second;
                    if (den <= 0) continue;
                    const double mi = empirical_metric(y, p, preset(name, 1, Averaging::micro));
                    CHECK(mi == empirical_metric(y, p, preset(name, 1, Averaging::macro)));
                    CHECK(mi == empirical_metric(y, p, preset(name, 1, Averaging::instance)));
                }
            }
        }
    }

    TEST_CASE("degenerate denominators name the offender") {
        const std::vector<LabelVector> y{{-1, 1}, {-1, -1}}, p{{-1, 1}, {-1, -1}};
        try {
            empirical_metric(y, p, preset("f1", 2, Averaging::macro));
            FAIL("expected DegenerateDenominator");
        } catch (const DegenerateDenominator& e) {
            CHECK(e.site() == RatioSite::label);
            CHECK(e.index() == 0);
        }
        CHECK_THROWS_AS(empirical_metric(y, p, preset("f1", 2, Averaging::instance)), DegenerateDenominator);
        CHECK(empirical_metric(y, p, preset("f1", 2, Averaging::macro), DegeneratePolicy::skip) == 1.0);
        CHECK(empirical_metric(y, p, preset("f1", 2, Averaging::instance), DegeneratePolicy::skip) == 1.0);
        CHECK(empirical_metric(y, p, preset("f1", 2, Averaging::micro)) == 1.0);
    }

    TEST_CASE("coefficient form agrees with count ratios on random pairs") {
        double worst = 0.0;
        for (std::uint64_t t = 0; t < 1000; ++t) {
            auto rng = stream_rng(11, t);
            const std::size_t l = 1 + rng() % 6, m = 1 + rng() % 30;
            const std::string name = preset_names()[rng() % preset_names().size()];
            std::vector<LabelVector> y, p;
            for (std::size_t i = 0; i < m; ++i) {
                LabelVector a(l), b(l);
                for (std::size_t k = 0; k < l; ++k) {
                    a.set(k, rng() % 2 ? 1 : -1);
                    b.set(k, rng() % 2 ? 1 : -1);
                }
                y.push_back(a);
                p.push_back(b);
            }
            const auto c = confusion_counts(y, p);
            const double TP = c.total_tp(), FP = c.total_fp(), FN = c.total_fn(), TN = c.total_tn();
            const double expect = ratio_from_counts(name, TP, FP, FN, TN);
            if (!std::isfinite(expect)) continue;
            const double got = empirical_metric(y, p, preset(name, l, Averaging::micro));
            worst = std::max(worst, std::abs(got - expect) / std::max(1e-300, std::abs(expect)));
            if (expect == 0.0) CHECK(got == 0.0);
        }
        CHECK(worst <= 1e-12);
    }

    TEST_CASE("f1 and jaccard stay in [0, 1]") {
        for (std::uint64_t t = 0; t < 300; ++t) {
            auto rng = stream_rng(12, t);
            const std::size_t l = 1 + rng() % 4, m = 1 + rng() % 10;
            std::vector<LabelVector> y, p;
            for (std::size_t i = 0; i < m; ++i) {
                LabelVector a(l, 1), b(l);
                for (std::size_t k = 0; k < l; ++k) b.set(k, rng() % 2 ? 1 : -1);
                for (std::size_t k = 0; k < l; ++k) a.set(k, rng() % 3 ? -1 : 1);
                a.set(0, 1);
                y.push_back(a);
                p.push_back(b);
            }
            for (const char* name : {"f1", "jaccard"}) {
                for (auto av : {Averaging::micro, Averaging::macro, Averaging::instance}) {
                    const double v = empirical_metric(y, p, preset(name, l, av), DegeneratePolicy::skip);
                    CHECK(v >= 0.0);
                    CHECK(v <= 1.0);
                }
            }
        }
    }

    TEST_CASE("population metric on the single-point instance") {
        const auto d = parse_distribution("point x1 w=1 marginals 0.8");
        const auto spec = preset("f1", 1, Averaging::micro);
        TabularClassifier pos{{LabelVector{1}}}, neg{{LabelVector{-1}}};
        const auto terms = population_terms(d, pos, spec);
        CHECK(terms.alpha_total() == doctest::Approx(1.6).epsilon(1e-15));
        CHECK(terms.beta_total() == doctest::Approx(1.8).epsilon(1e-15));
        CHECK(population_metric(d, pos, spec) == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
        CHECK(population_metric(d, neg, spec) == 0.0);
    }

    TEST_CASE("point-mass distribution equals the empirical metric") {
        const auto d = parse_distribution(
            "point a w=0.25 table 0 1 0 0\n"
            "point b w=0.5 table 1 0 0 0\n"
            "point c w=0.25 table 0 0 0 1\n");
        // Tables are in configuration order (+,+), (+,-), (-,+), (-,-).
        const std::vector<LabelVector> y{{1, -1}, {1, 1}, {1, 1}, {-1, -1}};
        TabularClassifier h{{LabelVector{1, 1}, LabelVector{1, -1}, LabelVector{-1, 1}}};
        const std::vector<LabelVector> p{{1, 1}, {1, -1}, {1, -1}, {-1, 1}};
        for (const auto& name : preset_names()) {
            for (auto av : {Averaging::micro, Averaging::macro}) {
                const auto spec = preset(name, 2, av);
                CHECK(population_metric(d, h, spec) == doctest::Approx(empirical_metric(y, p, spec)).epsilon(1e-12));
            }
        }
    }
}
