#include "mmo/metrics.hpp"

#include <numeric>

#include "mmo/data.hpp"
#include "mmo/errors.hpp"
#include "mmo/models.hpp"

namespace mmo {

std::string_view to_string(Averaging a) {
    switch (a) {
    case Averaging::macro: return "macro";
    case Averaging::instance: return "instance";
    default: return "micro";
    }
}

Averaging parse_averaging(std::string_view name) {
    if (name == "micro") return Averaging::micro;
    if (name == "macro") return Averaging::macro;
    if (name == "instance") return Averaging::instance;
    throw ConfigError("unknown averaging mode '" + std::string(name) + "' (expected micro, macro or instance)");
}

void MetricSpec::validate() const {
    if (l == 0) throw ShapeError("metric needs l >= 1");
    if (alpha.size() != l || beta.size() != l) throw ShapeError("metric coefficient tables must have length l");
}

MetricSpec preset(std::string_view name, std::size_t l, Averaging averaging) {
    using namespace confusion;
    if (l == 0) throw ConfigError("preset needs l >= 1");
    FourTuple num, den;
    if (name == "f1") {
        num = tp * 2.0;
        den = tp * 2.0 + fp + fn;
    } else if (name == "jaccard") {
        num = tp;
        den = tp + fp + fn;
    } else if (name == "precision") {
        num = tp;
        den = tp + fp;
    } else if (name == "accuracy") {
        num = tp + tn;
        den = one;
    } else {
        throw ConfigError("unknown metric preset '" + std::string(name) +
                          "' (expected f1, jaccard, precision or accuracy)");
    }
    return MetricSpec{std::string(name), l, MetricCoefficients(l, num), MetricCoefficients(l, den), averaging};
}

std::vector<std::string> preset_names() { return {"f1", "jaccard", "precision", "accuracy"}; }

namespace {

void check_pairs(std::span<const LabelVector> truth, std::span<const LabelVector> predictions, std::size_t l) {
    if (truth.size() != predictions.size()) throw ShapeError("truth and predictions differ in length");
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i].size() != l || predictions[i].size() != l) {
            throw ShapeError("label vector " + std::to_string(i) + " has wrong length");
        }
    }
}

}  // namespace

double empirical_metric(std::span<const LabelVector> truth, std::span<const LabelVector> predictions,
                        const MetricSpec& spec, DegeneratePolicy policy) {
    spec.validate();
    check_pairs(truth, predictions, spec.l);
    const std::size_t m = truth.size();
    const std::size_t l = spec.l;
    if (m == 0) throw ShapeError("empirical metric needs at least one instance");

    switch (spec.averaging) {
    case Averaging::micro: {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t k = 0; k < l; ++k) {
                num += ell_mu_k(spec.alpha[k], predictions[i][k], truth[i][k]);
                den += ell_mu_k(spec.beta[k], predictions[i][k], truth[i][k]);
            }
        }
        if (!(den > 0.0)) throw DegenerateDenominator(RatioSite::micro, 0);
        return num / den;
    }
    case Averaging::macro: {
        double acc = 0.0;
        std::size_t used = 0;
        std::size_t first_bad = 0;
        bool any_bad = false;
        for (std::size_t k = 0; k < l; ++k) {
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                num += ell_mu_k(spec.alpha[k], predictions[i][k], truth[i][k]);
                den += ell_mu_k(spec.beta[k], predictions[i][k], truth[i][k]);
            }
            if (!(den > 0.0)) {
                if (policy == DegeneratePolicy::raise) throw DegenerateDenominator(RatioSite::label, k);
                if (!any_bad) first_bad = k;
                any_bad = true;
                continue;
            }
            acc += num / den;
            ++used;
        }
        if (used == 0) throw DegenerateDenominator(RatioSite::label, first_bad);
        return acc / static_cast<double>(used);
    }
    case Averaging::instance: {
        double acc = 0.0;
        std::size_t used = 0;
        std::size_t first_bad = 0;
        bool any_bad = false;
        for (std::size_t i = 0; i < m; ++i) {
            double num = 0.0, den = 0.0;
            for (std::size_t k = 0; k < l; ++k) {
                num += ell_mu_k(spec.alpha[k], predictions[i][k], truth[i][k]);
                den += ell_mu_k(spec.beta[k], predictions[i][k], truth[i][k]);
            }
            if (!(den > 0.0)) {
                if (policy == DegeneratePolicy::raise) throw DegenerateDenominator(RatioSite::instance, i);
                if (!any_bad) first_bad = i;
                any_bad = true;
                continue;
            }
            acc += num / den;
            ++used;
        }
        if (used == 0) throw DegenerateDenominator(RatioSite::instance, first_bad);
        return acc / static_cast<double>(used);
    }
    }
    return 0.0;
}

std::int64_t ConfusionCounts::total_tp() const noexcept { return std::accumulate(tp.begin(), tp.end(), std::int64_t{0}); }
std::int64_t ConfusionCounts::total_fp() const noexcept { return std::accumulate(fp.begin(), fp.end(), std::int64_t{0}); }
std::int64_t ConfusionCounts::total_tn() const noexcept { return std::accumulate(tn.begin(), tn.end(), std::int64_t{0}); }
std::int64_t ConfusionCounts::total_fn() const noexcept { return std::accumulate(fn.begin(), fn.end(), std::int64_t{0}); }

ConfusionCounts confusion_counts(std::span<const LabelVector> truth, std::span<const LabelVector> predictions) {
    const std::size_t l = truth.empty() ? (predictions.empty() ? 0 : predictions[0].size()) : truth[0].size();
    check_pairs(truth, predictions, l);
    ConfusionCounts c{std::vector<std::int64_t>(l), std::vector<std::int64_t>(l), std::vector<std::int64_t>(l),
                      std::vector<std::int64_t>(l)};
    for (std::size_t i = 0; i < truth.size(); ++i) {
        for (std::size_t k = 0; k < l; ++k) {
            const bool h = predictions[i][k] > 0;
            const bool y = truth[i][k] > 0;
            if (h && y) ++c.tp[k];
            else if (h) ++c.fp[k];
            else if (y) ++c.fn[k];
            else ++c.tn[k];
        }
    }
    return c;
}

double PopulationTerms::alpha_total() const noexcept { return std::accumulate(alpha.begin(), alpha.end(), 0.0); }
double PopulationTerms::beta_total() const noexcept { return std::accumulate(beta.begin(), beta.end(), 0.0); }

PopulationTerms population_terms(const DiscreteDistribution& dist, const TabularClassifier& classifier,
                                 const MetricSpec& spec) {
    spec.validate();
    if (spec.l != dist.l()) throw ShapeError("metric and distribution disagree on l");
    if (classifier.assignment.size() != dist.support_size()) {
        throw ShapeError("classifier is not defined on every support point");
    }
    PopulationTerms terms{std::vector<double>(spec.l, 0.0), std::vector<double>(spec.l, 0.0)};
    // l_mu,k is affine in y_k, so E[l_mu,k | x] only needs E[y_k | x].
    for (std::size_t i = 0; i < dist.support_size(); ++i) {
        const double w = dist.points()[i].weight;
        const LabelVector& h = classifier.assignment[i];
        if (h.size() != spec.l) throw ShapeError("classifier assignment has wrong length");
        for (std::size_t k = 0; k < spec.l; ++k) {
            const double ey = dist.label_mean(i, k);
            const auto& a = spec.alpha[k];
            const auto& b = spec.beta[k];
            terms.alpha[k] += w * (a.c_hy * h[k] * ey + a.c_y * ey + a.c_h * h[k] + a.c_1);
            terms.beta[k] += w * (b.c_hy * h[k] * ey + b.c_y * ey + b.c_h * h[k] + b.c_1);
        }
    }
    return terms;
}

double population_metric(const DiscreteDistribution& dist, const TabularClassifier& classifier,
                         const MetricSpec& spec) {
    const auto terms = population_terms(dist, classifier, spec);
    if (spec.averaging == Averaging::macro) {
        double acc = 0.0;
        for (std::size_t k = 0; k < spec.l; ++k) {
            if (!(terms.beta[k] > 0.0)) throw DegenerateDenominator(RatioSite::label, k);
            acc += terms.alpha[k] / terms.beta[k];
        }
        return acc / static_cast<double>(spec.l);
    }
    const double den = terms.beta_total();
    if (!(den > 0.0)) throw DegenerateDenominator(RatioSite::micro, 0);
    return terms.alpha_total() / den;
}

}  // namespace mmo
