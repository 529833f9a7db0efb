#include "mmo/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mmo/errors.hpp"
#include "mmo/parallel.hpp"
#include "mmo/random.hpp"

namespace mmo {

std::string_view to_string(Optimizer o) { return o == Optimizer::gd ? "gd" : "adam"; }

Optimizer parse_optimizer(std::string_view s) {
    if (s == "gd") return Optimizer::gd;
    if (s == "adam" || s == "adaptive_moments") return Optimizer::adaptive_moments;
    throw ConfigError("unknown optimizer '" + std::string(s) + "' (expected gd or adam)");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be > 0");
    if (batch_size == 0) throw ConfigError("batch size must be >= 1");
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be >= 0");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
        throw ConfigError("moment decay rates must lie in (0, 1)");
    }
    if (!(epsilon > 0.0)) throw ConfigError("optimizer epsilon must be > 0");
}

SurrogateParams TrainConfig::surrogate_params() const {
    SurrogateParams p;
    p.tau = tau;
    p.offset_mode = offset_mode;
    p.normalization = normalization;
    return p;
}

std::string_view to_string(SearchStrategy s) {
    switch (s) {
    case SearchStrategy::oracle_bisect: return "oracle";
    case SearchStrategy::surrogate_bisect: return "surrogate-bs";
    case SearchStrategy::cv_grid: return "cv";
    default: return "ema";
    }
}

void SearchConfig::validate() const {
    if (!std::isfinite(lambda_min) || !std::isfinite(lambda_max) || !(lambda_min < lambda_max)) {
        throw ConfigError("need finite lambda_min < lambda_max");
    }
    if (epsilon && !(*epsilon > 0.0 && *epsilon < lambda_max - lambda_min)) {
        throw ConfigError("epsilon must lie in (0, lambda_max - lambda_min)");
    }
    if (!(epsilon_m > 0.0)) throw ConfigError("epsilon_m must be > 0");
    if (!(ema_gamma > 0.0 && ema_gamma < 1.0)) throw ConfigError("ema gamma must lie in (0, 1)");
    if (!std::isfinite(lambda0)) throw ConfigError("lambda0 must be finite");
}

std::size_t bisection_bound(double range, double epsilon) {
    return static_cast<std::size_t>(std::max(0.0, std::ceil(std::log2(range / epsilon))));
}

std::size_t grid_size(double range, double epsilon) {
    // The small nudge keeps exact multiples such as 1.0 / 0.1 from rounding down.
    return static_cast<std::size_t>(std::floor(range / epsilon * (1.0 + 1e-12))) + 1;
}

namespace {

/// Gradient buffers plus optimizer state for one linear model.
class Stepper {
public:
    Stepper(LinearModel& model, const TrainConfig& cfg)
        : model_(model), cfg_(cfg), grad_(model.l() * model.d() + model.l()), scores_(model.l()),
          g_(model.l()) {
        if (cfg.optimizer == Optimizer::adaptive_moments) {
            m1_.assign(grad_.size(), 0.0);
            m2_.assign(grad_.size(), 0.0);
        }
    }

    /// Accumulates the mean gradient over `batch`, updates the model and
    /// returns the mean loss before the update.
    template <class Loss>
    double step(const Dataset& data, std::span<const std::size_t> batch, Loss& loss) {
        const std::size_t l = model_.l(), d = model_.d();
        std::fill(grad_.begin(), grad_.end(), 0.0);
        double total = 0.0;
        for (std::size_t i : batch) {
            const Instance& inst = data.instances[i];
            model_.scores_into(inst.x, scores_);
            total += loss(std::span<const double>(scores_), inst.y, std::span<double>(g_));
            for (std::size_t k = 0; k < l; ++k) {
                const double gk = g_[k];
                if (gk == 0.0) continue;
                double* row = grad_.data() + k * d;
                for (const Feature& f : inst.x) row[f.index] += gk * f.value;
                grad_[l * d + k] += gk;
            }
        }
        const double inv = 1.0 / static_cast<double>(batch.size());
        for (double& g : grad_) g *= inv;
        apply();
        return total * inv;
    }

private:
    double& param(std::size_t p) {
        const std::size_t wd = model_.l() * model_.d();
        return p < wd ? model_.weights()[p] : model_.biases()[p - wd];
    }

    void apply() {
        const double lr = cfg_.learning_rate;
        if (cfg_.optimizer == Optimizer::gd) {
            for (std::size_t p = 0; p < grad_.size(); ++p) param(p) -= lr * grad_[p];
            return;
        }
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t p = 0; p < grad_.size(); ++p) {
            const double g = grad_[p];
            m1_[p] = cfg_.beta1 * m1_[p] + (1.0 - cfg_.beta1) * g;
            m2_[p] = cfg_.beta2 * m2_[p] + (1.0 - cfg_.beta2) * g * g;
            param(p) -= lr * (m1_[p] / c1) / (std::sqrt(m2_[p] / c2) + cfg_.epsilon);
        }
    }

    LinearModel& model_;
    const TrainConfig& cfg_;
    std::vector<double> grad_;
    std::vector<double> scores_;
    std::vector<double> g_;
    std::vector<double> m1_, m2_;
    std::uint64_t t_ = 0;
};

void check_training_inputs(const Dataset& train, std::size_t l, const TrainConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw ShapeError("training set is empty");
    if (l != train.l) throw ShapeError("cost coefficients and dataset disagree on l");
}

/// Shared epoch loop. `before(batch)` runs ahead of every optimizer step.
template <class Loss, class Before>
TrainResult run_training(const Dataset& train, const TrainConfig& cfg, Loss& loss, Before&& before) {
    TrainResult result{LinearModel(train.l, train.d), {}};
    Stepper stepper(result.model, cfg);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix64(cfg.seed));

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_total = 0.0;
        std::size_t batch_no = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const std::span<const std::size_t> batch(order.data() + start, stop - start);
            before(batch, result.model);
            const double value = stepper.step(train, batch, loss);
            if (!std::isfinite(value)) throw DivergenceError("non-finite training loss", epoch, batch_no);
            if (!result.model.finite()) throw DivergenceError("non-finite model parameters", epoch, batch_no);
            epoch_total += value * static_cast<double>(batch.size());
        }
        result.epoch_losses.push_back(epoch_total / static_cast<double>(train.size()));
    }
    return result;
}

constexpr auto no_hook = [](std::span<const std::size_t>, const LinearModel&) {};

double safe_metric(std::span<const LabelVector> truth, std::span<const LabelVector> preds, const MetricSpec& spec,
                   DegeneratePolicy policy) {
    try {
        return empirical_metric(truth, preds, spec, policy);
    } catch (const DegenerateDenominator&) {
        return -std::numeric_limits<double>::infinity();
    }
}

}  // namespace

TrainResult train_surrogate(const Dataset& train, const CostCoefficients& gamma, const TrainConfig& cfg) {
    check_training_inputs(train, gamma.l(), cfg);
    const SurrogateEvaluator eval(gamma, cfg.surrogate_params());
    auto loss = [&](std::span<const double> s, const LabelVector& y, std::span<double> g) {
        return eval.loss_and_gradient(s, y, g);
    };
    return run_training(train, cfg, loss, no_hook);
}

TrainResult train_logistic_baseline(const Dataset& train, const TrainConfig& cfg) {
    check_training_inputs(train, train.l, cfg);
    auto loss = [](std::span<const double> s, const LabelVector& y, std::span<double> g) {
        double total = 0.0;
        for (std::size_t k = 0; k < s.size(); ++k) {
            const double margin = y[k] * s[k];
            total += softplus(-margin);
            g[k] = -y[k] * sigmoid(-margin);
        }
        return total;
    };
    return run_training(train, cfg, loss, no_hook);
}

std::vector<LabelVector> predict_all(const LinearModel& model, const Dataset& data) {
    std::vector<LabelVector> out;
    out.reserve(data.size());
    for (const auto& inst : data.instances) out.push_back(model.predict(inst.x));
    return out;
}

double empirical_ell_lambda(const LinearModel& model, const Dataset& data, const CostCoefficients& gamma) {
    if (data.empty()) throw ShapeError("dataset is empty");
    double total = 0.0;
    for (const auto& inst : data.instances) total += target_loss(gamma, model.predict(inst.x), inst.y);
    return total / static_cast<double>(data.size());
}

double empirical_surrogate(const LinearModel& model, const Dataset& data, const CostCoefficients& gamma,
                           const SurrogateParams& params) {
    if (data.empty()) throw ShapeError("dataset is empty");
    const SurrogateEvaluator eval(gamma, params);
    double total = 0.0;
    for (const auto& inst : data.instances) total += eval.loss(model.scores(inst.x), inst.y);
    return total / static_cast<double>(data.size());
}

SearchReport lambda_oracle_bisect(const DiscreteDistribution& dist, const MetricSpec& spec, const SearchConfig& cfg) {
    cfg.validate();
    spec.validate();
    if (spec.averaging == Averaging::macro) {
        throw ConfigError("oracle bisection needs a single ratio; macro averaging is not supported");
    }
    const TabularEnumeration classifiers(dist.support_size(), dist.l());
    std::vector<std::pair<double, double>> terms;  // (E[l_alpha], E[l_beta]) per classifier
    terms.reserve(classifiers.count());
    for (const auto& h : classifiers) {
        const auto t = population_terms(dist, h, spec);
        terms.emplace_back(t.alpha_total(), t.beta_total());
    }

    SearchReport report;
    report.strategy = SearchStrategy::oracle_bisect;
    report.epsilon = cfg.epsilon.value_or(1e-3);
    double a = cfg.lambda_min, b = cfg.lambda_max;
    while (b - a > report.epsilon) {
        const double lambda = 0.5 * (a + b);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [ea, eb] : terms) best = std::min(best, lambda * eb - ea);
        CandidateRecord rec{lambda, std::numeric_limits<double>::quiet_NaN(), best,
                            std::numeric_limits<double>::quiet_NaN(), ""};
        if (best > 0.0) {
            b = lambda;
            rec.branch = "shrink_upper";
        } else {
            a = lambda;
            rec.branch = "shrink_lower";
        }
        report.candidates.push_back(std::move(rec));
        ++report.iterations;
    }
    report.chosen_lambda = 0.5 * (a + b);
    report.termination = "interval";
    return report;
}

SearchResult lambda_surrogate_bisect(const Dataset& train, const MetricSpec& spec, const TrainConfig& train_cfg,
                                     const SearchConfig& cfg) {
    cfg.validate();
    spec.validate();
    check_training_inputs(train, spec.l, train_cfg);

    double ell_beta_max = 0.0;
    const LabelVector all_pos(spec.l, 1), all_neg(spec.l, -1);
    for (const auto& inst : train.instances) {
        double pos = 0.0, neg = 0.0;
        for (std::size_t k = 0; k < spec.l; ++k) {
            pos += spec.beta[k].eval(1, inst.y[k]);
            neg += spec.beta[k].eval(-1, inst.y[k]);
        }
        ell_beta_max = std::max({ell_beta_max, pos, neg});
    }
    if (!(ell_beta_max > 0.0)) throw ConfigError("metric denominator is never positive on the training set");

    SearchResult result;
    SearchReport& report = result.report;
    report.strategy = SearchStrategy::surrogate_bisect;
    report.epsilon = cfg.epsilon.value_or(cfg.epsilon_m / (2.0 * ell_beta_max));
    const auto truth = train.labels();

    auto candidate = [&](double lambda) {
        const CostCoefficients gamma = gamma_from(spec, lambda);
        TrainResult trained = train_surrogate(train, gamma, train_cfg);
        const auto preds = predict_all(trained.model, train);
        CandidateRecord rec{lambda, empirical_surrogate(trained.model, train, gamma, train_cfg.surrogate_params()),
                            empirical_ell_lambda(trained.model, train, gamma),
                            safe_metric(truth, preds, spec, cfg.degenerate), ""};
        return std::make_pair(std::move(trained.model), std::move(rec));
    };

    double a = cfg.lambda_min, b = cfg.lambda_max;
    while (b - a > report.epsilon) {
        const double lambda = 0.5 * (a + b);
        auto [model, rec] = candidate(lambda);
        ++report.iterations;
        if (rec.ell_lambda > cfg.epsilon_m) {
            b = lambda;
            rec.branch = "shrink_upper";
        } else if (rec.ell_lambda < -cfg.epsilon_m) {
            a = lambda;
            rec.branch = "shrink_lower";
        } else {
            rec.branch = "band";
            report.candidates.push_back(std::move(rec));
            report.chosen_lambda = lambda;
            report.termination = "band";
            result.model = std::move(model);
            return result;
        }
        report.candidates.push_back(std::move(rec));
    }
    // Interval exhausted: the final midpoint model is returned but is not an
    // iteration of the search.
    auto [model, rec] = candidate(0.5 * (a + b));
    report.candidates.push_back(std::move(rec));
    report.chosen_lambda = 0.5 * (a + b);
    report.termination = "interval";
    result.model = std::move(model);
    return result;
}

SearchResult lambda_cv_grid(const Dataset& train, const Dataset& validation, const MetricSpec& spec,
                            const TrainConfig& train_cfg, const SearchConfig& cfg) {
    cfg.validate();
    spec.validate();
    check_training_inputs(train, spec.l, train_cfg);
    if (validation.empty()) throw ShapeError("validation set is empty");
    if (validation.l != spec.l) throw ShapeError("validation set and metric disagree on l");

    const double eps = cfg.epsilon.value_or(0.1);
    if (!(eps < cfg.lambda_max - cfg.lambda_min)) throw ConfigError("grid epsilon must be below the lambda range");
    const std::size_t n = grid_size(cfg.lambda_max - cfg.lambda_min, eps);
    const auto truth = validation.labels();

    std::vector<LinearModel> models(n);
    std::vector<CandidateRecord> records(n);
    parallel_for(n, [&](std::size_t i) {
        const double lambda = cfg.lambda_max - static_cast<double>(i) * eps;
        TrainConfig local = train_cfg;
        local.seed = train_cfg.seed ^ static_cast<std::uint64_t>(i);
        const CostCoefficients gamma = gamma_from(spec, lambda);
        TrainResult trained = train_surrogate(train, gamma, local);
        const auto preds = predict_all(trained.model, validation);
        records[i] = {lambda, empirical_surrogate(trained.model, train, gamma, local.surrogate_params()),
                      empirical_ell_lambda(trained.model, train, gamma),
                      safe_metric(truth, preds, spec, cfg.degenerate), ""};
        models[i] = std::move(trained.model);
    });

    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < n; ++i) {
        if (records[i].metric == -std::numeric_limits<double>::infinity()) continue;
        if (!best || records[i].metric > records[*best].metric) best = i;
    }
    if (!best) throw SearchError("no valid candidate: every grid point has a degenerate validation metric");

    SearchResult result;
    result.report.strategy = SearchStrategy::cv_grid;
    result.report.epsilon = eps;
    result.report.iterations = n;
    result.report.chosen_lambda = records[*best].lambda;
    result.report.termination = "grid";
    result.report.candidates = std::move(records);
    result.model = std::move(models[*best]);
    return result;
}

double ema_update(double lambda_old, double batch_metric, double gamma) noexcept {
    return gamma * lambda_old + (1.0 - gamma) * batch_metric;
}

SearchResult train_ema(const Dataset& train, const MetricSpec& spec, const TrainConfig& train_cfg,
                       const SearchConfig& cfg) {
    cfg.validate();
    spec.validate();
    check_training_inputs(train, spec.l, train_cfg);

    MetricSpec batch_spec = spec;
    batch_spec.averaging = Averaging::micro;
    const SurrogateParams params = train_cfg.surrogate_params();

    double lambda = cfg.lambda0;
    SurrogateEvaluator eval(gamma_from(spec, lambda), params);
    std::vector<double> trace;
    std::vector<LabelVector> truth, preds;

    auto hook = [&](std::span<const std::size_t> batch, const LinearModel& model) {
        truth.clear();
        preds.clear();
        for (std::size_t i : batch) {
            truth.push_back(train.instances[i].y);
            preds.push_back(model.predict(train.instances[i].x));
        }
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < truth.size(); ++j) {
            for (std::size_t k = 0; k < spec.l; ++k) {
                num += spec.alpha[k].eval(preds[j][k], truth[j][k]);
                den += spec.beta[k].eval(preds[j][k], truth[j][k]);
            }
        }
        if (den > 0.0) {
            lambda = ema_update(lambda, num / den, cfg.ema_gamma);
            eval = SurrogateEvaluator(gamma_from(spec, lambda), params);
        }
        trace.push_back(lambda);
    };
    auto loss = [&](std::span<const double> s, const LabelVector& y, std::span<double> g) {
        return eval.loss_and_gradient(s, y, g);
    };
    TrainResult trained = run_training(train, train_cfg, loss, hook);

    SearchResult result;
    result.model = std::move(trained.model);
    result.report.strategy = SearchStrategy::ema;
    result.report.chosen_lambda = lambda;
    result.report.iterations = trace.size();
    result.report.termination = "epochs";
    result.report.lambda_trace = std::move(trace);
    return result;
}

}  // namespace mmo
