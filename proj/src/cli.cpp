#include "mmo/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "mmo/data.hpp"
#include "mmo/errors.hpp"
#include "mmo/losses.hpp"
#include "mmo/metrics.hpp"
#include "mmo/models.hpp"
#include "mmo/random.hpp"
#include "mmo/solver.hpp"
#include "mmo/verify.hpp"

namespace mmo::cli {
namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr const char* kCanonicalDistribution = "point x1 w=1 marginals 0.8\n";

struct Output {
    bool json = false;
    std::string report_path;
};

void add_output_flags(CLI::App* cmd, Output& o) {
    cmd->add_flag("--json", o.json, "Print the JSON report on stdout");
    cmd->add_option("--report", o.report_path, "Also write the JSON report to this file");
}

void emit(const json& report, const Output& o, std::ostream& out, const std::string& human) {
    if (!o.report_path.empty()) {
        std::ofstream f(o.report_path, std::ios::binary);
        if (!f) throw ConfigError("cannot write report file: " + o.report_path);
        f << report.dump(2) << '\n';
    }
    if (o.json) out << report.dump(2) << '\n';
    else out << human;
}

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

json number(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

struct TrainFlags {
    TrainConfig cfg;
    std::string optimizer = "adam";
    std::string offset_mode = "sigma";
    std::string normalization = "per_config";

    TrainConfig resolve() {
        cfg.optimizer = parse_optimizer(optimizer);
        cfg.offset_mode = parse_offset_mode(offset_mode);
        cfg.normalization = parse_normalization(normalization);
        cfg.validate();
        return cfg;
    }
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--lr", f.cfg.learning_rate, "Learning rate")->capture_default_str();
    cmd->add_option("--batch-size", f.cfg.batch_size, "Mini-batch size")->capture_default_str();
    cmd->add_option("--epochs", f.cfg.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--seed", f.cfg.seed, "Seed for every random choice")->capture_default_str();
    cmd->add_option("--tau", f.cfg.tau, "Surrogate tau >= 0")->capture_default_str();
    cmd->add_option("--optimizer", f.optimizer, "gd or adam")->capture_default_str();
    cmd->add_option("--beta1", f.cfg.beta1, "First moment decay")->capture_default_str();
    cmd->add_option("--beta2", f.cfg.beta2, "Second moment decay")->capture_default_str();
    cmd->add_option("--adam-eps", f.cfg.epsilon, "Optimizer stability epsilon")->capture_default_str();
    cmd->add_option("--offset-mode", f.offset_mode, "sigma or all_pairs")->capture_default_str();
    cmd->add_option("--normalization", f.normalization, "per_config or raw")->capture_default_str();
}

json train_config_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"seed", c.seed},
            {"tau", c.tau},
            {"optimizer", std::string(to_string(c.optimizer))},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"epsilon", c.epsilon},
            {"offset_mode", std::string(to_string(c.offset_mode))},
            {"normalization", std::string(to_string(c.normalization))}};
}

struct SearchFlags {
    SearchConfig cfg;
    double epsilon = 0.0;  // 0 selects the strategy default

    SearchConfig resolve() {
        if (epsilon != 0.0) cfg.epsilon = epsilon;
        cfg.validate();
        return cfg;
    }
};

void add_search_flags(CLI::App* cmd, SearchFlags& f) {
    cmd->add_option("--lambda-min", f.cfg.lambda_min, "Lower end of the lambda range")->capture_default_str();
    cmd->add_option("--lambda-max", f.cfg.lambda_max, "Upper end of the lambda range")->capture_default_str();
    cmd->add_option("--epsilon", f.epsilon, "Lambda resolution (0: strategy default)")->capture_default_str();
    cmd->add_option("--epsilon-m", f.cfg.epsilon_m, "Empirical tolerance band")->capture_default_str();
    cmd->add_option("--ema-gamma", f.cfg.ema_gamma, "EMA decay for lambda")->capture_default_str();
    cmd->add_option("--lambda0", f.cfg.lambda0, "Initial lambda for ema")->capture_default_str();
}

json search_config_json(const SearchConfig& c) {
    json j{{"lambda_min", c.lambda_min},
           {"lambda_max", c.lambda_max},
           {"epsilon", c.epsilon ? json(*c.epsilon) : json(nullptr)},
           {"epsilon_m", number(c.epsilon_m)},
           {"ema_gamma", c.ema_gamma},
           {"lambda0", c.lambda0},
           {"skip_degenerate", c.degenerate == DegeneratePolicy::skip}};
    return j;
}

json search_report_json(const SearchReport& r) {
    json cands = json::array();
    for (const auto& c : r.candidates) {
        cands.push_back({{"lambda", c.lambda},
                         {"surrogate", number(c.surrogate)},
                         {"ell_lambda", number(c.ell_lambda)},
                         {"metric", number(c.metric)},
                         {"branch", c.branch}});
    }
    return {{"strategy", std::string(to_string(r.strategy))},
            {"chosen_lambda", r.chosen_lambda},
            {"epsilon", r.epsilon},
            {"iterations", r.iterations},
            {"termination", r.termination},
            {"candidates", std::move(cands)}};
}

json verify_report_json(const VerifyReport& r) {
    json worst = nullptr;
    if (r.worst) worst = {{"seed", r.worst->seed}, {"trial", r.worst->trial}, {"summary", r.worst->summary}};
    json meas = json::object();
    for (const auto& [k, v] : r.measurements) meas[k] = number(v);
    return {{"check", r.check},
            {"trials", r.trials},
            {"max_violation", number(r.max_violation)},
            {"tolerance", r.tolerance},
            {"passed", r.passed},
            {"lower_bound", r.lower_bound},
            {"worst", std::move(worst)},
            {"measurements", std::move(meas)}};
}

std::vector<Averaging> averagings_for(const std::string& name) {
    if (name == "all") return {Averaging::micro, Averaging::macro, Averaging::instance};
    return {parse_averaging(name)};
}

/// Metric per averaging mode; degenerate values become null when `lenient`.
json metric_values(std::span<const LabelVector> truth, std::span<const LabelVector> preds, const std::string& metric,
                   std::size_t l, const std::vector<Averaging>& modes, DegeneratePolicy policy, bool lenient) {
    json values = json::object();
    for (Averaging a : modes) {
        const auto spec = preset(metric, l, a);
        try {
            values[std::string(to_string(a))] = empirical_metric(truth, preds, spec, policy);
        } catch (const DegenerateDenominator&) {
            if (!lenient) throw;
            values[std::string(to_string(a))] = nullptr;
        }
    }
    return values;
}

std::string human_metrics(const json& values) {
    std::string s;
    for (const auto& [k, v] : values.items()) {
        s += "  " + k + ": " + (v.is_null() ? std::string("degenerate") : fmt(v.get<double>())) + "\n";
    }
    return s;
}

Dataset load_data(const std::string& path) {
    if (path.empty()) throw ConfigError("--data is required");
    auto d = load_mlsvm(path);
    d.validate();
    return d;
}

// ---------------------------------------------------------------------------

struct TrainCmd {
    std::string data, metric = "f1", averaging = "micro", strategy = "ema", out;
    std::optional<double> lambda;
    TrainFlags train;
    SearchFlags search;
    Output output;

    void attach(CLI::App& app, std::function<int()>& action, std::ostream& os) {
        auto* cmd = app.add_subcommand("train", "Train a linear model");
        cmd->add_option("--data", data, "Training set (.mlsvm)")->required();
        cmd->add_option("--metric", metric, "f1, jaccard, precision or accuracy")->capture_default_str();
        cmd->add_option("--averaging", averaging, "micro, macro or instance")->capture_default_str();
        cmd->add_option("--strategy", strategy, "ema, fixed-lambda or bce")->capture_default_str();
        cmd->add_option("--lambda", lambda, "Lambda for fixed-lambda");
        cmd->add_option("--out", out, "Model output path")->required();
        add_train_flags(cmd, train);
        add_search_flags(cmd, search);
        add_output_flags(cmd, output);
        cmd->callback([this, &action, &os] { action = [this, &os] { return execute(os); }; });
    }

    int execute(std::ostream& os) {
        const auto t0 = Clock::now();
        const TrainConfig cfg = train.resolve();
        const SearchConfig scfg = search.resolve();
        const Averaging avg = parse_averaging(averaging);
        if (strategy != "ema" && strategy != "fixed-lambda" && strategy != "bce") {
            throw ConfigError("unknown strategy '" + strategy + "' (expected ema, fixed-lambda or bce)");
        }
        if (strategy == "fixed-lambda" && !lambda) throw ConfigError("--strategy fixed-lambda requires --lambda");
        const Dataset ds = load_data(data);
        const MetricSpec spec = preset(metric, ds.l, avg);

        json results = json::object();
        LinearModel model;
        if (strategy == "ema") {
            auto r = train_ema(ds, spec, cfg, scfg);
            model = std::move(r.model);
            results["chosen_lambda"] = r.report.chosen_lambda;
            results["lambda_trace"] = r.report.lambda_trace;
        } else if (strategy == "fixed-lambda") {
            auto r = train_surrogate(ds, gamma_from(spec, *lambda), cfg);
            model = std::move(r.model);
            results["chosen_lambda"] = *lambda;
            results["epoch_losses"] = r.epoch_losses;
        } else {
            auto r = train_logistic_baseline(ds, cfg);
            model = std::move(r.model);
            results["epoch_losses"] = r.epoch_losses;
        }
        save_model(out, model);
        const auto truth = ds.labels();
        const auto preds = predict_all(model, ds);
        results["train_metrics"] = metric_values(truth, preds, metric, ds.l, averagings_for("all"),
                                                 DegeneratePolicy::raise, true);

        json report{{"command", "train"},
                    {"config",
                     {{"data", data},
                      {"metric", metric},
                      {"averaging", averaging},
                      {"strategy", strategy},
                      {"lambda", lambda ? json(*lambda) : json(nullptr)},
                      {"train", train_config_json(cfg)},
                      {"search", search_config_json(scfg)}}},
                    {"results", results},
                    {"artifacts", {{"model", out}}},
                    {"timing", {{"seconds", seconds_since(t0)}}}};
        std::string human = "trained " + strategy + " model -> " + out + "\n";
        if (results.contains("chosen_lambda")) human += "lambda: " + fmt(results["chosen_lambda"].get<double>()) + "\n";
        human += "training metrics (" + metric + "):\n" + human_metrics(results["train_metrics"]);
        emit(report, output, os, human);
        return kOk;
    }
};

struct EvalCmd {
    std::string model_path, data, metric = "f1", averaging = "all";
    bool skip_degenerate = false;
    Output output;

    void attach(CLI::App& app, std::function<int()>& action, std::ostream& os) {
        auto* cmd = app.add_subcommand("eval", "Evaluate a model on a dataset");
        cmd->add_option("--model", model_path, "Model file")->required();
        cmd->add_option("--data", data, "Dataset (.mlsvm)")->required();
        cmd->add_option("--metric", metric, "f1, jaccard, precision or accuracy")->capture_default_str();
        cmd->add_option("--averaging", averaging, "micro, macro, instance or all")->capture_default_str();
        cmd->add_flag("--skip-degenerate", skip_degenerate, "Drop degenerate labels/instances from averages");
        add_output_flags(cmd, output);
        cmd->callback([this, &action, &os] { action = [this, &os] { return execute(os); }; });
    }

    int execute(std::ostream& os) {
        const auto t0 = Clock::now();
        const auto modes = averagings_for(averaging);
        preset(metric, 1, Averaging::micro);  // reject unknown names before touching files
        const LinearModel model = load_model(model_path);
        const Dataset ds = load_data(data);
        if (model.l() != ds.l || model.d() != ds.d) throw ShapeError("model and dataset disagree on l or d");
        const auto truth = ds.labels();
        const auto preds = predict_all(model, ds);
        const auto policy = skip_degenerate ? DegeneratePolicy::skip : DegeneratePolicy::raise;
        const json values = metric_values(truth, preds, metric, ds.l, modes, policy, false);

        json report{{"command", "eval"},
                    {"config",
                     {{"model", model_path},
                      {"data", data},
                      {"metric", metric},
                      {"averaging", averaging},
                      {"skip_degenerate", skip_degenerate}}},
                    {"results", {{"metrics", values}, {"instances", ds.size()}}},
                    {"artifacts", json::object()},
                    {"timing", {{"seconds", seconds_since(t0)}}}};
        emit(report, output, os, metric + " on " + std::to_string(ds.size()) + " instances:\n" + human_metrics(values));
        return kOk;
    }
};

struct SearchCmd {
    std::string strategy, data, val, dist, metric = "f1", averaging = "micro", out;
    bool skip_degenerate = false;
    TrainFlags train;
    SearchFlags search;
    Output output;

    void attach(CLI::App& app, std::function<int()>& action, std::ostream& os) {
        auto* cmd = app.add_subcommand("lambda-search", "Select lambda by bisection or grid search");
        cmd->add_option("--strategy", strategy, "oracle, surrogate-bs or cv")->required();
        cmd->add_option("--data", data, "Training set (.mlsvm)");
        cmd->add_option("--val", val, "Validation set for cv (.mlsvm)");
        cmd->add_option("--dist", dist, "Finite distribution for oracle (.dist)");
        cmd->add_option("--metric", metric, "f1, jaccard, precision or accuracy")->capture_default_str();
        cmd->add_option("--averaging", averaging, "micro, macro or instance")->capture_default_str();
        cmd->add_option("--out", out, "Write the selected model here");
        cmd->add_flag("--skip-degenerate", skip_degenerate, "Drop degenerate labels/instances from averages");
        add_train_flags(cmd, train);
        add_search_flags(cmd, search);
        add_output_flags(cmd, output);
        cmd->callback([this, &action, &os] { action = [this, &os] { return execute(os); }; });
    }

    int execute(std::ostream& os) {
        const auto t0 = Clock::now();
        const TrainConfig cfg = train.resolve();
        SearchConfig scfg = search.resolve();
        scfg.degenerate = skip_degenerate ? DegeneratePolicy::skip : DegeneratePolicy::raise;
        const Averaging avg = parse_averaging(averaging);

        SearchReport report;
        std::optional<LinearModel> model;
        if (strategy == "oracle") {
            scfg.strategy = SearchStrategy::oracle_bisect;
            if (dist.empty()) throw ConfigError("--strategy oracle requires --dist");
            const auto d = load_distribution(dist);
            report = lambda_oracle_bisect(d, preset(metric, d.l(), avg), scfg);
        } else if (strategy == "surrogate-bs") {
            scfg.strategy = SearchStrategy::surrogate_bisect;
            const Dataset ds = load_data(data);
            auto r = lambda_surrogate_bisect(ds, preset(metric, ds.l, avg), cfg, scfg);
            report = std::move(r.report);
            model = std::move(r.model);
        } else if (strategy == "cv") {
            scfg.strategy = SearchStrategy::cv_grid;
            if (val.empty()) throw ConfigError("--strategy cv requires --val");
            const Dataset ds = load_data(data);
            const Dataset vs = load_data(val);
            auto r = lambda_cv_grid(ds, vs, preset(metric, ds.l, avg), cfg, scfg);
            report = std::move(r.report);
            model = std::move(r.model);
        } else {
            throw ConfigError("unknown strategy '" + strategy + "' (expected oracle, surrogate-bs or cv)");
        }
        json artifacts = json::object();
        if (model && !out.empty()) {
            save_model(out, *model);
            artifacts["model"] = out;
        }

        json j{{"command", "lambda-search"},
               {"config",
                {{"strategy", strategy},
                 {"data", data},
                 {"val", val},
                 {"dist", dist},
                 {"metric", metric},
                 {"averaging", averaging},
                 {"train", train_config_json(cfg)},
                 {"search", search_config_json(scfg)}}},
               {"results", search_report_json(report)},
               {"artifacts", artifacts},
               {"timing", {{"seconds", seconds_since(t0)}}}};
        std::string human = strategy + ": lambda " + fmt(report.chosen_lambda) + " after " +
                            std::to_string(report.iterations) + " iterations (" + report.termination + ")\n";
        for (const auto& c : report.candidates) {
            human += "  lambda " + fmt(c.lambda) + "  l^lambda " + fmt(c.ell_lambda);
            if (std::isfinite(c.metric)) human += "  metric " + fmt(c.metric);
            if (!c.branch.empty()) human += "  " + c.branch;
            human += "\n";
        }
        emit(j, output, os, human);
        return kOk;
    }
};

std::vector<std::size_t> parse_size_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto piece = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), v);
        if (ec != std::errc{} || ptr != piece.data() + piece.size() || piece.empty()) {
            throw ConfigError("bad integer list '" + s + "'");
        }
        out.push_back(v);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

struct VerifyCmd {
    std::string check = "all", l_list, dist, metric = "f1";
    std::optional<double> tau;
    std::optional<std::size_t> trials;
    std::size_t l_max = 8, repeats = 15, distributions = 50;
    std::uint64_t seed = 0;
    double tolerance = 1e-9;
    Output output;

    void attach(CLI::App& app, std::function<int()>& action, std::ostream& os) {
        auto* cmd = app.add_subcommand("verify", "Run numerical checks");
        cmd->add_option("--check", check, "factorization, gradient, equiv, sign, bound, runtime or all")
            ->capture_default_str();
        cmd->add_option("--l", l_list, "Label count (bound) or comma list (runtime)");
        cmd->add_option("--tau", tau, "Tau for the bound check");
        cmd->add_option("--trials", trials, "Trials per configuration");
        cmd->add_option("--l-max", l_max, "Largest l for the factorization check")->capture_default_str();
        cmd->add_option("--repeats", repeats, "Timing repeats for the runtime check")->capture_default_str();
        cmd->add_option("--distributions", distributions, "Random distributions for equiv/sign")
            ->capture_default_str();
        cmd->add_option("--dist", dist, "Check equiv/sign on this distribution only");
        cmd->add_option("--metric", metric, "Metric for equiv/sign")->capture_default_str();
        cmd->add_option("--tolerance", tolerance, "Tolerance for equiv/sign")->capture_default_str();
        cmd->add_option("--seed", seed, "Seed")->capture_default_str();
        add_output_flags(cmd, output);
        cmd->callback([this, &action, &os] { action = [this, &os] { return execute(os); }; });
    }

    std::vector<DiscreteDistribution> distributions_to_check() const {
        std::vector<DiscreteDistribution> out;
        if (!dist.empty()) {
            out.push_back(load_distribution(dist));
            return out;
        }
        out.push_back(parse_distribution(kCanonicalDistribution));
        for (std::size_t i = 0; i < distributions; ++i) {
            auto rng = stream_rng(seed, i);
            out.push_back(random_distribution(rng, 3, 2));
        }
        return out;
    }

    VerifyReport over_distributions(bool sign) const {
        VerifyReport total;
        total.check = sign ? "sign" : "equiv";
        total.tolerance = tolerance;
        for (const auto& d : distributions_to_check()) {
            const auto spec = preset(metric, d.l(), Averaging::micro);
            auto r = sign ? check_sign_sweep(d, spec, tolerance) : check_equivalence(d, spec, tolerance);
            r.measurements.clear();
            total.absorb(r);
        }
        return total;
    }

    int execute(std::ostream& os) {
        const auto t0 = Clock::now();
        const std::vector<std::string> known{"factorization", "gradient", "equiv", "sign", "bound", "runtime", "all"};
        if (std::find(known.begin(), known.end(), check) == known.end()) {
            throw ConfigError("unknown check '" + check + "'");
        }
        const bool all = check == "all";
        std::vector<VerifyReport> reports;
        if (all || check == "factorization") reports.push_back(check_factorization(l_max, trials.value_or(200), seed));
        if (all || check == "gradient") reports.push_back(check_gradient(trials.value_or(1000), seed));
        if (all || check == "equiv") reports.push_back(over_distributions(false));
        if (all || check == "sign") reports.push_back(over_distributions(true));
        if (all || check == "bound") {
            if (all) {
                for (double t : {0.0, 0.5, 1.0}) reports.push_back(check_hconsistency_bound(1, t, 10000, seed));
                for (std::size_t l : {2, 3}) reports.push_back(check_hconsistency_bound(l, 0.0, 500, seed));
            } else {
                const std::size_t l = l_list.empty() ? 1 : parse_size_list(l_list).at(0);
                reports.push_back(check_hconsistency_bound(l, tau.value_or(0.0), trials.value_or(l == 1 ? 10000 : 500), seed));
            }
        }
        if (all || check == "runtime") {
            const auto ls = (l_list.empty() || all) ? std::vector<std::size_t>{64, 256, 1024, 4096} : parse_size_list(l_list);
            reports.push_back(check_runtime_scaling(ls, repeats, seed));
        }

        bool ok = true;
        json arr = json::array();
        std::string human;
        for (const auto& r : reports) {
            ok = ok && r.passed;
            arr.push_back(verify_report_json(r));
            std::string label = r.check;
            for (const auto& [k, v] : r.measurements) {
                if (k == "l" || k == "tau") label += " " + k + "=" + fmt(v);
            }
            human += std::string(r.passed ? "PASS " : "FAIL ") + label + "  trials " + std::to_string(r.trials) +
                     "  max violation " + fmt(r.max_violation) + "  tolerance " + fmt(r.tolerance) + "\n";
            if (!r.passed && r.worst) {
                human += "     worst: seed " + std::to_string(r.worst->seed) + " trial " +
                         std::to_string(r.worst->trial) + " " + r.worst->summary + "\n";
            }
        }
        json report{{"command", "verify"},
                    {"config",
                     {{"check", check},
                      {"l", l_list},
                      {"tau", tau ? json(*tau) : json(nullptr)},
                      {"trials", trials ? json(*trials) : json(nullptr)},
                      {"l_max", l_max},
                      {"repeats", repeats},
                      {"distributions", distributions},
                      {"dist", dist},
                      {"metric", metric},
                      {"tolerance", tolerance},
                      {"seed", seed}}},
                    {"results", {{"passed", ok}, {"reports", arr}}},
                    {"artifacts", json::object()},
                    {"timing", {{"seconds", seconds_since(t0)}}}};
        emit(report, output, os, human);
        return ok ? kOk : kVerifyFailed;
    }
};

struct SynthCmd {
    SynthLinearOptions opt;
    std::string out, planted;
    Output output;

    void attach(CLI::App& app, std::function<int()>& action, std::ostream& os) {
        auto* cmd = app.add_subcommand("synth", "Generate a synthetic linear multi-label dataset");
        cmd->add_option("--l", opt.l, "Labels")->capture_default_str();
        cmd->add_option("--d", opt.d, "Features")->capture_default_str();
        cmd->add_option("--m", opt.m, "Instances")->capture_default_str();
        cmd->add_option("--positive-rate", opt.positive_rate, "Target marginal positive rate")->capture_default_str();
        cmd->add_option("--noise", opt.noise, "Logistic temperature (0: sign labels)")->capture_default_str();
        cmd->add_option("--planted-scale", opt.planted_scale, "Norm of planted weight vectors")->capture_default_str();
        cmd->add_option("--seed", opt.seed, "Seed")->capture_default_str();
        cmd->add_option("--out", out, "Dataset output path (.mlsvm)")->required();
        cmd->add_option("--planted", planted, "Also write the planted model here");
        add_output_flags(cmd, output);
        cmd->callback([this, &action, &os] { action = [this, &os] { return execute(os); }; });
    }

    int execute(std::ostream& os) {
        const auto t0 = Clock::now();
        if (opt.l == 0 || opt.d == 0) throw ConfigError("--l and --d must be >= 1");
        if (!(opt.positive_rate > 0.0 && opt.positive_rate < 1.0)) throw ConfigError("--positive-rate must lie in (0, 1)");
        if (!(opt.noise >= 0.0)) throw ConfigError("--noise must be >= 0");
        auto [ds, model] = synth_linear(opt);
        save_mlsvm(out, ds);
        json artifacts{{"data", out}};
        if (!planted.empty()) {
            save_model(planted, model);
            artifacts["planted"] = planted;
        }
        std::size_t positives = 0;
        for (const auto& inst : ds.instances) positives += inst.y.count_positive();
        const double rate = static_cast<double>(positives) / static_cast<double>(opt.m * opt.l);
        json report{{"command", "synth"},
                    {"config",
                     {{"l", opt.l},
                      {"d", opt.d},
                      {"m", opt.m},
                      {"positive_rate", opt.positive_rate},
                      {"noise", opt.noise},
                      {"planted_scale", opt.planted_scale},
                      {"seed", opt.seed}}},
                    {"results", {{"instances", ds.size()}, {"positive_fraction", rate}}},
                    {"artifacts", artifacts},
                    {"timing", {{"seconds", seconds_since(t0)}}}};
        emit(report, output, os,
             "wrote " + std::to_string(ds.size()) + " instances to " + out + " (positive fraction " +
                 fmt(rate) + ")\n");
        return kOk;
    }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-label metric optimization with cost-sensitive comp-sum surrogates", "mmo"};
    app.require_subcommand(1);
    std::function<int()> action;
    TrainCmd train;
    EvalCmd eval;
    SearchCmd search;
    VerifyCmd verify;
    SynthCmd synth;
    train.attach(app, action, out);
    eval.attach(app, action, out);
    search.attach(app, action, out);
    verify.attach(app, action, out);
    synth.attach(app, action, out);

    std::vector<std::string> argv_storage{"mmo"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_storage) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kOk;
        }
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }

    try {
        return action();
    } catch (const DivergenceError& e) {
        err << "divergence: " << e.what() << '\n';
        return kDivergence;
    } catch (const DegenerateDenominator& e) {
        err << "degenerate metric: " << e.what() << '\n';
        return kDegenerate;
    } catch (const SearchError& e) {
        err << "search failed: " << e.what() << '\n';
        return kDegenerate;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const ScaleGuardError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const Error& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }
}

}  // namespace mmo::cli
