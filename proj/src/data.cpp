#include "mmo/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "mmo/errors.hpp"
#include "mmo/models.hpp"
#include "mmo/random.hpp"
#include "text_util.hpp"

namespace mmo {

void Dataset::validate() const {
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& inst = instances[i];
        if (inst.y.size() != l) throw ShapeError("instance " + std::to_string(i) + " label vector length != l");
        for (std::size_t t = 0; t < inst.x.size(); ++t) {
            if (inst.x[t].index >= d) throw ShapeError("instance " + std::to_string(i) + " feature index >= d");
            if (t > 0 && inst.x[t].index <= inst.x[t - 1].index) {
                throw ShapeError("instance " + std::to_string(i) + " feature indices not strictly increasing");
            }
        }
    }
}

std::vector<LabelVector> Dataset::labels() const {
    std::vector<LabelVector> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) out.push_back(inst.y);
    return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& positions) const {
    Dataset out{l, d, {}};
    out.instances.reserve(positions.size());
    for (auto p : positions) out.instances.push_back(instances.at(p));
    return out;
}

// ---------------------------------------------------------------------------

namespace {

bool is_blank(std::string_view s) { return detail::split_ws(s).empty(); }

std::string_view trim_left(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

Instance parse_instance(std::string_view line, std::size_t l, std::size_t d, std::size_t line_no) {
    const auto tokens = detail::split_ws(line);
    Instance inst;

    const std::string_view label_field = tokens.at(0);
    if (label_field == "-") {
        inst.y = LabelVector(l, -1);
    } else {
        std::vector<std::size_t> positives;
        std::size_t start = 0;
        while (start <= label_field.size()) {
            const auto comma = label_field.find(',', start);
            const auto piece = label_field.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                          : comma - start);
            const auto k = detail::parse_int<std::size_t>(piece);
            if (!k) throw FormatError("bad label index '" + std::string(piece) + "'", line_no);
            if (*k >= l) throw FormatError("label index " + std::to_string(*k) + " >= l", line_no);
            if (std::find(positives.begin(), positives.end(), *k) != positives.end()) {
                throw FormatError("duplicate label index " + std::to_string(*k), line_no);
            }
            positives.push_back(*k);
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        inst.y = LabelVector::from_positive_set(l, positives);
    }

    inst.x.reserve(tokens.size() - 1);
    for (std::size_t t = 1; t < tokens.size(); ++t) {
        const auto colon = tokens[t].find(':');
        if (colon == std::string_view::npos) throw FormatError("expected <idx>:<val>", line_no);
        const auto idx = detail::parse_int<std::uint32_t>(tokens[t].substr(0, colon));
        const auto val = detail::parse_double(tokens[t].substr(colon + 1));
        if (!idx) throw FormatError("bad feature index", line_no);
        if (!val || !std::isfinite(*val)) throw FormatError("bad feature value", line_no);
        if (*idx >= d) throw FormatError("feature index " + std::to_string(*idx) + " >= d", line_no);
        if (!inst.x.empty()) {
            if (inst.x.back().index == *idx) {
                throw FormatError("duplicate feature index " + std::to_string(*idx), line_no);
            }
            if (inst.x.back().index > *idx) throw FormatError("feature indices must be increasing", line_no);
        }
        inst.x.push_back({*idx, *val});
    }
    return inst;
}

}  // namespace

Dataset parse_mlsvm(std::istream& in) {
    Dataset data;
    bool have_header = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view view = trim_left(line);
        if (is_blank(view)) continue;
        if (!have_header) {
            if (view.starts_with("#ml")) {
                const auto tokens = detail::split_ws(view);
                std::optional<std::size_t> l, d;
                for (std::size_t t = 1; t < tokens.size(); ++t) {
                    if (tokens[t].starts_with("l=")) l = detail::parse_int<std::size_t>(tokens[t].substr(2));
                    else if (tokens[t].starts_with("d=")) d = detail::parse_int<std::size_t>(tokens[t].substr(2));
                    else throw FormatError("unexpected header field '" + std::string(tokens[t]) + "'", line_no);
                }
                if (tokens[0] != "#ml" || !l || !d || *l == 0) {
                    throw FormatError("header must be '#ml l=<int> d=<int>' with l >= 1", line_no);
                }
                data.l = *l;
                data.d = *d;
                have_header = true;
                continue;
            }
            if (view.front() == '#') continue;
            throw FormatError("missing '#ml l=<int> d=<int>' header", line_no);
        }
        if (view.front() == '#') continue;
        data.instances.push_back(parse_instance(view, data.l, data.d, line_no));
    }
    if (!have_header) throw FormatError("missing '#ml l=<int> d=<int>' header", line_no + 1);
    return data;
}

Dataset load_mlsvm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open data file: " + path.string(), 0);
    return parse_mlsvm(in);
}

void write_mlsvm(std::ostream& out, const Dataset& data) {
    data.validate();
    out << "#ml l=" << data.l << " d=" << data.d << '\n';
    for (const auto& inst : data.instances) {
        bool any = false;
        for (std::size_t k = 0; k < data.l; ++k) {
            if (inst.y[k] > 0) {
                out << (any ? "," : "") << k;
                any = true;
            }
        }
        if (!any) out << '-';
        for (const auto& f : inst.x) out << ' ' << f.index << ':' << detail::format_double(f.value);
        out << '\n';
    }
}

void save_mlsvm(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open data file for writing: " + path.string());
    write_mlsvm(out, data);
    if (!out) throw Error("failed writing data file: " + path.string());
}

// ---------------------------------------------------------------------------

namespace {

double logistic(double t) { return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

/// P(y = +1) under a planted score s*z + bias with z ~ N(0, 1).
double positive_rate_for_bias(double bias, double scale, double noise) {
    if (noise == 0.0) return 0.5 * std::erfc(-bias / (scale * std::sqrt(2.0)));
    constexpr int kNodes = 4001;
    constexpr double kLo = -10.0, kHi = 10.0;
    const double h = (kHi - kLo) / (kNodes - 1);
    double acc = 0.0;
    for (int i = 0; i < kNodes; ++i) {
        const double z = kLo + i * h;
        const double w = (i == 0 || i == kNodes - 1) ? 0.5 : 1.0;
        acc += w * std::exp(-0.5 * z * z) * logistic((scale * z + bias) / noise);
    }
    return acc * h / std::sqrt(2.0 * std::acos(-1.0));
}

double calibrate_bias(double rate, double scale, double noise) {
    double lo = -50.0 * (scale + noise + 1.0), hi = -lo;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (positive_rate_for_bias(mid, scale, noise) < rate) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

std::pair<Dataset, LinearModel> synth_linear(const SynthLinearOptions& o) {
    if (o.l == 0 || o.d == 0) throw ConfigError("synth_linear needs l >= 1 and d >= 1");
    if (!(o.positive_rate > 0.0 && o.positive_rate < 1.0)) throw ConfigError("positive_rate must lie in (0, 1)");
    if (!(o.noise >= 0.0)) throw ConfigError("noise must be >= 0");
    if (!(o.planted_scale > 0.0)) throw ConfigError("planted_scale must be > 0");

    auto rng = stream_rng(o.seed, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    LinearModel planted(o.l, o.d);
    const double bias = calibrate_bias(o.positive_rate, o.planted_scale, o.noise);
    for (std::size_t k = 0; k < o.l; ++k) {
        double norm2 = 0.0;
        for (std::size_t j = 0; j < o.d; ++j) {
            planted.weight(k, j) = normal(rng);
            norm2 += planted.weight(k, j) * planted.weight(k, j);
        }
        const double scale = o.planted_scale / std::sqrt(norm2);
        for (std::size_t j = 0; j < o.d; ++j) planted.weight(k, j) *= scale;
        planted.bias(k) = bias;
    }

    Dataset data{o.l, o.d, {}};
    data.instances.reserve(o.m);
    std::vector<double> s(o.l);
    for (std::size_t i = 0; i < o.m; ++i) {
        Instance inst;
        inst.x.reserve(o.d);
        for (std::size_t j = 0; j < o.d; ++j) inst.x.push_back({static_cast<std::uint32_t>(j), normal(rng)});
        planted.scores_into(inst.x, s);
        inst.y = LabelVector(o.l, -1);
        for (std::size_t k = 0; k < o.l; ++k) {
            const int label = o.noise == 0.0 ? sign_of(s[k]) : (unit(rng) < logistic(s[k] / o.noise) ? 1 : -1);
            inst.y.set(k, label);
        }
        data.instances.push_back(std::move(inst));
    }
    return {std::move(data), std::move(planted)};
}

// ---------------------------------------------------------------------------

DiscreteDistribution::DiscreteDistribution(std::size_t l, std::vector<SupportPoint> points)
    : l_(l), points_(std::move(points)) {
    if (l_ == 0) throw DomainError("distribution needs l >= 1");
    if (l_ >= 32) throw ScaleGuardError("distribution label count too large");
    if (points_.empty()) throw DomainError("distribution needs at least one support point");
    double total = 0.0;
    for (const auto& pt : points_) {
        if (!(pt.weight > 0.0) || !std::isfinite(pt.weight)) {
            throw DomainError("point '" + pt.id + "' weight must be positive");
        }
        total += pt.weight;
        if (const auto* m = std::get_if<Marginals>(&pt.conditional)) {
            if (m->p.size() != l_) throw DomainError("point '" + pt.id + "' needs " + std::to_string(l_) + " marginals");
            for (double p : m->p) {
                if (!(p >= 0.0 && p <= 1.0)) throw DomainError("point '" + pt.id + "' marginal outside [0, 1]");
            }
        } else {
            const auto& t = std::get<ConditionalTable>(pt.conditional);
            if (t.p.size() != (std::size_t{1} << l_)) {
                throw DomainError("point '" + pt.id + "' table needs 2^l entries");
            }
            double sum = 0.0;
            for (double p : t.p) {
                if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("point '" + pt.id + "' table entry negative");
                sum += p;
            }
            if (std::abs(sum - 1.0) > kNormalizationTolerance) {
                throw DomainError("point '" + pt.id + "' table does not sum to 1");
            }
        }
    }
    if (std::abs(total - 1.0) > kNormalizationTolerance) throw DomainError("point weights do not sum to 1");
}

double DiscreteDistribution::label_mean(std::size_t i, std::size_t k) const {
    const auto& pt = points_.at(i);
    if (k >= l_) throw ShapeError("label index out of range");
    if (const auto* m = std::get_if<Marginals>(&pt.conditional)) return 2.0 * m->p[k] - 1.0;
    const auto& t = std::get<ConditionalTable>(pt.conditional).p;
    double mean = 0.0;
    for (std::size_t c = 0; c < t.size(); ++c) {
        const bool negative = (c >> (l_ - 1 - k)) & 1U;
        mean += negative ? -t[c] : t[c];
    }
    return mean;
}

std::vector<double> DiscreteDistribution::table(std::size_t i) const {
    const auto& pt = points_.at(i);
    if (const auto* t = std::get_if<ConditionalTable>(&pt.conditional)) return t->p;
    const auto& p = std::get<Marginals>(pt.conditional).p;
    std::vector<double> out(std::size_t{1} << l_, 1.0);
    for (std::size_t c = 0; c < out.size(); ++c) {
        for (std::size_t k = 0; k < l_; ++k) {
            const bool negative = (c >> (l_ - 1 - k)) & 1U;
            out[c] *= negative ? 1.0 - p[k] : p[k];
        }
    }
    return out;
}

DiscreteDistribution parse_distribution(std::string_view text) {
    struct Token {
        std::string_view text;
        std::size_t line;
    };
    std::vector<Token> tokens;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        ++line_no;
        const auto nl = text.find('\n', start);
        auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        for (auto tok : detail::split_ws(line)) tokens.push_back({tok, line_no});
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }

    std::vector<SupportPoint> points;
    std::optional<std::size_t> l;
    std::size_t t = 0;
    auto numbers_until_keyword = [&](std::vector<double>& out) {
        while (t < tokens.size() && tokens[t].text != "point") {
            const auto v = detail::parse_double(tokens[t].text);
            if (!v) throw FormatError("expected a probability, got '" + std::string(tokens[t].text) + "'", tokens[t].line);
            out.push_back(*v);
            ++t;
        }
    };

    while (t < tokens.size()) {
        if (tokens[t].text != "point") {
            throw FormatError("expected 'point', got '" + std::string(tokens[t].text) + "'", tokens[t].line);
        }
        const std::size_t here = tokens[t].line;
        if (t + 2 >= tokens.size()) throw FormatError("truncated point entry", here);
        SupportPoint pt;
        pt.id = std::string(tokens[t + 1].text);
        const auto wtok = tokens[t + 2].text;
        if (!wtok.starts_with("w=")) throw FormatError("expected 'w=<weight>'", tokens[t + 2].line);
        const auto w = detail::parse_double(wtok.substr(2));
        if (!w) throw FormatError("bad weight", tokens[t + 2].line);
        pt.weight = *w;
        t += 3;
        if (t >= tokens.size()) throw FormatError("point '" + pt.id + "' lacks marginals/table", here);
        const auto kind = tokens[t].text;
        ++t;
        std::vector<double> values;
        numbers_until_keyword(values);
        std::size_t point_l = 0;
        if (kind == "marginals") {
            point_l = values.size();
            pt.conditional = Marginals{std::move(values)};
        } else if (kind == "table") {
            const std::size_t n = values.size();
            if (n < 2 || (n & (n - 1)) != 0) throw FormatError("table length must be a power of two >= 2", here);
            while ((std::size_t{1} << point_l) < n) ++point_l;
            pt.conditional = ConditionalTable{std::move(values)};
        } else {
            throw FormatError("expected 'marginals' or 'table'", here);
        }
        if (point_l == 0) throw FormatError("point '" + pt.id + "' has no probabilities", here);
        if (l && *l != point_l) throw FormatError("inconsistent label count across points", here);
        l = point_l;
        points.push_back(std::move(pt));
    }
    if (!l) throw FormatError("distribution has no points", 0);
    return DiscreteDistribution(*l, std::move(points));
}

DiscreteDistribution load_distribution(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open distribution file: " + path.string(), 0);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_distribution(buf.str());
}

}  // namespace mmo
