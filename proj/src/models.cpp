#include "mmo/models.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "mmo/errors.hpp"
#include "text_util.hpp"

namespace mmo {

LinearModel::LinearModel(std::size_t l, std::size_t d) : l_(l), d_(d), w_(l * d, 0.0), b_(l, 0.0) {}

void LinearModel::scores_into(const SparseVector& x, std::span<double> out) const {
    if (out.size() != l_) throw ShapeError("score buffer length differs from l");
    for (const auto& f : x) {
        if (f.index >= d_) {
            throw ShapeError("feature index " + std::to_string(f.index) + " >= d=" + std::to_string(d_));
        }
    }
    for (std::size_t k = 0; k < l_; ++k) {
        const double* row = w_.data() + k * d_;
        double s = b_[k];
        for (const auto& f : x) s += row[f.index] * f.value;
        out[k] = s;
    }
}

std::vector<double> LinearModel::scores(const SparseVector& x) const {
    std::vector<double> out(l_);
    scores_into(x, out);
    return out;
}

LabelVector LinearModel::predict(const SparseVector& x) const {
    const auto s = scores(x);
    LabelVector y(l_, 1);
    for (std::size_t k = 0; k < l_; ++k) y.set(k, sign_of(s[k]));
    return y;
}

bool LinearModel::finite() const noexcept {
    for (double v : w_)
        if (!std::isfinite(v)) return false;
    for (double v : b_)
        if (!std::isfinite(v)) return false;
    return true;
}

void write_model(std::ostream& out, const LinearModel& model) {
    out << "mmo-model v1 l=" << model.l() << " d=" << model.d() << '\n';
    for (std::size_t k = 0; k < model.l(); ++k) {
        out << "b=" << detail::format_double(model.bias(k));
        for (std::size_t j = 0; j < model.d(); ++j) {
            const double w = model.weight(k, j);
            if (w != 0.0) out << ' ' << j << ':' << detail::format_double(w);
        }
        out << '\n';
    }
}

void save_model(const std::filesystem::path& path, const LinearModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open model file for writing: " + path.string());
    write_model(out, model);
    if (!out) throw Error("failed writing model file: " + path.string());
}

LinearModel parse_model(std::istream& in) {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw FormatError("empty model file", 1);

    const auto head = detail::split_ws(line);
    if (head.size() != 4 || head[0] != "mmo-model" || head[1] != "v1" || !head[2].starts_with("l=") ||
        !head[3].starts_with("d=")) {
        throw FormatError("expected header 'mmo-model v1 l=<l> d=<d>'", line_no);
    }
    const auto l = detail::parse_int<std::size_t>(head[2].substr(2));
    const auto d = detail::parse_int<std::size_t>(head[3].substr(2));
    if (!l || !d || *l == 0) throw FormatError("bad model dimensions", line_no);

    LinearModel model(*l, *d);
    for (std::size_t k = 0; k < *l; ++k) {
        ++line_no;
        if (!std::getline(in, line)) throw FormatError("missing row for label " + std::to_string(k), line_no);
        const auto tokens = detail::split_ws(line);
        if (tokens.empty() || !tokens[0].starts_with("b=")) throw FormatError("expected 'b=<bias>'", line_no);
        const auto b = detail::parse_double(tokens[0].substr(2));
        if (!b || !std::isfinite(*b)) throw FormatError("bad bias value", line_no);
        model.bias(k) = *b;
        for (std::size_t t = 1; t < tokens.size(); ++t) {
            const auto colon = tokens[t].find(':');
            if (colon == std::string_view::npos) throw FormatError("expected <idx>:<w>", line_no);
            const auto j = detail::parse_int<std::size_t>(tokens[t].substr(0, colon));
            const auto w = detail::parse_double(tokens[t].substr(colon + 1));
            if (!j || *j >= *d) throw FormatError("weight index out of range", line_no);
            if (!w || !std::isfinite(*w)) throw FormatError("bad weight value", line_no);
            model.weight(k, *j) = *w;
        }
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (!detail::split_ws(line).empty()) throw FormatError("trailing content after label rows", line_no);
    }
    return model;
}

LinearModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open model file: " + path.string(), 0);
    return parse_model(in);
}

TabularEnumeration::TabularEnumeration(std::size_t support_size, std::size_t l)
    : support_(support_size), l_(l), count_(0) {
    if (support_size * l > kMaxEnumerationBits) {
        throw ScaleGuardError("tabular enumeration of 2^" + std::to_string(support_size * l) +
                              " classifiers exceeds the 2^20 guard");
    }
    count_ = std::uint64_t{1} << (support_size * l);
}

TabularClassifier TabularEnumeration::at(std::uint64_t index) const {
    TabularClassifier c;
    c.assignment.reserve(support_);
    const std::uint64_t mask = (std::uint64_t{1} << l_) - 1;
    for (std::size_t p = 0; p < support_; ++p) {
        const std::size_t shift = (support_ - 1 - p) * l_;
        c.assignment.push_back(config_from_index((index >> shift) & mask, l_));
    }
    return c;
}

}  // namespace mmo
