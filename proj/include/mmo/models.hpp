#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <iterator>
#include <span>
#include <vector>

#include "mmo/types.hpp"

namespace mmo {

/// Per-label linear scorer h(x, k) = w_k . x + b_k.
class LinearModel {
public:
    LinearModel() = default;
    /// All-zero weights and bias.
    LinearModel(std::size_t l, std::size_t d);

    std::size_t l() const noexcept { return l_; }
    std::size_t d() const noexcept { return d_; }

    double weight(std::size_t k, std::size_t j) const noexcept { return w_[k * d_ + j]; }
    double& weight(std::size_t k, std::size_t j) noexcept { return w_[k * d_ + j]; }
    double bias(std::size_t k) const noexcept { return b_[k]; }
    double& bias(std::size_t k) noexcept { return b_[k]; }

    /// Row-major l x d weights followed by l biases; the layout optimizers update.
    std::span<double> weights() noexcept { return w_; }
    std::span<const double> weights() const noexcept { return w_; }
    std::span<double> biases() noexcept { return b_; }
    std::span<const double> biases() const noexcept { return b_; }

    /// Throws ShapeError on a feature index >= d.
    std::vector<double> scores(const SparseVector& x) const;
    void scores_into(const SparseVector& x, std::span<double> out) const;

    /// Entrywise sign of the scores, sign(0) = +1.
    LabelVector predict(const SparseVector& x) const;

    bool finite() const noexcept;

    friend bool operator==(const LinearModel&, const LinearModel&) = default;

private:
    std::size_t l_ = 0;
    std::size_t d_ = 0;
    std::vector<double> w_;
    std::vector<double> b_;
};

// Model file:  "mmo-model v1 l=<l> d=<d>" then one line per label
// "b=<bias> <idx>:<w> ..." listing nonzero weights only. UTF-8, LF.
void write_model(std::ostream& out, const LinearModel& model);
void save_model(const std::filesystem::path& path, const LinearModel& model);
LinearModel parse_model(std::istream& in);
LinearModel load_model(const std::filesystem::path& path);

/// Assignment of a label vector to every support point, by position.
struct TabularClassifier {
    std::vector<LabelVector> assignment;

    friend bool operator==(const TabularClassifier&, const TabularClassifier&) = default;
};

inline constexpr std::size_t kMaxEnumerationBits = 20;

/// Every tabular classifier over `support_size` points with l labels, each
/// exactly once. Classifier i assigns to point p the configuration encoded by
/// the p-th l-bit digit of i (most significant first).
class TabularEnumeration {
public:
    /// Throws ScaleGuardError when support_size * l > 20.
    TabularEnumeration(std::size_t support_size, std::size_t l);

    std::uint64_t count() const noexcept { return count_; }
    TabularClassifier at(std::uint64_t index) const;

    class iterator {
    public:
        using iterator_category = std::input_iterator_tag;
        using value_type = TabularClassifier;
        using difference_type = std::ptrdiff_t;

        iterator() = default;
        iterator(const TabularEnumeration* owner, std::uint64_t index) : owner_(owner), index_(index) {}

        TabularClassifier operator*() const { return owner_->at(index_); }
        iterator& operator++() {
            ++index_;
            return *this;
        }
        iterator operator++(int) {
            auto tmp = *this;
            ++index_;
            return tmp;
        }
        friend bool operator==(const iterator& a, const iterator& b) { return a.index_ == b.index_; }

    private:
        const TabularEnumeration* owner_ = nullptr;
        std::uint64_t index_ = 0;
    };

    iterator begin() const { return {this, 0}; }
    iterator end() const { return {this, count_}; }

private:
    std::size_t support_;
    std::size_t l_;
    std::uint64_t count_;
};

inline TabularEnumeration enumerate_tabular(std::size_t support_size, std::size_t l) {
    return {support_size, l};
}

}  // namespace mmo
