#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace mmo {

/// A vector of l sign values, each exactly +1 or -1.
class LabelVector {
public:
    LabelVector() = default;
    /// All entries set to `fill` (must be +1 or -1).
    explicit LabelVector(std::size_t l, int fill = -1);
    LabelVector(std::initializer_list<int> values);
    explicit LabelVector(std::span<const int> values);

    /// Labels listed in `positives` are +1, all others -1.
    static LabelVector from_positive_set(std::size_t l, std::span<const std::size_t> positives);

    std::size_t size() const noexcept { return v_.size(); }
    int operator[](std::size_t k) const noexcept { return v_[k]; }
    void set(std::size_t k, int value);

    auto begin() const noexcept { return v_.begin(); }
    auto end() const noexcept { return v_.end(); }

    std::size_t count_positive() const noexcept;

    friend bool operator==(const LabelVector&, const LabelVector&) = default;

private:
    std::vector<std::int8_t> v_;
};

/// Configuration index in lexicographic order with +1 ranked before -1:
/// index 0 is all +1, index 2^l - 1 is all -1, the first label is the most
/// significant digit.
LabelVector config_from_index(std::uint64_t index, std::size_t l);
std::uint64_t config_index(const LabelVector& y);

/// Coefficients of the per-label affine form  c_hy*h*y + c_y*y + c_h*h + c_1.
struct FourTuple {
    double c_hy = 0.0;
    double c_y = 0.0;
    double c_h = 0.0;
    double c_1 = 0.0;

    constexpr double eval(int h, int y) const noexcept {
        return c_hy * h * y + c_y * y + c_h * h + c_1;
    }

    constexpr FourTuple operator+(const FourTuple& o) const noexcept {
        return {c_hy + o.c_hy, c_y + o.c_y, c_h + o.c_h, c_1 + o.c_1};
    }
    constexpr FourTuple operator*(double s) const noexcept {
        return {c_hy * s, c_y * s, c_h * s, c_1 * s};
    }
    constexpr FourTuple operator-(const FourTuple& o) const noexcept { return *this + o * -1.0; }

    bool finite() const noexcept;

    friend bool operator==(const FourTuple&, const FourTuple&) = default;
};

struct Feature {
    std::uint32_t index = 0;
    double value = 0.0;

    friend bool operator==(const Feature&, const Feature&) = default;
};

/// Sparse feature vector, indices strictly increasing.
using SparseVector = std::vector<Feature>;

/// sign(t) = +1 for t >= 0, -1 otherwise.
constexpr int sign_of(double t) noexcept { return t >= 0.0 ? 1 : -1; }

}  // namespace mmo
