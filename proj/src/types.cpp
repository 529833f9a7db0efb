#include "mmo/types.hpp"

#include <cmath>
#include <string>

#include "mmo/errors.hpp"

namespace mmo {

namespace {

std::int8_t checked_sign(int value) {
    if (value != 1 && value != -1) {
        throw DomainError("label entries must be +1 or -1, got " + std::to_string(value));
    }
    return static_cast<std::int8_t>(value);
}

}  // namespace

LabelVector::LabelVector(std::size_t l, int fill) : v_(l, checked_sign(fill)) {}

LabelVector::LabelVector(std::initializer_list<int> values) {
    v_.reserve(values.size());
    for (int v : values) v_.push_back(checked_sign(v));
}

LabelVector::LabelVector(std::span<const int> values) {
    v_.reserve(values.size());
    for (int v : values) v_.push_back(checked_sign(v));
}

LabelVector LabelVector::from_positive_set(std::size_t l, std::span<const std::size_t> positives) {
    LabelVector y(l, -1);
    for (std::size_t k : positives) {
        if (k >= l) throw ShapeError("positive label index " + std::to_string(k) + " >= l");
        y.v_[k] = 1;
    }
    return y;
}

void LabelVector::set(std::size_t k, int value) {
    if (k >= v_.size()) throw ShapeError("label index out of range");
    v_[k] = checked_sign(value);
}

std::size_t LabelVector::count_positive() const noexcept {
    std::size_t n = 0;
    for (auto v : v_) n += v > 0;
    return n;
}

LabelVector config_from_index(std::uint64_t index, std::size_t l) {
    if (l >= 64) throw ScaleGuardError("configuration index needs l < 64");
    LabelVector y(l, 1);
    for (std::size_t k = 0; k < l; ++k) {
        if ((index >> (l - 1 - k)) & 1U) y.set(k, -1);
    }
    return y;
}

std::uint64_t config_index(const LabelVector& y) {
    if (y.size() >= 64) throw ScaleGuardError("configuration index needs l < 64");
    std::uint64_t index = 0;
    for (int v : y) index = (index << 1) | (v < 0 ? 1U : 0U);
    return index;
}

bool FourTuple::finite() const noexcept {
    return std::isfinite(c_hy) && std::isfinite(c_y) && std::isfinite(c_h) && std::isfinite(c_1);
}

}  // namespace mmo
