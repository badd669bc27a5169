#include "pqla/common.hpp"

#include <cstdio>

namespace pqla {

Box::Box(std::vector<Interval> bounds) : bounds_(std::move(bounds)) {
    for (const auto& b : bounds_) {
        if (!(b.hi > b.lo)) throw ConfigError("parameter box interval must have positive length");
    }
}

Box Box::uniform(int p, double lo, double hi) {
    return Box(std::vector<Interval>(static_cast<std::size_t>(p), Interval{lo, hi}));
}

bool Box::contains(const Vector& theta) const {
    if (theta.size() != dim()) return false;
    for (int j = 0; j < dim(); ++j) {
        if (!bounds_[static_cast<std::size_t>(j)].contains(theta[j])) return false;
    }
    return true;
}

Vector Box::project(const Vector& theta) const {
    Vector out = theta;
    for (int j = 0; j < dim(); ++j) out[j] = bounds_[static_cast<std::size_t>(j)].clamp(theta[j]);
    return out;
}

bool Box::at_bound(const Vector& theta, int j, double direction) const {
    const auto& b = bounds_[static_cast<std::size_t>(j)];
    return (theta[j] <= b.lo && direction < 0.0) || (theta[j] >= b.hi && direction > 0.0);
}

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t n, std::uint64_t index) noexcept {
    return mix64(mix64(mix64(master) ^ n) ^ index);
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace pqla
