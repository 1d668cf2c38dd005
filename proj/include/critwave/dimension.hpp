#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "errors.hpp"

namespace critwave {

class Dimension {
public:
    explicit Dimension(int n) : n_(n) {
        if (n < 3 || n > 5)
            throw OutOfRange("dimension must be 3, 4 or 5, got " + std::to_string(n), 0);
    }

    int value() const { return n_; }
    double n() const { return n_; }

    // 2* = 2N/(N-2)
    double critical_exponent() const { return 2.0 * n_ / (n_ - 2); }
    // p = 4/(N-2), so the nonlinearity is |u|^p u
    double power() const { return 4.0 / (n_ - 2); }

    // |S^{N-1}|
    double sphere_area() const {
        constexpr double pi = std::numbers::pi;
        switch (n_) {
        case 3: return 4.0 * pi;
        case 4: return 2.0 * pi * pi;
        default: return 8.0 * pi * pi / 3.0;
        }
    }

    // |u|^p u without calling pow for the integer cases
    double nonlinearity(double u) const {
        switch (n_) {
        case 3: { double u2 = u * u; return u2 * u2 * u; }
        case 4: return u * u * u;
        default: { double c = std::cbrt(u); double c2 = c * c; return c2 * c2 * u; }
        }
    }
    // |u|^p
    double abs_power(double u) const {
        switch (n_) {
        case 3: { double u2 = u * u; return u2 * u2; }
        case 4: return u * u;
        default: { double c = std::cbrt(u); double c2 = c * c; return c2 * c2; }
        }
    }
    // |u|^{2*}
    double abs_critical(double u) const { return abs_power(u) * u * u; }

    friend bool operator==(const Dimension&, const Dimension&) = default;

private:
    int n_;
};

} // namespace critwave
