#pragma once

#include <cstddef>
#include <vector>

#include "fvdecay/errors.hpp"

namespace fvdecay {

/// Uniform grid [lo, hi] with n nodes.
struct GridSpec {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t n = 0;

    double spacing() const {
        return n > 1 ? (hi - lo) / static_cast<double>(n - 1) : 0.0;
    }
    // Endpoints are met exactly and a grid with hi == -lo hits 0 exactly
    // at its middle node.
    double at(std::size_t i) const {
        if (i == 0)
            return lo;
        if (i + 1 == n)
            return hi;
        return lo + (hi - lo) * (static_cast<double>(i) /
                                 static_cast<double>(n - 1));
    }
    bool operator==(const GridSpec &) const = default;
};

/// Cubic Hermite interpolant on a uniform grid with finite-difference
/// node slopes. C1, locally third-order; evaluation outside the grid
/// extrapolates linearly with the edge slope.
class CubicTable {
  public:
    CubicTable() = default;
    CubicTable(GridSpec grid, std::vector<double> y)
        : grid_(grid), y_(std::move(y)) {
        if (y_.size() != grid_.n || grid_.n < 3)
            throw ValidationError("CubicTable: bad table size");
        const double h = grid_.spacing();
        slopes_.resize(grid_.n);
        slopes_.front() = (-1.5 * y_[0] + 2.0 * y_[1] - 0.5 * y_[2]) / h;
        for (std::size_t i = 1; i + 1 < grid_.n; ++i)
            slopes_[i] = (y_[i + 1] - y_[i - 1]) / (2.0 * h);
        const std::size_t m = grid_.n - 1;
        slopes_.back() = (1.5 * y_[m] - 2.0 * y_[m - 1] + 0.5 * y_[m - 2]) / h;
    }

    const GridSpec &grid() const { return grid_; }
    const std::vector<double> &values() const { return y_; }

    double value(double x) const {
        const auto [i, t] = locate(x);
        const double h = grid_.spacing();
        const double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
        const double h10 = t * (1 - t) * (1 - t);
        const double h01 = t * t * (3 - 2 * t);
        const double h11 = t * t * (t - 1);
        return h00 * y_[i] + h10 * h * slopes_[i] + h01 * y_[i + 1] +
               h11 * h * slopes_[i + 1];
    }

    double deriv(double x) const {
        const auto [i, t] = locate(x);
        const double h = grid_.spacing();
        const double d00 = 6 * t * (t - 1);
        const double d10 = (1 - t) * (1 - 3 * t);
        const double d01 = -d00;
        const double d11 = t * (3 * t - 2);
        return (d00 * y_[i] + d01 * y_[i + 1]) / h + d10 * slopes_[i] +
               d11 * slopes_[i + 1];
    }

  private:
    std::pair<std::size_t, double> locate(double x) const {
        const double h = grid_.spacing();
        double u = (x - grid_.lo) / h;
        std::size_t i;
        if (u <= 0.0) {
            i = 0;
            u = 0.0 + u; // clamp cell, keep linear extrapolation via t
        } else if (u >= static_cast<double>(grid_.n - 1)) {
            i = grid_.n - 2;
        } else {
            i = static_cast<std::size_t>(u);
        }
        if (i > grid_.n - 2)
            i = grid_.n - 2;
        return {i, u - static_cast<double>(i)};
    }

    GridSpec grid_;
    std::vector<double> y_;
    std::vector<double> slopes_;
};

} // namespace fvdecay
