#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "radial_grid.hpp"
#include "tridiagonal.hpp"

namespace critwave {

//============================================================================
// -Delta_h as a three-point operator acting on the nodal values u_i.
//
// Odd N: second differences of w = r^k u, k = (N-1)/2, plus the centrifugal
// term (N-1)(N-3)/(4r^2); node 0 is not an unknown and is recovered by even
// extrapolation.  N = 4: flux form over cells [r_{i-1/2}, r_{i+1/2}], with
// node 0 owning the ball of radius dr/2.
//
// Rows run over first()..M-1.  The value at r_M enters row M-1 and is
// supplied by the caller (Dirichlet zero for eigen and resolvent solves,
// the outgoing closure in the evolver).  The matrix is symmetric in the
// weighted inner product sum m_i f_i g_i.
//============================================================================
class RadialLaplacian {
public:
    explicit RadialLaplacian(GridPtr g) : grid_(std::move(g)) {
        const std::size_t M = grid_->last();
        const double dr = grid_->dr();
        const double n = grid_->dim().n();
        lower_.assign(M + 1, 0.0);
        diag_.assign(M + 1, 0.0);
        upper_.assign(M + 1, 0.0);
        mass_.assign(M + 1, 0.0);
        if (grid_->dim().value() % 2 == 1) {
            first_ = 1;
            const double k = (n - 1.0) / 2.0;
            const double cf = (n - 1.0) * (n - 3.0) / 4.0;
            for (std::size_t i = 1; i < M; ++i) {
                const double r = grid_->r(i);
                lower_[i] = -std::pow(grid_->r(i - 1) / r, k) / (dr * dr);
                upper_[i] = -std::pow(grid_->r(i + 1) / r, k) / (dr * dr);
                diag_[i] = 2.0 / (dr * dr) + cf / (r * r);
                mass_[i] = std::pow(r, n - 1.0) * dr;
            }
        } else {
            first_ = 0;
            auto vol = [](double a, double b) { return (std::pow(b, 4) - std::pow(a, 4)) / 4.0; };
            for (std::size_t i = 0; i < M; ++i) {
                const double r = grid_->r(i);
                const double rp = r + 0.5 * dr;
                const double rm = i == 0 ? 0.0 : r - 0.5 * dr;
                const double V = vol(rm, rp);
                mass_[i] = V;
                upper_[i] = -rp * rp * rp / (dr * V);
                lower_[i] = i == 0 ? 0.0 : -rm * rm * rm / (dr * V);
                diag_[i] = -(upper_[i] + lower_[i]);
            }
        }
        area_ = grid_->dim().sphere_area();
    }

    const GridPtr& grid() const { return grid_; }
    std::size_t first() const { return first_; }
    std::size_t end() const { return grid_->last(); }  // one past the last row
    double lower(std::size_t i) const { return lower_[i]; }
    double diag(std::size_t i) const { return diag_[i]; }
    double upper(std::size_t i) const { return upper_[i]; }
    double mass(std::size_t i) const { return mass_[i]; }

    double row(const std::vector<double>& f, std::size_t i) const {
        double s = diag_[i] * f[i] + upper_[i] * f[i + 1];
        if (i > 0) s += lower_[i] * f[i - 1];
        return s;
    }

    // (-Delta_h f) on the rows; node M set to zero, node 0 extrapolated for odd N
    std::vector<double> apply(const std::vector<double>& f) const {
        std::vector<double> out(f.size(), 0.0);
        for (std::size_t i = first_; i < end(); ++i) out[i] = row(f, i);
        fill_origin(out);
        return out;
    }

    // weighted inner product over the rows, carrying |S^{N-1}|
    double inner(const std::vector<double>& f, const std::vector<double>& g) const {
        double s = 0.0;
        for (std::size_t i = first_; i < end(); ++i) s += mass_[i] * f[i] * g[i];
        return area_ * s;
    }

    void fill_origin(std::vector<double>& f) const {
        if (first_ == 1) f[0] = 1.5 * f[1] - 0.6 * f[2] + 0.1 * f[3];
    }

    // LU of (-Delta_h + diag_shift) restricted to the rows, zero at r_M
    TridiagonalLU factor(const std::vector<double>& diag_shift) const {
        const std::size_t n = end() - first_;
        std::vector<double> lo(n - 1), d(n), up(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t i = first_ + j;
            d[j] = diag_[i] + diag_shift[i];
            if (j + 1 < n) {
                up[j] = upper_[i];
                lo[j] = lower_[i + 1];
            }
        }
        return TridiagonalLU(std::move(lo), std::move(d), std::move(up));
    }

    // solve with a factor from factor(); rhs and result are full nodal vectors
    std::vector<double> solve(const TridiagonalLU& lu, const std::vector<double>& rhs) const {
        std::vector<double> b(rhs.begin() + static_cast<long>(first_), rhs.begin() + static_cast<long>(end()));
        lu.solve_in_place(b);
        std::vector<double> out(rhs.size(), 0.0);
        for (std::size_t j = 0; j < b.size(); ++j) out[first_ + j] = b[j];
        fill_origin(out);
        return out;
    }

private:
    GridPtr grid_;
    std::size_t first_ = 1;
    double area_ = 1.0;
    std::vector<double> lower_, diag_, upper_, mass_;
};

} // namespace critwave
