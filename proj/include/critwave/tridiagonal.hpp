#pragma once

#include <lapacke.h>

#include <cmath>
#include <string>
#include <vector>

#include "errors.hpp"

namespace critwave {

// LU factorisation of a general tridiagonal matrix (LAPACK dgttrf/dgttrs).
// lower[i] couples row i+1 to column i, upper[i] couples row i to column i+1.
class TridiagonalLU {
public:
    TridiagonalLU(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper)
        : dl_(std::move(lower)), d_(std::move(diag)), du_(std::move(upper)), du2_(d_.size()), ipiv_(d_.size()) {
        const lapack_int n = static_cast<lapack_int>(d_.size());
        anorm_ = 0.0;
        for (lapack_int j = 0; j < n; ++j) {
            double col = std::abs(d_[j]);
            if (j > 0) col += std::abs(du_[j - 1]);
            if (j + 1 < n) col += std::abs(dl_[j]);
            anorm_ = std::max(anorm_, col);
        }
        const lapack_int info = LAPACKE_dgttrf(n, dl_.data(), d_.data(), du_.data(), du2_.data(), ipiv_.data());
        if (info != 0) throw NearSingular("tridiagonal factorisation failed, info=" + std::to_string(info));
    }

    std::size_t size() const { return d_.size(); }

    void solve_in_place(std::vector<double>& b) const {
        const lapack_int n = static_cast<lapack_int>(d_.size());
        const lapack_int info = LAPACKE_dgttrs(LAPACK_COL_MAJOR, 'N', n, 1, dl_.data(), d_.data(), du_.data(),
                                               du2_.data(), ipiv_.data(), b.data(), n);
        if (info != 0) throw ResolventFailure("tridiagonal solve failed, info=" + std::to_string(info));
    }

    // reciprocal condition number estimate in the 1-norm
    double rcond() const {
        double rc = 0.0;
        const lapack_int n = static_cast<lapack_int>(d_.size());
        LAPACKE_dgtcon('1', n, dl_.data(), d_.data(), du_.data(), du2_.data(), ipiv_.data(), anorm_, &rc);
        return rc;
    }

private:
    std::vector<double> dl_, d_, du_, du2_;
    std::vector<lapack_int> ipiv_;
    double anorm_ = 0.0;
};

} // namespace critwave
