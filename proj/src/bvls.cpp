#include "vws/bvls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vws::bvls {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd solve_free(const MatrixXd& A, const VectorXd& rhs, const std::vector<Index>& cols) {
    MatrixXd Af(A.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) Af.col(static_cast<Index>(k)) = A.col(cols[k]);
    return Af.completeOrthogonalDecomposition().solve(rhs);
}

} // namespace

Result solve(const MatrixXd& A, const VectorXd& b, const VectorXd& lo, const VectorXd& hi, const VectorXd& x0,
             const std::vector<bool>& free0, long max_iterations) {
    const Index n = A.cols();
    Result res;
    res.x = x0.cwiseMax(lo).cwiseMin(hi);
    std::vector<bool> is_free(free0);
    is_free.resize(static_cast<std::size_t>(n), false);
    for (Index j = 0; j < n; ++j) {
        if (is_free[static_cast<std::size_t>(j)]) continue;
        // Bound variables sit on the nearer bound.
        res.x(j) = (res.x(j) - lo(j) <= hi(j) - res.x(j)) ? lo(j) : hi(j);
    }

    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff() * std::max(1.0, b.cwiseAbs().maxCoeff()));
    const double grad_tol = 1e-13 * scale * static_cast<double>(std::max<Index>(1, A.rows()));
    Index entered = -1;  // variable released on the previous pass
    Index blocked = -1;  // released variable that bounced straight back
    VectorXd before = res.x;

    while (res.iterations < max_iterations) {
        // Drive the free set to its constrained optimum.
        for (;;) {
            ++res.iterations;
            std::vector<Index> cols;
            for (Index j = 0; j < n; ++j)
                if (is_free[static_cast<std::size_t>(j)]) cols.push_back(j);
            if (cols.empty()) break;
            VectorXd rhs = b;
            for (Index j = 0; j < n; ++j)
                if (!is_free[static_cast<std::size_t>(j)]) rhs -= A.col(j) * res.x(j);
            const VectorXd z = solve_free(A, rhs, cols);

            double alpha = 1.0;
            for (std::size_t k = 0; k < cols.size(); ++k) {
                const Index j = cols[k];
                const double target = z(static_cast<Index>(k));
                const double step = target - res.x(j);
                if (target > hi(j)) alpha = std::min(alpha, (hi(j) - res.x(j)) / step);
                else if (target < lo(j)) alpha = std::min(alpha, (lo(j) - res.x(j)) / step);
            }
            alpha = std::max(alpha, 0.0);
            for (std::size_t k = 0; k < cols.size(); ++k) {
                const Index j = cols[k];
                res.x(j) += alpha * (z(static_cast<Index>(k)) - res.x(j));
            }
            if (alpha >= 1.0) break;
            // Variables that reached a bound leave the free set.
            for (std::size_t k = 0; k < cols.size(); ++k) {
                const Index j = cols[k];
                const double target = z(static_cast<Index>(k));
                const double span = hi(j) - lo(j);
                if (target > hi(j) && res.x(j) >= hi(j) - 1e-12 * span) {
                    res.x(j) = hi(j);
                    is_free[static_cast<std::size_t>(j)] = false;
                } else if (target < lo(j) && res.x(j) <= lo(j) + 1e-12 * span) {
                    res.x(j) = lo(j);
                    is_free[static_cast<std::size_t>(j)] = false;
                }
            }
            if (res.iterations >= max_iterations) {
                res.free = is_free;
                return res;
            }
        }

        blocked = (entered >= 0 && !is_free[static_cast<std::size_t>(entered)] && res.x == before) ? entered : -1;

        // Release the bound variable whose gradient points inward the most.
        const VectorXd w = A.transpose() * (b - A * res.x);
        Index enter = -1;
        double best = grad_tol;
        for (Index j = 0; j < n; ++j) {
            if (is_free[static_cast<std::size_t>(j)] || j == blocked) continue;
            const double gain = res.x(j) <= lo(j) ? w(j) : -w(j);
            if (gain > best) {
                best = gain;
                enter = j;
            }
        }
        if (enter < 0) {
            res.converged = true;
            break;
        }
        is_free[static_cast<std::size_t>(enter)] = true;
        entered = enter;
        before = res.x;
    }

    res.free = is_free;
    return res;
}

} // namespace vws::bvls
