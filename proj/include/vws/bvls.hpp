#pragma once

#include <Eigen/Dense>

#include <vector>

namespace vws::bvls {

struct Result {
    Eigen::VectorXd x;
    std::vector<bool> free; // strictly inside its bounds at the solution
    long iterations = 0;
    bool converged = false;
};

/// Bounded-variable least squares: minimize ‖A x − b‖² subject to lo ≤ x ≤ hi.
/// Active-set method that tolerates rank-deficient A (minimum-norm solves on
/// the free set). `x0` must be feasible; `free0` marks variables that start
/// off their bounds.
Result solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
             const Eigen::VectorXd& x0, const std::vector<bool>& free0, long max_iterations = 5000);

} // namespace vws::bvls
