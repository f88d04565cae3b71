#pragma once

#include <Eigen/Dense>

namespace vws::lp {

enum class Status { optimal, infeasible, unbounded, iteration_limit };

struct Result {
    Status status = Status::iteration_limit;
    Eigen::VectorXd x;
    double objective = 0.0;
    long iterations = 0;
};

/// Dense two-phase simplex for
///   minimize cᵀx  subject to  A x ≤ b,  x ≥ 0.
/// Right-hand sides may be negative. Dantzig pricing with a switch to Bland's
/// rule after a run of degenerate pivots.
Result minimize(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                long max_iterations = 200000);

} // namespace vws::lp
