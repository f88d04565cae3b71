#include "vws/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace vws::lp {

namespace {

constexpr double kEps = 1e-9;

// Tableau with the objective in the last row; column `cols` holds the rhs.
struct Tableau {
    Eigen::MatrixXd t;
    std::vector<int> basis;
    long iterations = 0;

    int rows() const { return static_cast<int>(t.rows()) - 1; }
    int cols() const { return static_cast<int>(t.cols()) - 1; }

    void pivot(int r, int c) {
        t.row(r) /= t(r, c);
        for (int i = 0; i <= rows(); ++i) {
            if (i == r) continue;
            const double f = t(i, c);
            if (f != 0.0) t.row(i) -= f * t.row(r);
        }
        basis[static_cast<std::size_t>(r)] = c;
        ++iterations;
    }

    // Runs the simplex on columns [0, usable). Returns false when unbounded.
    Status run(int usable, long max_iterations) {
        int degenerate = 0;
        while (iterations < max_iterations) {
            const bool bland = degenerate > 50;
            int enter = -1;
            double best = -kEps;
            for (int j = 0; j < usable; ++j) {
                const double rc = t(rows(), j);
                if (rc < -kEps && (bland ? enter < 0 : rc < best)) {
                    best = rc;
                    enter = j;
                }
            }
            if (enter < 0) return Status::optimal;
            int leave = -1;
            double ratio = std::numeric_limits<double>::infinity();
            for (int i = 0; i < rows(); ++i) {
                const double a = t(i, enter);
                if (a <= kEps) continue;
                const double q = std::max(0.0, t(i, cols())) / a;
                if (q < ratio - kEps ||
                    (q < ratio + kEps && leave >= 0 && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
                    ratio = q;
                    leave = i;
                }
            }
            if (leave < 0) return Status::unbounded;
            degenerate = ratio < kEps ? degenerate + 1 : 0;
            pivot(leave, enter);
        }
        return Status::iteration_limit;
    }
};

} // namespace

Result minimize(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b, long max_iterations) {
    const int m = static_cast<int>(A.rows());
    const int n = static_cast<int>(A.cols());
    // Columns: x (n), slack (m), artificial (m). Rows with b < 0 are negated so
    // their slack enters with -1 and an artificial variable starts basic.
    const int total = n + 2 * m;
    Tableau tab;
    tab.t = Eigen::MatrixXd::Zero(m + 1, total + 1);
    tab.basis.assign(static_cast<std::size_t>(m), 0);
    // Each row is equilibrated to unit max-norm so one tolerance fits all rows.
    for (int i = 0; i < m; ++i) {
        const double norm = A.row(i).cwiseAbs().maxCoeff();
        const double s = norm > 0.0 ? 1.0 / norm : 1.0;
        const double sign = b(i) < 0 ? -1.0 : 1.0;
        tab.t.row(i).head(n) = sign * s * A.row(i);
        tab.t(i, n + i) = sign;
        tab.t(i, total) = sign * s * b(i);
        if (sign > 0) {
            tab.basis[static_cast<std::size_t>(i)] = n + i;
        } else {
            tab.t(i, n + m + i) = 1.0;
            tab.basis[static_cast<std::size_t>(i)] = n + m + i;
        }
    }

    Result res;
    // Phase one: minimize the sum of artificials.
    bool need_phase_one = false;
    for (int i = 0; i < m; ++i) {
        if (tab.basis[static_cast<std::size_t>(i)] >= n + m) {
            need_phase_one = true;
            tab.t.row(m) -= tab.t.row(i);
            tab.t(m, n + m + i) = 0.0;
        }
    }
    if (need_phase_one) {
        const Status s = tab.run(n + 2 * m, max_iterations);
        res.iterations = tab.iterations;
        if (s == Status::iteration_limit) {
            res.status = s;
            return res;
        }
        if (-tab.t(m, total) > 1e-7 * std::max(1.0, tab.t.col(total).head(m).cwiseAbs().maxCoeff())) {
            res.status = Status::infeasible;
            return res;
        }
        // Drive remaining artificials out of the basis.
        for (int i = 0; i < m; ++i) {
            if (tab.basis[static_cast<std::size_t>(i)] < n + m) continue;
            for (int j = 0; j < n + m; ++j) {
                if (std::abs(tab.t(i, j)) > kEps) {
                    tab.pivot(i, j);
                    break;
                }
            }
        }
    }

    // Phase two objective over x and slacks; artificial columns are barred.
    tab.t.row(m).setZero();
    tab.t.row(m).head(n) = c.transpose();
    for (int i = 0; i < m; ++i) {
        const int bcol = tab.basis[static_cast<std::size_t>(i)];
        const double f = tab.t(m, bcol);
        if (f != 0.0) tab.t.row(m) -= f * tab.t.row(i);
    }
    res.status = tab.run(n + m, max_iterations);
    res.iterations = tab.iterations;
    res.x = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < m; ++i) {
        const int bcol = tab.basis[static_cast<std::size_t>(i)];
        if (bcol < n) res.x(bcol) = tab.t(i, total);
    }
    res.objective = c.dot(res.x);
    return res;
}

} // namespace vws::lp
