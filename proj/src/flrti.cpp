#include "vws/flrti.hpp"

#include "vws/csv.hpp"
#include "vws/error.hpp"
#include "vws/bvls.hpp"
#include "vws/lp.hpp"
#include "vws/rng.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

namespace vws::flrti {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<double> make_grid(double start, double end, std::size_t p) {
    if (p < 4) throw ValidationError("flrti grid needs at least 4 points");
    if (!(end > start)) throw ValidationError("flrti grid end must exceed its start");
    std::vector<double> g(p);
    for (std::size_t j = 0; j < p; ++j)
        g[j] = j + 1 == p ? end : start + (end - start) * static_cast<double>(j) / static_cast<double>(p - 1);
    return g;
}

std::vector<double> resample(std::span<const double> t, std::span<const double> v, std::span<const double> grid) {
    if (t.size() != v.size() || t.size() < 2) throw ValidationError("resample needs at least two (t, v) pairs");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1])) throw ValidationError("resample abscissae must increase strictly");
    std::vector<double> out;
    out.reserve(grid.size());
    const double slack = 1e-9 * std::max(1.0, std::abs(t.back() - t.front()));
    for (double g : grid) {
        if (g < t.front() - slack || g > t.back() + slack)
            throw ValidationError("grid point " + std::to_string(g) + " lies outside the curve's range");
        const double q = std::clamp(g, t.front(), t.back());
        auto it = std::upper_bound(t.begin(), t.end(), q);
        std::size_t i = it == t.end() ? t.size() - 1 : static_cast<std::size_t>(it - t.begin());
        if (i == 0) i = 1;
        const double a = (q - t[i - 1]) / (t[i] - t[i - 1]);
        out.push_back(v[i - 1] + a * (v[i] - v[i - 1]));
    }
    return out;
}

std::vector<double> trapezoid_weights(std::span<const double> grid) {
    std::vector<double> w(grid.size(), 0.0);
    for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
        const double h = grid[j + 1] - grid[j];
        w[j] += 0.5 * h;
        w[j + 1] += 0.5 * h;
    }
    return w;
}

namespace {

void check_grid(std::span<const double> grid) {
    if (grid.size() < 4) throw ValidationError("flrti grid needs at least 4 points");
    for (std::size_t j = 1; j < grid.size(); ++j)
        if (!(grid[j] > grid[j - 1])) throw ValidationError("flrti grid must increase strictly");
}

// Penalty rows on the unit axis: zero-order rows integrate |beta|, curvature
// rows measure slope changes, so both are insensitive to the grid density.
MatrixXd penalty_matrix(std::span<const double> u, std::span<const double> wu, double omega, double scale) {
    const std::size_t p = u.size();
    const std::size_t zero_rows = omega > 0.0 ? p : 0;
    const std::size_t curve_rows = omega < 1.0 ? p - 2 : 0;
    MatrixXd W = MatrixXd::Zero(static_cast<Eigen::Index>(zero_rows + curve_rows), static_cast<Eigen::Index>(p));
    Eigen::Index r = 0;
    for (std::size_t j = 0; j < zero_rows; ++j, ++r) W(r, static_cast<Eigen::Index>(j)) = omega * wu[j];
    for (std::size_t j = 1; j + 1 < p && curve_rows; ++j, ++r) {
        const double hl = u[j] - u[j - 1];
        const double hr = u[j + 1] - u[j];
        const double f = (1.0 - omega) * scale;
        W(r, static_cast<Eigen::Index>(j - 1)) = f / hl;
        W(r, static_cast<Eigen::Index>(j)) = -f / hl - f / hr;
        W(r, static_cast<Eigen::Index>(j + 1)) = f / hr;
    }
    return W;
}

struct Warm {
    VectorXd dual;
    std::vector<bool> free;
    double sigma = 0.0;
    bool valid = false;
};

struct Solution {
    VectorXd beta;
    long iterations = 0;
    bool certified = false;
    std::vector<bool> zero; // penalty rows that vanish at the solution
};

// Keeps the smooth part strictly convex when curves span fewer dimensions
// than the grid (n < p, or low-rank curve families).
constexpr double kRidge = 1e-6;

double primal_objective(const MatrixXd& G, const VectorXd& c, const MatrixXd& W, double sigma, const VectorXd& beta) {
    return 0.5 * beta.dot(G * beta) - c.dot(beta) + sigma * (W * beta).lpNorm<1>();
}

// Exact solution on a known support: rows in `zero` vanish, the others keep
// the sign of their dual value.
VectorXd solve_on_support(const MatrixXd& G, const VectorXd& c, const MatrixXd& W, Eigen::Index zero_rows,
                          double sigma, const VectorXd& dual, const std::vector<bool>& zero) {
    // sigma = 0 gives the unpenalized refit on the same structure.
    const Eigen::Index p = G.rows();
    std::vector<Eigen::Index> zr;
    VectorXd penalty_grad = VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
        if (zero[static_cast<std::size_t>(i)]) zr.push_back(i);
        else if (sigma > 0.0) penalty_grad += sigma * (dual(i) > 0 ? 1.0 : -1.0) * W.row(i).transpose();
    }
    MatrixXd N;
    if (zr.empty()) {
        N = MatrixXd::Identity(p, p);
    } else {
        MatrixXd Wzt(p, static_cast<Eigen::Index>(zr.size()));
        for (std::size_t k = 0; k < zr.size(); ++k) Wzt.col(static_cast<Eigen::Index>(k)) = W.row(zr[k]).transpose();
        Eigen::ColPivHouseholderQR<MatrixXd> qr(Wzt);
        qr.setThreshold(1e-10);
        const Eigen::Index rank = qr.rank();
        const MatrixXd Q = qr.householderQ();
        N = Q.rightCols(p - rank);
    }
    VectorXd beta = VectorXd::Zero(p);
    if (N.cols() > 0) {
        const MatrixXd H = N.transpose() * G * N;
        beta = N * H.llt().solve(N.transpose() * (c - penalty_grad));
    }
    // The first rows of W are the zero-order rows (one per grid point).
    for (auto i : zr)
        if (i < zero_rows) beta(i) = 0.0;
    // Zeros implied by collinearity with zero neighbours come out at rounding level.
    const double big = beta.cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < p; ++j)
        if (std::abs(beta(j)) < 1e-10 * big) beta(j) = 0.0;
    return beta;
}

// Lasso through its dual: minimize ½‖L⁻¹(c − Wᵀv)‖² over |v| ≤ sigma with
// G = LLᵀ, then recover beta on the support the dual identifies. The primal-
// dual gap certifies the result.
Solution solve_lasso(const MatrixXd& G, const VectorXd& c, const MatrixXd& W, Eigen::Index zero_rows, double sigma,
                     const FitOptions& opt, Warm& warm) {
    const Eigen::Index m = W.rows();
    Eigen::LLT<MatrixXd> llt(G);
    if (llt.info() != Eigen::Success) throw SolverError("flrti: normal matrix is not positive definite");
    const MatrixXd M = llt.matrixL().solve(W.transpose());
    const VectorXd d = llt.matrixL().solve(c);

    VectorXd v0 = VectorXd::Zero(m);
    std::vector<bool> free0(static_cast<std::size_t>(m), true);
    if (warm.valid && warm.dual.size() == m) {
        v0 = warm.dual * (sigma / warm.sigma);
        free0 = warm.free;
    }
    const VectorXd lo = VectorXd::Constant(m, -sigma);
    const VectorXd hi = VectorXd::Constant(m, sigma);
    const bvls::Result r = bvls::solve(M, d, lo, hi, v0, free0, opt.max_iterations);
    if (!r.converged) {
        std::ostringstream os;
        os << "flrti solver did not converge: sigma=" << sigma << " iterations=" << r.iterations;
        throw SolverError(os.str());
    }
    const VectorXd& v = r.x;
    const double dual_value = -0.5 * (d - M * v).squaredNorm();
    // Objective offset of the standardized response, so the gap is relative to O(1).
    const double offset = 0.5;
    auto gap_of = [&](const VectorXd& b) { return primal_objective(G, c, W, sigma, b) - dual_value; };

    std::vector<bool> zero(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) zero[static_cast<std::size_t>(i)] = r.free[static_cast<std::size_t>(i)];
    const VectorXd polished = solve_on_support(G, c, W, zero_rows, sigma, v, zero);
    const double scale = offset + std::abs(dual_value);
    double gap = gap_of(polished);
    if (gap > opt.gap_tolerance * scale) {
        // Re-derive the free duals from stationarity at the polished point;
        // any box-feasible v gives a valid lower bound.
        std::vector<Eigen::Index> fr;
        VectorXd refined = v;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (zero[static_cast<std::size_t>(i)]) fr.push_back(i);
            else refined(i) = v(i) > 0 ? sigma : -sigma;
        }
        if (!fr.empty()) {
            VectorXd g = G * polished - c;
            for (Eigen::Index i = 0; i < m; ++i)
                if (!zero[static_cast<std::size_t>(i)]) g += refined(i) * W.row(i).transpose();
            MatrixXd Wt(W.cols(), static_cast<Eigen::Index>(fr.size()));
            for (std::size_t k = 0; k < fr.size(); ++k) Wt.col(static_cast<Eigen::Index>(k)) = W.row(fr[k]).transpose();
            VectorXd vf(static_cast<Eigen::Index>(fr.size()));
            for (std::size_t k = 0; k < fr.size(); ++k) vf(static_cast<Eigen::Index>(k)) = v(fr[k]);
            vf += Wt.completeOrthogonalDecomposition().solve(-g - Wt * vf);
            for (std::size_t k = 0; k < fr.size(); ++k)
                refined(fr[k]) = std::clamp(vf(static_cast<Eigen::Index>(k)), -sigma, sigma);
        }
        const double refined_value = -0.5 * (d - M * refined).squaredNorm();
        gap = std::min(gap, primal_objective(G, c, W, sigma, polished) - refined_value);
    }
    warm = {v, r.free, sigma, true};
    if (gap <= opt.gap_tolerance * scale) return {polished, r.iterations, true, zero};

    const VectorXd raw = llt.solve(c - W.transpose() * v);
    const double raw_gap = gap_of(raw);
    std::ostringstream os;
    os << "flrti solver did not converge: sigma=" << sigma << " iterations=" << r.iterations
       << " duality_gap=" << gap << " unpolished_gap=" << raw_gap;
    throw SolverError(os.str());
}

Solution solve_dantzig(const MatrixXd& G, const VectorXd& c, const MatrixXd& W, double sigma, const FitOptions& opt) {
    const Eigen::Index p = G.rows();
    const Eigen::Index m = W.rows();
    // Variables [beta+, beta-, t]; the correlation bound per coordinate is the
    // largest value the lasso subgradient can reach there.
    const VectorXd bound = sigma * W.cwiseAbs().colwise().sum().transpose();
    MatrixXd A = MatrixXd::Zero(2 * m + 2 * p, 2 * p + m);
    VectorXd b = VectorXd::Zero(2 * m + 2 * p);
    A.block(0, 0, m, p) = W;
    A.block(0, p, m, p) = -W;
    A.block(0, 2 * p, m, m) = -MatrixXd::Identity(m, m);
    A.block(m, 0, m, p) = -W;
    A.block(m, p, m, p) = W;
    A.block(m, 2 * p, m, m) = -MatrixXd::Identity(m, m);
    A.block(2 * m, 0, p, p) = G;
    A.block(2 * m, p, p, p) = -G;
    b.segment(2 * m, p) = c + bound;
    A.block(2 * m + p, 0, p, p) = -G;
    A.block(2 * m + p, p, p, p) = G;
    b.segment(2 * m + p, p) = bound - c;
    VectorXd cost = VectorXd::Zero(2 * p + m);
    cost.tail(m).setOnes();

    // Rescale so the simplex tolerances see O(1) numbers.
    const double scale = std::max(1e-300, A.cwiseAbs().maxCoeff());
    const lp::Result res = lp::minimize(cost, A / scale, b / scale, opt.max_iterations);
    if (res.status != lp::Status::optimal) {
        std::ostringstream os;
        os << "flrti dantzig program failed: sigma=" << sigma << " pivots=" << res.iterations << " status="
           << static_cast<int>(res.status);
        throw SolverError(os.str());
    }
    VectorXd beta = res.x.head(p) - res.x.segment(p, p);
    const double big = std::max(1e-300, beta.cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < p; ++j)
        if (std::abs(beta(j)) < 1e-10 * big) beta(j) = 0.0;
    const VectorXd wb = W * beta;
    const double wmax = std::max(1e-300, wb.cwiseAbs().maxCoeff());
    std::vector<bool> zero(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) zero[static_cast<std::size_t>(i)] = std::abs(wb(i)) <= 1e-9 * wmax;
    return {beta, res.iterations, true, zero};
}

// Standardized problem on one training set; reusable across sigma values.
class Fitter {
public:
    Fitter(std::span<const double> grid, std::span<const FunctionalSample> samples,
           std::span<const std::size_t> rows, double omega, const FitOptions& options)
        : grid_(grid.begin(), grid.end()), omega_(omega), options_(options) {
        check_grid(grid);
        if (!(omega >= 0.0 && omega <= 1.0)) throw ValidationError("flrti omega must lie in [0, 1]");
        const std::size_t n = rows.size();
        const std::size_t p = grid.size();
        if (n < 3) throw ValidationError("flrti needs at least 3 samples");
        for (auto r : rows) {
            if (samples[r].x.size() != p)
                throw ValidationError("flrti sample curve has " + std::to_string(samples[r].x.size()) +
                                      " points, grid has " + std::to_string(p));
            for (double v : samples[r].x)
                if (!std::isfinite(v)) throw ValidationError("flrti sample curve has a missing value");
            if (!std::isfinite(samples[r].y)) throw ValidationError("flrti sample has a missing response");
        }

        length_ = grid.back() - grid.front();
        std::vector<double> u(p);
        for (std::size_t j = 0; j < p; ++j) u[j] = (grid[j] - grid.front()) / length_;
        const std::vector<double> wu = trapezoid_weights(u);
        wt_ = trapezoid_weights(grid);

        xbar_ = VectorXd::Zero(static_cast<Eigen::Index>(p));
        for (auto r : rows)
            for (std::size_t j = 0; j < p; ++j) xbar_(static_cast<Eigen::Index>(j)) += samples[r].x[j];
        xbar_ /= static_cast<double>(n);
        ybar_ = 0.0;
        for (auto r : rows) ybar_ += samples[r].y;
        ybar_ /= static_cast<double>(n);
        double ss = 0.0;
        for (auto r : rows) ss += (samples[r].y - ybar_) * (samples[r].y - ybar_);
        ysd_ = std::sqrt(ss / static_cast<double>(n));
        const double ys = ysd_ > 0.0 ? ysd_ : 1.0;

        // Pooled curve spread puts sigma on a correlation scale.
        double pooled = 0.0;
        for (auto r : rows)
            for (std::size_t j = 0; j < p; ++j) {
                const double dx = samples[r].x[j] - xbar_(static_cast<Eigen::Index>(j));
                pooled += dx * dx;
            }
        xsd_ = std::sqrt(pooled / static_cast<double>(n * p));
        if (xsd_ <= 1e-14) throw ValidationError("flrti design is degenerate: all curves are identical");

        MatrixXd Z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
        VectorXd y(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const auto& s = samples[rows[i]];
            for (std::size_t j = 0; j < p; ++j)
                Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    wu[j] * (s.x[j] - xbar_(static_cast<Eigen::Index>(j))) / xsd_;
            y(static_cast<Eigen::Index>(i)) = (s.y - ybar_) / ys;
        }
        G_ = Z.transpose() * Z / static_cast<double>(n);
        G_.diagonal().array() += kRidge * G_.trace() / static_cast<double>(p);
        c_ = Z.transpose() * y / static_cast<double>(n);
        W_ = penalty_matrix(u, wu, omega, options.curvature_scale);
        zero_rows_ = omega > 0.0 ? static_cast<Eigen::Index>(p) : 0;
    }

    FlrtiModel solve(double sigma) {
        if (!(sigma > 0.0)) throw ValidationError("flrti sigma must be positive");
        Solution s = options_.selector == Selector::lasso ? solve_lasso(G_, c_, W_, zero_rows_, sigma, options_, warm_)
                                                           : solve_dantzig(G_, c_, W_, sigma, options_);
        if (options_.refit) s.beta = solve_on_support(G_, c_, W_, zero_rows_, 0.0, VectorXd(), s.zero);
        FlrtiModel m;
        m.grid = grid_;
        m.sigma = sigma;
        m.omega = omega_;
        m.selector = options_.selector;
        m.iterations = s.iterations;
        m.certified = s.certified;
        const double ys = ysd_ > 0.0 ? ysd_ : 1.0;
        m.beta.resize(grid_.size());
        m.beta0 = ybar_;
        for (std::size_t j = 0; j < grid_.size(); ++j) {
            const double b = s.beta(static_cast<Eigen::Index>(j));
            m.beta[j] = b == 0.0 ? 0.0 : b * ys / (length_ * xsd_);
            m.beta0 -= wt_[j] * xbar_(static_cast<Eigen::Index>(j)) * m.beta[j];
        }
        return m;
    }

private:
    std::vector<double> grid_;
    double omega_;
    FitOptions options_;
    double length_ = 1.0;
    std::vector<double> wt_;
    VectorXd xbar_;
    double ybar_ = 0.0;
    double ysd_ = 0.0;
    double xsd_ = 1.0;
    MatrixXd G_, W_;
    VectorXd c_;
    Eigen::Index zero_rows_ = 0;
    Warm warm_;
};

std::vector<std::size_t> iota_rows(std::size_t n) {
    std::vector<std::size_t> r(n);
    std::iota(r.begin(), r.end(), std::size_t{0});
    return r;
}

double predict_raw(const FlrtiModel& model, const std::vector<double>& w, std::span<const double> x) {
    double v = model.beta0;
    for (std::size_t j = 0; j < x.size(); ++j) v += w[j] * x[j] * model.beta[j];
    return v;
}

void check_folds(std::size_t n, int folds) {
    if (folds < 2) throw ValidationError("flrti cross-validation needs at least 2 folds");
    if (n < static_cast<std::size_t>(folds))
        throw ValidationError("flrti cross-validation: " + std::to_string(n) + " samples for " +
                              std::to_string(folds) + " folds");
}

// Squared errors of one (fold, omega) cell across every sigma, warm-started
// from the smallest penalty upward.
std::vector<double> cell_sse(std::span<const double> grid, std::span<const FunctionalSample> samples,
                             const std::vector<int>& fold, int k, double omega, std::span<const double> sigmas,
                             const FitOptions& options) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == k ? test : train).push_back(i);
    std::vector<std::size_t> order(sigmas.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sigmas[a] < sigmas[b]; });
    std::vector<double> sse(sigmas.size(), 0.0);
    Fitter fitter(grid, samples, train, omega, options);
    const auto w = trapezoid_weights(grid);
    for (auto s : order) {
        const FlrtiModel m = fitter.solve(sigmas[s]);
        for (auto r : test) {
            const double e = samples[r].y - predict_raw(m, w, samples[r].x);
            sse[s] += e * e;
        }
    }
    return sse;
}

CvResult run_cv(std::span<const double> grid, std::span<const FunctionalSample> samples,
                std::span<const double> sigma_grid, std::span<const double> omega_grid, int folds,
                std::uint64_t seed, const FitOptions& options, bool parallel) {
    check_grid(grid);
    check_folds(samples.size(), folds);
    if (sigma_grid.empty() || omega_grid.empty()) throw ValidationError("flrti search grids must be non-empty");
    CvResult res;
    res.seed = seed;
    res.folds = assign_folds(samples.size(), folds, seed);
    const int cells = folds * static_cast<int>(omega_grid.size());
    std::vector<std::vector<double>> sse(static_cast<std::size_t>(cells));
    std::vector<std::string> failures(static_cast<std::size_t>(cells));
    auto work = [&](int cell) {
        const int k = cell / static_cast<int>(omega_grid.size());
        const std::size_t o = static_cast<std::size_t>(cell % static_cast<int>(omega_grid.size()));
        try {
            sse[static_cast<std::size_t>(cell)] = cell_sse(grid, samples, res.folds, k, omega_grid[o], sigma_grid, options);
        } catch (const std::exception& e) {
            failures[static_cast<std::size_t>(cell)] = e.what();
        }
    };
    if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int cell = 0; cell < cells; ++cell) work(cell);
    } else {
        for (int cell = 0; cell < cells; ++cell) work(cell);
    }
    for (const auto& f : failures)
        if (!f.empty()) throw SolverError("flrti cross-validation: " + f);

    const double n = static_cast<double>(samples.size());
    for (std::size_t s = 0; s < sigma_grid.size(); ++s) {
        for (std::size_t o = 0; o < omega_grid.size(); ++o) {
            double total = 0.0;
            for (int k = 0; k < folds; ++k)
                total += sse[static_cast<std::size_t>(k) * omega_grid.size() + o][s];
            res.table.push_back({sigma_grid[s], omega_grid[o], total / n});
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < res.table.size(); ++i)
        if (res.table[i].error < res.table[best].error * (1.0 - 1e-12)) best = i;
    res.best_sigma = res.table[best].sigma;
    res.best_omega = res.table[best].omega;
    res.best_error = res.table[best].error;
    return res;
}

} // namespace

FlrtiModel fit(std::span<const double> grid, std::span<const FunctionalSample> samples, double sigma, double omega,
               const FitOptions& options) {
    const auto rows = iota_rows(samples.size());
    Fitter fitter(grid, samples, rows, omega, options);
    return fitter.solve(sigma);
}

double predict(const FlrtiModel& model, std::span<const double> x) {
    if (x.size() != model.grid.size())
        throw ValidationError("flrti predict: curve has " + std::to_string(x.size()) + " points, model grid has " +
                              std::to_string(model.grid.size()));
    return predict_raw(model, trapezoid_weights(model.grid), x);
}

CvResult cross_validate(std::span<const double> grid, std::span<const FunctionalSample> samples,
                        std::span<const double> sigma_grid, std::span<const double> omega_grid, int folds,
                        std::uint64_t seed, const FitOptions& options) {
    return run_cv(grid, samples, sigma_grid, omega_grid, folds, seed, options, true);
}

CvResult cross_validate_serial(std::span<const double> grid, std::span<const FunctionalSample> samples,
                               std::span<const double> sigma_grid, std::span<const double> omega_grid, int folds,
                               std::uint64_t seed, const FitOptions& options) {
    return run_cv(grid, samples, sigma_grid, omega_grid, folds, seed, options, false);
}

FlrtiModel fit_cv(std::span<const double> grid, std::span<const FunctionalSample> samples,
                  std::span<const double> sigma_grid, std::span<const double> omega_grid, int folds,
                  std::uint64_t seed, const FitOptions& options) {
    const CvResult cv = cross_validate(grid, samples, sigma_grid, omega_grid, folds, seed, options);
    FlrtiModel m = fit(grid, samples, cv.best_sigma, cv.best_omega, options);
    m.cv_error = cv.best_error;
    m.seed = seed;
    return m;
}

double cv_r2(std::span<const double> grid, std::span<const FunctionalSample> samples, double sigma, double omega,
             int folds, std::uint64_t seed, const FitOptions& options) {
    const double s[] = {sigma};
    const double o[] = {omega};
    const CvResult cv = run_cv(grid, samples, s, o, folds, seed, options, false);
    double mean = 0.0;
    for (const auto& x : samples) mean += x.y;
    mean /= static_cast<double>(samples.size());
    double sst = 0.0;
    for (const auto& x : samples) sst += (x.y - mean) * (x.y - mean);
    if (sst <= 0.0) return 0.0;
    return 1.0 - cv.best_error * static_cast<double>(samples.size()) / sst;
}

PermutationResult permutation_null_check(std::span<const double> grid, std::span<const FunctionalSample> samples,
                                         const FlrtiModel& model, int n_perm, int folds, std::uint64_t seed,
                                         const FitOptions& options) {
    if (n_perm < 1) throw ValidationError("permutation check needs at least one permutation");
    PermutationResult res;
    res.n_perm = n_perm;
    res.observed_r2 = cv_r2(grid, samples, model.sigma, model.omega, folds, seed, options);
    std::vector<double> ys;
    for (const auto& s : samples) ys.push_back(s.y);
    std::vector<double> null_r2(static_cast<std::size_t>(n_perm));
    // Permutations are drawn up front so the parallel loop sees fixed inputs.
    std::vector<std::vector<FunctionalSample>> perms(static_cast<std::size_t>(n_perm));
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (auto& perm : perms) {
        std::vector<double> shuffled = ys;
        rng.shuffle(shuffled);
        perm.assign(samples.begin(), samples.end());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i].y = shuffled[i];
    }
    std::vector<std::string> failures(static_cast<std::size_t>(n_perm));
#pragma omp parallel for schedule(dynamic)
    for (int b = 0; b < n_perm; ++b) {
        try {
            null_r2[static_cast<std::size_t>(b)] =
                cv_r2(grid, perms[static_cast<std::size_t>(b)], model.sigma, model.omega, folds, seed, options);
        } catch (const std::exception& e) {
            failures[static_cast<std::size_t>(b)] = e.what();
        }
    }
    for (const auto& f : failures)
        if (!f.empty()) throw SolverError("permutation check: " + f);
    int extreme = 0;
    for (double r : null_r2)
        if (r >= res.observed_r2) ++extreme;
    res.p_value = (1.0 + extreme) / (n_perm + 1.0);
    return res;
}

std::string to_json(const FlrtiModel& model) {
    nlohmann::json j{{"grid", model.grid},   {"beta", model.beta},         {"beta0", model.beta0},
                     {"sigma", model.sigma}, {"omega", model.omega},       {"cv_error", model.cv_error},
                     {"seed", model.seed},   {"selector", model.selector == Selector::lasso ? "lasso" : "dantzig"}};
    return j.dump(2);
}

std::string beta_csv(const FlrtiModel& model) {
    csv::Writer w("gdd,beta");
    for (std::size_t j = 0; j < model.grid.size(); ++j)
        w.row({csv::fmt(model.grid[j], 3), csv::fmt(model.beta[j], 9)});
    return w.str();
}

} // namespace vws::flrti
