#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vws::flrti {

/// One curve X_i(t) on the shared grid and its scalar response Y_i.
struct FunctionalSample {
    std::vector<double> x;
    double y = 0.0;
};

enum class Selector { lasso, dantzig };

struct FitOptions {
    Selector selector = Selector::lasso;
    /// Weight of the second-difference penalty relative to the zero-order one,
    /// on the unit-normalized axis.
    double curvature_scale = 1e-5;
    long max_iterations = 20000;
    /// Refit without penalty on the selected structure (zero regions and
    /// linear pieces), removing the shrinkage of the selection step.
    bool refit = true;
    /// Relative duality-gap tolerance certifying a lasso solution.
    double gap_tolerance = 1e-8;
};

struct FlrtiModel {
    std::vector<double> grid;
    std::vector<double> beta; // per unit of the grid axis, response units
    double beta0 = 0.0;
    double sigma = 0.0;
    double omega = 0.0;
    double cv_error = 0.0;
    std::uint64_t seed = 0;
    Selector selector = Selector::lasso;
    long iterations = 0;
    /// Optimality verified by the duality gap (lasso) or LP optimality (Dantzig).
    bool certified = false;
};

/// Evenly spaced grid of p points over [start, end].
std::vector<double> make_grid(double start, double end, std::size_t p = 100);

/// Linear interpolation of (t, v) onto `grid`; throws if the grid leaves [t.front(), t.back()].
std::vector<double> resample(std::span<const double> t, std::span<const double> v, std::span<const double> grid);

/// Trapezoid weights of `grid`.
std::vector<double> trapezoid_weights(std::span<const double> grid);

FlrtiModel fit(std::span<const double> grid, std::span<const FunctionalSample> samples, double sigma, double omega,
               const FitOptions& options = {});

double predict(const FlrtiModel& model, std::span<const double> x);

inline const std::vector<double> kDefaultSigmaGrid{0.005, 0.01, 0.05, 0.1, 0.5};
inline const std::vector<double> kDefaultOmegaGrid{0.0, 0.25, 0.5, 0.75, 0.9, 0.95, 1.0};

struct CvCell {
    double sigma = 0.0;
    double omega = 0.0;
    double error = 0.0; // mean out-of-fold squared error
};

struct CvResult {
    double best_sigma = 0.0;
    double best_omega = 0.0;
    double best_error = 0.0;
    std::vector<CvCell> table;
    std::vector<int> folds;
    std::uint64_t seed = 0;
};

/// Grid search over (sigma, omega); cells are fitted in parallel.
CvResult cross_validate(std::span<const double> grid, std::span<const FunctionalSample> samples,
                        std::span<const double> sigma_grid, std::span<const double> omega_grid, int folds = 10,
                        std::uint64_t seed = 1, const FitOptions& options = {});
/// Serial reference of cross_validate.
CvResult cross_validate_serial(std::span<const double> grid, std::span<const FunctionalSample> samples,
                               std::span<const double> sigma_grid, std::span<const double> omega_grid,
                               int folds = 10, std::uint64_t seed = 1, const FitOptions& options = {});

/// Cross-validates, then refits on all samples at the chosen cell.
FlrtiModel fit_cv(std::span<const double> grid, std::span<const FunctionalSample> samples,
                  std::span<const double> sigma_grid = kDefaultSigmaGrid,
                  std::span<const double> omega_grid = kDefaultOmegaGrid, int folds = 10, std::uint64_t seed = 1,
                  const FitOptions& options = {});

/// Out-of-fold R² at fixed (sigma, omega).
double cv_r2(std::span<const double> grid, std::span<const FunctionalSample> samples, double sigma, double omega,
             int folds, std::uint64_t seed, const FitOptions& options = {});

struct PermutationResult {
    double observed_r2 = 0.0;
    double p_value = 1.0;
    int n_perm = 0;
};

/// Permutation null of the out-of-fold R² at the model's (sigma, omega).
PermutationResult permutation_null_check(std::span<const double> grid, std::span<const FunctionalSample> samples,
                                         const FlrtiModel& model, int n_perm, int folds = 10,
                                         std::uint64_t seed = 1, const FitOptions& options = {});

std::string to_json(const FlrtiModel& model);
/// `gdd,beta` rows.
std::string beta_csv(const FlrtiModel& model);

} // namespace vws::flrti
