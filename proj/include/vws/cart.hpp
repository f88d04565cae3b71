#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vws::cart {

/// One explanatory column. Categorical values hold level indices into `levels`.
struct Predictor {
    std::string name;
    bool categorical = false;
    std::vector<double> values;
    std::vector<std::string> levels;
};

struct Dataset {
    std::vector<Predictor> predictors;
    std::vector<double> y;

    std::size_t size() const { return y.size(); }
    /// Checks N ≥ 2, equal column lengths, finite values and valid level codes.
    void validate() const;
    /// Row subset, keeping level tables.
    Dataset subset(std::span<const std::size_t> rows) const;
};

struct Split {
    bool found = false;
    std::size_t variable = 0;
    double threshold = 0.0;       // numeric: x ≤ threshold goes left
    std::vector<int> left_levels; // categorical: these levels go left
    std::vector<int> right_levels;
    double reduction = 0.0;       // between-group sum of squares
    std::size_t n_left = 0;
    std::size_t n_right = 0;
};

/// Relative slack below which two reductions count as a tie.
inline constexpr double kTieTolerance = 1e-12;

/// Exhaustive search over one variable restricted to `rows` (all rows when
/// empty). Numeric thresholds are midpoints of consecutive distinct values,
/// ties go to the smaller threshold; categorical splits scan levels ordered by
/// mean response.
Split best_split(const Dataset& data, std::size_t variable, std::span<const std::size_t> rows = {},
                 std::size_t min_leaf = 1);

struct GrowParams {
    std::size_t min_split = 6;
    std::size_t min_leaf = 2;
    double cp = 0.01;
    std::size_t max_depth = 30;
};

struct Node {
    bool leaf = true;
    std::size_t variable = 0;
    double threshold = 0.0;
    std::vector<int> left_levels;
    std::vector<int> right_levels;
    int left = -1;
    int right = -1;
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
    double deviance = 0.0; // sum of squares about the node mean
};

struct CpRow {
    double cp = 0.0; // alpha relative to the root deviance
    std::size_t splits = 0;
    double rel_error = 0.0;
    double xerror = 0.0; // CV error relative to the root deviance
    double xstd = 0.0;
};

struct RegressionTree {
    std::vector<Node> nodes; // nodes[0] is the root
    std::vector<std::string> names;
    std::vector<bool> categorical;
    std::vector<std::vector<std::string>> levels;
    double cp = 0.0;              // complexity parameter of this subtree
    std::vector<CpRow> cp_table;  // filled by prune_cv

    std::size_t leaf_count() const;
    std::size_t split_count() const { return leaf_count() - 1; }
    const Node& root() const { return nodes.front(); }
};

/// Largest reduction over all variables (ties keep the lower variable index).
Split best_root_split(const Dataset& data, std::span<const std::size_t> rows = {}, std::size_t min_leaf = 1);

RegressionTree grow(const Dataset& data, const GrowParams& params = {});

/// Smallest subtree minimizing deviance + alpha·leaves.
RegressionTree prune(const RegressionTree& tree, double alpha);

/// Critical alphas of the weakest-link sequence, starting with 0.
std::vector<double> complexity_sequence(const RegressionTree& tree);

struct PruneOptions {
    int folds = 10;
    std::uint64_t seed = 1;
    bool one_se_rule = true;
};

/// Cost-complexity pruning with k-fold cross-validation (CV folds in parallel).
RegressionTree prune_cv(const RegressionTree& tree, const Dataset& data, const GrowParams& params,
                        const PruneOptions& options = {});
/// Serial reference of prune_cv.
RegressionTree prune_cv_serial(const RegressionTree& tree, const Dataset& data, const GrowParams& params,
                               const PruneOptions& options = {});

/// Predictor values in dataset column order; categorical values are level
/// indices (an index the node never saw routes to its larger child).
double predict(const RegressionTree& tree, std::span<const double> x);

std::string to_json(const RegressionTree& tree);
std::string to_text(const RegressionTree& tree);

} // namespace vws::cart
