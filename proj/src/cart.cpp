#include "vws/cart.hpp"

#include "vws/error.hpp"
#include "vws/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace vws::cart {

namespace {

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

struct Moments {
    double mean = 0.0;
    double ss = 0.0;
};

Moments moments(const std::vector<double>& y, std::span<const std::size_t> rows) {
    Moments m;
    if (rows.empty()) return m;
    for (auto r : rows) m.mean += y[r];
    m.mean /= static_cast<double>(rows.size());
    for (auto r : rows) m.ss += (y[r] - m.mean) * (y[r] - m.mean);
    return m;
}

// A candidate beats the incumbent only by more than the relative tie slack.
bool better(double candidate, double incumbent, double scale) {
    return candidate > incumbent + kTieTolerance * std::max(1.0, scale);
}

// Ordered scan over groups already sorted along the split axis. Each group is
// a run of rows sharing one value (numeric) or one level (categorical).
struct Group {
    double key = 0.0; // numeric value, or level index
    std::size_t n = 0;
    double sum = 0.0;
};

struct ScanResult {
    bool found = false;
    std::size_t cut = 0; // groups [0, cut] go left
    double reduction = 0.0;
    std::size_t n_left = 0;
};

ScanResult scan(const std::vector<Group>& groups, double centre, std::size_t min_leaf, double scale) {
    std::size_t n = 0;
    double total = 0.0;
    for (const auto& g : groups) {
        n += g.n;
        total += g.sum - centre * static_cast<double>(g.n);
    }
    ScanResult best;
    std::size_t nl = 0;
    double sl = 0.0;
    for (std::size_t i = 0; i + 1 < groups.size(); ++i) {
        nl += groups[i].n;
        sl += groups[i].sum - centre * static_cast<double>(groups[i].n);
        const std::size_t nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double sr = total - sl;
        const double red = sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(nr) -
                           total * total / static_cast<double>(n);
        if (!best.found ? red > 0.0 && red > kTieTolerance * std::max(1.0, scale)
                        : better(red, best.reduction, scale)) {
            best = {true, i, red, nl};
        }
    }
    return best;
}

} // namespace

void Dataset::validate() const {
    if (y.size() < 2) throw ValidationError("cart dataset needs at least 2 cases");
    for (double v : y)
        if (!std::isfinite(v)) throw ValidationError("cart dataset has a missing response");
    for (const auto& p : predictors) {
        if (p.values.size() != y.size())
            throw ValidationError("predictor '" + p.name + "' has " + std::to_string(p.values.size()) +
                                  " values for " + std::to_string(y.size()) + " cases");
        for (double v : p.values) {
            if (!std::isfinite(v)) throw ValidationError("predictor '" + p.name + "' has a missing value");
            if (p.categorical && (v < 0 || v >= static_cast<double>(p.levels.size()) || v != std::floor(v)))
                throw ValidationError("predictor '" + p.name + "' has an invalid level code");
        }
    }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.predictors.reserve(predictors.size());
    for (const auto& p : predictors) {
        Predictor q{p.name, p.categorical, {}, p.levels};
        q.values.reserve(rows.size());
        for (auto r : rows) q.values.push_back(p.values[r]);
        out.predictors.push_back(std::move(q));
    }
    for (auto r : rows) out.y.push_back(y[r]);
    return out;
}

Split best_split(const Dataset& data, std::size_t variable, std::span<const std::size_t> rows, std::size_t min_leaf) {
    if (variable >= data.predictors.size()) throw ValidationError("cart: variable index out of range");
    std::vector<std::size_t> owned;
    if (rows.empty()) {
        owned = all_rows(data.size());
        rows = owned;
    }
    const auto& pred = data.predictors[variable];
    const Moments m = moments(data.y, rows);

    std::vector<Group> groups;
    if (!pred.categorical) {
        std::vector<std::size_t> order(rows.begin(), rows.end());
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return pred.values[a] < pred.values[b]; });
        for (auto r : order) {
            if (groups.empty() || groups.back().key != pred.values[r]) groups.push_back({pred.values[r], 0, 0.0});
            groups.back().n += 1;
            groups.back().sum += data.y[r];
        }
    } else {
        std::vector<Group> by_level(pred.levels.size());
        for (std::size_t l = 0; l < by_level.size(); ++l) by_level[l].key = static_cast<double>(l);
        for (auto r : rows) {
            auto& g = by_level[static_cast<std::size_t>(pred.values[r])];
            g.n += 1;
            g.sum += data.y[r];
        }
        for (const auto& g : by_level)
            if (g.n > 0) groups.push_back(g);
        std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
            return a.sum / static_cast<double>(a.n) < b.sum / static_cast<double>(b.n);
        });
    }

    Split split;
    split.variable = variable;
    if (groups.size() < 2) return split;
    const ScanResult s = scan(groups, m.mean, min_leaf, m.ss);
    if (!s.found) return split;
    split.found = true;
    split.reduction = s.reduction;
    split.n_left = s.n_left;
    split.n_right = rows.size() - s.n_left;
    if (!pred.categorical) {
        split.threshold = 0.5 * (groups[s.cut].key + groups[s.cut + 1].key);
    } else {
        for (std::size_t i = 0; i < groups.size(); ++i)
            (i <= s.cut ? split.left_levels : split.right_levels).push_back(static_cast<int>(groups[i].key));
        std::sort(split.left_levels.begin(), split.left_levels.end());
        std::sort(split.right_levels.begin(), split.right_levels.end());
    }
    return split;
}

Split best_root_split(const Dataset& data, std::span<const std::size_t> rows, std::size_t min_leaf) {
    std::vector<std::size_t> owned;
    if (rows.empty()) {
        owned = all_rows(data.size());
        rows = owned;
    }
    const double scale = moments(data.y, rows).ss;
    Split best;
    for (std::size_t v = 0; v < data.predictors.size(); ++v) {
        Split s = best_split(data, v, rows, min_leaf);
        if (s.found && (!best.found || better(s.reduction, best.reduction, scale))) best = std::move(s);
    }
    return best;
}

std::size_t RegressionTree::leaf_count() const {
    if (nodes.empty()) return 0;
    std::size_t count = 0;
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const Node& n = nodes[static_cast<std::size_t>(stack.back())];
        stack.pop_back();
        if (n.leaf) {
            ++count;
        } else {
            stack.push_back(n.left);
            stack.push_back(n.right);
        }
    }
    return count;
}

namespace {

bool goes_left(const Node& node, bool categorical, double x) {
    if (!categorical) return x <= node.threshold;
    const int level = static_cast<int>(x);
    if (std::binary_search(node.left_levels.begin(), node.left_levels.end(), level)) return true;
    if (std::binary_search(node.right_levels.begin(), node.right_levels.end(), level)) return false;
    return false; // resolved by the caller
}

Node make_leaf(const std::vector<double>& y, std::span<const std::size_t> rows) {
    Node node;
    const Moments m = moments(y, rows);
    node.mean = m.mean;
    node.deviance = m.ss;
    node.n = rows.size();
    node.sd = rows.size() > 1 ? std::sqrt(m.ss / static_cast<double>(rows.size() - 1)) : 0.0;
    return node;
}

struct Grower {
    const Dataset& data;
    const GrowParams& params;
    double root_deviance = 0.0;
    RegressionTree tree;

    int build(std::vector<std::size_t> rows, std::size_t depth) {
        const int index = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(make_leaf(data.y, rows));
        const Node snapshot = tree.nodes.back();
        if (rows.size() < params.min_split || depth >= params.max_depth || snapshot.deviance <= 0.0) return index;
        const Split s = best_root_split(data, rows, params.min_leaf);
        if (!s.found || s.reduction < params.cp * root_deviance || s.reduction <= 0.0) return index;

        const auto& pred = data.predictors[s.variable];
        std::vector<std::size_t> left, right;
        Node probe;
        probe.threshold = s.threshold;
        probe.left_levels = s.left_levels;
        probe.right_levels = s.right_levels;
        for (auto r : rows) (goes_left(probe, pred.categorical, pred.values[r]) ? left : right).push_back(r);

        const int l = build(std::move(left), depth + 1);
        const int r = build(std::move(right), depth + 1);
        Node& node = tree.nodes[static_cast<std::size_t>(index)];
        node.leaf = false;
        node.variable = s.variable;
        node.threshold = s.threshold;
        node.left_levels = s.left_levels;
        node.right_levels = s.right_levels;
        node.left = l;
        node.right = r;
        return index;
    }
};

void copy_schema(const Dataset& data, RegressionTree& tree) {
    for (const auto& p : data.predictors) {
        tree.names.push_back(p.name);
        tree.categorical.push_back(p.categorical);
        tree.levels.push_back(p.levels);
    }
}

} // namespace

RegressionTree grow(const Dataset& data, const GrowParams& params) {
    if (params.min_leaf < 1) throw ValidationError("cart: min_leaf must be at least 1");
    if (!(params.cp >= 0.0)) throw ValidationError("cart: cp must be non-negative");
    if (data.y.empty()) throw ValidationError("cart dataset is empty");
    if (data.size() >= 2) data.validate();
    Grower g{data, params, 0.0, {}};
    auto rows = all_rows(data.size());
    g.root_deviance = moments(data.y, rows).ss;
    copy_schema(data, g.tree);
    g.build(std::move(rows), 0);
    return std::move(g.tree);
}

namespace {

// Rebuilds the reachable part of `tree` with nodes in `collapse` turned into leaves.
RegressionTree compact(const RegressionTree& tree, const std::vector<bool>& collapse) {
    RegressionTree out;
    out.names = tree.names;
    out.categorical = tree.categorical;
    out.levels = tree.levels;
    auto copy = [&](auto&& self, int src) -> int {
        const int index = static_cast<int>(out.nodes.size());
        Node node = tree.nodes[static_cast<std::size_t>(src)];
        out.nodes.push_back(node);
        if (node.leaf || collapse[static_cast<std::size_t>(src)]) {
            Node& n = out.nodes.back();
            n.leaf = true;
            n.left = n.right = -1;
            n.left_levels.clear();
            n.right_levels.clear();
            n.variable = 0;
            n.threshold = 0.0;
            return index;
        }
        const int l = self(self, node.left);
        const int r = self(self, node.right);
        out.nodes[static_cast<std::size_t>(index)].left = l;
        out.nodes[static_cast<std::size_t>(index)].right = r;
        return index;
    };
    copy(copy, 0);
    return out;
}

struct SubtreeCost {
    double deviance = 0.0;
    std::size_t leaves = 0;
};

SubtreeCost prune_pass(const RegressionTree& tree, int index, double alpha, std::vector<bool>& collapse) {
    const Node& n = tree.nodes[static_cast<std::size_t>(index)];
    if (n.leaf) return {n.deviance, 1};
    const SubtreeCost l = prune_pass(tree, n.left, alpha, collapse);
    const SubtreeCost r = prune_pass(tree, n.right, alpha, collapse);
    SubtreeCost sub{l.deviance + r.deviance, l.leaves + r.leaves};
    const double slack = 1e-12 * std::max(1.0, tree.nodes.front().deviance);
    if (n.deviance + alpha <= sub.deviance + alpha * static_cast<double>(sub.leaves) + slack) {
        collapse[static_cast<std::size_t>(index)] = true;
        return {n.deviance, 1};
    }
    return sub;
}

} // namespace

RegressionTree prune(const RegressionTree& tree, double alpha) {
    if (tree.nodes.empty()) throw ValidationError("cart: cannot prune an empty tree");
    std::vector<bool> collapse(tree.nodes.size(), false);
    prune_pass(tree, 0, alpha, collapse);
    RegressionTree out = compact(tree, collapse);
    const double root = tree.nodes.front().deviance;
    out.cp = root > 0.0 ? alpha / root : 0.0;
    return out;
}

std::vector<double> complexity_sequence(const RegressionTree& tree) {
    std::vector<double> alphas{0.0};
    RegressionTree current = prune(tree, 0.0);
    while (!current.nodes.front().leaf) {
        // Weakest link: the internal node with the smallest per-leaf deviance gain.
        double weakest = std::numeric_limits<double>::infinity();
        auto visit = [&](auto&& self, int index) -> SubtreeCost {
            const Node& n = current.nodes[static_cast<std::size_t>(index)];
            if (n.leaf) return {n.deviance, 1};
            const SubtreeCost l = self(self, n.left);
            const SubtreeCost r = self(self, n.right);
            const SubtreeCost sub{l.deviance + r.deviance, l.leaves + r.leaves};
            const double g = (n.deviance - sub.deviance) / static_cast<double>(sub.leaves - 1);
            weakest = std::min(weakest, g);
            return sub;
        };
        visit(visit, 0);
        weakest = std::max(weakest, alphas.back());
        alphas.push_back(weakest);
        current = prune(current, weakest);
    }
    return alphas;
}

namespace {

double predict_node(const RegressionTree& tree, std::span<const double> x) {
    int index = 0;
    for (;;) {
        const Node& n = tree.nodes[static_cast<std::size_t>(index)];
        if (n.leaf) return n.mean;
        const double v = x[n.variable];
        bool left;
        if (tree.categorical[n.variable]) {
            const int level = static_cast<int>(v);
            if (std::binary_search(n.left_levels.begin(), n.left_levels.end(), level)) {
                left = true;
            } else if (std::binary_search(n.right_levels.begin(), n.right_levels.end(), level)) {
                left = false;
            } else {
                const auto& l = tree.nodes[static_cast<std::size_t>(n.left)];
                const auto& r = tree.nodes[static_cast<std::size_t>(n.right)];
                left = l.n >= r.n;
            }
        } else {
            left = v <= n.threshold;
        }
        index = left ? n.left : n.right;
    }
}

std::vector<double> case_row(const Dataset& data, std::size_t r) {
    std::vector<double> x;
    x.reserve(data.predictors.size());
    for (const auto& p : data.predictors) x.push_back(p.values[r]);
    return x;
}

// Squared prediction error of every case at every probe alpha, one fold.
void fold_errors(const Dataset& data, const GrowParams& params, const std::vector<int>& fold, int k,
                 const std::vector<double>& probes, std::vector<std::vector<double>>& err) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == k ? test : train).push_back(i);
    if (test.empty()) return;
    const Dataset sub = data.subset(train);
    const RegressionTree full = grow(sub, params);
    for (std::size_t j = 0; j < probes.size(); ++j) {
        const RegressionTree t = prune(full, probes[j]);
        for (auto r : test) {
            const double e = data.y[r] - predict_node(t, case_row(data, r));
            err[j][r] = e * e;
        }
    }
}

RegressionTree select_pruned(const RegressionTree& tree, const Dataset& data, const std::vector<double>& alphas,
                             const std::vector<std::vector<double>>& err, const PruneOptions& options) {
    const double n = static_cast<double>(data.size());
    const double root = tree.nodes.front().deviance;
    const double norm = root > 0.0 ? root : 1.0;
    std::vector<CpRow> table;
    for (std::size_t j = 0; j < alphas.size(); ++j) {
        double sum = 0.0, sq = 0.0;
        for (double e : err[j]) {
            sum += e;
            sq += e * e;
        }
        const double var = std::max(0.0, sq - sum * sum / n);
        CpRow row;
        row.cp = alphas[j] / norm;
        row.xerror = sum / norm;
        row.xstd = std::sqrt(var) / norm;
        table.push_back(row);
    }
    // Resubstitution error of each subtree relative to the root deviance.
    for (std::size_t j = 0; j < alphas.size(); ++j) {
        const RegressionTree t = prune(tree, alphas[j]);
        table[j].splits = t.split_count();
        double dev = 0.0;
        for (const auto& node : t.nodes)
            if (node.leaf) dev += node.deviance;
        table[j].rel_error = dev / norm;
    }

    std::size_t best = 0;
    for (std::size_t j = 1; j < table.size(); ++j)
        if (table[j].xerror < table[best].xerror - 1e-12) best = j;
    std::size_t chosen = best;
    if (options.one_se_rule) {
        const double limit = table[best].xerror + table[best].xstd;
        for (std::size_t j = table.size(); j-- > 0;) {
            if (table[j].xerror <= limit + 1e-12) {
                chosen = j;
                break;
            }
        }
    }
    RegressionTree out = prune(tree, alphas[chosen]);
    out.cp_table = std::move(table);
    return out;
}

struct CvSetup {
    std::vector<double> alphas;
    std::vector<double> probes;
    std::vector<int> fold;
};

CvSetup cv_setup(const RegressionTree& tree, const Dataset& data, const PruneOptions& options) {
    if (options.folds < 2) throw ValidationError("cart: cross-validation needs k >= 2 folds");
    if (static_cast<std::size_t>(options.folds) > data.size())
        throw ValidationError("cart: " + std::to_string(options.folds) + " folds exceed " +
                              std::to_string(data.size()) + " cases");
    if (tree.nodes.empty()) throw ValidationError("cart: cannot prune an empty tree");
    CvSetup s;
    s.alphas = complexity_sequence(tree);
    // Geometric midpoints between consecutive critical values probe each subtree.
    for (std::size_t j = 0; j < s.alphas.size(); ++j) {
        if (j + 1 < s.alphas.size())
            s.probes.push_back(std::sqrt(s.alphas[j] * s.alphas[j + 1]));
        else
            s.probes.push_back(s.alphas[j] > 0.0 ? 2.0 * s.alphas[j] : std::numeric_limits<double>::max());
    }
    s.fold = assign_folds(data.size(), options.folds, options.seed);
    return s;
}

} // namespace

RegressionTree prune_cv(const RegressionTree& tree, const Dataset& data, const GrowParams& params,
                        const PruneOptions& options) {
    const CvSetup s = cv_setup(tree, data, options);
    std::vector<std::vector<double>> err(s.probes.size(), std::vector<double>(data.size(), 0.0));
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < options.folds; ++k) fold_errors(data, params, s.fold, k, s.probes, err);
    return select_pruned(tree, data, s.alphas, err, options);
}

RegressionTree prune_cv_serial(const RegressionTree& tree, const Dataset& data, const GrowParams& params,
                               const PruneOptions& options) {
    const CvSetup s = cv_setup(tree, data, options);
    std::vector<std::vector<double>> err(s.probes.size(), std::vector<double>(data.size(), 0.0));
    for (int k = 0; k < options.folds; ++k) fold_errors(data, params, s.fold, k, s.probes, err);
    return select_pruned(tree, data, s.alphas, err, options);
}

double predict(const RegressionTree& tree, std::span<const double> x) {
    if (tree.nodes.empty()) throw ValidationError("cart: empty tree");
    if (x.size() < tree.names.size())
        throw ValidationError("cart: case has " + std::to_string(x.size()) + " values, tree uses " +
                              std::to_string(tree.names.size()));
    return predict_node(tree, x);
}

namespace {

std::string level_set(const RegressionTree& tree, std::size_t variable, const std::vector<int>& levels) {
    std::string s = "{";
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (i) s += ", ";
        s += tree.levels[variable][static_cast<std::size_t>(levels[i])];
    }
    return s + "}";
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

} // namespace

std::string to_json(const RegressionTree& tree) {
    using nlohmann::json;
    json nodes = json::array();
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const Node& n = tree.nodes[i];
        json j{{"id", i}, {"n", n.n}, {"mean", n.mean}, {"sd", n.sd}, {"deviance", n.deviance}};
        if (n.leaf) {
            j["leaf"] = true;
        } else {
            j["leaf"] = false;
            j["variable"] = tree.names[n.variable];
            if (tree.categorical[n.variable]) {
                json l = json::array(), r = json::array();
                for (int v : n.left_levels) l.push_back(tree.levels[n.variable][static_cast<std::size_t>(v)]);
                for (int v : n.right_levels) r.push_back(tree.levels[n.variable][static_cast<std::size_t>(v)]);
                j["left_levels"] = l;
                j["right_levels"] = r;
            } else {
                j["threshold"] = n.threshold;
            }
            j["left"] = n.left;
            j["right"] = n.right;
        }
        nodes.push_back(std::move(j));
    }
    json table = json::array();
    for (const auto& r : tree.cp_table)
        table.push_back({{"cp", r.cp}, {"splits", r.splits}, {"rel_error", r.rel_error}, {"xerror", r.xerror},
                         {"xstd", r.xstd}});
    json doc{{"cp", tree.cp}, {"variables", tree.names}, {"nodes", nodes}, {"cp_table", table}};
    return doc.dump(2);
}

std::string to_text(const RegressionTree& tree) {
    std::ostringstream os;
    auto walk = [&](auto&& self, int index, int label, int depth, const std::string& rule) -> void {
        const Node& n = tree.nodes[static_cast<std::size_t>(index)];
        os << std::string(static_cast<std::size_t>(depth) * 2, ' ') << label << ") " << rule << " n=" << n.n
           << " mean=" << num(n.mean) << " sd=" << num(n.sd);
        if (n.leaf) {
            os << " *\n";
            return;
        }
        os << '\n';
        const auto& name = tree.names[n.variable];
        std::string l, r;
        if (tree.categorical[n.variable]) {
            l = name + " in " + level_set(tree, n.variable, n.left_levels);
            r = name + " in " + level_set(tree, n.variable, n.right_levels);
        } else {
            l = name + " <= " + num(n.threshold);
            r = name + " > " + num(n.threshold);
        }
        self(self, n.left, label * 2, depth + 1, l);
        self(self, n.right, label * 2 + 1, depth + 1, r);
    };
    walk(walk, 0, 1, 0, "root");
    return os.str();
}

} // namespace vws::cart
