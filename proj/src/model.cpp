#include "riskrank/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace riskrank::model {

namespace {

// Presorted training data shared by every tree in one boosting run.
struct SplitContext {
    int n = 0;
    int d = 0;
    std::vector<double> col;               // column-major values [f*n + r]
    std::vector<std::vector<int>> sorted;  // per feature: finite rows by (value, row)
    std::vector<std::vector<int>> missing;

    double value(int f, int r) const {
        return col[static_cast<std::size_t>(f) * static_cast<std::size_t>(n) +
                   static_cast<std::size_t>(r)];
    }
};

SplitContext build_context(DataView X) {
    SplitContext ctx;
    ctx.n = X.n_rows;
    ctx.d = X.n_cols;
    ctx.col.resize(static_cast<std::size_t>(ctx.n) * static_cast<std::size_t>(ctx.d));
    ctx.sorted.resize(static_cast<std::size_t>(ctx.d));
    ctx.missing.resize(static_cast<std::size_t>(ctx.d));
    for (int f = 0; f < ctx.d; ++f) {
        double* colv = &ctx.col[static_cast<std::size_t>(f) * static_cast<std::size_t>(ctx.n)];
        auto& order = ctx.sorted[static_cast<std::size_t>(f)];
        auto& miss = ctx.missing[static_cast<std::size_t>(f)];
        for (int r = 0; r < ctx.n; ++r) {
            const double v = X.at(r, f);
            colv[r] = v;
            if (is_missing(v)) {
                miss.push_back(r);
            } else {
                order.push_back(r);
            }
        }
        std::sort(order.begin(), order.end(), [colv](int a, int b) {
            if (colv[a] != colv[b]) return colv[a] < colv[b];
            return a < b;
        });
    }
    return ctx;
}

// Midpoint threshold clamped so rows with value <= thr are exactly the rows
// with value <= lo (rounding can push the midpoint onto hi).
double split_threshold(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    if (mid >= hi) return lo;
    return mid;
}

struct NodeAccum {
    // node totals, fixed for the level
    double g_total = 0, h_total = 0;
    int count = 0;
    // per-feature scan state
    double g_left = 0, h_left = 0;
    int count_left = 0;
    double prev_value = 0;
    bool has_prev = false;
    double g_miss = 0, h_miss = 0;
    int count_miss = 0;
    // best candidate across features
    double best_gain = kMinSplitGain;
    int best_feature = -1;
    double best_threshold = 0;
    bool best_missing_left = true;
    double best_left_g = 0, best_left_h = 0;
    int best_left_count = 0;
};

// Level-synchronous exact greedy builder: one pass over each feature's
// global sort per level, dispatching rows to their current node.
class TreeBuilder {
  public:
    TreeBuilder(const SplitContext& ctx, std::span<const double> g, std::span<const double> h,
                TreeParams params)
        : ctx_(ctx), g_(g), h_(h), params_(params) {}

    RegressionTree build() {
        RegressionTree tree;
        tree.nodes.emplace_back();

        node_of_.assign(static_cast<std::size_t>(ctx_.n), 0);
        double g_root = 0, h_root = 0;
        for (int r = 0; r < ctx_.n; ++r) {
            g_root += g_[static_cast<std::size_t>(r)];
            h_root += h_[static_cast<std::size_t>(r)];
        }

        std::vector<int> active = {0};
        std::vector<NodeAccum> accums(1);
        accums[0].g_total = g_root;
        accums[0].h_total = h_root;
        accums[0].count = ctx_.n;

        for (int depth = 0; depth < params_.max_depth && !active.empty(); ++depth) {
            node_slot_.assign(tree.nodes.size(), -1);
            for (std::size_t s = 0; s < active.size(); ++s) {
                node_slot_[static_cast<std::size_t>(active[s])] = static_cast<int>(s);
            }

            for (int f = 0; f < ctx_.d; ++f) scan_feature(f, accums);

            std::vector<int> next_active;
            std::vector<NodeAccum> next_accums;
            for (std::size_t s = 0; s < active.size(); ++s) {
                const int nid = active[s];
                const NodeAccum& acc = accums[s];
                TreeNode& node = tree.nodes[static_cast<std::size_t>(nid)];
                if (acc.best_feature < 0) {
                    node.value = -acc.g_total / acc.h_total;
                    continue;
                }
                node.feature = acc.best_feature;
                node.threshold = acc.best_threshold;
                node.missing_left = acc.best_missing_left;
                node.gain = acc.best_gain;
                node.left = static_cast<int>(tree.nodes.size());
                node.right = node.left + 1;
                tree.nodes.emplace_back();
                tree.nodes.emplace_back();

                NodeAccum left, right;
                left.g_total = acc.best_left_g;
                left.h_total = acc.best_left_h;
                left.count = acc.best_left_count;
                right.g_total = acc.g_total - acc.best_left_g;
                right.h_total = acc.h_total - acc.best_left_h;
                right.count = acc.count - acc.best_left_count;
                next_active.push_back(node.left);
                next_accums.push_back(left);
                next_active.push_back(node.right);
                next_accums.push_back(right);
            }

            if (!next_active.empty()) route_rows(tree);
            active = std::move(next_active);
            accums = std::move(next_accums);
        }

        // Depth limit reached: remaining nodes become leaves.
        for (std::size_t s = 0; s < active.size(); ++s) {
            TreeNode& node = tree.nodes[static_cast<std::size_t>(active[s])];
            node.value = -accums[s].g_total / accums[s].h_total;
        }
        return tree;
    }

  private:
    void scan_feature(int f, std::vector<NodeAccum>& accums) {
        for (auto& acc : accums) {
            acc.g_left = acc.h_left = 0;
            acc.count_left = 0;
            acc.has_prev = false;
            acc.g_miss = acc.h_miss = 0;
            acc.count_miss = 0;
        }
        for (int r : ctx_.missing[static_cast<std::size_t>(f)]) {
            const int slot = node_slot_[static_cast<std::size_t>(node_of_[static_cast<std::size_t>(r)])];
            if (slot < 0) continue;
            NodeAccum& acc = accums[static_cast<std::size_t>(slot)];
            acc.g_miss += g_[static_cast<std::size_t>(r)];
            acc.h_miss += h_[static_cast<std::size_t>(r)];
            ++acc.count_miss;
        }
        for (int r : ctx_.sorted[static_cast<std::size_t>(f)]) {
            const int slot = node_slot_[static_cast<std::size_t>(node_of_[static_cast<std::size_t>(r)])];
            if (slot < 0) continue;
            NodeAccum& acc = accums[static_cast<std::size_t>(slot)];
            const double v = ctx_.value(f, r);
            if (acc.has_prev && v != acc.prev_value) {
                try_boundary(acc, f, split_threshold(acc.prev_value, v));
            }
            acc.g_left += g_[static_cast<std::size_t>(r)];
            acc.h_left += h_[static_cast<std::size_t>(r)];
            ++acc.count_left;
            acc.prev_value = v;
            acc.has_prev = true;
        }
    }

    void try_boundary(NodeAccum& acc, int feature, double threshold) {
        const double parent = acc.g_total * acc.g_total / acc.h_total;
        // Missing left first so an exact tie keeps the left default.
        for (int dir = 0; dir < 2; ++dir) {
            const bool missing_left = dir == 0;
            const double gl = acc.g_left + (missing_left ? acc.g_miss : 0.0);
            const double hl = acc.h_left + (missing_left ? acc.h_miss : 0.0);
            const int nl = acc.count_left + (missing_left ? acc.count_miss : 0);
            const int nr = acc.count - nl;
            if (nl < params_.min_child_rows || nr < params_.min_child_rows) continue;
            const double gr = acc.g_total - gl;
            const double hr = acc.h_total - hl;
            const double gain = gl * gl / hl + gr * gr / hr - parent;
            if (gain_improves(gain, acc.best_gain)) {
                acc.best_gain = gain;
                acc.best_feature = feature;
                acc.best_threshold = threshold;
                acc.best_missing_left = missing_left;
                acc.best_left_g = gl;
                acc.best_left_h = hl;
                acc.best_left_count = nl;
            }
        }
    }

    void route_rows(const RegressionTree& tree) {
        for (int r = 0; r < ctx_.n; ++r) {
            const int nid = node_of_[static_cast<std::size_t>(r)];
            if (node_slot_[static_cast<std::size_t>(nid)] < 0) continue;
            const TreeNode& node = tree.nodes[static_cast<std::size_t>(nid)];
            if (node.is_leaf()) continue;
            const double v = ctx_.value(node.feature, r);
            bool left;
            if (is_missing(v)) {
                left = node.missing_left;
            } else {
                left = v <= node.threshold;
            }
            node_of_[static_cast<std::size_t>(r)] = left ? node.left : node.right;
        }
    }

    const SplitContext& ctx_;
    std::span<const double> g_;
    std::span<const double> h_;
    TreeParams params_;
    std::vector<int> node_of_;
    std::vector<int> node_slot_;
};

RegressionTree fit_tree_with_context(const SplitContext& ctx, std::span<const double> g,
                                     std::span<const double> h, TreeParams params) {
    return TreeBuilder(ctx, g, h, params).build();
}

double softplus(double x) {
    if (x > 0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

}  // namespace

double RegressionTree::predict(std::span<const double> row) const {
    int id = 0;
    while (!nodes[static_cast<std::size_t>(id)].is_leaf()) {
        const TreeNode& node = nodes[static_cast<std::size_t>(id)];
        const double v = row[static_cast<std::size_t>(node.feature)];
        bool left;
        if (is_missing(v)) {
            left = node.missing_left;
        } else {
            left = v <= node.threshold;
        }
        id = left ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(id)].value;
}

int RegressionTree::n_splits() const {
    int count = 0;
    for (const auto& node : nodes) {
        if (!node.is_leaf()) ++count;
    }
    return count;
}

RegressionTree fit_tree(DataView X, std::span<const double> gradients,
                        std::span<const double> hessians, TreeParams params) {
    if (X.n_rows <= 0) throw Error("fit_tree: empty input");
    if (gradients.size() != static_cast<std::size_t>(X.n_rows) ||
        hessians.size() != static_cast<std::size_t>(X.n_rows)) {
        throw Error("fit_tree: gradient/hessian length mismatch");
    }
    for (double h : hessians) {
        if (!(h > 0)) throw Error("fit_tree: hessians must be positive");
    }
    const SplitContext ctx = build_context(X);
    return fit_tree_with_context(ctx, gradients, hessians, params);
}

double GbtModel::decision_function(std::span<const double> row) const {
    if (static_cast<int>(row.size()) != n_features) {
        throw WidthMismatch("predict: row width " + std::to_string(row.size()) +
                            " != training width " + std::to_string(n_features));
    }
    double score = base_score;
    for (const auto& tree : trees) score += tree.predict(row);
    return score;
}

GbtModel train_gbt(DataView X, const std::vector<int>& labels, GbtParams params,
                   std::vector<std::string> column_names) {
    const int n = X.n_rows;
    if (n < 10) throw TooFewRows("train_gbt: need at least 10 rows, got " + std::to_string(n));
    if (static_cast<int>(labels.size()) != n) throw Error("train_gbt: label length mismatch");
    if (!column_names.empty() && static_cast<int>(column_names.size()) != X.n_cols) {
        throw Error("train_gbt: column name count mismatch");
    }

    int n_pos = 0;
    for (int y : labels) {
        if (y != 1 && y != -1) throw Error("train_gbt: labels must be +1/-1");
        if (y == 1) ++n_pos;
    }
    GbtModel model;
    model.params = params;
    model.shrinkage = params.shrinkage;
    model.n_features = X.n_cols;
    model.column_names = std::move(column_names);
    model.degenerate_labels = n_pos == 0 || n_pos == n;

    const double p_clamped =
        std::clamp(static_cast<double>(n_pos) / n, 1e-6, 1.0 - 1e-6);
    model.base_score = std::log(p_clamped / (1.0 - p_clamped));

    std::vector<double> y01(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) y01[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(i)] > 0 ? 1.0 : 0.0;
    std::vector<double> scores(static_cast<std::size_t>(n), model.base_score);

    auto mean_deviance = [&] {
        double total = 0;
        for (int i = 0; i < n; ++i) {
            const double s = scores[static_cast<std::size_t>(i)];
            // -log p for positives, -log(1-p) for negatives, in stable form
            total += y01[static_cast<std::size_t>(i)] > 0.5 ? softplus(-s) : softplus(s);
        }
        return total / n;
    };
    model.loss_curve.push_back(mean_deviance());
    if (model.degenerate_labels) return model;

    const SplitContext ctx = build_context(X);
    const TreeParams tree_params{params.max_depth, params.min_child_rows};
    std::vector<double> g(static_cast<std::size_t>(n));
    std::vector<double> h(static_cast<std::size_t>(n));
    for (int m = 0; m < params.n_trees; ++m) {
        for (int i = 0; i < n; ++i) {
            const double p = sigmoid(scores[static_cast<std::size_t>(i)]);
            g[static_cast<std::size_t>(i)] = p - y01[static_cast<std::size_t>(i)];
            h[static_cast<std::size_t>(i)] = p * (1.0 - p);
        }
        RegressionTree tree = fit_tree_with_context(ctx, g, h, tree_params);
        for (auto& node : tree.nodes) {
            if (node.is_leaf()) node.value *= params.shrinkage;
        }
        for (int i = 0; i < n; ++i) {
            scores[static_cast<std::size_t>(i)] += tree.predict(X.row(i));
        }
        model.trees.push_back(std::move(tree));
        model.loss_curve.push_back(mean_deviance());
    }
    return model;
}

double predict_proba(const GbtModel& model, std::span<const double> row) {
    return sigmoid(model.decision_function(row));
}

std::vector<ImportanceEntry> feature_importance(const GbtModel& model) {
    std::vector<double> gain(static_cast<std::size_t>(model.n_features), 0.0);
    double total = 0;
    for (const auto& tree : model.trees) {
        for (const auto& node : tree.nodes) {
            if (node.is_leaf()) continue;
            gain[static_cast<std::size_t>(node.feature)] += node.gain;
            total += node.gain;
        }
    }
    if (total <= 0) return {};  // all-leaf model: no ranking to report

    std::vector<int> order(gain.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&gain](int a, int b) {
        return gain[static_cast<std::size_t>(a)] > gain[static_cast<std::size_t>(b)];
    });
    std::vector<ImportanceEntry> out;
    out.reserve(order.size());
    for (int idx : order) {
        std::string name = model.column_names.empty()
                               ? "f" + std::to_string(idx)
                               : model.column_names[static_cast<std::size_t>(idx)];
        out.push_back({std::move(name), gain[static_cast<std::size_t>(idx)] / total});
    }
    return out;
}

void GbtModel::save(const std::string& path) const {
    std::ostringstream out;
    out << "riskrank-gbt v1\n";
    out << "base_score " << format_double(base_score) << "\n";
    out << "shrinkage " << format_double(shrinkage) << "\n";
    out << "n_features " << n_features << "\n";
    out << "degenerate " << (degenerate_labels ? 1 : 0) << "\n";
    out << "columns " << column_names.size();
    for (const auto& name : column_names) out << " " << name;
    out << "\n";
    out << "trees " << trees.size() << "\n";
    for (std::size_t t = 0; t < trees.size(); ++t) {
        const auto& nodes = trees[t].nodes;
        out << "tree " << t << " nodes " << nodes.size() << "\n";
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const TreeNode& node = nodes[i];
            if (node.is_leaf()) {
                out << "node " << i << " leaf " << format_double(node.value) << "\n";
            } else {
                out << "node " << i << " split " << node.feature << " "
                    << format_double(node.threshold) << " " << (node.missing_left ? 'L' : 'R')
                    << " " << format_double(node.gain) << " " << node.left << " " << node.right
                    << "\n";
            }
        }
    }
    write_file_atomic(path, out.str());
}

GbtModel GbtModel::load(const std::string& path) {
    std::istringstream in(read_file(path));
    auto fail = [&path](const std::string& what) -> std::runtime_error {
        return Error("GbtModel::load: " + path + ": " + what);
    };
    std::string line;
    if (!std::getline(in, line) || trim(line) != "riskrank-gbt v1") throw fail("bad magic");

    GbtModel model;
    auto expect_key = [&](const std::string& key) -> std::string {
        if (!std::getline(in, line)) throw fail("truncated before '" + key + "'");
        const std::string trimmed = trim(line);
        if (trimmed.size() <= key.size() + 1 || trimmed.compare(0, key.size(), key) != 0 ||
            trimmed[key.size()] != ' ') {
            throw fail("expected '" + key + " ...', got '" + trimmed + "'");
        }
        return trimmed.substr(key.size() + 1);
    };
    auto as_double = [&](const std::string& s) {
        const auto v = parse_double(s);
        if (!v) throw fail("bad number '" + s + "'");
        return *v;
    };
    auto as_int = [&](const std::string& s) {
        const auto v = parse_int(s);
        if (!v) throw fail("bad integer '" + s + "'");
        return static_cast<int>(*v);
    };

    model.base_score = as_double(expect_key("base_score"));
    model.shrinkage = as_double(expect_key("shrinkage"));
    model.n_features = as_int(expect_key("n_features"));
    model.degenerate_labels = as_int(expect_key("degenerate")) != 0;

    const auto columns = split(expect_key("columns"), ' ');
    const int n_columns = as_int(columns[0]);
    if (static_cast<int>(columns.size()) != n_columns + 1) throw fail("column count mismatch");
    model.column_names.assign(columns.begin() + 1, columns.end());

    const int n_trees = as_int(expect_key("trees"));
    model.trees.reserve(static_cast<std::size_t>(n_trees));
    for (int t = 0; t < n_trees; ++t) {
        const auto header = split(expect_key("tree"), ' ');
        if (header.size() != 3 || as_int(header[0]) != t || header[1] != "nodes") {
            throw fail("bad tree header");
        }
        const int n_nodes = as_int(header[2]);
        RegressionTree tree;
        tree.nodes.resize(static_cast<std::size_t>(n_nodes));
        for (int i = 0; i < n_nodes; ++i) {
            const auto fields = split(expect_key("node"), ' ');
            if (fields.size() < 2) throw fail("bad node line");
            const int id = as_int(fields[0]);
            if (id < 0 || id >= n_nodes) throw fail("node id out of range");
            TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
            if (fields[1] == "leaf") {
                if (fields.size() != 3) throw fail("bad leaf line");
                node.feature = -1;
                node.value = as_double(fields[2]);
            } else if (fields[1] == "split") {
                if (fields.size() != 8) throw fail("bad split line");
                node.feature = as_int(fields[2]);
                node.threshold = as_double(fields[3]);
                if (fields[4] != "L" && fields[4] != "R") throw fail("bad missing direction");
                node.missing_left = fields[4] == "L";
                node.gain = as_double(fields[5]);
                node.left = as_int(fields[6]);
                node.right = as_int(fields[7]);
                if (node.feature < 0 || node.feature >= model.n_features || node.left < 0 ||
                    node.left >= n_nodes || node.right < 0 || node.right >= n_nodes) {
                    throw fail("split references out of range");
                }
            } else {
                throw fail("unknown node kind '" + fields[1] + "'");
            }
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

KnnModel knn_fit(DataView X, const std::vector<int>& labels, int k) {
    if (k < 1) throw Error("knn_fit: K must be >= 1");
    if (X.n_rows <= 0) throw Error("knn_fit: empty training set");
    if (static_cast<int>(labels.size()) != X.n_rows) throw Error("knn_fit: label length mismatch");
    if (k > X.n_rows) {
        throw KTooLarge("knn_fit: K=" + std::to_string(k) + " exceeds " +
                        std::to_string(X.n_rows) + " training rows");
    }
    KnnModel m;
    m.k_ = k;
    m.d_ = X.n_cols;
    m.labels_ = labels;
    m.mean_.assign(static_cast<std::size_t>(X.n_cols), 0.0);
    m.stddev_.assign(static_cast<std::size_t>(X.n_cols), 0.0);
    for (int c = 0; c < X.n_cols; ++c) {
        double sum = 0;
        for (int r = 0; r < X.n_rows; ++r) sum += X.at(r, c);
        const double mean = sum / X.n_rows;
        double sq = 0;
        for (int r = 0; r < X.n_rows; ++r) {
            const double d = X.at(r, c) - mean;
            sq += d * d;
        }
        double sd = std::sqrt(sq / X.n_rows);
        if (sd == 0.0) sd = 1.0;  // constant column
        m.mean_[static_cast<std::size_t>(c)] = mean;
        m.stddev_[static_cast<std::size_t>(c)] = sd;
    }
    m.rows_.resize(static_cast<std::size_t>(X.n_rows) * static_cast<std::size_t>(X.n_cols));
    for (int r = 0; r < X.n_rows; ++r) {
        for (int c = 0; c < X.n_cols; ++c) {
            m.rows_[static_cast<std::size_t>(r) * static_cast<std::size_t>(X.n_cols) +
                    static_cast<std::size_t>(c)] =
                (X.at(r, c) - m.mean_[static_cast<std::size_t>(c)]) /
                m.stddev_[static_cast<std::size_t>(c)];
        }
    }
    m.fitted_ = true;
    return m;
}

void KnnModel::standardize(std::span<const double> row, std::vector<double>& out) const {
    out.resize(static_cast<std::size_t>(d_));
    for (int c = 0; c < d_; ++c) {
        out[static_cast<std::size_t>(c)] =
            (row[static_cast<std::size_t>(c)] - mean_[static_cast<std::size_t>(c)]) /
            stddev_[static_cast<std::size_t>(c)];
    }
}

std::vector<int> KnnModel::neighbor_order(std::span<const double> row) const {
    if (!fitted_) throw NotFitted("knn: predict before fit");
    if (static_cast<int>(row.size()) != d_) {
        throw WidthMismatch("knn: row width " + std::to_string(row.size()) +
                            " != training width " + std::to_string(d_));
    }
    std::vector<double> q;
    standardize(row, q);
    const int n = n_train();
    std::vector<std::pair<double, int>> dist;
    dist.reserve(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) {
        const double* train = &rows_[static_cast<std::size_t>(r) * static_cast<std::size_t>(d_)];
        double d2 = 0;
        for (int c = 0; c < d_; ++c) {
            const double diff = q[static_cast<std::size_t>(c)] - train[c];
            d2 += diff * diff;
        }
        dist.emplace_back(d2, r);
    }
    std::sort(dist.begin(), dist.end());
    std::vector<int> order;
    order.reserve(dist.size());
    for (const auto& [d2, r] : dist) order.push_back(r);
    return order;
}

double KnnModel::predict_proba(std::span<const double> row) const {
    const auto order = neighbor_order(row);
    int positives = 0;
    for (int i = 0; i < k_; ++i) {
        if (labels_[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] > 0) ++positives;
    }
    return static_cast<double>(positives) / k_;
}

double knn_predict_proba(const KnnModel& model, std::span<const double> row) {
    return model.predict_proba(row);
}

}  // namespace riskrank::model
