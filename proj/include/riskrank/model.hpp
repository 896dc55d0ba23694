#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "riskrank/common.hpp"

namespace riskrank::model {

struct WidthMismatch : Error {
    using Error::Error;
};
struct KTooLarge : Error {
    using Error::Error;
};
struct NotFitted : Error {
    using Error::Error;
};
struct TooFewRows : Error {
    using Error::Error;
};

// Row-major numeric view; NaN cells are missing and follow each split's
// recorded missing direction.
struct DataView {
    const double* data = nullptr;
    int n_rows = 0;
    int n_cols = 0;

    double at(int r, int c) const {
        return data[static_cast<std::size_t>(r) * static_cast<std::size_t>(n_cols) +
                    static_cast<std::size_t>(c)];
    }
    std::span<const double> row(int r) const {
        return {data + static_cast<std::size_t>(r) * static_cast<std::size_t>(n_cols),
                static_cast<std::size_t>(n_cols)};
    }
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    bool missing_left = true;
    double value = 0.0;  // leaf prediction
    double gain = 0.0;   // recorded split gain
    int left = -1;
    int right = -1;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(std::span<const double> row) const;
    int n_splits() const;
};

struct TreeParams {
    int max_depth = 3;
    int min_child_rows = 5;
};

// Gains this small are indistinguishable from rounding noise of a zero-gain
// split; candidates must clear it.
inline constexpr double kMinSplitGain = 1e-12;

// Two candidates whose gains agree to this relative tolerance are a tie.
// Mathematically equal gains (e.g. two features inducing the same row
// partition) round differently depending on summation order, so the
// comparison cannot be exact; ties keep the earlier candidate (lower
// feature index, then lower threshold, then missing-left).
inline constexpr double kGainTieTolerance = 1e-10;

inline bool gain_improves(double gain, double best) {
    return gain > best + kGainTieTolerance * std::max(1.0, std::abs(best));
}

// Greedy CART on Newton targets: each split maximizes
// GL^2/HL + GR^2/HR - G^2/H over midpoint thresholds, with missing values
// routed to whichever side gains more (ties keep left). Leaves carry the
// Newton step -G/H. Tie between features goes to the lower column index.
RegressionTree fit_tree(DataView X, std::span<const double> gradients,
                        std::span<const double> hessians, TreeParams params);

struct GbtParams {
    int max_depth = 3;
    int n_trees = 100;
    double shrinkage = 0.1;
    int min_child_rows = 5;
};

// Additive model: probability = sigmoid(base_score + sum of tree outputs).
// Shrinkage is folded into the stored leaf values.
struct GbtModel {
    double base_score = 0.0;
    double shrinkage = 0.1;
    int n_features = 0;
    bool degenerate_labels = false;  // single-class training set; prior only
    std::vector<std::string> column_names;  // empty when trained on raw arrays
    std::vector<RegressionTree> trees;
    std::vector<double> loss_curve;  // mean binomial deviance; [0] is the prior
    GbtParams params;

    double decision_function(std::span<const double> row) const;

    void save(const std::string& path) const;
    static GbtModel load(const std::string& path);
};

// Binomial deviance boosting, deterministic (no subsampling). Labels are
// +1/-1; base score is the prior log-odds.
GbtModel train_gbt(DataView X, const std::vector<int>& labels, GbtParams params,
                   std::vector<std::string> column_names = {});

double predict_proba(const GbtModel& model, std::span<const double> row);

struct ImportanceEntry {
    std::string feature;
    double importance;
};

// Total split gain per feature across the ensemble, normalized to sum to 1,
// descending; ties keep column order. Empty when the model has no splits.
std::vector<ImportanceEntry> feature_importance(const GbtModel& model);

class KnnModel {
  public:
    KnnModel() = default;

    bool fitted() const { return fitted_; }
    int k() const { return k_; }
    int n_train() const { return static_cast<int>(labels_.size()); }

    double predict_proba(std::span<const double> row) const;

    // Training-row indices by (distance, row order); prefix counts give the
    // prediction for any K, which lets grid search reuse one sort per query.
    std::vector<int> neighbor_order(std::span<const double> row) const;
    int label(int train_row) const { return labels_[static_cast<std::size_t>(train_row)]; }

  private:
    friend KnnModel knn_fit(DataView X, const std::vector<int>& labels, int k);

    int k_ = 0;
    int d_ = 0;
    bool fitted_ = false;
    std::vector<double> mean_, stddev_;
    std::vector<double> rows_;  // standardized, row-major
    std::vector<int> labels_;

    void standardize(std::span<const double> row, std::vector<double>& out) const;
};

// Columns are z-scored with training statistics (constant columns keep
// stddev 1); Euclidean distance; probability is the positive fraction among
// the K nearest, distance ties broken by training-row order.
KnnModel knn_fit(DataView X, const std::vector<int>& labels, int k);
double knn_predict_proba(const KnnModel& model, std::span<const double> row);

}  // namespace riskrank::model
