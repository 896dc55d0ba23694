#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskrank/common.hpp"
#include "riskrank/features.hpp"
#include "riskrank/model.hpp"

namespace riskrank::eval {

struct TooFewPerClass : ValidationError {
    using ValidationError::ValidationError;
};
struct SingleClass : Error {
    using Error::Error;
};
struct NoPositives : Error {
    using Error::Error;
};

struct FoldAssignment {
    int n_folds = 5;
    std::uint64_t seed = 0;
    std::vector<int> fold;  // one entry per row, in 0..n_folds-1
};

// Seeded shuffle within each class, then round-robin assignment, so
// per-fold class counts differ by at most one.
FoldAssignment stratified_kfold(const std::vector<int>& labels, int n_folds, std::uint64_t seed);

// Mann-Whitney AUC via rank sums with average ranks for ties.
double auc(std::span<const double> scores, std::span<const int> labels);

struct PrecisionRecall {
    std::optional<double> precision;  // absent when nothing predicted positive
    double recall = 0.0;
};

// Positive prediction iff score >= threshold.
PrecisionRecall precision_recall(std::span<const double> scores, std::span<const int> labels,
                                 double threshold = 0.5);

// ROC step curve from (0,0) to (1,1) for external plotting.
std::vector<std::pair<double, double>> roc_curve(std::span<const double> scores,
                                                 std::span<const int> labels);

struct GbtGrid {
    std::vector<int> depths = {1, 2, 3};
    std::vector<int> n_trees = {50, 100, 150};
};

struct GbtCell {
    int depth = 0;
    int n_trees = 0;
    std::vector<double> fold_auc;
    double mean_auc = 0.0;
    bool failed = false;
    std::string error;
};

struct GbtSearchResult {
    model::GbtParams best;
    double best_mean_auc = 0.0;
    std::vector<GbtCell> cells;
};

// Mean validation AUC over 5 stratified folds per cell; argmax wins, ties
// broken by smaller depth then fewer trees. Failing cells are recorded and
// excluded.
GbtSearchResult grid_search_gbt(const features::FeatureMatrix& matrix, GbtGrid grid,
                                std::uint64_t seed);

struct KnnGrid {
    std::vector<int> ks = {1, 3, 5, 7, 9, 15, 25};
};

struct KnnCell {
    int k = 0;
    std::vector<double> fold_auc;
    double mean_auc = 0.0;
    bool failed = false;
    std::string error;
};

struct KnnSearchResult {
    int best_k = 0;
    double best_mean_auc = 0.0;
    std::vector<KnnCell> cells;
};

KnnSearchResult grid_search_knn(const features::FeatureMatrix& matrix, KnnGrid grid,
                                std::uint64_t seed);

struct SubsetMetrics {
    std::string name;  // "P", "P+A", "P+E", "P+E+A"
    std::optional<double> precision;
    double recall = 0.0;
    double auc = 0.0;
    std::vector<int> chosen_k;  // per outer fold
    int n_columns = 0;
    std::vector<std::pair<double, double>> roc;  // pooled out-of-fold
};

struct EvalReport {
    std::vector<SubsetMetrics> subsets;
    model::GbtParams gbt_params;
    double gbt_cv_auc = 0.0;
    std::vector<model::ImportanceEntry> importance;  // full ranking, descending
    std::uint64_t seed = 0;
    int n_rows = 0;
    int n_columns = 0;
    std::array<int, 3> family_counts{};
    std::vector<int> knn_grid;
};

// Feature-subset ablation over {P}, {P,A}, {P,E}, {P,E,A}: nested 5-fold
// cross-validation (outer folds for reporting, inner folds select K), KNN
// metrics reported as CV averages; the GBT is grid-searched and trained on
// the full matrix to produce the importance ranking.
EvalReport run_ablation(const features::FeatureMatrix& full, const KnnGrid& knn_grid,
                        const GbtGrid& gbt_grid, std::uint64_t seed);

// Published performance on the real CHAD/NEI/EPA corpora. Those corpora are
// not bundled, so these are reference targets for users running real data,
// not assertions for the synthetic pipeline.
struct ReferenceRow {
    const char* features;
    double precision;
    double recall;
    double auc;
};
std::span<const ReferenceRow> reference_targets();

}  // namespace riskrank::eval
