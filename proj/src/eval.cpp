#include "riskrank/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace riskrank::eval {

namespace {

std::uint64_t inner_seed(std::uint64_t seed, int outer_fold) {
    return seed * 1000003ULL + static_cast<std::uint64_t>(outer_fold) + 1;
}

model::DataView view_of(const features::FeatureMatrix& m) {
    return {m.values.data(), m.n_rows(), m.n_cols()};
}

std::pair<std::vector<int>, std::vector<int>> fold_split(const FoldAssignment& folds, int fold) {
    std::vector<int> train, test;
    for (std::size_t r = 0; r < folds.fold.size(); ++r) {
        if (folds.fold[r] == fold) {
            test.push_back(static_cast<int>(r));
        } else {
            train.push_back(static_cast<int>(r));
        }
    }
    return {std::move(train), std::move(test)};
}

}  // namespace

FoldAssignment stratified_kfold(const std::vector<int>& labels, int n_folds, std::uint64_t seed) {
    if (n_folds < 1) throw Error("stratified_kfold: n_folds must be >= 1");
    std::vector<int> positives, negatives;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) {
            positives.push_back(static_cast<int>(i));
        } else if (labels[i] == -1) {
            negatives.push_back(static_cast<int>(i));
        } else {
            throw Error("stratified_kfold: labels must be +1/-1");
        }
    }
    if (static_cast<int>(positives.size()) < n_folds ||
        static_cast<int>(negatives.size()) < n_folds) {
        throw TooFewPerClass("stratified_kfold: need >= " + std::to_string(n_folds) +
                             " rows per class");
    }
    Rng rng(seed);
    rng.shuffle(positives);
    rng.shuffle(negatives);
    FoldAssignment out;
    out.n_folds = n_folds;
    out.seed = seed;
    out.fold.assign(labels.size(), 0);
    for (std::size_t i = 0; i < positives.size(); ++i) {
        out.fold[static_cast<std::size_t>(positives[i])] = static_cast<int>(i % n_folds);
    }
    for (std::size_t i = 0; i < negatives.size(); ++i) {
        out.fold[static_cast<std::size_t>(negatives[i])] = static_cast<int>(i % n_folds);
    }
    return out;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error("auc: length mismatch");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int y : labels) {
        if (y == 1) ++n_pos;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw SingleClass("auc: both classes required");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&scores](int a, int b) {
        return scores[static_cast<std::size_t>(a)] < scores[static_cast<std::size_t>(b)];
    });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[static_cast<std::size_t>(order[j])] ==
                            scores[static_cast<std::size_t>(order[i])]) {
            ++j;
        }
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[static_cast<std::size_t>(order[k])] == 1) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    const double np = static_cast<double>(n_pos);
    const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(n_neg));
}

PrecisionRecall precision_recall(std::span<const double> scores, std::span<const int> labels,
                                 double threshold) {
    if (scores.size() != labels.size()) throw Error("precision_recall: length mismatch");
    int tp = 0, fp = 0, fn = 0;
    bool any_positive = false;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool truth = labels[i] == 1;
        any_positive = any_positive || truth;
        const bool predicted = scores[i] >= threshold;
        if (predicted && truth) ++tp;
        if (predicted && !truth) ++fp;
        if (!predicted && truth) ++fn;
    }
    if (!any_positive) throw NoPositives("precision_recall: no positive labels");
    PrecisionRecall out;
    if (tp + fp > 0) out.precision = static_cast<double>(tp) / (tp + fp);
    out.recall = static_cast<double>(tp) / (tp + fn);
    return out;
}

std::vector<std::pair<double, double>> roc_curve(std::span<const double> scores,
                                                 std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error("roc_curve: length mismatch");
    std::size_t n_pos = 0;
    for (int y : labels) {
        if (y == 1) ++n_pos;
    }
    const std::size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw SingleClass("roc_curve: both classes required");

    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&scores](int a, int b) {
        return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    });
    std::vector<std::pair<double, double>> out;
    out.emplace_back(0.0, 0.0);
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[static_cast<std::size_t>(order[j])] ==
                                       scores[static_cast<std::size_t>(order[i])]) {
            if (labels[static_cast<std::size_t>(order[j])] == 1) {
                ++tp;
            } else {
                ++fp;
            }
            ++j;
        }
        out.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                         static_cast<double>(tp) / static_cast<double>(n_pos));
        i = j;
    }
    return out;
}

GbtSearchResult grid_search_gbt(const features::FeatureMatrix& matrix, GbtGrid grid,
                                std::uint64_t seed) {
    if (grid.depths.empty() || grid.n_trees.empty()) throw Error("grid_search_gbt: empty grid");
    std::sort(grid.depths.begin(), grid.depths.end());
    std::sort(grid.n_trees.begin(), grid.n_trees.end());

    const int n_folds = 5;
    const FoldAssignment folds = stratified_kfold(matrix.labels, n_folds, seed);

    struct FoldData {
        features::FeatureMatrix train;
        features::FeatureMatrix test;
    };
    std::vector<FoldData> fold_data;
    fold_data.reserve(static_cast<std::size_t>(n_folds));
    for (int f = 0; f < n_folds; ++f) {
        auto [train_rows, test_rows] = fold_split(folds, f);
        fold_data.push_back({matrix.subset_rows(train_rows), matrix.subset_rows(test_rows)});
    }

    GbtSearchResult result;
    for (int depth : grid.depths) {
        for (int trees : grid.n_trees) {
            GbtCell cell;
            cell.depth = depth;
            cell.n_trees = trees;
            cell.fold_auc.assign(static_cast<std::size_t>(n_folds), 0.0);
            result.cells.push_back(std::move(cell));
        }
    }

    const int n_tasks = static_cast<int>(result.cells.size()) * n_folds;
    std::vector<std::string> task_errors(static_cast<std::size_t>(n_tasks));
    parallel_tasks(n_tasks, [&](int task) {
        const int cell_idx = task / n_folds;
        const int fold = task % n_folds;
        GbtCell& cell = result.cells[static_cast<std::size_t>(cell_idx)];
        const FoldData& data = fold_data[static_cast<std::size_t>(fold)];
        try {
            model::GbtParams params;
            params.max_depth = cell.depth;
            params.n_trees = cell.n_trees;
            const auto gbt = model::train_gbt(view_of(data.train), data.train.labels, params);
            std::vector<double> scores(static_cast<std::size_t>(data.test.n_rows()));
            for (int r = 0; r < data.test.n_rows(); ++r) {
                scores[static_cast<std::size_t>(r)] = model::predict_proba(gbt, data.test.row(r));
            }
            cell.fold_auc[static_cast<std::size_t>(fold)] = auc(scores, data.test.labels);
        } catch (const std::exception& e) {
            task_errors[static_cast<std::size_t>(task)] = e.what();
        }
    });

    bool any_ok = false;
    for (std::size_t c = 0; c < result.cells.size(); ++c) {
        GbtCell& cell = result.cells[c];
        for (int f = 0; f < n_folds; ++f) {
            const auto& err = task_errors[c * static_cast<std::size_t>(n_folds) +
                                          static_cast<std::size_t>(f)];
            if (!err.empty()) {
                cell.failed = true;
                cell.error = err;
            }
        }
        if (cell.failed) continue;
        cell.mean_auc = std::accumulate(cell.fold_auc.begin(), cell.fold_auc.end(), 0.0) / n_folds;
        if (!any_ok || cell.mean_auc > result.best_mean_auc) {
            any_ok = true;
            result.best_mean_auc = cell.mean_auc;
            result.best.max_depth = cell.depth;
            result.best.n_trees = cell.n_trees;
        }
    }
    if (!any_ok) throw Error("grid_search_gbt: every grid cell failed");
    return result;
}

KnnSearchResult grid_search_knn(const features::FeatureMatrix& matrix, KnnGrid grid,
                                std::uint64_t seed) {
    if (grid.ks.empty()) throw Error("grid_search_knn: empty grid");
    std::sort(grid.ks.begin(), grid.ks.end());

    const int n_folds = 5;
    const FoldAssignment folds = stratified_kfold(matrix.labels, n_folds, seed);

    KnnSearchResult result;
    for (int k : grid.ks) {
        KnnCell cell;
        cell.k = k;
        cell.fold_auc.assign(static_cast<std::size_t>(n_folds), 0.0);
        result.cells.push_back(std::move(cell));
    }

    // One neighbor sort per (fold, query) serves every K.
    std::vector<std::vector<std::string>> fold_errors(
        static_cast<std::size_t>(n_folds), std::vector<std::string>(grid.ks.size()));
    parallel_tasks(n_folds, [&](int fold) {
        auto [train_rows, test_rows] = fold_split(folds, fold);
        const auto train = matrix.subset_rows(train_rows);
        const auto test = matrix.subset_rows(test_rows);
        model::KnnModel knn;
        try {
            knn = model::knn_fit(view_of(train), train.labels, 1);
        } catch (const std::exception& e) {
            for (std::size_t c = 0; c < grid.ks.size(); ++c) {
                fold_errors[static_cast<std::size_t>(fold)][c] = e.what();
            }
            return;
        }
        std::vector<std::vector<int>> orders(static_cast<std::size_t>(test.n_rows()));
        for (int r = 0; r < test.n_rows(); ++r) {
            orders[static_cast<std::size_t>(r)] = knn.neighbor_order(test.row(r));
        }
        for (std::size_t c = 0; c < grid.ks.size(); ++c) {
            const int k = grid.ks[c];
            if (k > train.n_rows()) {
                fold_errors[static_cast<std::size_t>(fold)][c] =
                    "K=" + std::to_string(k) + " exceeds training rows";
                continue;
            }
            std::vector<double> scores(static_cast<std::size_t>(test.n_rows()));
            for (int r = 0; r < test.n_rows(); ++r) {
                int positives = 0;
                const auto& order = orders[static_cast<std::size_t>(r)];
                for (int i = 0; i < k; ++i) {
                    if (knn.label(order[static_cast<std::size_t>(i)]) > 0) ++positives;
                }
                scores[static_cast<std::size_t>(r)] = static_cast<double>(positives) / k;
            }
            result.cells[c].fold_auc[static_cast<std::size_t>(fold)] = auc(scores, test.labels);
        }
    });

    bool any_ok = false;
    for (std::size_t c = 0; c < result.cells.size(); ++c) {
        KnnCell& cell = result.cells[c];
        for (int f = 0; f < n_folds; ++f) {
            const auto& err = fold_errors[static_cast<std::size_t>(f)][c];
            if (!err.empty()) {
                cell.failed = true;
                cell.error = err;
            }
        }
        if (cell.failed) continue;
        cell.mean_auc = std::accumulate(cell.fold_auc.begin(), cell.fold_auc.end(), 0.0) / n_folds;
        if (!any_ok || cell.mean_auc > result.best_mean_auc) {
            any_ok = true;
            result.best_mean_auc = cell.mean_auc;
            result.best_k = cell.k;
        }
    }
    if (!any_ok) throw Error("grid_search_knn: every grid cell failed");
    return result;
}

EvalReport run_ablation(const features::FeatureMatrix& full, const KnnGrid& knn_grid,
                        const GbtGrid& gbt_grid, std::uint64_t seed) {
    using features::Family;
    const std::vector<std::pair<std::string, std::set<Family>>> subsets = {
        {"P", {Family::P}},
        {"P+A", {Family::P, Family::A}},
        {"P+E", {Family::P, Family::E}},
        {"P+E+A", {Family::P, Family::E, Family::A}},
    };

    EvalReport report;
    report.seed = seed;
    report.n_rows = full.n_rows();
    report.n_columns = full.n_cols();
    report.family_counts = full.family_counts();
    report.knn_grid = knn_grid.ks;
    std::sort(report.knn_grid.begin(), report.knn_grid.end());

    const int n_folds = 5;
    const FoldAssignment outer = stratified_kfold(full.labels, n_folds, seed);

    struct FoldOutcome {
        int chosen_k = 0;
        double auc = 0.0;
        double recall = 0.0;
        std::optional<double> precision;
        std::vector<int> test_rows;
        std::vector<double> test_scores;
    };
    std::vector<features::FeatureMatrix> restricted;
    restricted.reserve(subsets.size());
    for (const auto& [name, families] : subsets) {
        restricted.push_back(full.restrict_families(families));
    }

    const int n_tasks = static_cast<int>(subsets.size()) * n_folds;
    std::vector<FoldOutcome> outcomes(static_cast<std::size_t>(n_tasks));
    parallel_tasks(n_tasks, [&](int task) {
        const int subset_idx = task / n_folds;
        const int fold = task % n_folds;
        const auto& matrix = restricted[static_cast<std::size_t>(subset_idx)];
        auto [train_rows, test_rows] = fold_split(outer, fold);
        const auto train = matrix.subset_rows(train_rows);
        const auto test = matrix.subset_rows(test_rows);

        const auto search = grid_search_knn(train, knn_grid, inner_seed(seed, fold));
        const auto knn = model::knn_fit(view_of(train), train.labels, search.best_k);
        std::vector<double> scores(static_cast<std::size_t>(test.n_rows()));
        for (int r = 0; r < test.n_rows(); ++r) {
            scores[static_cast<std::size_t>(r)] = knn.predict_proba(test.row(r));
        }
        FoldOutcome& out = outcomes[static_cast<std::size_t>(task)];
        out.chosen_k = search.best_k;
        out.auc = auc(scores, test.labels);
        const auto pr = precision_recall(scores, test.labels);
        out.precision = pr.precision;
        out.recall = pr.recall;
        out.test_rows = test_rows;
        out.test_scores = std::move(scores);
    });

    for (std::size_t s = 0; s < subsets.size(); ++s) {
        SubsetMetrics metrics;
        metrics.name = subsets[s].first;
        metrics.n_columns = restricted[s].n_cols();
        double auc_sum = 0, recall_sum = 0, precision_sum = 0;
        int precision_count = 0;
        std::vector<double> pooled_scores(static_cast<std::size_t>(full.n_rows()), 0.0);
        for (int f = 0; f < n_folds; ++f) {
            const auto& out = outcomes[s * static_cast<std::size_t>(n_folds) +
                                       static_cast<std::size_t>(f)];
            metrics.chosen_k.push_back(out.chosen_k);
            auc_sum += out.auc;
            recall_sum += out.recall;
            if (out.precision) {
                precision_sum += *out.precision;
                ++precision_count;
            }
            for (std::size_t i = 0; i < out.test_rows.size(); ++i) {
                pooled_scores[static_cast<std::size_t>(out.test_rows[i])] = out.test_scores[i];
            }
        }
        metrics.auc = auc_sum / n_folds;
        metrics.recall = recall_sum / n_folds;
        if (precision_count > 0) metrics.precision = precision_sum / precision_count;
        metrics.roc = roc_curve(pooled_scores, full.labels);
        report.subsets.push_back(std::move(metrics));
    }

    const auto gbt_search = grid_search_gbt(full, gbt_grid, seed);
    report.gbt_params = gbt_search.best;
    report.gbt_cv_auc = gbt_search.best_mean_auc;
    const auto gbt = model::train_gbt(view_of(full), full.labels, gbt_search.best,
                                      full.column_names);
    report.importance = model::feature_importance(gbt);
    return report;
}

std::span<const ReferenceRow> reference_targets() {
    static constexpr ReferenceRow kTargets[] = {
        {"P", 0.818, 0.789, 0.807},
        {"P+A", 0.846, 0.864, 0.853},
        {"P+E", 0.902, 0.807, 0.860},
        {"P+E+A", 0.898, 0.927, 0.911},
    };
    return kTargets;
}

}  // namespace riskrank::eval
