#include "riskrank/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "riskrank/csv.hpp"
#include "riskrank/ingest.hpp"
#include "riskrank/model.hpp"
#include "riskrank/synth.hpp"

namespace riskrank::pipeline {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string resolve(const fs::path& base, const std::string& value) {
    if (value.empty()) return value;
    fs::path p(value);
    if (p.is_absolute()) return p.string();
    return (base / p).lexically_normal().string();
}

std::vector<int> parse_int_list(const std::string& value, const std::string& context) {
    std::vector<int> out;
    for (const auto& token : split(value, ',')) {
        const auto v = parse_int(trim(token));
        if (!v || *v < 1) throw ConfigError(context + ": bad list entry '" + token + "'");
        out.push_back(static_cast<int>(*v));
    }
    if (out.empty()) throw ConfigError(context + ": empty list");
    return out;
}

std::set<features::Family> parse_families(const std::string& value, const std::string& context) {
    std::set<features::Family> out;
    for (const auto& token : split(value, ',')) {
        const std::string t = to_lower(trim(token));
        if (t == "p") {
            out.insert(features::Family::P);
        } else if (t == "e") {
            out.insert(features::Family::E);
        } else if (t == "a") {
            out.insert(features::Family::A);
        } else {
            throw ConfigError(context + ": families must be drawn from P,E,A");
        }
    }
    if (out.empty()) throw ConfigError(context + ": no families selected");
    return out;
}

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw ConfigError("config is missing the " + what + " path");
    if (!fs::exists(path)) throw ConfigError(what + " file not found: " + path);
}

std::uint64_t require_seed(const RunConfig& config) {
    if (!config.seed) throw ConfigError("seed is required (set it in the config or via --seed)");
    return *config.seed;
}

void append_run_log(const std::string& out_dir, const std::string& stage,
                    const std::vector<std::string>& lines) {
    std::ofstream log(out_dir + "/run_log.txt", std::ios::app);
    log << "[" << stage << "] " << version() << "\n";
    for (const auto& line : lines) log << "  " << line << "\n";
}

std::string fmt_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

void write_importance_svg(const std::string& path,
                          const std::vector<model::ImportanceEntry>& ranking, int top_n) {
    const int n = std::min<int>(top_n, static_cast<int>(ranking.size()));
    const int bar_h = 22, gap = 6, left = 280, top = 40;
    const int width = 900;
    const int height = top + n * (bar_h + gap) + 20;
    const double max_importance = n > 0 ? ranking[0].importance : 1.0;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<style>text{font-family:sans-serif;font-size:12px;}</style>\n";
    svg << "<text x=\"" << left << "\" y=\"20\" font-size=\"15\">Top " << n
        << " features by gain importance</text>\n";
    for (int i = 0; i < n; ++i) {
        const auto& entry = ranking[static_cast<std::size_t>(i)];
        const int y = top + i * (bar_h + gap);
        const double frac = max_importance > 0 ? entry.importance / max_importance : 0.0;
        const int w = static_cast<int>(frac * (width - left - 90));
        svg << "<text x=\"" << (left - 8) << "\" y=\"" << (y + bar_h - 7)
            << "\" text-anchor=\"end\">" << entry.feature << "</text>\n";
        svg << "<rect x=\"" << left << "\" y=\"" << y << "\" width=\"" << std::max(1, w)
            << "\" height=\"" << bar_h << "\" fill=\"#4878a8\"/>\n";
        svg << "<text x=\"" << (left + std::max(1, w) + 6) << "\" y=\"" << (y + bar_h - 7)
            << "\">" << fmt_metric(entry.importance) << "</text>\n";
    }
    svg << "</svg>\n";
    write_file_atomic(path, svg.str());
}

}  // namespace

const char* version() { return "riskrank 0.1.0"; }

RunConfig RunConfig::from_file(const std::string& path) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
    const fs::path base = fs::path(path).parent_path();
    RunConfig config;
    for (const auto& [key, value] : parse_key_value_file(path)) {
        if (key == "profiles") {
            config.profiles = resolve(base, value);
        } else if (key == "diaries") {
            config.diaries = resolve(base, value);
        } else if (key == "emissions") {
            config.emissions = resolve(base, value);
        } else if (key == "stations") {
            config.stations = resolve(base, value);
        } else if (key == "counties") {
            config.counties = resolve(base, value);
        } else if (key == "category_map") {
            config.category_map = resolve(base, value);
        } else if (key == "out") {
            config.out_dir = resolve(base, value);
        } else if (key == "synth_spec") {
            config.synth_spec = resolve(base, value);
        } else if (key == "seed") {
            const auto v = parse_int(value);
            if (!v || *v < 0) throw ConfigError(path + ": bad seed '" + value + "'");
            config.seed = static_cast<std::uint64_t>(*v);
        } else if (key == "families") {
            config.families = parse_families(value, path);
        } else if (key == "gbt_depths") {
            config.gbt_grid.depths = parse_int_list(value, path + ": gbt_depths");
        } else if (key == "gbt_trees") {
            config.gbt_grid.n_trees = parse_int_list(value, path + ": gbt_trees");
        } else if (key == "knn_k") {
            config.knn_grid.ks = parse_int_list(value, path + ": knn_k");
        } else if (key == "idw_k") {
            const auto v = parse_int(value);
            if (!v || *v < 1) throw ConfigError(path + ": bad idw_k");
            config.idw_k = static_cast<int>(*v);
        } else if (key == "years") {
            const auto parts = split(value, '-');
            const auto first = parts.size() == 2 ? parse_int(trim(parts[0])) : std::nullopt;
            const auto last = parts.size() == 2 ? parse_int(trim(parts[1])) : std::nullopt;
            if (!first || !last || *first > *last) {
                throw ConfigError(path + ": years must be FIRST-LAST");
            }
            config.years = {static_cast<int>(*first), static_cast<int>(*last)};
        } else {
            throw ConfigError(path + ": unknown key '" + key + "'");
        }
    }
    return config;
}

StageOutputs StageOutputs::in_dir(const std::string& dir) {
    StageOutputs out;
    out.features_csv = dir + "/features.csv";
    out.ranking_csv = dir + "/ranking.csv";
    out.importance_svg = dir + "/importance.svg";
    out.model_txt = dir + "/model.txt";
    out.metrics_json = dir + "/metrics.json";
    out.roc_csv = dir + "/roc.csv";
    out.run_log = dir + "/run_log.txt";
    return out;
}

void cmd_synth(const std::string& spec_path, const std::string& out_dir) {
    if (out_dir.empty()) throw ConfigError("synth: output directory is required");
    synth::SynthSpec spec =
        spec_path.empty() ? synth::SynthSpec::defaults() : synth::SynthSpec::load(spec_path);
    const auto truth = synth::generate(spec, out_dir);
    append_run_log(out_dir, "synth",
                   {"seed " + std::to_string(spec.seed),
                    "people " + std::to_string(truth.n_people),
                    "positive_rate " + fmt_metric(truth.positive_rate),
                    "planted " + std::to_string(truth.planted.size())});
}

void cmd_featurize(const RunConfig& config) {
    const std::uint64_t seed = require_seed(config);
    if (config.out_dir.empty()) throw ConfigError("featurize: out directory is required");
    require_file(config.profiles, "profiles");
    require_file(config.diaries, "diaries");
    const bool want_e = config.families.count(features::Family::E) > 0;
    const bool want_a = config.families.count(features::Family::A) > 0;
    if (want_e) require_file(config.emissions, "emissions");
    if (want_a) {
        require_file(config.stations, "stations");
        require_file(config.counties, "counties");
    }

    const auto profiles = ingest::parse_profiles(config.profiles);
    const auto diaries = ingest::parse_diaries(config.diaries);
    std::vector<ingest::EmissionRecord> emissions;
    if (want_e) emissions = ingest::parse_emissions(config.emissions);
    spatial::StatsByCounty stats;
    if (want_a) {
        const auto station_days = ingest::parse_station_days(config.stations);
        const auto counties = spatial::parse_counties(config.counties);
        stats = spatial::build_monthly_stats(station_days, counties, config.years, config.idw_k);
    }
    features::CategoryMapping mapping = config.category_map.empty()
                                            ? features::CategoryMapping::builtin_default()
                                            : features::CategoryMapping::load(config.category_map);

    const auto cohort = ingest::balance_cohort(profiles, seed);
    features::AssemblyLog log;
    const auto matrix = features::build_feature_matrix(cohort.members, diaries, emissions, stats,
                                                       mapping, config.families, &log);

    fs::create_directories(config.out_dir);
    const auto outputs = StageOutputs::in_dir(config.out_dir);
    matrix.save_csv(outputs.features_csv);

    const auto counts = matrix.family_counts();
    append_run_log(config.out_dir, "featurize",
                   {"seed " + std::to_string(seed),
                    "cohort_rows " + std::to_string(matrix.n_rows()),
                    "columns " + std::to_string(matrix.n_cols()) + " (P " +
                        std::to_string(counts[0]) + ", E " + std::to_string(counts[1]) + ", A " +
                        std::to_string(counts[2]) + ")",
                    "unmapped_counties " + std::to_string(log.unmapped_counties.size()),
                    "members_without_diaries " + std::to_string(log.members_without_diaries)});
}

void cmd_rank(const RunConfig& config) {
    const std::uint64_t seed = require_seed(config);
    if (config.out_dir.empty()) throw ConfigError("rank: out directory is required");
    const auto outputs = StageOutputs::in_dir(config.out_dir);
    require_file(outputs.features_csv, "features (run featurize first)");

    const auto matrix =
        features::FeatureMatrix::load_csv(outputs.features_csv).restrict_families(config.families);
    if (matrix.n_cols() == 0) {
        throw ConfigError("rank: features.csv has no columns from the requested families");
    }
    const auto search = eval::grid_search_gbt(matrix, config.gbt_grid, seed);
    const auto gbt =
        model::train_gbt({matrix.values.data(), matrix.n_rows(), matrix.n_cols()}, matrix.labels,
                         search.best, matrix.column_names);
    const auto ranking = model::feature_importance(gbt);

    std::string csv = "rank,feature,importance\n";
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        csv += std::to_string(i + 1) + "," + ranking[i].feature + "," +
               format_double(ranking[i].importance) + "\n";
    }
    write_file_atomic(outputs.ranking_csv, csv);
    write_importance_svg(outputs.importance_svg, ranking, 20);
    gbt.save(outputs.model_txt);

    append_run_log(config.out_dir, "rank",
                   {"seed " + std::to_string(seed),
                    "columns " + std::to_string(matrix.n_cols()),
                    "chosen depth " + std::to_string(search.best.max_depth) + ", trees " +
                        std::to_string(search.best.n_trees),
                    "cv_auc " + fmt_metric(search.best_mean_auc),
                    "top_feature " + (ranking.empty() ? std::string("none") : ranking[0].feature)});
}

void cmd_evaluate(const RunConfig& config) {
    const std::uint64_t seed = require_seed(config);
    if (config.out_dir.empty()) throw ConfigError("evaluate: out directory is required");
    const auto outputs = StageOutputs::in_dir(config.out_dir);
    require_file(outputs.features_csv, "features (run featurize first)");

    const auto matrix = features::FeatureMatrix::load_csv(outputs.features_csv);
    const auto counts = matrix.family_counts();
    if (counts[0] == 0 || counts[1] == 0 || counts[2] == 0) {
        throw ConfigError("evaluate: the ablation needs all three families in features.csv");
    }
    const auto report = eval::run_ablation(matrix, config.knn_grid, config.gbt_grid, seed);

    json doc;
    doc["seed"] = report.seed;
    doc["n_rows"] = report.n_rows;
    doc["columns"] = {{"total", report.n_columns},
                      {"P", report.family_counts[0]},
                      {"E", report.family_counts[1]},
                      {"A", report.family_counts[2]}};
    doc["knn_grid"] = report.knn_grid;
    doc["protocol"] =
        "nested 5-fold cross-validation; metrics are CV averages over the outer folds";
    json subsets = json::object();
    for (const auto& subset : report.subsets) {
        json s;
        if (subset.precision) {
            s["precision"] = *subset.precision;
        } else {
            s["precision"] = nullptr;
        }
        s["recall"] = subset.recall;
        s["auc"] = subset.auc;
        s["chosen_k_per_fold"] = subset.chosen_k;
        s["n_columns"] = subset.n_columns;
        subsets[subset.name] = std::move(s);
    }
    doc["subsets"] = std::move(subsets);
    json gbt;
    gbt["max_depth"] = report.gbt_params.max_depth;
    gbt["n_trees"] = report.gbt_params.n_trees;
    gbt["cv_auc"] = report.gbt_cv_auc;
    json top20 = json::array();
    for (std::size_t i = 0; i < report.importance.size() && i < 20; ++i) {
        top20.push_back({{"feature", report.importance[i].feature},
                         {"importance", report.importance[i].importance}});
    }
    gbt["top20"] = std::move(top20);
    doc["gbt"] = std::move(gbt);
    write_file_atomic(outputs.metrics_json, doc.dump(2) + "\n");

    std::string roc = "subset,fpr,tpr\n";
    for (const auto& subset : report.subsets) {
        for (const auto& [fpr, tpr] : subset.roc) {
            roc += subset.name + "," + format_double(fpr) + "," + format_double(tpr) + "\n";
        }
    }
    write_file_atomic(outputs.roc_csv, roc);

    std::vector<std::string> log_lines = {"seed " + std::to_string(seed)};
    for (const auto& subset : report.subsets) {
        log_lines.push_back("auc[" + subset.name + "] " + fmt_metric(subset.auc));
    }
    append_run_log(config.out_dir, "evaluate", log_lines);
}

void cmd_run_all(RunConfig config) {
    require_seed(config);
    if (config.out_dir.empty()) throw ConfigError("run-all: out directory is required");
    if (!config.synth_spec.empty()) {
        const std::string data_dir = config.out_dir + "/data";
        cmd_synth(config.synth_spec, data_dir);
        const auto files = synth::SynthFiles::in_dir(data_dir);
        config.profiles = files.profiles;
        config.diaries = files.diaries;
        config.emissions = files.emissions;
        config.stations = files.stations;
        config.counties = files.counties;
        config.category_map = files.category_map;
    }
    cmd_featurize(config);
    cmd_rank(config);
    cmd_evaluate(config);
}

}  // namespace riskrank::pipeline
