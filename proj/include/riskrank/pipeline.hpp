#pragma once

#include <optional>
#include <set>
#include <string>

#include "riskrank/common.hpp"
#include "riskrank/eval.hpp"
#include "riskrank/features.hpp"
#include "riskrank/spatial.hpp"

namespace riskrank::pipeline {

const char* version();

// One pipeline run. File paths in a config file resolve relative to the
// config file's directory; flags override config; config overrides defaults.
// The seed must come from the config or a flag, never from the clock.
struct RunConfig {
    std::string profiles;
    std::string diaries;
    std::string emissions;
    std::string stations;
    std::string counties;
    std::string category_map;  // empty: use the built-in mapping
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::set<features::Family> families = {features::Family::P, features::Family::E,
                                           features::Family::A};
    eval::GbtGrid gbt_grid;
    eval::KnnGrid knn_grid;
    spatial::YearRange years{2001, 2014};
    int idw_k = 5;
    std::string synth_spec;  // optional; run-all generates inputs first when set

    static RunConfig from_file(const std::string& path);
};

struct StageOutputs {
    std::string features_csv;
    std::string ranking_csv;
    std::string importance_svg;
    std::string model_txt;
    std::string metrics_json;
    std::string roc_csv;
    std::string run_log;
    static StageOutputs in_dir(const std::string& dir);
};

void cmd_synth(const std::string& spec_path, const std::string& out_dir);
void cmd_featurize(const RunConfig& config);
void cmd_rank(const RunConfig& config);
void cmd_evaluate(const RunConfig& config);
void cmd_run_all(RunConfig config);

}  // namespace riskrank::pipeline
