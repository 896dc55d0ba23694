#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "riskrank/pipeline.hpp"
#include "riskrank/synth.hpp"
#include "test_util.hpp"

using namespace riskrank;
using namespace riskrank::pipeline;
using testutil::TempDir;
using testutil::write_text;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(RISKRANK_CLI_PATH) + " " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    if (status < 0) return -1;
    return WEXITSTATUS(status);
}

// Small but signal-bearing setup so rank/evaluate stay fast.
std::string write_small_inputs(const TempDir& dir) {
    synth::SynthSpec spec = synth::SynthSpec::defaults();
    spec.n_people = 260;
    spec.n_counties = 6;
    spec.n_stations = 10;
    spec.years = {2001, 2001};
    spec.seed = 42;
    synth::generate(spec, dir.path() + "/data");
    return dir.path() + "/data";
}

std::string write_config(const TempDir& dir, const std::string& data_dir,
                         const std::string& out_dir, const std::string& extras = "") {
    const std::string path = dir.file("run.conf");
    write_text(path, "profiles = " + data_dir + "/profiles.csv\n" +
                         "diaries = " + data_dir + "/diaries.csv\n" +
                         "emissions = " + data_dir + "/emissions.csv\n" +
                         "stations = " + data_dir + "/stations.csv\n" +
                         "counties = " + data_dir + "/counties.csv\n" +
                         "category_map = " + data_dir + "/category_map.csv\n" +
                         "out = " + out_dir + "\n" +
                         "seed = 42\n" +
                         "years = 2001-2001\n" +
                         "gbt_depths = 1,2\n" +
                         "gbt_trees = 15,30\n" +
                         "knn_k = 1,3,5\n" + extras);
    return path;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config parsing, relative paths and overrides") {
    TempDir dir("cli");
    std::filesystem::create_directories(dir.path() + "/inputs");
    write_text(dir.file("inputs/profiles.csv"), "x\n");
    const std::string path = dir.file("run.conf");
    write_text(path,
               "profiles = inputs/profiles.csv\n"
               "out = out\n"
               "seed = 7\n"
               "families = P,E\n"
               "gbt_depths = 2\n"
               "knn_k = 3,9\n"
               "years = 2001-2002\n"
               "idw_k = 3\n");
    const auto config = RunConfig::from_file(path);
    CHECK(config.profiles == dir.path() + "/inputs/profiles.csv");
    CHECK(config.out_dir == dir.path() + "/out");
    CHECK(config.seed == 7);
    CHECK(config.families == std::set<features::Family>{features::Family::P, features::Family::E});
    CHECK(config.gbt_grid.depths == std::vector<int>{2});
    CHECK(config.knn_grid.ks == std::vector<int>{3, 9});
    CHECK(config.years.first == 2001);
    CHECK(config.idw_k == 3);

    SUBCASE("unknown key") {
        write_text(path, "nope = 1\n");
        CHECK_THROWS_AS(RunConfig::from_file(path), ConfigError);
    }
    SUBCASE("bad families") {
        write_text(path, "families = P,Q\n");
        CHECK_THROWS_AS(RunConfig::from_file(path), ConfigError);
    }
}

TEST_CASE("featurize requires a seed and existing inputs") {
    TempDir dir("cli");
    RunConfig config;
    config.out_dir = dir.path() + "/out";
    config.profiles = dir.file("missing.csv");
    config.diaries = dir.file("missing2.csv");
    CHECK_THROWS_AS(cmd_featurize(config), ConfigError);
    config.seed = 1;
    CHECK_THROWS_WITH_AS(cmd_featurize(config), doctest::Contains("missing.csv"), ConfigError);
}

TEST_CASE("cli exit codes: 1 for bad input, 2 for invalid data") {
    TempDir dir("cli");
    const std::string data = write_small_inputs(dir);
    const std::string out = dir.path() + "/out";
    const std::string config = write_config(dir, data, out);

    SUBCASE("missing file is exit 1") {
        std::filesystem::remove(data + "/profiles.csv");
        CHECK(run_cli("featurize --config " + config) == 1);
    }
    SUBCASE("corrupt flag value is exit 2") {
        auto text = read_file(data + "/diaries.csv");
        const auto pos = text.find_last_of('\n', text.size() - 2);
        text = text.substr(0, pos + 1) + "P00001,2001-06-03,10,5,14500,30120,7,0\n";
        write_text(data + "/diaries.csv", text);
        CHECK(run_cli("featurize --config " + config) == 2);
    }
    SUBCASE("no seed is exit 1") {
        const std::string bare = dir.file("bare.conf");
        write_text(bare, "profiles = " + data + "/profiles.csv\ndiaries = " + data +
                             "/diaries.csv\nout = " + out + "\nfamilies = P\n");
        CHECK(run_cli("featurize --config " + bare) == 1);
    }
}

TEST_CASE("stage pipeline end to end, run-all equals the stages") {
    TempDir dir("cli");
    const std::string data = write_small_inputs(dir);
    const std::string out_stages = dir.path() + "/stages";
    const std::string config = write_config(dir, data, out_stages);

    const auto parsed = RunConfig::from_file(config);
    cmd_featurize(parsed);
    const auto outputs = StageOutputs::in_dir(out_stages);
    REQUIRE(std::filesystem::exists(outputs.features_csv));
    cmd_rank(parsed);
    REQUIRE(std::filesystem::exists(outputs.ranking_csv));
    REQUIRE(std::filesystem::exists(outputs.importance_svg));
    REQUIRE(std::filesystem::exists(outputs.model_txt));
    cmd_evaluate(parsed);
    REQUIRE(std::filesystem::exists(outputs.metrics_json));
    REQUIRE(std::filesystem::exists(outputs.roc_csv));

    // metrics.json carries the four subset rows
    const auto doc = nlohmann::json::parse(read_file(outputs.metrics_json));
    REQUIRE(doc.contains("subsets"));
    for (const char* name : {"P", "P+A", "P+E", "P+E+A"}) {
        CAPTURE(name);
        REQUIRE(doc["subsets"].contains(name));
        CHECK(doc["subsets"][name]["auc"].is_number());
    }
    CHECK(doc["gbt"]["top20"].is_array());

    // ranking.csv is rank,feature,importance with descending importance
    const auto ranking = read_file(outputs.ranking_csv);
    CHECK(ranking.rfind("rank,feature,importance\n", 0) == 0);

    // with full station coverage the matrix is exactly |FP| + 23 + 288 wide
    const auto matrix = features::FeatureMatrix::load_csv(outputs.features_csv);
    const auto counts = matrix.family_counts();
    CHECK(counts[1] == 23);
    CHECK(counts[2] == 288);
    CHECK(matrix.n_cols() == counts[0] + 23 + 288);
    CHECK(matrix.n_cols() >= 300);
    CHECK(matrix.n_cols() <= 500);

    SUBCASE("run-all reproduces the stage outputs byte for byte") {
        const std::string out_all = dir.path() + "/all";
        auto config_all = parsed;
        config_all.out_dir = out_all;
        cmd_run_all(config_all);
        const auto all = StageOutputs::in_dir(out_all);
        CHECK(read_file(all.features_csv) == read_file(outputs.features_csv));
        CHECK(read_file(all.ranking_csv) == read_file(outputs.ranking_csv));
        CHECK(read_file(all.metrics_json) == read_file(outputs.metrics_json));
        CHECK(read_file(all.roc_csv) == read_file(outputs.roc_csv));
    }

    SUBCASE("rank honors a family restriction") {
        const std::string out_p = dir.path() + "/p_only";
        auto config_p = parsed;
        config_p.out_dir = out_p;
        cmd_featurize(config_p);
        config_p.families = {features::Family::P};
        cmd_rank(config_p);
        std::istringstream ranked(read_file(StageOutputs::in_dir(out_p).ranking_csv));
        std::string line;
        std::getline(ranked, line);  // header
        int rows = 0;
        while (std::getline(ranked, line)) {
            ++rows;
            CHECK(split(line, ',')[1].rfind("FP_", 0) == 0);
        }
        CHECK(rows > 10);
    }

    SUBCASE("a second identical run is byte-identical") {
        const std::string out2 = dir.path() + "/stages2";
        auto config2 = parsed;
        config2.out_dir = out2;
        cmd_featurize(config2);
        cmd_rank(config2);
        cmd_evaluate(config2);
        const auto second = StageOutputs::in_dir(out2);
        CHECK(read_file(second.features_csv) == read_file(outputs.features_csv));
        CHECK(read_file(second.ranking_csv) == read_file(outputs.ranking_csv));
        CHECK(read_file(second.metrics_json) == read_file(outputs.metrics_json));
    }
}

TEST_CASE("cli synth writes a usable data set") {
    TempDir dir("cli");
    const std::string spec = dir.file("spec.conf");
    write_text(spec,
               "n_people = 60\nn_counties = 4\nn_stations = 6\nyears = 2001-2001\nseed = 3\n");
    CHECK(run_cli("synth --spec " + spec + " --out " + dir.path() + "/gen") == 0);
    CHECK(std::filesystem::exists(dir.path() + "/gen/profiles.csv"));
    CHECK(std::filesystem::exists(dir.path() + "/gen/ground_truth.csv"));
}

TEST_CASE("rank before featurize is a config error") {
    TempDir dir("cli");
    RunConfig config;
    config.seed = 1;
    config.out_dir = dir.path() + "/out";
    CHECK_THROWS_AS(cmd_rank(config), ConfigError);
}

}  // TEST_SUITE
