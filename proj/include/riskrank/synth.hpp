#pragma once

#include <string>
#include <vector>

#include "riskrank/common.hpp"
#include "riskrank/spatial.hpp"

namespace riskrank::synth {

struct UnknownPlantedFeature : ConfigError {
    using ConfigError::ConfigError;
};

struct PlantedFeature {
    std::string feature;
    double coefficient = 0.0;
};

// Generator parameters. Asthma labels are drawn from a logistic model over
// the planted features, each z-scored over the generated population, so
// recoverability is a property of the downstream model rather than of any
// generator/extractor mismatch.
struct SynthSpec {
    int n_people = 2000;
    int n_counties = 30;
    int n_stations = 60;
    spatial::YearRange years{2001, 2004};
    std::vector<PlantedFeature> planted;
    double noise_scale = 0.5;
    std::uint64_t seed = 42;

    static SynthSpec defaults();
    static std::vector<PlantedFeature> default_planted();
    static SynthSpec load(const std::string& path);
};

struct GroundTruth {
    std::vector<PlantedFeature> planted;
    double intercept = 0.0;     // bisected so the expected positive rate is 0.5
    double positive_rate = 0.0;
    int n_people = 0;
};

// File names generate() writes into its output directory.
struct SynthFiles {
    std::string profiles, diaries, emissions, stations, counties, category_map, ground_truth;
    static SynthFiles in_dir(const std::string& dir);
};

// Writes the full input file set plus ground_truth.csv. Byte-identical
// output for identical specs.
GroundTruth generate(const SynthSpec& spec, const std::string& out_dir);

}  // namespace riskrank::synth
