#pragma once

#include <array>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "riskrank/common.hpp"
#include "riskrank/ingest.hpp"
#include "riskrank/spatial.hpp"

namespace riskrank::features {

struct EmptyDiary : ValidationError {
    using ValidationError::ValidationError;
};

enum class Family { P, E, A };

const char* family_prefix(Family f);  // "FP_", "FE_", "FA_"

// Paper-order category sets. Codes map to *subsets*: categories overlap and
// a code may map to none.
const std::array<std::string, 5>& location_categories();  // work travel home indoor outdoor
const std::array<std::string, 6>& activity_categories();  // sleep work exercise walking cycling leisure

struct CategoryMapping {
    std::map<std::string, std::set<std::string>> location_map;
    std::map<std::string, std::set<std::string>> activity_map;

    static CategoryMapping load(const std::string& path);
    static const CategoryMapping& builtin_default();
    void save(const std::string& path) const;
};

// Per-person diary summary: mean daily minutes per location/activity
// category, mean daily minutes and entry counts under the heavy-breathing
// and smoking flags. Days without a matching entry contribute zero to the
// average.
struct ActivityFeatures {
    std::array<double, 5> t_location{};  // location_categories() order
    std::array<double, 6> t_activity{};  // activity_categories() order
    double t_heavy_breathing = 0.0;
    double t_smoking = 0.0;
    double n_heavy_breathing = 0.0;
    double n_smoking = 0.0;
};

ActivityFeatures activity_features(const std::vector<ingest::DiaryEntry>& entries,
                                   const CategoryMapping& mapping);

// Named partial feature vector; NaN marks a genuinely missing cell.
using NamedVector = std::map<std::string, double>;

// Categorical vocabularies observed in a profile set; deterministic
// (sorted unique values) so column schemas are reproducible.
struct ProfileVocab {
    std::vector<std::string> race;
    std::vector<std::string> employment;
    std::vector<std::string> heating_fuel;
    std::vector<std::string> cooking_fuel;

    static ProfileVocab fit(const std::vector<ingest::Cohort::Member>& members);
};

// Numeric encoding of one profile: age and ordinals as numbers (NaN when
// unanswered), categoricals one-hot with an explicit _missing indicator,
// tri-states as {0,1} plus a _missing indicator.
NamedVector profile_features(const ingest::PersonProfile& profile, const ProfileVocab& vocab);

NamedVector activity_feature_vector(const ActivityFeatures& f);

// One FE_ column per canonical emission category; a county without an
// inventory entry for a category reports zero emissions.
NamedVector emission_features(const std::vector<ingest::EmissionRecord>& records,
                              const std::string& county_fips);

// 8 factors x {max, mean, min} x 12 months = 288 FA_ columns; months nobody
// measured stay missing.
NamedVector pollution_features(const std::map<ingest::Factor, std::vector<spatial::MonthlyStats>>& stats);

// Assembled matrix: rows are cohort members, columns carry a family prefix
// (FP_/FE_/FA_) and are alphabetical within the P, E, A blocks. Values are
// median-imputed; `missing` records which cells were imputed, and every
// column that had a missing cell gains a <col>_missing companion.
struct FeatureMatrix {
    std::vector<std::string> column_names;
    std::vector<Family> family_index;
    std::vector<std::string> person_ids;
    std::vector<int> labels;  // +1 / -1
    std::vector<double> values;         // row-major, finite
    std::vector<std::uint8_t> missing;  // row-major, 1 = imputed

    int n_rows() const { return static_cast<int>(person_ids.size()); }
    int n_cols() const { return static_cast<int>(column_names.size()); }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * column_names.size() + c]; }
    std::span<const double> row(int r) const {
        return {values.data() + static_cast<std::size_t>(r) * column_names.size(), column_names.size()};
    }
    int column_index(const std::string& name) const;
    std::array<int, 3> family_counts() const;  // P, E, A

    FeatureMatrix restrict_families(const std::set<Family>& families) const;
    FeatureMatrix subset_rows(const std::vector<int>& rows) const;

    void save_csv(const std::string& path) const;
    static FeatureMatrix load_csv(const std::string& path);
};

struct FeatureInputs {
    std::map<std::string, NamedVector> profile;    // person_id ->
    std::map<std::string, NamedVector> activity;   // person_id -> (may be absent)
    std::map<std::string, NamedVector> emission;   // county ->
    std::map<std::string, NamedVector> pollution;  // county ->
};

struct AssemblyLog {
    std::vector<std::string> unmapped_counties;  // no environmental data, rows kept
    int members_without_diaries = 0;
};

FeatureMatrix assemble_matrix(const std::vector<ingest::Cohort::Member>& members,
                              const FeatureInputs& inputs, const std::set<Family>& families,
                              AssemblyLog* log = nullptr);

// End-to-end extraction for a member list: runs the per-person and
// per-county extractors and assembles the matrix.
FeatureMatrix build_feature_matrix(const std::vector<ingest::Cohort::Member>& members,
                                   const std::vector<ingest::DiaryEntry>& diaries,
                                   const std::vector<ingest::EmissionRecord>& emissions,
                                   const spatial::StatsByCounty& stats,
                                   const CategoryMapping& mapping,
                                   const std::set<Family>& families, AssemblyLog* log = nullptr);

}  // namespace riskrank::features
