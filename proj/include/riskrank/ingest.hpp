#pragma once

#include <optional>
#include <string>
#include <vector>

#include "riskrank/common.hpp"

namespace riskrank::ingest {

struct MissingHeader : ValidationError {
    using ValidationError::ValidationError;
};
struct MalformedRow : ValidationError {
    using ValidationError::ValidationError;
};
struct DuplicatePersonId : ValidationError {
    using ValidationError::ValidationError;
};
struct FlagOutOfRange : ValidationError {
    using ValidationError::ValidationError;
};
struct NonPositiveDuration : ValidationError {
    using ValidationError::ValidationError;
};
struct UnknownCategory : ValidationError {
    using ValidationError::ValidationError;
};
struct UnknownFactor : ValidationError {
    using ValidationError::ValidationError;
};
struct CoordinateOutOfRange : ValidationError {
    using ValidationError::ValidationError;
};
struct InsufficientNegatives : ValidationError {
    using ValidationError::ValidationError;
};
struct NoPositives : ValidationError {
    using ValidationError::ValidationError;
};

enum class Gender { male, female, unknown };
enum class Asthma { yes, no, unknown };

// One subject's survey row. Empty strings and NaN mark unanswered fields;
// they are never collapsed to zero.
struct PersonProfile {
    std::string person_id;
    std::string county_fips;  // 5 digits, or empty when unknown
    int age_years = 0;
    Gender gender = Gender::unknown;
    std::string race;  // empty = missing
    Asthma asthma = Asthma::unknown;
    TriState smoker = TriState::unknown;
    TriState lives_with_smoker = TriState::unknown;
    std::string employment_status;  // empty = missing
    double hours_work_per_week = missing_value();
    double education_level = missing_value();  // ordinal
    double income_bracket = missing_value();   // ordinal
    TriState gas_stove = TriState::unknown;
    std::string heating_fuel;  // empty = missing
    std::string cooking_fuel;  // empty = missing
};

// One timed activity record. Entries may cross midnight; each belongs to
// its start date.
struct DiaryEntry {
    std::string person_id;
    Date date;
    int start_min = 0;     // 0..1439
    int duration_min = 0;  // >= 1
    std::string activity_code;
    std::string location_code;
    int smoking_flag = 0;
    int heavy_breath_flag = 0;

    bool operator==(const DiaryEntry&) const = default;
};

struct EmissionRecord {
    std::string county_fips;
    std::string category;  // canonical source-category name
    double tonnes_per_year = 0.0;

    bool operator==(const EmissionRecord&) const = default;
};

enum class Factor { pm25, so2, no2, o3, co, temperature, pressure, wind_speed };
inline constexpr int kFactorCount = 8;

struct StationDay {
    std::string station_id;
    double latitude = 0.0;
    double longitude = 0.0;
    std::string county_fips;  // optional
    Date date;
    Factor factor = Factor::pm25;
    double value = 0.0;

    bool operator==(const StationDay&) const = default;
};

// Balanced analysis cohort: every eligible asthmatic plus a seeded random
// sample of non-asthmatics of the same size.
struct Cohort {
    struct Member {
        PersonProfile profile;
        int label = 0;  // +1 asthma, -1 no asthma
    };
    std::vector<Member> members;
    std::uint64_t seed = 0;
};

// Closed PM2.5 source vocabulary (23 canonical names).
const std::vector<std::string>& emission_categories();

// Case-insensitive match against the canonical names, with "agriculture"
// accepted as an alias of "Agricultural". nullopt if unknown.
std::optional<std::string> normalize_category(const std::string& raw);

const char* factor_name(Factor f);
std::optional<Factor> parse_factor(const std::string& s);
const std::vector<Factor>& all_factors();

std::vector<PersonProfile> parse_profiles(const std::string& path);
std::vector<DiaryEntry> parse_diaries(const std::string& path);
std::vector<EmissionRecord> parse_emissions(const std::string& path);
std::vector<StationDay> parse_station_days(const std::string& path);

void write_profiles(const std::string& path, const std::vector<PersonProfile>& rows);
void write_diaries(const std::string& path, const std::vector<DiaryEntry>& rows);
void write_emissions(const std::string& path, const std::vector<EmissionRecord>& rows);
void write_station_days(const std::string& path, const std::vector<StationDay>& rows);

// All eligible positives (known asthma + known county) plus an equal-size
// uniform sample without replacement of eligible negatives. Deterministic
// per seed; positive members first (input order), then the sampled
// negatives in input order.
Cohort balance_cohort(const std::vector<PersonProfile>& profiles, std::uint64_t seed);

const char* gender_name(Gender g);
const char* asthma_name(Asthma a);
const char* tristate_name(TriState t);

}  // namespace riskrank::ingest
