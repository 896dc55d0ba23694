#include "riskrank/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iterator>
#include <map>

#include "riskrank/features.hpp"
#include "riskrank/ingest.hpp"

namespace riskrank::synth {

namespace {

using ingest::Factor;

struct FactorModel {
    Factor factor;
    double base;
    double station_sd;
    double month_sd;
    double day_sd;
    bool non_negative;
};

// Station effects dominate month effects: the monthly feature columns of one
// factor then share most of their county-level variance, which keeps the
// spurious-correlation ceiling of the 30-county design low enough for the
// planted columns to stay identifiable.
constexpr FactorModel kFactorModels[] = {
    {Factor::pm25, 12.0, 4.0, 2.5, 2.0, true},
    {Factor::so2, 4.0, 1.5, 0.4, 0.8, true},
    {Factor::no2, 12.0, 4.0, 1.0, 2.0, true},
    {Factor::o3, 35.0, 9.0, 2.5, 5.0, true},
    {Factor::co, 0.5, 0.15, 0.04, 0.08, true},
    {Factor::temperature, 14.0, 5.0, 1.5, 3.0, false},
    {Factor::pressure, 1013.0, 5.0, 1.2, 2.5, false},
    {Factor::wind_speed, 3.5, 1.0, 0.25, 0.7, true},
};

// Rough yearly tonnage scale per canonical emission category, in canonical
// order.
constexpr double kEmissionScale[] = {
    40,    // Aircraft
    60,    // Marine Vessels
    80,    // Locomotives
    300,   // Equipment
    250,   // Heavy Duty Vehicles
    200,   // Light Duty Vehicles
    900,   // Agricultural
    150,   // Mining
    120,   // Oil & Gas Production
    90,    // Storage & Transportation
    400,   // Construction
    1200,  // Paved Road Dust
    1500,  // Unpaved Road Dust
    200,   // Agricultural Field Burning
    300,   // Prescribed Fires
    600,   // Wildfires
    100,   // Biomass
    250,   // Coal
    150,   // Natural Gas
    110,   // Oil
    500,   // Residential Wood
    130,   // Waste Disposal
    70,    // Commercial Cooking
};

std::string padded_id(const char* prefix, int value, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, value);
    return buf;
}

template <class T>
const T& pick(Rng& rng, const std::vector<T>& options) {
    return options[static_cast<std::size_t>(rng.uniform_u64(options.size()))];
}

bool bernoulli(Rng& rng, double p) { return rng.uniform01() < p; }

struct PersonTraits {
    double p_exercise;
    double p_walk;
    double p_cycle;
    double p_heavy_breath;
    double p_smoke_flag;
    double p_outdoor;
};

}  // namespace

std::vector<PlantedFeature> SynthSpec::default_planted() {
    return {
        {"FP_t_exercise", 1.8},
        {"FP_t_hb", 1.2},
        {"FP_smoker", 0.9},
        {"FP_lives_with_smoker", 0.8},
        {"FP_age", -0.8},
        {"FP_t_loc_outdoor", 0.8},
        {"FP_hours_work", 0.7},
        {"FP_t_sleep", -0.6},
        {"FE_Wildfires", 1.6},
        {"FA_pm25_max_m7", 1.6},
    };
}

SynthSpec SynthSpec::defaults() {
    SynthSpec spec;
    spec.planted = default_planted();
    return spec;
}

SynthSpec SynthSpec::load(const std::string& path) {
    SynthSpec spec = defaults();
    spec.planted.clear();
    bool any_plant = false;
    for (const auto& [key, value] : parse_key_value_file(path)) {
        auto as_int = [&](const std::string& s) {
            const auto v = parse_int(s);
            if (!v) throw ConfigError(path + ": bad integer for " + key + ": '" + s + "'");
            return static_cast<int>(*v);
        };
        if (key == "n_people") {
            spec.n_people = as_int(value);
        } else if (key == "n_counties") {
            spec.n_counties = as_int(value);
        } else if (key == "n_stations") {
            spec.n_stations = as_int(value);
        } else if (key == "years") {
            const auto parts = split(value, '-');
            if (parts.size() != 2) throw ConfigError(path + ": years must be FIRST-LAST");
            spec.years.first = as_int(trim(parts[0]));
            spec.years.last = as_int(trim(parts[1]));
        } else if (key == "noise_scale") {
            const auto v = parse_double(value);
            if (!v) throw ConfigError(path + ": bad noise_scale");
            spec.noise_scale = *v;
        } else if (key == "seed") {
            const auto v = parse_int(value);
            if (!v || *v < 0) throw ConfigError(path + ": bad seed");
            spec.seed = static_cast<std::uint64_t>(*v);
        } else if (key == "plant") {
            any_plant = true;
            if (to_lower(value) == "none") continue;
            const auto colon = value.rfind(':');
            if (colon == std::string::npos) {
                throw ConfigError(path + ": plant must be FEATURE:COEFFICIENT");
            }
            const auto coeff = parse_double(trim(value.substr(colon + 1)));
            if (!coeff || !std::isfinite(*coeff)) {
                throw ConfigError(path + ": bad plant coefficient in '" + value + "'");
            }
            spec.planted.push_back({trim(value.substr(0, colon)), *coeff});
        } else {
            throw ConfigError(path + ": unknown key '" + key + "'");
        }
    }
    if (!any_plant) spec.planted = default_planted();
    if (spec.n_people < 1 || spec.n_counties < 1 || spec.n_stations < 1 ||
        spec.years.first > spec.years.last) {
        throw ConfigError(path + ": invalid spec sizes");
    }
    return spec;
}

SynthFiles SynthFiles::in_dir(const std::string& dir) {
    SynthFiles f;
    f.profiles = dir + "/profiles.csv";
    f.diaries = dir + "/diaries.csv";
    f.emissions = dir + "/emissions.csv";
    f.stations = dir + "/stations.csv";
    f.counties = dir + "/counties.csv";
    f.category_map = dir + "/category_map.csv";
    f.ground_truth = dir + "/ground_truth.csv";
    return f;
}

GroundTruth generate(const SynthSpec& spec, const std::string& out_dir) {
    for (const auto& p : spec.planted) {
        if (!std::isfinite(p.coefficient)) {
            throw UnknownPlantedFeature("planted coefficient not finite for " + p.feature);
        }
    }
    if (spec.n_people < 1 || spec.n_people > 99999 || spec.n_counties < 1 ||
        spec.n_counties > 900 || spec.n_stations < 1 || spec.n_stations > 999 ||
        spec.years.first > spec.years.last) {
        throw ConfigError("generate: spec sizes out of range");
    }
    std::filesystem::create_directories(out_dir);
    const SynthFiles files = SynthFiles::in_dir(out_dir);
    Rng rng(spec.seed);

    // Counties.
    std::vector<spatial::CountyRef> counties;
    counties.reserve(static_cast<std::size_t>(spec.n_counties));
    for (int i = 0; i < spec.n_counties; ++i) {
        spatial::CountyRef c;
        c.county_fips = padded_id("", 10007 + i * 97, 5);
        c.centroid_lat = rng.uniform(32.0, 45.0);
        c.centroid_lon = rng.uniform(-120.0, -80.0);
        counties.push_back(std::move(c));
    }

    // Stations scattered around counties so every county has close coverage.
    struct Station {
        std::string id;
        double lat, lon;
        std::string county;
    };
    std::vector<Station> stations;
    stations.reserve(static_cast<std::size_t>(spec.n_stations));
    for (int i = 0; i < spec.n_stations; ++i) {
        const auto& home = counties[static_cast<std::size_t>(i % spec.n_counties)];
        Station s;
        s.id = padded_id("S", i + 1, 3);
        s.lat = std::clamp(home.centroid_lat + rng.uniform(-1.2, 1.2), -90.0, 90.0);
        s.lon = std::clamp(home.centroid_lon + rng.uniform(-1.2, 1.2), -180.0, 180.0);
        s.county = home.county_fips;
        stations.push_back(std::move(s));
    }

    // Station-level effects: persistent station offset plus a fixed
    // month-of-year offset per factor. Month effects are independent across
    // months so monthly features carry county-level signal of their own.
    const int n_factors = static_cast<int>(std::size(kFactorModels));
    std::vector<std::array<double, 12>> month_effect(
        static_cast<std::size_t>(spec.n_stations * n_factors));
    std::vector<double> station_effect(static_cast<std::size_t>(spec.n_stations * n_factors));
    for (int s = 0; s < spec.n_stations; ++s) {
        for (int f = 0; f < n_factors; ++f) {
            const auto& fm = kFactorModels[static_cast<std::size_t>(f)];
            const std::size_t idx = static_cast<std::size_t>(s * n_factors + f);
            station_effect[idx] = rng.normal(0.0, fm.station_sd);
            for (int m = 0; m < 12; ++m) month_effect[idx][static_cast<std::size_t>(m)] =
                rng.normal(0.0, fm.month_sd);
        }
    }

    // Weekly readings (the 1-in-7 sampling keeps files small while covering
    // every month).
    std::vector<ingest::StationDay> station_days;
    for (int year = spec.years.first; year <= spec.years.last; ++year) {
        const std::int64_t start = Date{year, 1, 3}.serial();
        const std::int64_t end = Date{year, 12, 31}.serial();
        for (std::int64_t serial = start; serial <= end; serial += 7) {
            const Date date = Date::from_serial(serial);
            for (int s = 0; s < spec.n_stations; ++s) {
                for (int f = 0; f < n_factors; ++f) {
                    const auto& fm = kFactorModels[static_cast<std::size_t>(f)];
                    const std::size_t idx = static_cast<std::size_t>(s * n_factors + f);
                    double value = fm.base + station_effect[idx] +
                                   month_effect[idx][static_cast<std::size_t>(date.month - 1)] +
                                   rng.normal(0.0, fm.day_sd);
                    if (fm.non_negative) value = std::max(0.0, value);
                    ingest::StationDay day;
                    day.station_id = stations[static_cast<std::size_t>(s)].id;
                    day.latitude = stations[static_cast<std::size_t>(s)].lat;
                    day.longitude = stations[static_cast<std::size_t>(s)].lon;
                    day.county_fips = stations[static_cast<std::size_t>(s)].county;
                    day.date = date;
                    day.factor = fm.factor;
                    day.value = value;
                    station_days.push_back(std::move(day));
                }
            }
        }
    }

    // County emissions: every canonical category, lognormal around its scale.
    std::vector<ingest::EmissionRecord> emissions;
    const auto& categories = ingest::emission_categories();
    for (const auto& county : counties) {
        for (std::size_t k = 0; k < categories.size(); ++k) {
            ingest::EmissionRecord r;
            r.county_fips = county.county_fips;
            r.category = categories[k];
            r.tonnes_per_year = kEmissionScale[k] * std::exp(rng.normal(0.0, 0.8));
            emissions.push_back(std::move(r));
        }
    }

    // People and their latent behaviour propensities.
    static const std::vector<std::string> kRaces = {"asian", "black", "hispanic",
                                                    "native", "other", "white"};
    static const std::vector<std::string> kHeating = {"electric", "gas", "oil", "wood"};
    static const std::vector<std::string> kCooking = {"electric", "gas", "wood"};
    std::vector<ingest::PersonProfile> profiles;
    std::vector<PersonTraits> traits;
    profiles.reserve(static_cast<std::size_t>(spec.n_people));
    traits.reserve(static_cast<std::size_t>(spec.n_people));
    for (int i = 0; i < spec.n_people; ++i) {
        ingest::PersonProfile p;
        p.person_id = padded_id("P", i + 1, 5);
        p.county_fips =
            counties[static_cast<std::size_t>(rng.uniform_u64(static_cast<std::uint64_t>(spec.n_counties)))]
                .county_fips;
        if (bernoulli(rng, 0.01)) p.county_fips.clear();  // exercises the eligibility filter
        p.age_years = 3 + static_cast<int>(rng.uniform_u64(83));
        const double gu = rng.uniform01();
        p.gender = gu < 0.49 ? ingest::Gender::male
                             : (gu < 0.98 ? ingest::Gender::female : ingest::Gender::unknown);
        p.race = bernoulli(rng, 0.03) ? std::string() : pick(rng, kRaces);
        if (p.age_years >= 16) {
            const double su = rng.uniform01();
            p.smoker = su < 0.22 ? TriState::yes : (su < 0.95 ? TriState::no : TriState::unknown);
        } else {
            p.smoker = bernoulli(rng, 0.05) ? TriState::unknown : TriState::no;
        }
        const double lu = rng.uniform01();
        p.lives_with_smoker =
            lu < 0.28 ? TriState::yes : (lu < 0.94 ? TriState::no : TriState::unknown);
        if (p.age_years < 18) {
            p.employment_status = "student";
        } else if (p.age_years > 65) {
            p.employment_status = "retired";
        } else {
            const double eu = rng.uniform01();
            p.employment_status = eu < 0.72 ? "employed"
                                            : (eu < 0.82 ? "unemployed"
                                                         : (eu < 0.90 ? "student" : "homemaker"));
        }
        if (bernoulli(rng, 0.02)) p.employment_status.clear();
        if (p.employment_status == "employed") {
            p.hours_work_per_week =
                std::clamp(std::round(rng.normal(40.0, 9.0)), 1.0, 80.0);
        } else {
            p.hours_work_per_week = 0.0;
        }
        if (bernoulli(rng, 0.08)) p.hours_work_per_week = missing_value();
        p.education_level = 1 + static_cast<double>(rng.uniform_u64(6));
        if (bernoulli(rng, 0.08)) p.education_level = missing_value();
        p.income_bracket = 1 + static_cast<double>(rng.uniform_u64(8));
        if (bernoulli(rng, 0.12)) p.income_bracket = missing_value();
        const double gsu = rng.uniform01();
        p.gas_stove = gsu < 0.38 ? TriState::yes : (gsu < 0.95 ? TriState::no : TriState::unknown);
        p.heating_fuel = bernoulli(rng, 0.04) ? std::string() : pick(rng, kHeating);
        p.cooking_fuel = bernoulli(rng, 0.04) ? std::string() : pick(rng, kCooking);
        p.asthma = ingest::Asthma::unknown;  // assigned after feature extraction
        profiles.push_back(std::move(p));

        PersonTraits t;
        t.p_exercise = std::clamp(rng.normal(0.10, 0.07), 0.0, 0.45);
        t.p_walk = std::clamp(rng.normal(0.12, 0.05), 0.0, 0.40);
        t.p_cycle = std::clamp(rng.normal(0.04, 0.03), 0.0, 0.30);
        t.p_heavy_breath = std::clamp(rng.normal(0.06, 0.05), 0.005, 0.50);
        t.p_smoke_flag =
            profiles.back().smoker == TriState::yes
                ? std::clamp(rng.normal(0.15, 0.06), 0.02, 0.50)
                : 0.01;
        t.p_outdoor = std::clamp(rng.normal(0.25, 0.10), 0.05, 0.70);
        traits.push_back(t);
    }

    // Diaries. Each day starts with sleep at home, then 3..7 timed entries.
    static const std::vector<std::string> kHomeCodes = {"30120", "30121", "30125"};
    static const std::vector<std::string> kWorkLocations = {"31110", "31120", "31210"};
    static const std::vector<std::string> kExerciseCodes = {"17100", "17110", "17120", "17130",
                                                            "17140"};
    static const std::vector<std::string> kLeisureCodes = {"17300", "18100", "18200", "18300",
                                                           "18400"};
    static const std::vector<std::string> kChoreCodes = {"11000", "13000", "16100", "16200"};
    static const std::vector<std::string> kIndoorLocations = {"33100", "33200", "33300", "33500"};
    static const std::vector<std::string> kOutdoorLocations = {"34100", "34200", "34300"};
    const std::int64_t first_day = Date{spec.years.first, 1, 1}.serial();
    const std::int64_t last_day = Date{spec.years.last, 12, 31}.serial();
    const int span_days = static_cast<int>(last_day - first_day + 1);
    std::vector<ingest::DiaryEntry> diaries;
    for (int i = 0; i < spec.n_people; ++i) {
        const auto& person = profiles[static_cast<std::size_t>(i)];
        const PersonTraits& t = traits[static_cast<std::size_t>(i)];
        const int n_days = 1 + static_cast<int>(rng.uniform_u64(3));
        auto offsets = rng.sample_without_replacement(span_days, n_days);
        std::sort(offsets.begin(), offsets.end());
        for (int day_offset : offsets) {
            const Date date = Date::from_serial(first_day + day_offset);
            ingest::DiaryEntry sleep;
            sleep.person_id = person.person_id;
            sleep.date = date;
            sleep.start_min = 0;
            sleep.duration_min = 360 + static_cast<int>(rng.uniform_u64(181));
            sleep.activity_code = "14500";
            sleep.location_code = pick(rng, kHomeCodes);
            sleep.smoking_flag = 0;
            sleep.heavy_breath_flag = bernoulli(rng, t.p_heavy_breath * 0.3) ? 1 : 0;
            int cursor = sleep.start_min + sleep.duration_min;
            diaries.push_back(std::move(sleep));

            const int extra = 3 + static_cast<int>(rng.uniform_u64(5));
            for (int e = 0; e < extra && cursor < 1439; ++e) {
                ingest::DiaryEntry entry;
                entry.person_id = person.person_id;
                entry.date = date;
                entry.start_min = cursor;
                int duration = 30 + static_cast<int>(rng.uniform_u64(211));
                duration = std::min(duration, 1439 - cursor);
                if (duration < 1) break;
                entry.duration_min = duration;

                const double au = rng.uniform01();
                bool exertion = false;
                if (au < t.p_exercise) {
                    entry.activity_code = pick(rng, kExerciseCodes);
                    entry.location_code = bernoulli(rng, t.p_outdoor)
                                              ? pick(rng, kOutdoorLocations)
                                              : "33400";
                    exertion = true;
                } else if (au < t.p_exercise + t.p_walk) {
                    entry.activity_code = "17210";
                    entry.location_code = bernoulli(rng, 0.7) ? "34300" : "32400";
                    exertion = true;
                } else if (au < t.p_exercise + t.p_walk + t.p_cycle) {
                    entry.activity_code = "17220";
                    entry.location_code = bernoulli(rng, 0.7) ? "32500" : "34300";
                    exertion = true;
                } else if (person.employment_status == "employed" && bernoulli(rng, 0.45)) {
                    entry.activity_code = bernoulli(rng, 0.85) ? "10100" : "10200";
                    entry.location_code = pick(rng, kWorkLocations);
                } else if (bernoulli(rng, 0.55)) {
                    entry.activity_code = pick(rng, kLeisureCodes);
                    const double lu2 = rng.uniform01();
                    entry.location_code = lu2 < 0.5 ? pick(rng, kHomeCodes)
                                                    : (lu2 < 0.5 + t.p_outdoor * 0.5
                                                           ? pick(rng, kOutdoorLocations)
                                                           : pick(rng, kIndoorLocations));
                } else {
                    entry.activity_code = pick(rng, kChoreCodes);
                    entry.location_code = bernoulli(rng, 0.6) ? pick(rng, kHomeCodes)
                                                              : pick(rng, kIndoorLocations);
                }
                const double hb_p = exertion ? std::min(0.9, t.p_heavy_breath * 4.0)
                                             : t.p_heavy_breath * 0.5;
                entry.heavy_breath_flag = bernoulli(rng, hb_p) ? 1 : 0;
                entry.smoking_flag = bernoulli(rng, t.p_smoke_flag) ? 1 : 0;
                cursor += duration;
                diaries.push_back(std::move(entry));
            }
        }
    }

    // Features for the whole population, computed by the real extractors.
    std::vector<ingest::Cohort::Member> members;
    members.reserve(profiles.size());
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        members.push_back({profiles[i], i % 2 == 0 ? +1 : -1});  // placeholder labels
    }
    const auto stats = spatial::build_monthly_stats(station_days, counties, spec.years, 5);
    const auto matrix = features::build_feature_matrix(
        members, diaries, emissions, stats, features::CategoryMapping::builtin_default(),
        {features::Family::P, features::Family::E, features::Family::A});

    // Logistic labels over z-scored planted columns.
    std::vector<double> logits(profiles.size(), 0.0);
    for (const auto& plant : spec.planted) {
        const int c = matrix.column_index(plant.feature);
        if (c < 0) {
            throw UnknownPlantedFeature("planted feature not in generated schema: " +
                                        plant.feature);
        }
        double sum = 0;
        for (int r = 0; r < matrix.n_rows(); ++r) sum += matrix.at(r, c);
        const double mean = sum / matrix.n_rows();
        double sq = 0;
        for (int r = 0; r < matrix.n_rows(); ++r) {
            const double d = matrix.at(r, c) - mean;
            sq += d * d;
        }
        const double sd = std::sqrt(sq / matrix.n_rows());
        if (sd == 0.0) continue;  // constant column cannot carry signal
        for (int r = 0; r < matrix.n_rows(); ++r) {
            logits[static_cast<std::size_t>(r)] +=
                plant.coefficient * (matrix.at(r, c) - mean) / sd;
        }
    }
    for (auto& logit : logits) logit += spec.noise_scale * rng.normal();

    // Intercept bisection. The target sits a little under one half so the
    // eligible negatives always outnumber the positives and balancing never
    // runs dry, while the rate stays well inside [0.3, 0.7].
    constexpr double kTargetPositiveRate = 0.45;
    double lo = -40.0, hi = 40.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = (lo + hi) / 2.0;
        double mean_p = 0;
        for (double logit : logits) mean_p += sigmoid(mid + logit);
        mean_p /= static_cast<double>(logits.size());
        if (mean_p < kTargetPositiveRate) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double intercept = (lo + hi) / 2.0;

    int positives = 0;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const bool yes = rng.uniform01() < sigmoid(intercept + logits[i]);
        profiles[i].asthma = yes ? ingest::Asthma::yes : ingest::Asthma::no;
        if (yes) ++positives;
        if (bernoulli(rng, 0.02)) profiles[i].asthma = ingest::Asthma::unknown;
    }

    ingest::write_profiles(files.profiles, profiles);
    ingest::write_diaries(files.diaries, diaries);
    ingest::write_emissions(files.emissions, emissions);
    ingest::write_station_days(files.stations, station_days);
    spatial::write_counties(files.counties, counties);
    features::CategoryMapping::builtin_default().save(files.category_map);
    {
        std::string csv = "feature,coefficient\n";
        for (const auto& plant : spec.planted) {
            csv += plant.feature + "," + format_double(plant.coefficient) + "\n";
        }
        write_file_atomic(files.ground_truth, csv);
    }

    GroundTruth truth;
    truth.planted = spec.planted;
    truth.intercept = intercept;
    truth.positive_rate = static_cast<double>(positives) / static_cast<double>(profiles.size());
    truth.n_people = spec.n_people;
    return truth;
}

}  // namespace riskrank::synth
