#include "riskrank/ingest.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "riskrank/csv.hpp"

namespace riskrank::ingest {

namespace {

const std::vector<std::string> kProfileHeader = {
    "person_id",      "county_fips",        "age_years",
    "gender",         "race",               "asthma",
    "smoker",         "lives_with_smoker",  "employment_status",
    "hours_work_per_week", "education_level", "income_bracket",
    "gas_stove",      "heating_fuel",       "cooking_fuel"};

const std::vector<std::string> kDiaryHeader = {
    "person_id", "date", "start_min", "duration_min",
    "activity_code", "location_code", "smoking_flag", "heavy_breathing_flag"};

const std::vector<std::string> kEmissionHeader = {"county_fips", "category", "tonnes_per_year"};

const std::vector<std::string> kStationHeader = {
    "station_id", "latitude", "longitude", "county_fips", "date", "factor", "value"};

[[noreturn]] void bad_row(const std::string& path, std::size_t row, const std::string& column,
                          const std::string& what) {
    std::ostringstream msg;
    msg << path << ": row " << row << ", column '" << column << "': " << what;
    throw MalformedRow(msg.str());
}

bool is_fips(const std::string& s) {
    if (s.size() != 5) return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string require_fips(const std::string& raw, const std::string& path, std::size_t row,
                         const std::string& column) {
    if (!is_fips(raw)) bad_row(path, row, column, "expected 5-digit county code, got '" + raw + "'");
    return raw;
}

Gender parse_gender(const std::string& raw, const std::string& path, std::size_t row) {
    const std::string s = to_lower(raw);
    if (s.empty() || s == "unknown" || s == "u") return Gender::unknown;
    if (s == "m" || s == "male") return Gender::male;
    if (s == "f" || s == "female") return Gender::female;
    bad_row(path, row, "gender", "unrecognized value '" + raw + "'");
}

Asthma parse_asthma(const std::string& raw, const std::string& path, std::size_t row) {
    const std::string s = to_lower(raw);
    if (s.empty() || s == "unknown" || s == "u") return Asthma::unknown;
    if (s == "yes" || s == "y" || s == "1" || s == "true") return Asthma::yes;
    if (s == "no" || s == "n" || s == "0" || s == "false") return Asthma::no;
    bad_row(path, row, "asthma", "unrecognized value '" + raw + "'");
}

TriState parse_tristate(const std::string& raw, const std::string& path, std::size_t row,
                        const std::string& column) {
    const std::string s = to_lower(raw);
    if (s.empty() || s == "unknown" || s == "u") return TriState::unknown;
    if (s == "yes" || s == "y" || s == "1" || s == "true") return TriState::yes;
    if (s == "no" || s == "n" || s == "0" || s == "false") return TriState::no;
    bad_row(path, row, column, "unrecognized value '" + raw + "'");
}

double parse_nullable_number(const std::string& raw, const std::string& path, std::size_t row,
                             const std::string& column, bool require_non_negative) {
    if (raw.empty()) return missing_value();
    const auto v = parse_double(raw);
    if (!v) bad_row(path, row, column, "not a number: '" + raw + "'");
    if (require_non_negative && *v < 0) bad_row(path, row, column, "negative value");
    return *v;
}

const std::vector<std::string>& checked_row(const std::vector<std::string>& fields,
                                            std::size_t expected, const std::string& path,
                                            std::size_t row) {
    if (fields.size() != expected) {
        std::ostringstream msg;
        msg << path << ": row " << row << ": expected " << expected << " fields, got "
            << fields.size();
        throw MalformedRow(msg.str());
    }
    return fields;
}

}  // namespace

const std::vector<std::string>& emission_categories() {
    static const std::vector<std::string> kCategories = {
        "Aircraft",
        "Marine Vessels",
        "Locomotives",
        "Equipment",
        "Heavy Duty Vehicles",
        "Light Duty Vehicles",
        "Agricultural",
        "Mining",
        "Oil & Gas Production",
        "Storage & Transportation",
        "Construction",
        "Paved Road Dust",
        "Unpaved Road Dust",
        "Agricultural Field Burning",
        "Prescribed Fires",
        "Wildfires",
        "Biomass",
        "Coal",
        "Natural Gas",
        "Oil",
        "Residential Wood",
        "Waste Disposal",
        "Commercial Cooking",
    };
    return kCategories;
}

std::optional<std::string> normalize_category(const std::string& raw) {
    static const std::map<std::string, std::string> kIndex = [] {
        std::map<std::string, std::string> index;
        for (const auto& name : emission_categories()) index[to_lower(name)] = name;
        index["agriculture"] = "Agricultural";
        return index;
    }();
    const auto it = kIndex.find(to_lower(trim(raw)));
    if (it == kIndex.end()) return std::nullopt;
    return it->second;
}

const char* factor_name(Factor f) {
    switch (f) {
        case Factor::pm25: return "pm25";
        case Factor::so2: return "so2";
        case Factor::no2: return "no2";
        case Factor::o3: return "o3";
        case Factor::co: return "co";
        case Factor::temperature: return "temperature";
        case Factor::pressure: return "pressure";
        case Factor::wind_speed: return "wind_speed";
    }
    return "?";
}

std::optional<Factor> parse_factor(const std::string& s) {
    for (Factor f : all_factors()) {
        if (to_lower(s) == factor_name(f)) return f;
    }
    return std::nullopt;
}

const std::vector<Factor>& all_factors() {
    static const std::vector<Factor> kAll = {Factor::pm25,        Factor::so2,
                                             Factor::no2,         Factor::o3,
                                             Factor::co,          Factor::temperature,
                                             Factor::pressure,    Factor::wind_speed};
    return kAll;
}

const char* gender_name(Gender g) {
    switch (g) {
        case Gender::male: return "male";
        case Gender::female: return "female";
        case Gender::unknown: return "";
    }
    return "";
}

const char* asthma_name(Asthma a) {
    switch (a) {
        case Asthma::yes: return "yes";
        case Asthma::no: return "no";
        case Asthma::unknown: return "";
    }
    return "";
}

const char* tristate_name(TriState t) {
    switch (t) {
        case TriState::yes: return "yes";
        case TriState::no: return "no";
        case TriState::unknown: return "";
    }
    return "";
}

std::vector<PersonProfile> parse_profiles(const std::string& path) {
    const auto table = csv::read(path);
    try {
        csv::require_header(table, kProfileHeader, path);
    } catch (const ValidationError& e) {
        throw MissingHeader(e.what());
    }
    std::vector<PersonProfile> out;
    out.reserve(table.rows.size());
    std::set<std::string> seen_ids;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const std::size_t row_no = i + 2;  // 1-based, after header
        const auto& f = checked_row(table.rows[i], kProfileHeader.size(), path, row_no);
        PersonProfile p;
        p.person_id = f[0];
        if (p.person_id.empty()) bad_row(path, row_no, "person_id", "empty id");
        if (!seen_ids.insert(p.person_id).second) {
            throw DuplicatePersonId(path + ": duplicate person_id '" + p.person_id + "'");
        }
        if (!f[1].empty()) p.county_fips = require_fips(f[1], path, row_no, "county_fips");
        const auto age = parse_int(f[2]);
        if (!age || *age < 0 || *age > 130) {
            bad_row(path, row_no, "age_years", "expected integer in [0, 130], got '" + f[2] + "'");
        }
        p.age_years = static_cast<int>(*age);
        p.gender = parse_gender(f[3], path, row_no);
        p.race = f[4];
        p.asthma = parse_asthma(f[5], path, row_no);
        p.smoker = parse_tristate(f[6], path, row_no, "smoker");
        p.lives_with_smoker = parse_tristate(f[7], path, row_no, "lives_with_smoker");
        p.employment_status = f[8];
        p.hours_work_per_week = parse_nullable_number(f[9], path, row_no, "hours_work_per_week", true);
        p.education_level = parse_nullable_number(f[10], path, row_no, "education_level", false);
        p.income_bracket = parse_nullable_number(f[11], path, row_no, "income_bracket", false);
        p.gas_stove = parse_tristate(f[12], path, row_no, "gas_stove");
        p.heating_fuel = f[13];
        p.cooking_fuel = f[14];
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<DiaryEntry> parse_diaries(const std::string& path) {
    const auto table = csv::read(path);
    try {
        csv::require_header(table, kDiaryHeader, path);
    } catch (const ValidationError& e) {
        throw MissingHeader(e.what());
    }
    std::vector<DiaryEntry> out;
    out.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const std::size_t row_no = i + 2;
        const auto& f = checked_row(table.rows[i], kDiaryHeader.size(), path, row_no);
        DiaryEntry e;
        e.person_id = f[0];
        if (e.person_id.empty()) bad_row(path, row_no, "person_id", "empty id");
        const auto date = Date::try_parse(f[1]);
        if (!date) bad_row(path, row_no, "date", "expected YYYY-MM-DD, got '" + f[1] + "'");
        e.date = *date;
        const auto start = parse_int(f[2]);
        if (!start || *start < 0 || *start > 1439) {
            bad_row(path, row_no, "start_min", "expected integer in [0, 1439], got '" + f[2] + "'");
        }
        e.start_min = static_cast<int>(*start);
        const auto dur = parse_int(f[3]);
        if (!dur) bad_row(path, row_no, "duration_min", "not an integer: '" + f[3] + "'");
        if (*dur < 1) {
            throw NonPositiveDuration(path + ": row " + std::to_string(row_no) +
                                      ": duration_min must be >= 1, got " + f[3]);
        }
        if (e.start_min + *dur > 1440 + 1439) {
            bad_row(path, row_no, "duration_min", "entry extends past the following day");
        }
        e.duration_min = static_cast<int>(*dur);
        e.activity_code = f[4];
        e.location_code = f[5];
        for (int fi : {6, 7}) {
            const auto& col = kDiaryHeader[static_cast<std::size_t>(fi)];
            if (f[fi] != "0" && f[fi] != "1") {
                throw FlagOutOfRange(path + ": row " + std::to_string(row_no) + ", column '" + col +
                                     "': flag must be 0 or 1, got '" + f[fi] + "'");
            }
        }
        e.smoking_flag = f[6] == "1" ? 1 : 0;
        e.heavy_breath_flag = f[7] == "1" ? 1 : 0;
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<EmissionRecord> parse_emissions(const std::string& path) {
    const auto table = csv::read(path);
    try {
        csv::require_header(table, kEmissionHeader, path);
    } catch (const ValidationError& e) {
        throw MissingHeader(e.what());
    }
    std::vector<EmissionRecord> out;
    out.reserve(table.rows.size());
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const std::size_t row_no = i + 2;
        const auto& f = checked_row(table.rows[i], kEmissionHeader.size(), path, row_no);
        EmissionRecord r;
        r.county_fips = require_fips(f[0], path, row_no, "county_fips");
        const auto category = normalize_category(f[1]);
        if (!category) {
            throw UnknownCategory(path + ": row " + std::to_string(row_no) +
                                  ": unknown emission category '" + f[1] + "'");
        }
        r.category = *category;
        const auto tonnes = parse_double(f[2]);
        if (!tonnes || !(*tonnes >= 0)) {
            bad_row(path, row_no, "tonnes_per_year", "expected non-negative number, got '" + f[2] + "'");
        }
        r.tonnes_per_year = *tonnes;
        if (!seen.insert({r.county_fips, r.category}).second) {
            bad_row(path, row_no, "category",
                    "duplicate (county, category) pair: " + r.county_fips + ", " + r.category);
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<StationDay> parse_station_days(const std::string& path) {
    const auto table = csv::read(path);
    try {
        csv::require_header(table, kStationHeader, path);
    } catch (const ValidationError& e) {
        throw MissingHeader(e.what());
    }
    std::vector<StationDay> out;
    out.reserve(table.rows.size());
    std::set<std::tuple<std::string, std::int64_t, int>> seen;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const std::size_t row_no = i + 2;
        const auto& f = checked_row(table.rows[i], kStationHeader.size(), path, row_no);
        StationDay s;
        s.station_id = f[0];
        if (s.station_id.empty()) bad_row(path, row_no, "station_id", "empty id");
        const auto lat = parse_double(f[1]);
        const auto lon = parse_double(f[2]);
        if (!lat || !lon) bad_row(path, row_no, "latitude", "coordinates must be numeric");
        if (*lat < -90.0 || *lat > 90.0 || *lon < -180.0 || *lon > 180.0) {
            throw CoordinateOutOfRange(path + ": row " + std::to_string(row_no) + ": (" + f[1] +
                                       ", " + f[2] + ") outside valid ranges");
        }
        s.latitude = *lat;
        s.longitude = *lon;
        if (!f[3].empty()) s.county_fips = require_fips(f[3], path, row_no, "county_fips");
        const auto date = Date::try_parse(f[4]);
        if (!date) bad_row(path, row_no, "date", "expected YYYY-MM-DD, got '" + f[4] + "'");
        s.date = *date;
        const auto factor = parse_factor(f[5]);
        if (!factor) {
            throw UnknownFactor(path + ": row " + std::to_string(row_no) + ": unknown factor '" +
                                f[5] + "'");
        }
        s.factor = *factor;
        const auto value = parse_double(f[6]);
        if (!value) bad_row(path, row_no, "value", "not a number: '" + f[6] + "'");
        s.value = *value;
        if (!seen.insert({s.station_id, s.date.serial(), static_cast<int>(s.factor)}).second) {
            bad_row(path, row_no, "factor",
                    "duplicate (station_id, date, factor): " + s.station_id + ", " + f[4] + ", " + f[5]);
        }
        out.push_back(std::move(s));
    }
    return out;
}

void write_profiles(const std::string& path, const std::vector<PersonProfile>& rows) {
    csv::Table table;
    table.header = kProfileHeader;
    table.rows.reserve(rows.size());
    auto num = [](double v) { return is_missing(v) ? std::string() : format_double(v); };
    for (const auto& p : rows) {
        table.rows.push_back({p.person_id, p.county_fips, std::to_string(p.age_years),
                              gender_name(p.gender), p.race, asthma_name(p.asthma),
                              tristate_name(p.smoker), tristate_name(p.lives_with_smoker),
                              p.employment_status, num(p.hours_work_per_week),
                              num(p.education_level), num(p.income_bracket),
                              tristate_name(p.gas_stove), p.heating_fuel, p.cooking_fuel});
    }
    csv::write(path, table);
}

void write_diaries(const std::string& path, const std::vector<DiaryEntry>& rows) {
    csv::Table table;
    table.header = kDiaryHeader;
    table.rows.reserve(rows.size());
    for (const auto& e : rows) {
        table.rows.push_back({e.person_id, e.date.to_string(), std::to_string(e.start_min),
                              std::to_string(e.duration_min), e.activity_code, e.location_code,
                              std::to_string(e.smoking_flag), std::to_string(e.heavy_breath_flag)});
    }
    csv::write(path, table);
}

void write_emissions(const std::string& path, const std::vector<EmissionRecord>& rows) {
    csv::Table table;
    table.header = kEmissionHeader;
    table.rows.reserve(rows.size());
    for (const auto& r : rows) {
        table.rows.push_back({r.county_fips, r.category, format_double(r.tonnes_per_year)});
    }
    csv::write(path, table);
}

void write_station_days(const std::string& path, const std::vector<StationDay>& rows) {
    csv::Table table;
    table.header = kStationHeader;
    table.rows.reserve(rows.size());
    for (const auto& s : rows) {
        table.rows.push_back({s.station_id, format_double(s.latitude), format_double(s.longitude),
                              s.county_fips, s.date.to_string(), factor_name(s.factor),
                              format_double(s.value)});
    }
    csv::write(path, table);
}

Cohort balance_cohort(const std::vector<PersonProfile>& profiles, std::uint64_t seed) {
    std::vector<const PersonProfile*> positives;
    std::vector<const PersonProfile*> negatives;
    for (const auto& p : profiles) {
        if (p.asthma == Asthma::unknown || p.county_fips.empty()) continue;
        (p.asthma == Asthma::yes ? positives : negatives).push_back(&p);
    }
    if (positives.empty()) throw NoPositives("no eligible profiles with asthma=yes");
    if (negatives.size() < positives.size()) {
        throw InsufficientNegatives("need " + std::to_string(positives.size()) +
                                    " eligible negatives, have " + std::to_string(negatives.size()));
    }
    Rng rng(seed);
    auto picked = rng.sample_without_replacement(static_cast<int>(negatives.size()),
                                                 static_cast<int>(positives.size()));
    std::sort(picked.begin(), picked.end());

    Cohort cohort;
    cohort.seed = seed;
    cohort.members.reserve(positives.size() * 2);
    for (const auto* p : positives) cohort.members.push_back({*p, +1});
    for (int idx : picked) cohort.members.push_back({*negatives[static_cast<std::size_t>(idx)], -1});
    return cohort;
}

}  // namespace riskrank::ingest
