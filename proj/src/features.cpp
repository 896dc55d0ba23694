#include "riskrank/features.hpp"

#include <algorithm>
#include <sstream>

#include "riskrank/csv.hpp"

namespace riskrank::features {

namespace {

const std::vector<std::string> kMapHeader = {"kind", "code", "categories"};

// Built-in CHAD-style code table; shipped as category_map.csv so users can
// edit it without rebuilding.
struct MapRow {
    const char* kind;
    const char* code;
    const char* categories;
};
constexpr MapRow kDefaultMap[] = {
    {"location", "30120", "home|indoor"},
    {"location", "30121", "home|indoor"},
    {"location", "30125", "home|indoor"},
    {"location", "30130", "home|outdoor"},
    {"location", "30137", "home|outdoor"},
    {"location", "31110", "work|indoor"},
    {"location", "31120", "work|indoor"},
    {"location", "31210", "work|outdoor"},
    {"location", "32100", "travel"},
    {"location", "32200", "travel|indoor"},
    {"location", "32300", "travel|indoor"},
    {"location", "32400", "travel|outdoor"},
    {"location", "32500", "travel|outdoor"},
    {"location", "33100", "indoor"},
    {"location", "33200", "indoor"},
    {"location", "33300", "indoor"},
    {"location", "33400", "indoor"},
    {"location", "33500", "indoor"},
    {"location", "34100", "outdoor"},
    {"location", "34200", "outdoor"},
    {"location", "34300", "outdoor"},
    {"location", "35000", ""},
    {"activity", "10100", "work"},
    {"activity", "10200", "work"},
    {"activity", "11000", ""},
    {"activity", "13000", ""},
    {"activity", "14500", "sleep"},
    {"activity", "15000", ""},
    {"activity", "16100", ""},
    {"activity", "16200", ""},
    {"activity", "17100", "exercise"},
    {"activity", "17110", "exercise|walking"},
    {"activity", "17120", "exercise|cycling"},
    {"activity", "17130", "exercise"},
    {"activity", "17140", "exercise"},
    {"activity", "17210", "walking"},
    {"activity", "17220", "cycling"},
    {"activity", "17300", "leisure"},
    {"activity", "18100", "leisure"},
    {"activity", "18200", "leisure"},
    {"activity", "18300", "leisure"},
    {"activity", "18400", "leisure"},
};

std::set<std::string> parse_category_set(const std::string& raw, bool location,
                                         const std::string& context) {
    std::set<std::string> out;
    if (raw.empty()) return out;
    for (const auto& token : split(raw, '|')) {
        const std::string name = to_lower(trim(token));
        bool known = false;
        if (location) {
            for (const auto& c : location_categories()) known = known || c == name;
        } else {
            for (const auto& c : activity_categories()) known = known || c == name;
        }
        if (!known) {
            throw ValidationError(context + ": unknown category '" + token + "'");
        }
        out.insert(name);
    }
    return out;
}

csv::Table mapping_to_table(const CategoryMapping& mapping) {
    csv::Table table;
    table.header = kMapHeader;
    auto join = [](const std::set<std::string>& s) {
        std::string out;
        for (const auto& v : s) {
            if (!out.empty()) out.push_back('|');
            out += v;
        }
        return out;
    };
    for (const auto& [code, cats] : mapping.location_map) {
        table.rows.push_back({"location", code, join(cats)});
    }
    for (const auto& [code, cats] : mapping.activity_map) {
        table.rows.push_back({"activity", code, join(cats)});
    }
    return table;
}

void push_sorted_unique(std::vector<std::string>& values) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
}

void encode_one_hot(NamedVector& out, const std::string& field, const std::string& value,
                    const std::vector<std::string>& vocab) {
    for (const auto& v : vocab) {
        out["FP_" + field + "_" + sanitize_token(v)] = (value == v) ? 1.0 : 0.0;
    }
    out["FP_" + field + "_missing"] = value.empty() ? 1.0 : 0.0;
}

void encode_tristate(NamedVector& out, const std::string& field, TriState value) {
    out["FP_" + field] = value == TriState::yes ? 1.0 : 0.0;
    out["FP_" + field + "_missing"] = value == TriState::unknown ? 1.0 : 0.0;
}

const char* stat_names[3] = {"max", "mean", "min"};

std::string fa_column(ingest::Factor factor, int stat, int month) {
    std::ostringstream name;
    name << "FA_" << ingest::factor_name(factor) << "_" << stat_names[stat] << "_m" << month;
    return name.str();
}

double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

}  // namespace

const char* family_prefix(Family f) {
    switch (f) {
        case Family::P: return "FP_";
        case Family::E: return "FE_";
        case Family::A: return "FA_";
    }
    return "";
}

const std::array<std::string, 5>& location_categories() {
    static const std::array<std::string, 5> kCats = {"work", "travel", "home", "indoor", "outdoor"};
    return kCats;
}

const std::array<std::string, 6>& activity_categories() {
    static const std::array<std::string, 6> kCats = {"sleep",   "work",    "exercise",
                                                     "walking", "cycling", "leisure"};
    return kCats;
}

CategoryMapping CategoryMapping::load(const std::string& path) {
    const auto table = csv::read(path);
    csv::require_header(table, kMapHeader, path);
    CategoryMapping mapping;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& f = table.rows[i];
        const std::string context = path + ": row " + std::to_string(i + 2);
        if (f.size() != 3) throw ValidationError(context + ": expected 3 fields");
        const std::string kind = to_lower(f[0]);
        if (kind != "location" && kind != "activity") {
            throw ValidationError(context + ": kind must be location or activity");
        }
        auto& target = kind == "location" ? mapping.location_map : mapping.activity_map;
        if (target.count(f[1])) throw ValidationError(context + ": duplicate code '" + f[1] + "'");
        target[f[1]] = parse_category_set(f[2], kind == "location", context);
    }
    return mapping;
}

const CategoryMapping& CategoryMapping::builtin_default() {
    static const CategoryMapping kDefault = [] {
        CategoryMapping mapping;
        for (const auto& row : kDefaultMap) {
            auto& target =
                std::string(row.kind) == "location" ? mapping.location_map : mapping.activity_map;
            target[row.code] =
                parse_category_set(row.categories, std::string(row.kind) == "location", "builtin");
        }
        return mapping;
    }();
    return kDefault;
}

void CategoryMapping::save(const std::string& path) const {
    csv::write(path, mapping_to_table(*this));
}

ActivityFeatures activity_features(const std::vector<ingest::DiaryEntry>& entries,
                                   const CategoryMapping& mapping) {
    if (entries.empty()) throw EmptyDiary("activity_features: no diary entries");
    const std::string& person = entries.front().person_id;
    for (const auto& e : entries) {
        if (e.person_id != person) {
            throw Error("activity_features: entries span multiple persons");
        }
    }

    struct DayAccum {
        std::array<double, 5> loc{};
        std::array<double, 6> act{};
        double t_hb = 0, t_s = 0;
        double n_hb = 0, n_s = 0;
    };
    std::map<Date, DayAccum> days;
    static const std::set<std::string> kEmptySet;
    for (const auto& e : entries) {
        auto& day = days[e.date];
        const auto lit = mapping.location_map.find(e.location_code);
        const auto& locs = lit == mapping.location_map.end() ? kEmptySet : lit->second;
        for (std::size_t i = 0; i < location_categories().size(); ++i) {
            if (locs.count(location_categories()[i])) day.loc[i] += e.duration_min;
        }
        const auto ait = mapping.activity_map.find(e.activity_code);
        const auto& acts = ait == mapping.activity_map.end() ? kEmptySet : ait->second;
        for (std::size_t i = 0; i < activity_categories().size(); ++i) {
            if (acts.count(activity_categories()[i])) day.act[i] += e.duration_min;
        }
        if (e.heavy_breath_flag) {
            day.t_hb += e.duration_min;
            day.n_hb += 1;
        }
        if (e.smoking_flag) {
            day.t_s += e.duration_min;
            day.n_s += 1;
        }
    }

    ActivityFeatures out;
    const double n_days = static_cast<double>(days.size());
    for (const auto& [date, day] : days) {
        for (std::size_t i = 0; i < out.t_location.size(); ++i) out.t_location[i] += day.loc[i];
        for (std::size_t i = 0; i < out.t_activity.size(); ++i) out.t_activity[i] += day.act[i];
        out.t_heavy_breathing += day.t_hb;
        out.t_smoking += day.t_s;
        out.n_heavy_breathing += day.n_hb;
        out.n_smoking += day.n_s;
    }
    for (auto& v : out.t_location) v /= n_days;
    for (auto& v : out.t_activity) v /= n_days;
    out.t_heavy_breathing /= n_days;
    out.t_smoking /= n_days;
    out.n_heavy_breathing /= n_days;
    out.n_smoking /= n_days;
    return out;
}

ProfileVocab ProfileVocab::fit(const std::vector<ingest::Cohort::Member>& members) {
    ProfileVocab vocab;
    for (const auto& m : members) {
        if (!m.profile.race.empty()) vocab.race.push_back(m.profile.race);
        if (!m.profile.employment_status.empty()) vocab.employment.push_back(m.profile.employment_status);
        if (!m.profile.heating_fuel.empty()) vocab.heating_fuel.push_back(m.profile.heating_fuel);
        if (!m.profile.cooking_fuel.empty()) vocab.cooking_fuel.push_back(m.profile.cooking_fuel);
    }
    push_sorted_unique(vocab.race);
    push_sorted_unique(vocab.employment);
    push_sorted_unique(vocab.heating_fuel);
    push_sorted_unique(vocab.cooking_fuel);
    return vocab;
}

NamedVector profile_features(const ingest::PersonProfile& profile, const ProfileVocab& vocab) {
    NamedVector out;
    out["FP_age"] = profile.age_years;
    out["FP_gender_male"] = profile.gender == ingest::Gender::male ? 1.0 : 0.0;
    out["FP_gender_female"] = profile.gender == ingest::Gender::female ? 1.0 : 0.0;
    out["FP_gender_missing"] = profile.gender == ingest::Gender::unknown ? 1.0 : 0.0;
    encode_one_hot(out, "race", profile.race, vocab.race);
    encode_tristate(out, "smoker", profile.smoker);
    encode_tristate(out, "lives_with_smoker", profile.lives_with_smoker);
    encode_one_hot(out, "employment", profile.employment_status, vocab.employment);
    out["FP_hours_work"] = profile.hours_work_per_week;
    out["FP_education"] = profile.education_level;
    out["FP_income"] = profile.income_bracket;
    encode_tristate(out, "gas_stove", profile.gas_stove);
    encode_one_hot(out, "heating_fuel", profile.heating_fuel, vocab.heating_fuel);
    encode_one_hot(out, "cooking_fuel", profile.cooking_fuel, vocab.cooking_fuel);
    return out;
}

NamedVector activity_feature_vector(const ActivityFeatures& f) {
    NamedVector out;
    for (std::size_t i = 0; i < location_categories().size(); ++i) {
        out["FP_t_loc_" + location_categories()[i]] = f.t_location[i];
    }
    for (std::size_t i = 0; i < activity_categories().size(); ++i) {
        out["FP_t_" + activity_categories()[i]] = f.t_activity[i];
    }
    out["FP_t_hb"] = f.t_heavy_breathing;
    out["FP_t_smoking"] = f.t_smoking;
    out["FP_n_hb"] = f.n_heavy_breathing;
    out["FP_n_smoking"] = f.n_smoking;
    return out;
}

NamedVector emission_features(const std::vector<ingest::EmissionRecord>& records,
                              const std::string& county_fips) {
    NamedVector out;
    for (const auto& category : ingest::emission_categories()) {
        out["FE_" + sanitize_token(category)] = 0.0;
    }
    for (const auto& r : records) {
        if (r.county_fips != county_fips) continue;
        out["FE_" + sanitize_token(r.category)] = r.tonnes_per_year;
    }
    return out;
}

NamedVector pollution_features(
    const std::map<ingest::Factor, std::vector<spatial::MonthlyStats>>& stats) {
    NamedVector out;
    for (ingest::Factor factor : ingest::all_factors()) {
        const auto it = stats.find(factor);
        for (int month = 1; month <= 12; ++month) {
            double v[3] = {missing_value(), missing_value(), missing_value()};
            if (it != stats.end()) {
                for (const auto& s : it->second) {
                    if (s.month == month && s.has_data()) {
                        v[0] = s.f_max;
                        v[1] = s.f_mean;
                        v[2] = s.f_min;
                    }
                }
            }
            for (int stat = 0; stat < 3; ++stat) {
                out[fa_column(factor, stat, month)] = v[stat];
            }
        }
    }
    return out;
}

int FeatureMatrix::column_index(const std::string& name) const {
    const auto it = std::find(column_names.begin(), column_names.end(), name);
    if (it == column_names.end()) return -1;
    return static_cast<int>(it - column_names.begin());
}

std::array<int, 3> FeatureMatrix::family_counts() const {
    std::array<int, 3> counts{0, 0, 0};
    for (Family f : family_index) ++counts[static_cast<int>(f)];
    return counts;
}

FeatureMatrix FeatureMatrix::restrict_families(const std::set<Family>& families) const {
    std::vector<int> keep;
    for (int c = 0; c < n_cols(); ++c) {
        if (families.count(family_index[static_cast<std::size_t>(c)])) keep.push_back(c);
    }
    FeatureMatrix out;
    out.person_ids = person_ids;
    out.labels = labels;
    out.column_names.reserve(keep.size());
    out.family_index.reserve(keep.size());
    for (int c : keep) {
        out.column_names.push_back(column_names[static_cast<std::size_t>(c)]);
        out.family_index.push_back(family_index[static_cast<std::size_t>(c)]);
    }
    out.values.resize(static_cast<std::size_t>(n_rows()) * keep.size());
    out.missing.resize(out.values.size());
    for (int r = 0; r < n_rows(); ++r) {
        for (std::size_t j = 0; j < keep.size(); ++j) {
            const std::size_t src = static_cast<std::size_t>(r) * column_names.size() +
                                    static_cast<std::size_t>(keep[j]);
            const std::size_t dst = static_cast<std::size_t>(r) * keep.size() + j;
            out.values[dst] = values[src];
            out.missing[dst] = missing[src];
        }
    }
    return out;
}

FeatureMatrix FeatureMatrix::subset_rows(const std::vector<int>& rows) const {
    FeatureMatrix out;
    out.column_names = column_names;
    out.family_index = family_index;
    out.person_ids.reserve(rows.size());
    out.labels.reserve(rows.size());
    out.values.resize(rows.size() * column_names.size());
    out.missing.resize(out.values.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = static_cast<std::size_t>(rows[i]);
        out.person_ids.push_back(person_ids[r]);
        out.labels.push_back(labels[r]);
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(r * column_names.size()),
                    column_names.size(),
                    out.values.begin() + static_cast<std::ptrdiff_t>(i * column_names.size()));
        std::copy_n(missing.begin() + static_cast<std::ptrdiff_t>(r * column_names.size()),
                    column_names.size(),
                    out.missing.begin() + static_cast<std::ptrdiff_t>(i * column_names.size()));
    }
    return out;
}

void FeatureMatrix::save_csv(const std::string& path) const {
    std::string out;
    out += "person_id,label";
    for (const auto& name : column_names) {
        out.push_back(',');
        out += name;
    }
    out.push_back('\n');
    for (int r = 0; r < n_rows(); ++r) {
        out += person_ids[static_cast<std::size_t>(r)];
        out.push_back(',');
        out += std::to_string(labels[static_cast<std::size_t>(r)]);
        for (int c = 0; c < n_cols(); ++c) {
            out.push_back(',');
            const std::size_t idx = static_cast<std::size_t>(r) * column_names.size() +
                                    static_cast<std::size_t>(c);
            if (!missing[idx]) out += format_double(values[idx]);
        }
        out.push_back('\n');
    }
    write_file_atomic(path, out);
}

namespace {

Family family_from_name(const std::string& name) {
    if (name.rfind("FP_", 0) == 0) return Family::P;
    if (name.rfind("FE_", 0) == 0) return Family::E;
    if (name.rfind("FA_", 0) == 0) return Family::A;
    throw ValidationError("feature column without family prefix: " + name);
}

// Median-imputes NaN cells column by column; adds a <col>_missing companion
// for any column that needs one and does not already have it. Column order
// is rebuilt (family blocks, alphabetical) only when companions were added,
// so files that already carry their companions round-trip byte-identically.
void impute_in_place(FeatureMatrix& m) {
    const int n = m.n_rows();
    const int d = m.n_cols();
    const std::set<std::string> existing(m.column_names.begin(), m.column_names.end());
    std::vector<std::vector<double>> new_columns;
    std::vector<std::string> new_names;
    std::vector<Family> new_families;
    std::vector<double> scratch;
    for (int c = 0; c < d; ++c) {
        scratch.clear();
        bool any_missing = false;
        for (int r = 0; r < n; ++r) {
            const std::size_t idx = static_cast<std::size_t>(r) * d + c;
            if (is_missing(m.values[idx])) {
                any_missing = true;
            } else {
                scratch.push_back(m.values[idx]);
            }
        }
        if (!any_missing) continue;
        const double median = median_of(scratch);
        std::vector<double> indicator(static_cast<std::size_t>(n), 0.0);
        for (int r = 0; r < n; ++r) {
            const std::size_t idx = static_cast<std::size_t>(r) * d + c;
            if (is_missing(m.values[idx])) {
                m.values[idx] = median;
                m.missing[idx] = 1;
                indicator[static_cast<std::size_t>(r)] = 1.0;
            }
        }
        const std::string companion = m.column_names[static_cast<std::size_t>(c)] + "_missing";
        if (!existing.count(companion)) {
            new_columns.push_back(std::move(indicator));
            new_names.push_back(companion);
            new_families.push_back(m.family_index[static_cast<std::size_t>(c)]);
        }
    }
    if (new_names.empty()) return;

    // Splice companions in and re-sort columns within family blocks.
    struct Col {
        std::string name;
        Family family;
        std::vector<double> values;
        std::vector<std::uint8_t> missing;
    };
    std::vector<Col> cols;
    cols.reserve(static_cast<std::size_t>(d) + new_names.size());
    for (int c = 0; c < d; ++c) {
        Col col;
        col.name = m.column_names[static_cast<std::size_t>(c)];
        col.family = m.family_index[static_cast<std::size_t>(c)];
        col.values.resize(static_cast<std::size_t>(n));
        col.missing.resize(static_cast<std::size_t>(n));
        for (int r = 0; r < n; ++r) {
            col.values[static_cast<std::size_t>(r)] = m.values[static_cast<std::size_t>(r) * d + c];
            col.missing[static_cast<std::size_t>(r)] = m.missing[static_cast<std::size_t>(r) * d + c];
        }
        cols.push_back(std::move(col));
    }
    for (std::size_t j = 0; j < new_names.size(); ++j) {
        Col col;
        col.name = new_names[j];
        col.family = new_families[j];
        col.values = std::move(new_columns[j]);
        col.missing.assign(static_cast<std::size_t>(n), 0);
        cols.push_back(std::move(col));
    }
    std::stable_sort(cols.begin(), cols.end(), [](const Col& a, const Col& b) {
        if (a.family != b.family) return static_cast<int>(a.family) < static_cast<int>(b.family);
        return a.name < b.name;
    });

    const std::size_t nd = cols.size();
    m.column_names.clear();
    m.family_index.clear();
    m.values.assign(static_cast<std::size_t>(n) * nd, 0.0);
    m.missing.assign(static_cast<std::size_t>(n) * nd, 0);
    for (std::size_t c = 0; c < nd; ++c) {
        m.column_names.push_back(cols[c].name);
        m.family_index.push_back(cols[c].family);
        for (int r = 0; r < n; ++r) {
            m.values[static_cast<std::size_t>(r) * nd + c] = cols[c].values[static_cast<std::size_t>(r)];
            m.missing[static_cast<std::size_t>(r) * nd + c] = cols[c].missing[static_cast<std::size_t>(r)];
        }
    }
}

}  // namespace

FeatureMatrix FeatureMatrix::load_csv(const std::string& path) {
    const auto table = csv::read(path);
    if (table.header.size() < 2 || table.header[0] != "person_id" || table.header[1] != "label") {
        throw ValidationError(path + ": expected header person_id,label,...");
    }
    FeatureMatrix m;
    for (std::size_t c = 2; c < table.header.size(); ++c) {
        m.column_names.push_back(table.header[c]);
        m.family_index.push_back(family_from_name(table.header[c]));
    }
    const std::size_t d = m.column_names.size();
    m.values.reserve(table.rows.size() * d);
    m.missing.reserve(table.rows.size() * d);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& f = table.rows[i];
        if (f.size() != d + 2) {
            throw ValidationError(path + ": row " + std::to_string(i + 2) + ": wrong field count");
        }
        m.person_ids.push_back(f[0]);
        const auto label = parse_int(f[1]);
        if (!label || (*label != 1 && *label != -1)) {
            throw ValidationError(path + ": row " + std::to_string(i + 2) + ": label must be 1 or -1");
        }
        m.labels.push_back(static_cast<int>(*label));
        for (std::size_t c = 0; c < d; ++c) {
            const auto& cell = f[c + 2];
            if (cell.empty()) {
                m.values.push_back(missing_value());
                m.missing.push_back(1);
            } else {
                const auto v = parse_double(cell);
                if (!v) {
                    throw ValidationError(path + ": row " + std::to_string(i + 2) +
                                          ": bad number '" + cell + "'");
                }
                m.values.push_back(*v);
                m.missing.push_back(0);
            }
        }
    }
    impute_in_place(m);
    return m;
}

FeatureMatrix assemble_matrix(const std::vector<ingest::Cohort::Member>& members,
                              const FeatureInputs& inputs, const std::set<Family>& families,
                              AssemblyLog* log) {
    // Base schema per family; FP is the union of observed names (all persons
    // share one encoder schema), FE and FA are fixed vocabularies.
    std::set<std::string> fp_names;
    for (const auto& m : members) {
        const auto it = inputs.profile.find(m.profile.person_id);
        if (it == inputs.profile.end()) {
            throw Error("assemble_matrix: member without profile features: " + m.profile.person_id);
        }
        for (const auto& [name, value] : it->second) fp_names.insert(name);
    }
    for (const auto& [person, vec] : inputs.activity) {
        for (const auto& [name, value] : vec) fp_names.insert(name);
    }
    // Activity columns exist even if nobody has a diary; the canonical
    // vector of an empty summary carries the schema.
    for (const auto& [name, value] : activity_feature_vector(ActivityFeatures{})) {
        fp_names.insert(name);
    }

    struct Col {
        std::string name;
        Family family;
    };
    std::vector<Col> cols;
    if (families.count(Family::P)) {
        for (const auto& name : fp_names) cols.push_back({name, Family::P});
    }
    if (families.count(Family::E)) {
        for (const auto& category : ingest::emission_categories()) {
            cols.push_back({"FE_" + sanitize_token(category), Family::E});
        }
    }
    if (families.count(Family::A)) {
        std::map<ingest::Factor, std::vector<spatial::MonthlyStats>> empty;
        for (const auto& [name, value] : pollution_features(empty)) {
            cols.push_back({name, Family::A});
        }
    }
    std::stable_sort(cols.begin(), cols.end(), [](const Col& a, const Col& b) {
        if (a.family != b.family) return static_cast<int>(a.family) < static_cast<int>(b.family);
        return a.name < b.name;
    });
    for (std::size_t c = 1; c < cols.size(); ++c) {
        if (cols[c].name == cols[c - 1].name) {
            throw Error("assemble_matrix: duplicate column name " + cols[c].name);
        }
    }

    FeatureMatrix m;
    std::map<std::string, int> index;
    for (const auto& col : cols) {
        index.emplace(col.name, static_cast<int>(m.column_names.size()));
        m.column_names.push_back(col.name);
        m.family_index.push_back(col.family);
    }
    const std::size_t d = cols.size();
    m.values.assign(members.size() * d, missing_value());
    m.missing.assign(members.size() * d, 0);

    std::set<std::string> unmapped;
    for (std::size_t r = 0; r < members.size(); ++r) {
        const auto& member = members[r];
        m.person_ids.push_back(member.profile.person_id);
        m.labels.push_back(member.label);
        auto put = [&](const NamedVector& vec) {
            for (const auto& [name, value] : vec) {
                const auto it = index.find(name);
                if (it != index.end()) {
                    m.values[r * d + static_cast<std::size_t>(it->second)] = value;
                }
            }
        };
        put(inputs.profile.at(member.profile.person_id));
        const auto act = inputs.activity.find(member.profile.person_id);
        if (act != inputs.activity.end()) {
            put(act->second);
        } else if (log && families.count(Family::P)) {
            ++log->members_without_diaries;
        }
        if (families.count(Family::E)) {
            const auto it = inputs.emission.find(member.profile.county_fips);
            if (it != inputs.emission.end()) {
                put(it->second);
            } else {
                unmapped.insert(member.profile.county_fips);
            }
        }
        if (families.count(Family::A)) {
            const auto it = inputs.pollution.find(member.profile.county_fips);
            if (it != inputs.pollution.end()) {
                put(it->second);
            } else {
                unmapped.insert(member.profile.county_fips);
            }
        }
    }
    if (log) log->unmapped_counties.assign(unmapped.begin(), unmapped.end());

    impute_in_place(m);
    return m;
}

FeatureMatrix build_feature_matrix(const std::vector<ingest::Cohort::Member>& members,
                                   const std::vector<ingest::DiaryEntry>& diaries,
                                   const std::vector<ingest::EmissionRecord>& emissions,
                                   const spatial::StatsByCounty& stats,
                                   const CategoryMapping& mapping,
                                   const std::set<Family>& families, AssemblyLog* log) {
    FeatureInputs inputs;
    const ProfileVocab vocab = ProfileVocab::fit(members);

    std::map<std::string, std::vector<ingest::DiaryEntry>> by_person;
    for (const auto& e : diaries) by_person[e.person_id].push_back(e);

    for (const auto& m : members) {
        inputs.profile[m.profile.person_id] = profile_features(m.profile, vocab);
        const auto it = by_person.find(m.profile.person_id);
        if (it != by_person.end() && !it->second.empty()) {
            inputs.activity[m.profile.person_id] =
                activity_feature_vector(activity_features(it->second, mapping));
        }
    }

    if (families.count(Family::E)) {
        std::set<std::string> counties_with_records;
        for (const auto& r : emissions) counties_with_records.insert(r.county_fips);
        for (const auto& county : counties_with_records) {
            inputs.emission[county] = emission_features(emissions, county);
        }
    }
    if (families.count(Family::A)) {
        for (const auto& [county, per_factor] : stats) {
            inputs.pollution[county] = pollution_features(per_factor);
        }
    }
    return assemble_matrix(members, inputs, families, log);
}

}  // namespace riskrank::features
