#include "riskrank/spatial.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <tuple>

#include "riskrank/csv.hpp"

namespace riskrank::spatial {

namespace {

constexpr double kEarthRadiusKm = 6371.0;
constexpr double kExactLocationKm = 0.001;  // 1 m

const std::vector<std::string> kCountyHeader = {"county_fips", "centroid_lat", "centroid_lon"};

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

struct Candidate {
    double distance_km;
    std::size_t order;  // input position, breaks distance ties
    double value;
};

// Shared IDW core: sorts by (distance, input order), short-circuits to the
// exact value within 1 m, otherwise averages the k nearest with weights
// 1/distance. Candidates must be non-empty.
double idw(std::vector<Candidate>& candidates, int k) {
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(a.distance_km, a.order) < std::tie(b.distance_km, b.order);
    });
    if (candidates.front().distance_km <= kExactLocationKm) return candidates.front().value;

    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), candidates.size());
    double weight_sum = 0.0;
    double weighted = 0.0;
    for (std::size_t i = 0; i < take; ++i) {
        const double w = 1.0 / candidates[i].distance_km;
        weight_sum += w;
        weighted += w * candidates[i].value;
    }
    // Normalized weights must sum to 1; guards the convexity invariant.
    double normalized = 0.0;
    for (std::size_t i = 0; i < take; ++i) {
        normalized += (1.0 / candidates[i].distance_km) / weight_sum;
    }
    if (std::abs(normalized - 1.0) > 1e-12) {
        throw Error("idw: weights do not sum to 1");
    }
    return weighted / weight_sum;
}

}  // namespace

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
    const double phi1 = deg2rad(lat1);
    const double phi2 = deg2rad(lat2);
    const double dphi = deg2rad(lat2 - lat1);
    const double dlambda = deg2rad(lon2 - lon1);
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlambda / 2.0);
    const double a = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

std::vector<CountyRef> parse_counties(const std::string& path) {
    const auto table = csv::read(path);
    csv::require_header(table, kCountyHeader, path);
    std::vector<CountyRef> out;
    out.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& f = table.rows[i];
        if (f.size() != kCountyHeader.size()) {
            throw ValidationError(path + ": row " + std::to_string(i + 2) + ": expected 3 fields");
        }
        CountyRef c;
        c.county_fips = f[0];
        const auto lat = parse_double(f[1]);
        const auto lon = parse_double(f[2]);
        if (c.county_fips.size() != 5 || !lat || !lon || *lat < -90 || *lat > 90 || *lon < -180 ||
            *lon > 180) {
            throw ValidationError(path + ": row " + std::to_string(i + 2) + ": invalid county row");
        }
        c.centroid_lat = *lat;
        c.centroid_lon = *lon;
        out.push_back(std::move(c));
    }
    return out;
}

void write_counties(const std::string& path, const std::vector<CountyRef>& rows) {
    csv::Table table;
    table.header = kCountyHeader;
    for (const auto& c : rows) {
        table.rows.push_back({c.county_fips, format_double(c.centroid_lat),
                              format_double(c.centroid_lon)});
    }
    csv::write(path, table);
}

std::optional<double> interpolate_county_day(const std::vector<ingest::StationDay>& readings,
                                             const CountyRef& county, int k) {
    if (readings.empty()) return std::nullopt;
    const Date date = readings.front().date;
    const ingest::Factor factor = readings.front().factor;
    for (const auto& r : readings) {
        if (r.date != date || r.factor != factor) {
            throw MixedFactorInput("interpolate_county_day: readings span multiple (date, factor)");
        }
    }
    std::vector<Candidate> candidates;
    candidates.reserve(readings.size());
    for (std::size_t i = 0; i < readings.size(); ++i) {
        const auto& r = readings[i];
        const double d =
            haversine_km(r.latitude, r.longitude, county.centroid_lat, county.centroid_lon);
        candidates.push_back({d, i, r.value});
    }
    return idw(candidates, k);
}

std::vector<MonthlyStats> county_monthly_stats(const std::map<Date, double>& daily,
                                               ingest::Factor factor, YearRange years) {
    if (years.first > years.last) {
        throw EmptyRange("county_monthly_stats: empty year range " + std::to_string(years.first) +
                         ".." + std::to_string(years.last));
    }
    const int n_years = years.last - years.first + 1;

    struct YearAccum {
        double max = 0, sum = 0, min = 0;
        int days = 0;
    };
    std::vector<std::array<YearAccum, 12>> per_year(static_cast<std::size_t>(n_years));
    for (const auto& [date, value] : daily) {
        if (date.year < years.first || date.year > years.last) continue;
        auto& acc = per_year[static_cast<std::size_t>(date.year - years.first)]
                            [static_cast<std::size_t>(date.month - 1)];
        if (acc.days == 0) {
            acc.max = acc.min = value;
            acc.sum = value;
        } else {
            acc.max = std::max(acc.max, value);
            acc.min = std::min(acc.min, value);
            acc.sum += value;
        }
        ++acc.days;
    }

    std::vector<MonthlyStats> out;
    out.reserve(12);
    for (int m = 1; m <= 12; ++m) {
        MonthlyStats stats;
        stats.factor = factor;
        stats.month = m;
        double sum_max = 0, sum_mean = 0, sum_min = 0;
        for (int y = 0; y < n_years; ++y) {
            const auto& acc = per_year[static_cast<std::size_t>(y)][static_cast<std::size_t>(m - 1)];
            if (acc.days == 0) continue;
            sum_max += acc.max;
            sum_mean += acc.sum / acc.days;
            sum_min += acc.min;
            stats.years_covered.push_back(years.first + y);
        }
        if (!stats.years_covered.empty()) {
            const double ny = static_cast<double>(stats.years_covered.size());
            stats.f_max = sum_max / ny;
            stats.f_mean = sum_mean / ny;
            stats.f_min = sum_min / ny;
        }
        out.push_back(std::move(stats));
    }
    return out;
}

StatsByCounty build_monthly_stats(const std::vector<ingest::StationDay>& stations,
                                  const std::vector<CountyRef>& counties, YearRange years, int k) {
    if (years.first > years.last) {
        throw EmptyRange("build_monthly_stats: empty year range");
    }

    struct StationPos {
        double lat, lon;
    };
    std::map<std::string, StationPos> positions;
    for (const auto& s : stations) {
        positions.emplace(s.station_id, StationPos{s.latitude, s.longitude});
    }

    // county -> station -> km, computed once
    std::map<std::string, std::map<std::string, double>> distance;
    for (const auto& c : counties) {
        auto& per_station = distance[c.county_fips];
        for (const auto& [sid, pos] : positions) {
            per_station[sid] = haversine_km(pos.lat, pos.lon, c.centroid_lat, c.centroid_lon);
        }
    }

    struct Reading {
        std::string station_id;
        double value;
    };
    std::map<std::pair<int, std::int64_t>, std::vector<Reading>> groups;  // (factor, day) -> readings
    for (const auto& s : stations) {
        if (s.date.year < years.first || s.date.year > years.last) continue;
        groups[{static_cast<int>(s.factor), s.date.serial()}].push_back({s.station_id, s.value});
    }

    std::map<std::string, std::map<ingest::Factor, std::map<Date, double>>> daily;
    std::vector<Candidate> candidates;
    for (const auto& [key, readings] : groups) {
        const auto factor = static_cast<ingest::Factor>(key.first);
        const Date date = Date::from_serial(key.second);
        for (const auto& c : counties) {
            const auto& dist = distance[c.county_fips];
            candidates.clear();
            for (std::size_t i = 0; i < readings.size(); ++i) {
                candidates.push_back({dist.at(readings[i].station_id), i, readings[i].value});
            }
            daily[c.county_fips][factor][date] = idw(candidates, k);
        }
    }

    StatsByCounty out;
    for (const auto& c : counties) {
        auto& per_factor = out[c.county_fips];
        const auto it = daily.find(c.county_fips);
        for (ingest::Factor f : ingest::all_factors()) {
            static const std::map<Date, double> kEmpty;
            const std::map<Date, double>* series = &kEmpty;
            if (it != daily.end()) {
                const auto fit = it->second.find(f);
                if (fit != it->second.end()) series = &fit->second;
            }
            per_factor[f] = county_monthly_stats(*series, f, years);
        }
    }
    return out;
}

}  // namespace riskrank::spatial
