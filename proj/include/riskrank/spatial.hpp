#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "riskrank/common.hpp"
#include "riskrank/ingest.hpp"

namespace riskrank::spatial {

struct MixedFactorInput : ValidationError {
    using ValidationError::ValidationError;
};
struct EmptyRange : ValidationError {
    using ValidationError::ValidationError;
};

struct CountyRef {
    std::string county_fips;
    double centroid_lat = 0.0;
    double centroid_lon = 0.0;
};

struct YearRange {
    int first = 2001;
    int last = 2014;
};

// Per-month climatology for one (county, factor): mean over years of the
// per-year daily max / mean / min. All three values are present or all
// missing; a month nobody measured stays missing rather than zero.
struct MonthlyStats {
    ingest::Factor factor = ingest::Factor::pm25;
    int month = 1;  // 1..12
    double f_max = missing_value();
    double f_mean = missing_value();
    double f_min = missing_value();
    std::vector<int> years_covered;

    bool has_data() const { return !is_missing(f_mean); }
};

double haversine_km(double lat1, double lon1, double lat2, double lon2);

std::vector<CountyRef> parse_counties(const std::string& path);
void write_counties(const std::string& path, const std::vector<CountyRef>& rows);

// Point-to-region conversion: inverse-distance weighting (power 1) over the
// k nearest stations to the county centroid. A station within 1 m of the
// centroid short-circuits to its exact value. All readings must share one
// (date, factor); nullopt when there are no readings.
std::optional<double> interpolate_county_day(const std::vector<ingest::StationDay>& readings,
                                             const CountyRef& county, int k = 5);

// daily: date -> county-level value for one (county, factor). For each month,
// per-year max/mean/min over the days present, then averaged across the years
// that have at least one day of data. Always returns 12 entries.
std::vector<MonthlyStats> county_monthly_stats(const std::map<Date, double>& daily,
                                               ingest::Factor factor, YearRange years);

using StatsByCounty = std::map<std::string, std::map<ingest::Factor, std::vector<MonthlyStats>>>;

// Pipeline glue: interpolates every (county, factor, date) with data, then
// reduces to monthly stats per county and factor.
StatsByCounty build_monthly_stats(const std::vector<ingest::StationDay>& stations,
                                  const std::vector<CountyRef>& counties, YearRange years,
                                  int k = 5);

}  // namespace riskrank::spatial
