#include <doctest.h>

#include <cmath>
#include <map>

#include "riskrank/spatial.hpp"
#include "test_util.hpp"

using namespace riskrank;
using namespace riskrank::spatial;
using ingest::Factor;
using ingest::StationDay;

namespace {

StationDay reading(const std::string& id, double lat, double lon, Date date, Factor factor,
                   double value) {
    StationDay s;
    s.station_id = id;
    s.latitude = lat;
    s.longitude = lon;
    s.date = date;
    s.factor = factor;
    s.value = value;
    return s;
}

const CountyRef kOrigin{"06059", 0.0, 0.0};
const Date kDay{2003, 7, 14};

}  // namespace

TEST_SUITE("spatial") {

TEST_CASE("single station dominates trivially") {
    const auto v = interpolate_county_day({reading("S1", 1.0, 1.0, kDay, Factor::pm25, 42.0)},
                                          kOrigin);
    REQUIRE(v.has_value());
    CHECK(*v == 42.0);
}

TEST_CASE("two equidistant stations average") {
    const auto v = interpolate_county_day({reading("S1", 1.0, 0.0, kDay, Factor::pm25, 10.0),
                                           reading("S2", -1.0, 0.0, kDay, Factor::pm25, 20.0)},
                                          kOrigin);
    REQUIRE(v.has_value());
    CHECK(*v == doctest::Approx(15.0).epsilon(1e-12));
}

TEST_CASE("inverse-distance weights at 1km and 3km") {
    // Along a meridian the haversine distance is proportional to the latitude
    // offset, so these two stations sit at distances d and 3d.
    const double one_unit = 0.01;
    const auto v = interpolate_county_day(
        {reading("S1", one_unit, 0.0, kDay, Factor::pm25, 10.0),
         reading("S2", 3 * one_unit, 0.0, kDay, Factor::pm25, 30.0)},
        kOrigin);
    REQUIRE(v.has_value());
    // (10/1 + 30/3) / (1/1 + 1/3) = 15
    CHECK(*v == doctest::Approx(15.0).epsilon(1e-9));
}

TEST_CASE("station within a meter of the centroid wins outright") {
    const auto v = interpolate_county_day(
        {reading("S1", 0.0, 0.0, kDay, Factor::pm25, 7.25),
         reading("S2", 1.0, 1.0, kDay, Factor::pm25, 99.0)},
        kOrigin);
    REQUIRE(v.has_value());
    CHECK(*v == 7.25);
}

TEST_CASE("only the five nearest stations contribute") {
    std::vector<StationDay> readings;
    std::vector<double> distances;
    for (int i = 1; i <= 7; ++i) {
        const double lat = 0.01 * i;
        readings.push_back(reading("S" + std::to_string(i), lat, 0.0, kDay, Factor::pm25,
                                   10.0 * i));
        distances.push_back(haversine_km(lat, 0.0, 0.0, 0.0));
    }
    double weighted = 0, weights = 0;
    for (int i = 0; i < 5; ++i) {
        const double w = 1.0 / distances[static_cast<std::size_t>(i)];
        weighted += w * 10.0 * (i + 1);
        weights += w;
    }
    const auto v = interpolate_county_day(readings, kOrigin);
    REQUIRE(v.has_value());
    CHECK(*v == doctest::Approx(weighted / weights).epsilon(1e-12));
    // the far stations would drag the average up
    CHECK(*v < 30.0);
}

TEST_CASE("no readings means missing, mixed input throws") {
    CHECK(!interpolate_county_day({}, kOrigin).has_value());
    CHECK_THROWS_AS(interpolate_county_day(
                        {reading("S1", 1, 0, kDay, Factor::pm25, 1.0),
                         reading("S2", 0, 1, kDay, Factor::so2, 2.0)},
                        kOrigin),
                    MixedFactorInput);
    CHECK_THROWS_AS(interpolate_county_day(
                        {reading("S1", 1, 0, kDay, Factor::pm25, 1.0),
                         reading("S1", 1, 0, {2003, 7, 15}, Factor::pm25, 2.0)},
                        kOrigin),
                    MixedFactorInput);
}

TEST_CASE("interpolation stays inside the contributing value range") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<StationDay> readings;
        double lo = 1e300, hi = -1e300;
        const int n = 1 + static_cast<int>(rng.uniform_u64(8));
        for (int i = 0; i < n; ++i) {
            const double value = rng.uniform(-50.0, 50.0);
            lo = std::min(lo, value);
            hi = std::max(hi, value);
            readings.push_back(reading("S" + std::to_string(i), rng.uniform(-30, 30),
                                       rng.uniform(-100, -60), kDay, Factor::o3, value));
        }
        const CountyRef county{"00001", rng.uniform(-30, 30), rng.uniform(-100, -60)};
        const auto v = interpolate_county_day(readings, county);
        REQUIRE(v.has_value());
        CHECK(*v >= lo - 1e-9);
        CHECK(*v <= hi + 1e-9);
    }
}

TEST_CASE("scaling station values scales the interpolation linearly") {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<StationDay> readings, scaled_pow2, scaled_odd;
        const int n = 2 + static_cast<int>(rng.uniform_u64(6));
        for (int i = 0; i < n; ++i) {
            auto r = reading("S" + std::to_string(i), rng.uniform(-30, 30),
                             rng.uniform(-100, -60), kDay, Factor::no2, rng.uniform(-5, 25));
            readings.push_back(r);
            r.value *= 4.0;
            scaled_pow2.push_back(r);
            r.value = readings.back().value * 3.7;
            scaled_odd.push_back(r);
        }
        const CountyRef county{"00001", rng.uniform(-30, 30), rng.uniform(-100, -60)};
        const double base = *interpolate_county_day(readings, county);
        // power-of-two scaling is exact in binary floating point
        CHECK(*interpolate_county_day(scaled_pow2, county) == 4.0 * base);
        CHECK(*interpolate_county_day(scaled_odd, county) ==
              doctest::Approx(3.7 * base).epsilon(1e-12));
    }
}

TEST_CASE("monthly stats of a constant series collapse to the constant") {
    std::map<Date, double> daily;
    for (int year = 2001; year <= 2004; ++year) {
        for (int day = 1; day <= 28; day += 9) daily[{year, 6, day}] = 7.0;
    }
    const auto stats = county_monthly_stats(daily, Factor::pm25, {2001, 2004});
    REQUIRE(stats.size() == 12);
    const auto& june = stats[5];
    CHECK(june.month == 6);
    CHECK(june.f_max == 7.0);
    CHECK(june.f_mean == 7.0);
    CHECK(june.f_min == 7.0);
    CHECK(june.years_covered.size() == 4);
}

TEST_CASE("monthly stats mix per-year extrema then average over years") {
    std::map<Date, double> daily = {
        {{2001, 6, 1}, 10.0}, {{2001, 6, 10}, 20.0}, {{2001, 6, 20}, 30.0},
        {{2002, 6, 2}, 20.0}, {{2002, 6, 12}, 40.0},
    };
    const auto stats = county_monthly_stats(daily, Factor::pm25, {2001, 2002});
    const auto& june = stats[5];
    CHECK(june.f_max == 35.0);   // mean(30, 40)
    CHECK(june.f_mean == 25.0);  // mean(20, 30)
    CHECK(june.f_min == 15.0);   // mean(10, 20)
    // February had no data in any year
    const auto& feb = stats[1];
    CHECK(!feb.has_data());
    CHECK(is_missing(feb.f_max));
}

TEST_CASE("monthly stats respect the year range and reject empty ranges") {
    std::map<Date, double> daily = {{{1999, 6, 1}, 100.0}, {{2001, 6, 1}, 10.0}};
    const auto stats = county_monthly_stats(daily, Factor::pm25, {2001, 2001});
    CHECK(stats[5].f_mean == 10.0);
    CHECK_THROWS_AS(county_monthly_stats(daily, Factor::pm25, {2005, 2001}), EmptyRange);
}

TEST_CASE("min <= mean <= max on random series") {
    Rng rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        std::map<Date, double> daily;
        const int n_days = 5 + static_cast<int>(rng.uniform_u64(60));
        for (int i = 0; i < n_days; ++i) {
            const int year = 2001 + static_cast<int>(rng.uniform_u64(3));
            const int month = 1 + static_cast<int>(rng.uniform_u64(12));
            const int day = 1 + static_cast<int>(rng.uniform_u64(28));
            daily[{year, month, day}] = rng.uniform(-40, 40);
        }
        for (const auto& s : county_monthly_stats(daily, Factor::temperature, {2001, 2003})) {
            if (!s.has_data()) continue;
            CHECK(s.f_min <= s.f_mean + 1e-12);
            CHECK(s.f_mean <= s.f_max + 1e-12);
        }
    }
}

TEST_CASE("build_monthly_stats matches the direct computation for a colocated station") {
    std::vector<StationDay> days;
    std::map<Date, double> series;
    for (int month = 1; month <= 12; ++month) {
        for (int day = 3; day <= 27; day += 8) {
            const double value = 10.0 + month + day * 0.25;
            days.push_back(reading("S1", 33.0, -117.0, {2002, month, day}, Factor::so2, value));
            series[{2002, month, day}] = value;
        }
    }
    const std::vector<CountyRef> counties = {{"06059", 33.0, -117.0}};
    const auto by_county = build_monthly_stats(days, counties, {2002, 2002});
    const auto expected = county_monthly_stats(series, Factor::so2, {2002, 2002});
    const auto& got = by_county.at("06059").at(Factor::so2);
    REQUIRE(got.size() == 12);
    for (int m = 0; m < 12; ++m) {
        CHECK(got[m].f_max == expected[m].f_max);
        CHECK(got[m].f_mean == expected[m].f_mean);
        CHECK(got[m].f_min == expected[m].f_min);
    }
}

TEST_CASE("county file parsing") {
    testutil::TempDir dir("spatial");
    const std::string path = dir.file("counties.csv");
    testutil::write_text(path, "county_fips,centroid_lat,centroid_lon\n06059,33.7,-117.8\n");
    const auto counties = parse_counties(path);
    REQUIRE(counties.size() == 1);
    CHECK(counties[0].centroid_lat == 33.7);
    testutil::write_text(path, "county_fips,centroid_lat,centroid_lon\n06059,95.0,-117.8\n");
    CHECK_THROWS_AS(parse_counties(path), ValidationError);
}

}  // TEST_SUITE
