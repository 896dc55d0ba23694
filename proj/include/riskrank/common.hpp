#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskrank {

// Base error type. The CLI maps these to exit codes: ConfigError -> 1
// (bad configuration or unreadable input), ValidationError -> 2 (data
// fails a schema or invariant), anything else -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct ValidationError : Error {
    using Error::Error;
};

// Missing numeric cells are NaN throughout the pipeline.
inline double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double v) { return std::isnan(v); }

enum class TriState { yes, no, unknown };

// Calendar day. Dates are exchanged as ISO-8601 YYYY-MM-DD.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    static bool is_valid(int y, int m, int d);
    static std::optional<Date> try_parse(const std::string& s);
    std::string to_string() const;

    // Days since 1970-01-01 (civil calendar).
    std::int64_t serial() const;
    static Date from_serial(std::int64_t days);

    auto operator<=>(const Date&) const = default;
};

// Deterministic random source. std::mt19937_64 is fully specified by the
// standard; the derived draws below are hand-rolled because the standard
// distributions are implementation-defined and would break cross-compiler
// reproducibility.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform integer in [0, n), n >= 1. Rejection sampling avoids modulo bias.
    std::uint64_t uniform_u64(std::uint64_t n);

    // Uniform double in [0, 1).
    double uniform01();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller. One value per call, two uniform draws consumed.
    double normal(double mean = 0.0, double stddev = 1.0);

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_u64(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices drawn from [0, n), in draw order.
    std::vector<int> sample_without_replacement(int n, int k);

  private:
    std::mt19937_64 gen_;
};

// Shortest decimal representation that round-trips the exact double.
std::string format_double(double v);

// Strict full-string numeric parsing; nullopt on any trailing garbage.
std::optional<double> parse_double(const std::string& s);
std::optional<std::int64_t> parse_int(const std::string& s);

std::vector<std::string> split(const std::string& s, char sep);
std::string to_lower(std::string s);
std::string trim(const std::string& s);

// Replaces every non-alphanumeric run with '_' so values can be embedded
// in feature column names.
std::string sanitize_token(const std::string& s);

// Runs fn(0..n-1) across a small worker pool. Tasks must be independent;
// results are deterministic because each task writes only its own slot.
void parallel_tasks(int n, const std::function<void(int)>& fn);

// Writes content to path through a temp file + rename so readers never see
// a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

// `key = value` lines; '#' starts a comment; blank lines skipped. Keys may
// repeat (order preserved).
std::vector<std::pair<std::string, std::string>> parse_key_value_file(const std::string& path);

std::string read_file(const std::string& path);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace riskrank
