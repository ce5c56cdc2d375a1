// Shared utilities: error types, deterministic RNG helpers, number formatting.
#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace treecat {

// Error taxonomy maps onto CLI exit codes: usage=1, data/validation=2, training=3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UsageError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct TrainError : Error {
    using Error::Error;
};

// --- deterministic hashing / RNG ------------------------------------------

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t hash_combine(uint64_t seed, std::string_view tag) {
    // mix the seed bytes first so (seed, tag) pairs never collide with plain fnv of tag
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((seed >> (8 * i)) & 0xff);
    return fnv1a64(tag, fnv1a64(std::string_view(buf, 8)));
}

// mt19937_64 output is pinned by the standard; all draws below avoid the
// implementation-defined std distributions so streams are reproducible everywhere.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}
    Rng(uint64_t seed, std::string_view tag) : engine_(hash_combine(seed, tag)) {}

    uint64_t next_u64() { return engine_(); }

    // uniform in [0,1) with 53 bits
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // uniform in [lo,hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0,n)
    uint64_t below(uint64_t n) { return engine_() % n; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        // Fisher-Yates, pinned draw order
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// --- number formatting (exact round-trip) ----------------------------------

// shortest decimal form that parses back to the same double
inline std::string format_double(double v) {
    char buf[40];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

inline std::string format_fixed(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

inline double parse_double(std::string_view s) {
    double v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw DataError("malformed number: '" + std::string(s) + "'");
    return v;
}

inline long long parse_int(std::string_view s) {
    long long v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw DataError("malformed integer: '" + std::string(s) + "'");
    return v;
}

// --- small string/file helpers ---------------------------------------------

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            break;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
        s.remove_suffix(1);
    return s;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, std::string_view content) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + p.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("short write: " + p.string());
}

}  // namespace treecat
