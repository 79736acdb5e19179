#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace roler {

// Inclusive reward bounds of a dataset; predictions and observed values are
// expected to live inside it.
struct RewardRange {
    double min_r = 0.0;
    double max_r = 1.0;

    double clip(double x) const { return std::clamp(x, min_r, max_r); }
    bool contains(double x) const { return x >= min_r && x <= max_r; }
    double span() const { return max_r - min_r; }
    bool operator==(const RewardRange&) const = default;
};

// Dense row-major matrix of doubles. Small and value-semantic on purpose;
// everything in this project is desk scale.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

    std::span<double> row(int r) { return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)}; }
    std::span<const double> row(int r) const {
        return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)};
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// Error taxonomy; the CLI maps these onto exit codes.
struct config_error : std::runtime_error {
    std::string field;
    config_error(std::string field_name, const std::string& message)
        : std::runtime_error("config error: " + field_name + ": " + message), field(std::move(field_name)) {}
};

struct parse_error : std::runtime_error {
    long line;
    parse_error(const std::string& path, long line_number, const std::string& message)
        : std::runtime_error(path + ":" + std::to_string(line_number) + ": " + message), line(line_number) {}
};

struct io_error : std::runtime_error {
    explicit io_error(const std::string& message) : std::runtime_error(message) {}
};

struct param_error : std::runtime_error {
    explicit param_error(const std::string& message) : std::runtime_error(message) {}
};

struct feature_error : std::runtime_error {
    explicit feature_error(const std::string& message) : std::runtime_error(message) {}
};

struct precondition_error : std::runtime_error {
    explicit precondition_error(const std::string& message) : std::runtime_error(message) {}
};

struct divergence_error : std::runtime_error {
    explicit divergence_error(const std::string& message) : std::runtime_error(message) {}
};

// Shortest decimal form that round-trips the exact double.
inline std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    (void)ec;
    return std::string(buf, ptr);
}

inline constexpr uint64_t kFnvOffset = 1469598103934665603ull;
inline constexpr uint64_t kFnvPrime = 1099511628211ull;

inline uint64_t fnv1a64(std::string_view bytes, uint64_t h = kFnvOffset) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

inline uint64_t fnv1a64(uint64_t value, uint64_t h = kFnvOffset) {
    for (int i = 0; i < 8; ++i) {
        h ^= (value >> (8 * i)) & 0xffu;
        h *= kFnvPrime;
    }
    return h;
}

inline double mean_of(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

// Sample standard deviation (n-1); 0 for fewer than two points.
inline double stddev_of(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace roler
