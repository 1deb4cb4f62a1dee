#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace swfsec {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

enum class ErrorCode {
    UnknownSignature,
    Truncated,
    DecompressFailed,
    IndexOutOfRange,
    DegenerateTraining,
    NotFitted,
    ZeroVector,
    NonConvergence,
    NotDifferentiable,
    TooFewSamples,
    DimensionMismatch,
    UnrealizablePlan,
    UnencodableName,
    ParseFailed,
    CorpusTooSmall,
    NoTemporalMetadata,
    IoError,
    ConfigError,
    FormatError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) { }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Dense row-major matrix of doubles. Rows are samples throughout the project.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) { }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    void append_row(std::span<const double> values);
    Matrix select_rows(std::span<const std::size_t> indices) const;

    const std::vector<double>& data() const noexcept { return values_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);

Bytes read_file(const std::string& path);
void write_file(const std::string& path, ByteView bytes);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// Formats with `%.9g`; every report and CSV goes through this so reruns are byte-identical.
std::string format_double(double value, int significant = 9);

} // namespace swfsec
