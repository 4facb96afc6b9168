#pragma once

#include <stdexcept>
#include <string>

namespace nrsar {

/// Broad failure classes; each maps onto a process exit code in the CLI.
enum class ErrorKind { Usage = 1, Data = 2, Numerical = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

// audio / file formats
struct FileNotFoundError : DataError {
    explicit FileNotFoundError(const std::string& path) : DataError("file not found: " + path), path(path) {}
    std::string path;
};

struct UnsupportedFormatError : DataError {
    using DataError::DataError;
};

struct TruncatedDataError : DataError {
    using DataError::DataError;
};

struct FormatError : DataError {
    using DataError::DataError;
};

struct DimensionError : DataError {
    using DataError::DataError;
};

struct ExcerptRangeError : DataError {
    ExcerptRangeError(const std::string& what, double available)
        : DataError(what), available_seconds(available) {}
    double available_seconds;
};

// metric computation
struct SilentReferenceError : DataError {
    using DataError::DataError;
};

struct AlignmentError : DataError {
    AlignmentError(const std::string& what, std::size_t frame) : DataError(what), frame_index(frame) {}
    std::size_t frame_index;
};

} // namespace nrsar
