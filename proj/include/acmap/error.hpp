#pragma once

#include <stdexcept>
#include <string>

namespace acmap {

// Error taxonomy shared by all modules. Every failure carries a stable
// machine-readable kind string so the CLI can map it to an exit code.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error("shape", m) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error("config", m) {}
};

struct DataError : Error {
    explicit DataError(const std::string& m) : Error("data", m) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& m) : Error("format", m) {}
};

struct AlignmentError : Error {
    explicit AlignmentError(const std::string& m) : Error("alignment", m) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& m) : Error("numeric", m) {}
};

struct DegenerateInputError : Error {
    explicit DegenerateInputError(const std::string& m) : Error("degenerate-input", m) {}
};

// Raised when training hits a non-finite loss; reports where it happened.
struct DivergenceError : Error {
    DivergenceError(const std::string& m, std::size_t epoch, std::size_t batch)
        : Error("divergence", m + " (epoch " + std::to_string(epoch) + ", batch " +
                                  std::to_string(batch) + ")"),
          epoch(epoch),
          batch(batch) {}
    std::size_t epoch;
    std::size_t batch;
};

struct IncompleteStoreError : Error {
    explicit IncompleteStoreError(const std::string& m) : Error("incomplete-store", m) {}
};

struct IncompleteArtifactsError : Error {
    explicit IncompleteArtifactsError(const std::string& m) : Error("incomplete-artifacts", m) {}
};

struct IoError : Error {
    explicit IoError(const std::string& m) : Error("io", m) {}
};

}  // namespace acmap
