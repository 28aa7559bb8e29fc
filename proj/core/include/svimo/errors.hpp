#pragma once

#include <stdexcept>
#include <string>

namespace svimo {

// Exit codes used by the CLI: 0 success, 2 config, 3 integrity, 4 numerical,
// 5 missing artifact. Anything else maps to 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataIntegrityError : std::runtime_error {
    explicit DataIntegrityError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MissingArtifactError : std::runtime_error {
    explicit MissingArtifactError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitIntegrity = 3,
    kExitNumerical = 4,
    kExitMissingArtifact = 5,
};

}  // namespace svimo
