#pragma once

#include <stdexcept>
#include <string>

namespace patchsim {

// Error taxonomy used across the library. The CLI maps these to exit codes:
// usage errors -> 1, ConfigError/DataError -> 2, NumericError and the rest -> 3.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

struct StateError : Error {
    explicit StateError(const std::string& msg) : Error(msg) {}
};

struct ContractError : Error {
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

}  // namespace patchsim
