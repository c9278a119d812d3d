#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace medsynth {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArgumentError : Error { using Error::Error; };
struct LookupError : Error { using Error::Error; };
struct ContractError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

struct GraphError : Error { using Error::Error; };

struct ExpansionError : Error {
    ExpansionError(const std::string& what, int step = -1)
        : Error(what), step_index(step) {}
    int step_index;  // -1 when not tied to a walk step
};

struct NoValidPathError : Error { using Error::Error; };
struct GenerationError : Error { using Error::Error; };
struct LeakageError : GenerationError { using GenerationError::GenerationError; };
struct CalibrationError : Error { using Error::Error; };

struct SupplyError : Error {
    SupplyError(const std::string& what, std::string pool_name)
        : Error(what), pool(std::move(pool_name)) {}
    std::string pool;  // which pool ran short: "guided" or "exploration"
};

struct ScoringError : Error { using Error::Error; };
struct EvidenceError : Error { using Error::Error; };

struct TransportError : Error { using Error::Error; };
struct ScriptViolationError : Error { using Error::Error; };
struct DiscoveryError : Error { using Error::Error; };
struct UnknownAccuracyError : Error { using Error::Error; };

}  // namespace medsynth
