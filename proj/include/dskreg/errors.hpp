#pragma once

#include <stdexcept>
#include <string>

namespace dskreg {

// Error taxonomy mirrored by the CLI exit codes:
//   ConfigError -> 1 (usage / bad configuration)
//   DataError   -> 2 (missing or malformed inputs, inconsistent artifacts)
//   NumericError-> 3 (divergence, non-finite values)
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dskreg
