#pragma once

#include <stdexcept>
#include <string>

namespace camscope {

// Exit-code contract: 0 success, 2 usage/config, 3 training failure,
// 4 artifact/data mismatch.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct TrainError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const TrainError*>(&e)) return 3;
    if (dynamic_cast<const DataError*>(&e)) return 4;
    return 1;
}

}  // namespace camscope
