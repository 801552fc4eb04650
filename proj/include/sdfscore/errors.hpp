#pragma once

#include <stdexcept>
#include <string>

namespace sdfscore {

// Error taxonomy shared by the library and the CLI exit codes.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct shape_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace sdfscore
