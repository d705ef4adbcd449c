#pragma once

#include <stdexcept>
#include <string>

namespace aegon {

struct ConflictError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotFoundError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct KeyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace aegon
