#pragma once

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>

#include "aegon/encoding.hpp"

namespace aegon {

using Json = nlohmann::json;

// Deterministic byte encoding used everywhere a signature or hash covers a
// structured record: keys sorted lexicographically, no insignificant
// whitespace, UTF-8. nlohmann::json with the default (ordered) object map
// already sorts keys; dump() emits the minified form.
inline std::string canonical_encode(const Json& record) {
    if (record.is_discarded()) throw std::invalid_argument("canonical_encode: invalid value");
    for (const auto& item : record.items()) {
        const auto& v = item.value();
        if (v.is_binary()) throw std::invalid_argument("canonical_encode: binary value");
    }
    return record.dump();
}

} // namespace aegon
