#include "chemputer/json_util.hpp"

#include <algorithm>
#include <cstring>

namespace chemputer::jsonutil {

void require_object(const nlohmann::json& j, const std::string& what, std::initializer_list<const char*> allowed,
                    std::initializer_list<const char*> required) {
    if (!j.is_object()) throw SchemaError(what + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
        if (!known) throw SchemaError(what + " has unknown field '" + key + "'");
    }
    for (const char* r : required) {
        if (!j.contains(r)) throw SchemaError(what + " is missing field '" + std::string(r) + "'");
    }
}

const nlohmann::json& require_array(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_array()) throw SchemaError(std::string("field '") + key + "' must be an array");
    return v;
}

std::string get_string(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_string()) throw SchemaError(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

double get_number(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number()) throw SchemaError(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

bool get_bool(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_boolean()) throw SchemaError(std::string("field '") + key + "' must be a boolean");
    return v.get<bool>();
}

}  // namespace chemputer::jsonutil
