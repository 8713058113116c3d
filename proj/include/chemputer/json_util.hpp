#pragma once
// Strict accessors for the JSON file formats (.rules, .graph, policy and
// Monte Carlo configs). Unknown fields are rejected.

#include <initializer_list>
#include <json.hpp>
#include <string>

#include "chemputer/common.hpp"

namespace chemputer::jsonutil {

class SchemaError : public Error {
public:
    using Error::Error;
};

/// Throws SchemaError if `j` is not an object, has a field outside
/// `allowed`, or misses one of `required`.
void require_object(const nlohmann::json& j, const std::string& what, std::initializer_list<const char*> allowed,
                    std::initializer_list<const char*> required);
const nlohmann::json& require_array(const nlohmann::json& j, const char* key);
std::string get_string(const nlohmann::json& j, const char* key);
double get_number(const nlohmann::json& j, const char* key);
bool get_bool(const nlohmann::json& j, const char* key);

}  // namespace chemputer::jsonutil
