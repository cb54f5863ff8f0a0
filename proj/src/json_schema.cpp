#include "stresskit/json_schema.hpp"

#include <cmath>

#include "stresskit/error.hpp"

namespace stresskit::json_schema {

using nlohmann::ordered_json;

namespace {

bool has_type(const ordered_json& v, const std::string& type) {
    if (type == "null") return v.is_null();
    if (type == "boolean") return v.is_boolean();
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "number") return v.is_number();
    if (type == "integer") {
        if (v.is_number_integer()) return true;
        return v.is_number_float() && std::trunc(v.get<double>()) == v.get<double>();
    }
    throw Error(ErrorCode::InvalidConfig, "schema uses unknown type '" + type + "'");
}

class Checker {
public:
    explicit Checker(const ordered_json& root) : root_(root) {}

    void check(const ordered_json& v, const ordered_json& schema, const std::string& path) {
        if (schema.is_boolean()) {
            if (!schema.get<bool>()) fail(path, "not allowed");
            return;
        }
        if (schema.contains("$ref")) {
            check(v, resolve(schema["$ref"].get<std::string>()), path);
            return;
        }
        if (schema.contains("anyOf")) {
            bool any = false;
            for (const auto& alt : schema["anyOf"]) {
                Checker sub(root_);
                sub.check(v, alt, path);
                any = any || sub.problems.empty();
            }
            if (!any) fail(path, "matches no alternative of anyOf");
        }
        if (schema.contains("type")) {
            const auto& t = schema["type"];
            bool ok = false;
            if (t.is_string()) {
                ok = has_type(v, t.get<std::string>());
            } else {
                for (const auto& alt : t) ok = ok || has_type(v, alt.get<std::string>());
            }
            if (!ok) {
                fail(path, "expected type " + t.dump() + ", got " + std::string(v.type_name()));
                return;
            }
        }
        if (schema.contains("const") && v != schema["const"]) fail(path, "must equal " + schema["const"].dump());
        if (schema.contains("enum")) {
            bool found = false;
            for (const auto& e : schema["enum"]) found = found || e == v;
            if (!found) fail(path, "value " + v.dump() + " not in enum");
        }
        if (v.is_number()) {
            const double x = v.get<double>();
            if (schema.contains("minimum") && x < schema["minimum"].get<double>()) fail(path, "below minimum");
            if (schema.contains("maximum") && x > schema["maximum"].get<double>()) fail(path, "above maximum");
        }
        if (v.is_object()) check_object(v, schema, path);
        if (v.is_array()) {
            if (schema.contains("minItems") && v.size() < schema["minItems"].get<std::size_t>()) {
                fail(path, "fewer than " + schema["minItems"].dump() + " items");
            }
            if (schema.contains("maxItems") && v.size() > schema["maxItems"].get<std::size_t>()) {
                fail(path, "more than " + schema["maxItems"].dump() + " items");
            }
            if (schema.contains("items")) {
                for (std::size_t i = 0; i < v.size(); ++i) check(v[i], schema["items"], path + "/" + std::to_string(i));
            }
        }
    }

    std::vector<std::string> problems;

private:
    void check_object(const ordered_json& v, const ordered_json& schema, const std::string& path) {
        if (schema.contains("required")) {
            for (const auto& key : schema["required"]) {
                if (!v.contains(key.get<std::string>())) fail(path, "missing required '" + key.get<std::string>() + "'");
            }
        }
        const ordered_json* props = schema.contains("properties") ? &schema["properties"] : nullptr;
        for (const auto& [key, child] : v.items()) {
            if (props && props->contains(key)) {
                check(child, (*props)[key], path + "/" + key);
            } else if (schema.contains("additionalProperties")) {
                check(child, schema["additionalProperties"], path + "/" + key);
            }
        }
    }

    const ordered_json& resolve(const std::string& ref) {
        const std::string prefix = "#/$defs/";
        if (ref.rfind(prefix, 0) != 0 || !root_.contains("$defs") || !root_["$defs"].contains(ref.substr(prefix.size()))) {
            throw Error(ErrorCode::InvalidConfig, "unresolvable schema reference '" + ref + "'");
        }
        return root_["$defs"][ref.substr(prefix.size())];
    }

    void fail(const std::string& path, const std::string& what) { problems.push_back((path.empty() ? "/" : path) + ": " + what); }

    const ordered_json& root_;
};

}  // namespace

std::vector<std::string> validate(const ordered_json& instance, const ordered_json& schema) {
    Checker c(schema);
    c.check(instance, schema, "");
    return c.problems;
}

void require_valid(const ordered_json& instance, const ordered_json& schema) {
    const auto problems = validate(instance, schema);
    if (problems.empty()) return;
    std::string msg = std::to_string(problems.size()) + " problem(s)";
    for (std::size_t i = 0; i < problems.size() && i < 5; ++i) msg += "; " + problems[i];
    throw Error(ErrorCode::SchemaViolation, msg);
}

}  // namespace stresskit::json_schema
