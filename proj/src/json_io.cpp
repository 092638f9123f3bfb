#include "branch/json_io.hpp"

#include <algorithm>
#include <cmath>

#include "branch/error.hpp"

namespace branch {

std::string canonical_dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

nlohmann::json parse_json(std::string_view text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("invalid JSON: ") + e.what(), "$");
    }
}

void JsonReader::fail(const std::string& message) const {
    throw Error(ErrorCode::SchemaViolation, message + " at " + path_, path_);
}

const JsonReader& JsonReader::expect_object(std::initializer_list<std::string_view> allowed) const {
    if (!node_->is_object()) fail("expected object");
    for (const auto& item : node_->items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            JsonReader(item.value(), path_ + "." + item.key()).fail("unknown field '" + item.key() + "'");
        }
    }
    return *this;
}

const JsonReader& JsonReader::expect_map() const {
    if (!node_->is_object()) fail("expected object");
    return *this;
}

bool JsonReader::has(std::string_view key) const {
    return node_->is_object() && node_->contains(std::string(key));
}

JsonReader JsonReader::at(std::string_view key) const {
    if (!node_->is_object()) fail("expected object");
    const auto it = node_->find(std::string(key));
    const std::string child = path_ + "." + std::string(key);
    if (it == node_->end()) throw Error(ErrorCode::SchemaViolation, "missing field at " + child, child);
    return JsonReader(*it, child);
}

JsonReader JsonReader::at(std::size_t index) const {
    if (!node_->is_array()) fail("expected array");
    if (index >= node_->size()) fail("index out of range");
    return JsonReader((*node_)[index], path_ + "[" + std::to_string(index) + "]");
}

std::size_t JsonReader::array_size() const {
    if (!node_->is_array()) fail("expected array");
    return node_->size();
}

std::string JsonReader::string() const {
    if (!node_->is_string()) fail("expected string");
    return node_->get<std::string>();
}

double JsonReader::number() const {
    if (!node_->is_number()) fail("expected number");
    const double v = node_->get<double>();
    if (!std::isfinite(v)) fail("expected finite number");
    return v;
}

std::uint64_t JsonReader::count() const {
    if (!node_->is_number_unsigned() && !(node_->is_number_integer() && node_->get<std::int64_t>() >= 0)) {
        fail("expected non-negative integer");
    }
    return node_->get<std::uint64_t>();
}

std::int64_t JsonReader::integer() const {
    if (!node_->is_number_integer()) fail("expected integer");
    return node_->get<std::int64_t>();
}

bool JsonReader::boolean() const {
    if (!node_->is_boolean()) fail("expected boolean");
    return node_->get<bool>();
}

}  // namespace branch
