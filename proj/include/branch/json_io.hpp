#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

namespace branch {

// Sorted keys, two-space indent, LF line endings, trailing newline.
std::string canonical_dump(const nlohmann::json& j);

nlohmann::json parse_json(std::string_view text);

// Strict reader that reports failures as SchemaViolation at a JSON path.
class JsonReader {
public:
    explicit JsonReader(const nlohmann::json& node, std::string path = "$") : node_(&node), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }
    const nlohmann::json& raw() const noexcept { return *node_; }

    // Requires an object whose keys all appear in `allowed`.
    const JsonReader& expect_object(std::initializer_list<std::string_view> allowed) const;
    // Requires an object with arbitrary keys.
    const JsonReader& expect_map() const;
    bool has(std::string_view key) const;
    JsonReader at(std::string_view key) const;
    JsonReader at(std::size_t index) const;
    std::size_t array_size() const;

    std::string string() const;
    double number() const;
    std::uint64_t count() const;
    std::int64_t integer() const;
    bool boolean() const;

    [[noreturn]] void fail(const std::string& message) const;

private:
    const nlohmann::json* node_;
    std::string path_;
};

}  // namespace branch
