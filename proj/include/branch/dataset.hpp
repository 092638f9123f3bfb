#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace branch {

enum class FeatureKind { Numeric, Categorical };
enum class ClassLabel { Positive, Negative };

std::string_view feature_kind_name(FeatureKind kind) noexcept;
std::string_view class_label_name(ClassLabel label) noexcept;

struct FeatureDescriptor {
    std::string name;
    FeatureKind kind = FeatureKind::Numeric;
    std::vector<std::string> categories;  // sorted; empty for Numeric
    std::size_t index = 0;

    bool operator==(const FeatureDescriptor&) const = default;
};

struct Missing {
    bool operator==(const Missing&) const = default;
};

using Value = std::variant<Missing, double, std::string>;

inline bool is_missing(const Value& v) noexcept { return std::holds_alternative<Missing>(v); }

struct Sample {
    std::vector<Value> values;
    ClassLabel label = ClassLabel::Negative;

    bool operator==(const Sample&) const = default;
};

struct ClassNames {
    std::string positive;
    std::string negative;

    bool operator==(const ClassNames&) const = default;
};

// What a tree may assume about the data it runs on: the feature names and
// kinds plus the class names. `hash` is order-independent over features.
struct Schema {
    std::vector<FeatureDescriptor> features;
    ClassNames classes;
    std::string hash;

    const FeatureDescriptor* find(std::string_view name) const noexcept;
};

std::string compute_signature(const std::vector<FeatureDescriptor>& features, const ClassNames& classes);

class Dataset {
public:
    Dataset(std::string id, std::string name, std::vector<FeatureDescriptor> features,
            std::vector<Sample> samples, ClassNames classes);

    const std::string& id() const noexcept { return id_; }
    const std::string& name() const noexcept { return name_; }
    const std::vector<FeatureDescriptor>& features() const noexcept { return schema_.features; }
    const std::vector<Sample>& samples() const noexcept { return samples_; }
    const ClassNames& classes() const noexcept { return schema_.classes; }
    const std::string& signature() const noexcept { return schema_.hash; }
    const Schema& schema() const noexcept { return schema_; }

    std::size_t size() const noexcept { return samples_.size(); }
    const FeatureDescriptor* feature(std::string_view name) const noexcept { return schema_.find(name); }
    std::size_t count(ClassLabel label) const noexcept;

    Dataset with_identity(std::string id, std::string name) const;

private:
    std::string id_;
    std::string name_;
    Schema schema_;
    std::vector<Sample> samples_;
};

Dataset parse_csv(std::string_view text, std::string_view class_column, std::string_view positive_name);

// Inverse of parse_csv for a dataset whose class column is named `class_column`.
std::string to_csv(const Dataset& d, std::string_view class_column = "class");

struct DataPartition {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
    double fraction = 0.0;
    // Set when a single-sample class could not be placed on both sides.
    bool too_few_samples = false;

    bool operator==(const DataPartition&) const = default;
};

// Stratified seeded split. Per class, round-half-up(fraction * n) samples go
// to train (clamped to [1, n-1] when n >= 2), chosen by a SplitMix64-driven
// Fisher-Yates shuffle of the class's indices (positive class first).
DataPartition percentage_split(const Dataset& d, double fraction, std::uint64_t seed);

std::vector<FeatureDescriptor> search_features(const Dataset& d, std::string_view query);

nlohmann::json feature_to_json(const FeatureDescriptor& f);
nlohmann::json dataset_to_json(const Dataset& d);
Dataset dataset_from_json(const nlohmann::json& j);

// The walkthrough dataset written by `branch demo`: 7 positive, 3 negative.
std::string demo_csv();
inline constexpr const char* kDemoClassColumn = "outcome";
inline constexpr const char* kDemoPositive = "relapse";

}  // namespace branch
