#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "branch/dataset.hpp"
#include "branch/error.hpp"
#include "branch/model.hpp"

namespace branch {

// Numeric features use `threshold`; categorical features use `left_categories`.
struct SingleFeatureRule {
    std::string feature;
    std::optional<double> threshold;
    std::vector<std::string> left_categories;

    bool operator==(const SingleFeatureRule&) const = default;
};

// A named linear combination of numeric features: offset + sum(w_i * x_i).
struct CustomFeatureDef {
    std::string name;
    std::map<std::string, double> weights;
    double offset = 0.0;

    bool operator==(const CustomFeatureDef&) const = default;
};

struct CustomFeatureRule {
    CustomFeatureDef definition;
    double threshold = 0.0;

    bool operator==(const CustomFeatureRule&) const = default;
};

struct ModelRule {
    TrainedModel model;
    std::vector<std::string> feature_subset;

    bool operator==(const ModelRule&) const = default;
};

struct TreeRefRule {
    std::string tree_id;

    bool operator==(const TreeRefRule&) const = default;
};

struct Point {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point&) const = default;
};

using Polygon = std::vector<Point>;

struct VisualRule {
    std::string feature_x;
    std::string feature_y;
    std::vector<Polygon> polygons;

    bool operator==(const VisualRule&) const = default;
};

using SplitRule = std::variant<SingleFeatureRule, CustomFeatureRule, ModelRule, TreeRefRule, VisualRule>;

enum class Direction { Left, Right };
enum class Route { Left, Right, MissingInput };

struct Leaf {
    ClassLabel label = ClassLabel::Negative;
    std::uint64_t total = 0;
    std::uint64_t positive = 0;

    bool operator==(const Leaf&) const = default;
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Split {
    SplitRule rule;
    NodePtr left;
    NodePtr right;
    // Explicit branch for missing inputs; otherwise the heavier child.
    std::optional<Direction> missing;
};

struct Node {
    std::variant<Leaf, Split> content;

    bool is_leaf() const noexcept { return std::holds_alternative<Leaf>(content); }
    const Leaf& leaf() const { return std::get<Leaf>(content); }
    const Split& split() const { return std::get<Split>(content); }
};

bool operator==(const Node& a, const Node& b);

NodePtr make_leaf(ClassLabel label, std::uint64_t total = 0, std::uint64_t positive = 0);
NodePtr make_split(SplitRule rule, NodePtr left, NodePtr right, std::optional<Direction> missing = std::nullopt);

struct DecisionTree {
    std::string id;
    std::string name;
    std::string dataset_signature;
    NodePtr root;
    std::int64_t created = 0;   // ms since epoch, 0 when unsaved
    std::int64_t modified = 0;

    bool operator==(const DecisionTree& other) const;
};

// Looks up library trees for TreeRef rules. Implementations must be safe for
// concurrent reads.
class TreeResolver {
public:
    virtual ~TreeResolver() = default;
    virtual std::shared_ptr<const DecisionTree> find(std::string_view id) const = 0;
};

class MapResolver final : public TreeResolver {
public:
    MapResolver() = default;
    void add(DecisionTree tree);
    std::shared_ptr<const DecisionTree> find(std::string_view id) const override;

private:
    std::map<std::string, std::shared_ptr<const DecisionTree>, std::less<>> trees_;
};

// Resolves `overlay` by its id first, everything else through `base`.
class OverlayResolver final : public TreeResolver {
public:
    OverlayResolver(const TreeResolver& base, std::shared_ptr<const DecisionTree> overlay)
        : base_(base), overlay_(std::move(overlay)) {}
    std::shared_ptr<const DecisionTree> find(std::string_view id) const override;

private:
    const TreeResolver& base_;
    std::shared_ptr<const DecisionTree> overlay_;
};

struct Prediction {
    ClassLabel label = ClassLabel::Negative;
    double score = 0.5;

    bool operator==(const Prediction&) const = default;
};

// Sum of leaf training totals below `node`.
std::uint64_t subtree_total(const Node& node);

// Laplace-smoothed positive rate (positive + 1) / (total + 2).
double leaf_score(const Leaf& leaf) noexcept;

// Even-odd interior with boundary points counted as inside.
bool point_in_polygon(const Polygon& polygon, Point p) noexcept;

// Left is the "low" / predicted-positive side; equality routes Right.
Route route(const SplitRule& rule, const Sample& s, const Schema& schema, const TreeResolver& lib);

Prediction predict(const DecisionTree& t, const Sample& s, const Schema& schema, const TreeResolver& lib);

// Leaf reached by `s`, with its Left/Right path from the root.
std::pair<const Leaf*, std::string> locate_leaf(const DecisionTree& t, const Sample& s, const Schema& schema,
                                                const TreeResolver& lib);

// Majority label; exact ties go to the prior-majority class, then Positive.
ClassLabel majority_label(std::uint64_t total, std::uint64_t positive, std::uint64_t prior_positive,
                          std::uint64_t prior_negative) noexcept;

// Recomputes every leaf's counts and label from the samples `rows` of `d`.
DecisionTree fit_leaf_stats(const DecisionTree& t, const Dataset& d, const std::vector<std::size_t>& rows,
                            const TreeResolver& lib);
DecisionTree fit_leaf_stats(const DecisionTree& t, const Dataset& d, const TreeResolver& lib);

struct ValidationIssue {
    ErrorCode code;
    std::string message;

    bool operator==(const ValidationIssue&) const = default;
};

std::vector<ValidationIssue> validate_tree(const DecisionTree& t, const Schema& schema, const TreeResolver& lib);

// Throws ValidationFailed (or the single issue's code) when validate_tree reports problems.
void require_valid(const DecisionTree& t, const Schema& schema, const TreeResolver& lib);

// Replaces every TreeRef with an expansion of the referenced tree whose
// predictions agree with the original on every sample.
DecisionTree inline_tree_refs(const DecisionTree& t, const TreeResolver& lib);

// Ids referenced directly by TreeRef rules in `t`.
std::vector<std::string> direct_tree_refs(const DecisionTree& t);

std::size_t leaf_count(const Node& node);

nlohmann::json rule_to_json(const SplitRule& rule);
SplitRule rule_from_json(const nlohmann::json& j);

nlohmann::json tree_to_json_value(const DecisionTree& t);
DecisionTree tree_from_json_value(const nlohmann::json& j);
std::string tree_to_json(const DecisionTree& t);
DecisionTree tree_from_json(std::string_view text);

}  // namespace branch
