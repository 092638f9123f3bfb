#include "branch/tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "branch/json_io.hpp"

namespace branch {

bool operator==(const Node& a, const Node& b) {
    if (a.is_leaf() != b.is_leaf()) return false;
    if (a.is_leaf()) return a.leaf() == b.leaf();
    const auto& sa = a.split();
    const auto& sb = b.split();
    return sa.rule == sb.rule && sa.missing == sb.missing && *sa.left == *sb.left && *sa.right == *sb.right;
}

bool DecisionTree::operator==(const DecisionTree& other) const {
    if (id != other.id || name != other.name || dataset_signature != other.dataset_signature ||
        created != other.created || modified != other.modified) {
        return false;
    }
    if (!root || !other.root) return root == other.root;
    return *root == *other.root;
}

NodePtr make_leaf(ClassLabel label, std::uint64_t total, std::uint64_t positive) {
    return std::make_shared<const Node>(Node{Leaf{label, total, positive}});
}

NodePtr make_split(SplitRule rule, NodePtr left, NodePtr right, std::optional<Direction> missing) {
    return std::make_shared<const Node>(Node{Split{std::move(rule), std::move(left), std::move(right), missing}});
}

void MapResolver::add(DecisionTree tree) {
    auto id = tree.id;
    trees_[id] = std::make_shared<const DecisionTree>(std::move(tree));
}

std::shared_ptr<const DecisionTree> MapResolver::find(std::string_view id) const {
    const auto it = trees_.find(id);
    return it == trees_.end() ? nullptr : it->second;
}

std::shared_ptr<const DecisionTree> OverlayResolver::find(std::string_view id) const {
    if (overlay_ && overlay_->id == id) return overlay_;
    return base_.find(id);
}

std::uint64_t subtree_total(const Node& node) {
    if (node.is_leaf()) return node.leaf().total;
    return subtree_total(*node.split().left) + subtree_total(*node.split().right);
}

std::size_t leaf_count(const Node& node) {
    if (node.is_leaf()) return 1;
    return leaf_count(*node.split().left) + leaf_count(*node.split().right);
}

double leaf_score(const Leaf& leaf) noexcept {
    return (static_cast<double>(leaf.positive) + 1.0) / (static_cast<double>(leaf.total) + 2.0);
}

bool point_in_polygon(const Polygon& polygon, Point p) noexcept {
    const std::size_t n = polygon.size();
    if (n < 3) return false;
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point a = polygon[i];
        const Point b = polygon[j];
        const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if (cross == 0.0 && std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
            p.y <= std::max(a.y, b.y)) {
            return true;
        }
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x_cross) inside = !inside;
        }
    }
    return inside;
}

namespace {

const FeatureDescriptor& require_feature(const Schema& schema, const std::string& name) {
    const auto* f = schema.find(name);
    if (f == nullptr) throw Error(ErrorCode::UnknownFeature, "unknown feature: " + name);
    return *f;
}

// nullopt when missing
std::optional<double> numeric_input(const Sample& s, const Schema& schema, const std::string& name) {
    const auto& f = require_feature(schema, name);
    const auto& v = s.values.at(f.index);
    if (is_missing(v)) return std::nullopt;
    const auto* d = std::get_if<double>(&v);
    if (d == nullptr) throw Error(ErrorCode::KindMismatch, "feature is not numeric: " + name);
    return *d;
}

Route to_route(bool left) { return left ? Route::Left : Route::Right; }

Direction missing_direction(const Split& split) {
    if (split.missing) return *split.missing;
    return subtree_total(*split.left) >= subtree_total(*split.right) ? Direction::Left : Direction::Right;
}

}  // namespace

Route route(const SplitRule& rule, const Sample& s, const Schema& schema, const TreeResolver& lib) {
    return std::visit(
        [&](const auto& r) -> Route {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, SingleFeatureRule>) {
                const auto& f = require_feature(schema, r.feature);
                const auto& v = s.values.at(f.index);
                if (is_missing(v)) return Route::MissingInput;
                if (r.threshold) {
                    const auto* d = std::get_if<double>(&v);
                    if (d == nullptr) throw Error(ErrorCode::KindMismatch, "feature is not numeric: " + r.feature);
                    return to_route(*d < *r.threshold);
                }
                const auto* str = std::get_if<std::string>(&v);
                if (str == nullptr) throw Error(ErrorCode::KindMismatch, "feature is not categorical: " + r.feature);
                return to_route(std::find(r.left_categories.begin(), r.left_categories.end(), *str) !=
                                r.left_categories.end());
            } else if constexpr (std::is_same_v<R, CustomFeatureRule>) {
                double score = r.definition.offset;
                for (const auto& [name, weight] : r.definition.weights) {
                    const auto x = numeric_input(s, schema, name);
                    if (!x) return Route::MissingInput;
                    score += weight * *x;
                }
                return to_route(score < r.threshold);
            } else if constexpr (std::is_same_v<R, ModelRule>) {
                for (const auto& name : model_inputs(r.model)) {
                    if (!numeric_input(s, schema, name)) return Route::MissingInput;
                }
                return to_route(model_score(r.model, s, schema) >= 0.5);
            } else if constexpr (std::is_same_v<R, TreeRefRule>) {
                const auto tree = lib.find(r.tree_id);
                if (!tree) throw Error(ErrorCode::UnresolvableTreeRef, "tree not found: " + r.tree_id);
                return to_route(predict(*tree, s, schema, lib).label == ClassLabel::Positive);
            } else {
                const auto x = numeric_input(s, schema, r.feature_x);
                const auto y = numeric_input(s, schema, r.feature_y);
                if (!x || !y) return Route::MissingInput;
                const Point p{*x, *y};
                return to_route(std::any_of(r.polygons.begin(), r.polygons.end(),
                                            [p](const Polygon& poly) { return point_in_polygon(poly, p); }));
            }
        },
        rule);
}

std::pair<const Leaf*, std::string> locate_leaf(const DecisionTree& t, const Sample& s, const Schema& schema,
                                                const TreeResolver& lib) {
    const Node* node = t.root.get();
    std::string path;
    while (!node->is_leaf()) {
        const auto& split = node->split();
        Route r = route(split.rule, s, schema, lib);
        if (r == Route::MissingInput) {
            r = missing_direction(split) == Direction::Left ? Route::Left : Route::Right;
        }
        if (r == Route::Left) {
            path.push_back('L');
            node = split.left.get();
        } else {
            path.push_back('R');
            node = split.right.get();
        }
    }
    return {&node->leaf(), std::move(path)};
}

Prediction predict(const DecisionTree& t, const Sample& s, const Schema& schema, const TreeResolver& lib) {
    const Leaf* leaf = locate_leaf(t, s, schema, lib).first;
    return {leaf->label, leaf_score(*leaf)};
}

ClassLabel majority_label(std::uint64_t total, std::uint64_t positive, std::uint64_t prior_positive,
                          std::uint64_t prior_negative) noexcept {
    if (2 * positive > total) return ClassLabel::Positive;
    if (2 * positive < total) return ClassLabel::Negative;
    return prior_negative > prior_positive ? ClassLabel::Negative : ClassLabel::Positive;
}

namespace {

struct Counts {
    std::uint64_t total = 0;
    std::uint64_t positive = 0;
};

NodePtr refit(const Node& node, std::string& path, const std::map<std::string, Counts>& counts,
              std::uint64_t prior_pos, std::uint64_t prior_neg) {
    if (node.is_leaf()) {
        const auto it = counts.find(path);
        const Counts c = it == counts.end() ? Counts{} : it->second;
        return make_leaf(majority_label(c.total, c.positive, prior_pos, prior_neg), c.total, c.positive);
    }
    const auto& split = node.split();
    path.push_back('L');
    auto left = refit(*split.left, path, counts, prior_pos, prior_neg);
    path.back() = 'R';
    auto right = refit(*split.right, path, counts, prior_pos, prior_neg);
    path.pop_back();
    return make_split(split.rule, std::move(left), std::move(right), split.missing);
}

}  // namespace

DecisionTree fit_leaf_stats(const DecisionTree& t, const Dataset& d, const std::vector<std::size_t>& rows,
                            const TreeResolver& lib) {
    std::map<std::string, Counts> counts;
    std::uint64_t prior_pos = 0;
    std::uint64_t prior_neg = 0;
    for (std::size_t row : rows) {
        const auto& s = d.samples().at(row);
        auto& c = counts[locate_leaf(t, s, d.schema(), lib).second];
        ++c.total;
        if (s.label == ClassLabel::Positive) {
            ++c.positive;
            ++prior_pos;
        } else {
            ++prior_neg;
        }
    }
    DecisionTree fitted = t;
    std::string path;
    fitted.root = refit(*t.root, path, counts, prior_pos, prior_neg);
    return fitted;
}

DecisionTree fit_leaf_stats(const DecisionTree& t, const Dataset& d, const TreeResolver& lib) {
    std::vector<std::size_t> rows(d.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return fit_leaf_stats(t, d, rows, lib);
}

namespace {

class Validator {
public:
    Validator(const Schema& schema, const TreeResolver& lib) : schema_(schema), lib_(lib) {}

    void tree(const DecisionTree& t, const std::string& label) {
        if (t.dataset_signature != schema_.hash) {
            add(ErrorCode::SignatureMismatch, label + ": dataset signature differs from the dataset's");
        }
        if (!t.root) {
            add(ErrorCode::SchemaViolation, label + ": tree has no root");
            return;
        }
        node(*t.root, label, "");
    }

    // Depth-first walk of the reference graph rooted at `t`.
    void references(const DecisionTree& t) {
        std::vector<std::string> stack;
        if (!t.id.empty()) stack.push_back(t.id);
        walk_refs(t, stack);
    }

    std::vector<ValidationIssue> issues;

private:
    void add(ErrorCode code, std::string message) {
        ValidationIssue issue{code, std::move(message)};
        if (std::find(issues.begin(), issues.end(), issue) == issues.end()) issues.push_back(std::move(issue));
    }

    void node(const Node& n, const std::string& label, const std::string& path) {
        const std::string where = label + " at node '" + path + "'";
        if (n.is_leaf()) {
            const auto& leaf = n.leaf();
            if (leaf.positive > leaf.total) add(ErrorCode::InvalidLeaf, where + ": positive count exceeds total");
            else if (2 * leaf.positive != leaf.total &&
                     leaf.label != majority_label(leaf.total, leaf.positive, 0, 0)) {
                add(ErrorCode::InvalidLeaf, where + ": label disagrees with majority of its counts");
            }
            return;
        }
        const auto& split = n.split();
        if (!split.left || !split.right) {
            add(ErrorCode::SchemaViolation, where + ": split without two children");
            return;
        }
        rule(split.rule, where);
        node(*split.left, label, path + "L");
        node(*split.right, label, path + "R");
    }

    bool numeric(const std::string& name, const std::string& where) {
        const auto* f = schema_.find(name);
        if (f == nullptr) {
            add(ErrorCode::UnknownFeature, where + ": unknown feature '" + name + "'");
            return false;
        }
        if (f->kind != FeatureKind::Numeric) {
            add(ErrorCode::KindMismatch, where + ": feature '" + name + "' is not numeric");
            return false;
        }
        return true;
    }

    void rule(const SplitRule& r, const std::string& where) {
        if (const auto* single = std::get_if<SingleFeatureRule>(&r)) {
            const auto* f = schema_.find(single->feature);
            if (f == nullptr) {
                add(ErrorCode::UnknownFeature, where + ": unknown feature '" + single->feature + "'");
                return;
            }
            if (single->threshold) {
                if (f->kind != FeatureKind::Numeric) {
                    add(ErrorCode::KindMismatch, where + ": threshold on categorical feature '" + f->name + "'");
                } else if (!std::isfinite(*single->threshold) || !single->left_categories.empty()) {
                    add(ErrorCode::InvalidRule, where + ": numeric split needs one finite threshold only");
                }
                return;
            }
            if (f->kind != FeatureKind::Categorical) {
                add(ErrorCode::KindMismatch, where + ": category set on numeric feature '" + f->name + "'");
                return;
            }
            const std::set<std::string> left(single->left_categories.begin(), single->left_categories.end());
            const bool subset = std::all_of(left.begin(), left.end(), [&](const std::string& c) {
                return std::binary_search(f->categories.begin(), f->categories.end(), c);
            });
            if (left.empty() || !subset || left.size() >= f->categories.size()) {
                add(ErrorCode::InvalidRule,
                    where + ": left categories must be a nonempty proper subset of '" + f->name + "'");
            }
        } else if (const auto* custom = std::get_if<CustomFeatureRule>(&r)) {
            if (custom->definition.weights.empty()) add(ErrorCode::InvalidRule, where + ": custom feature has no weights");
            for (const auto& [name, w] : custom->definition.weights) {
                numeric(name, where);
                if (!std::isfinite(w)) add(ErrorCode::InvalidRule, where + ": non-finite weight");
            }
            if (!std::isfinite(custom->definition.offset) || !std::isfinite(custom->threshold)) {
                add(ErrorCode::InvalidRule, where + ": non-finite offset or threshold");
            }
        } else if (const auto* model = std::get_if<ModelRule>(&r)) {
            if (model->feature_subset.empty()) add(ErrorCode::InvalidRule, where + ": model has empty feature subset");
            for (const auto& name : model->feature_subset) numeric(name, where);
            for (const auto& name : model_inputs(model->model)) {
                if (std::find(model->feature_subset.begin(), model->feature_subset.end(), name) ==
                    model->feature_subset.end()) {
                    add(ErrorCode::InvalidRule, where + ": model reads '" + name + "' outside its feature subset");
                }
            }
        } else if (const auto* visual = std::get_if<VisualRule>(&r)) {
            numeric(visual->feature_x, where);
            numeric(visual->feature_y, where);
            if (visual->polygons.empty()) add(ErrorCode::InvalidRule, where + ": visual rule without polygons");
            for (const auto& poly : visual->polygons) {
                if (poly.size() < 3) add(ErrorCode::InvalidRule, where + ": polygon with fewer than 3 vertices");
                for (const auto& p : poly) {
                    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
                        add(ErrorCode::InvalidRule, where + ": non-finite polygon vertex");
                    }
                }
            }
        }
    }

    void walk_refs(const DecisionTree& t, std::vector<std::string>& stack) {
        for (const auto& id : direct_tree_refs(t)) {
            if (std::find(stack.begin(), stack.end(), id) != stack.end()) {
                std::string chain;
                for (const auto& s : stack) chain += s + " -> ";
                add(ErrorCode::CyclicReference, "reference cycle: " + chain + id);
                continue;
            }
            if (done_.count(id)) continue;
            const auto ref = lib_.find(id);
            if (!ref) {
                add(ErrorCode::UnresolvableTreeRef, "referenced tree not found: " + id);
                continue;
            }
            tree(*ref, "tree '" + id + "'");
            stack.push_back(id);
            walk_refs(*ref, stack);
            stack.pop_back();
            done_.insert(id);
        }
    }

    const Schema& schema_;
    const TreeResolver& lib_;
    std::set<std::string> done_;
};

void collect_refs(const Node& n, std::vector<std::string>& out) {
    if (n.is_leaf()) return;
    const auto& split = n.split();
    if (const auto* ref = std::get_if<TreeRefRule>(&split.rule)) {
        if (std::find(out.begin(), out.end(), ref->tree_id) == out.end()) out.push_back(ref->tree_id);
    }
    collect_refs(*split.left, out);
    collect_refs(*split.right, out);
}

}  // namespace

std::vector<std::string> direct_tree_refs(const DecisionTree& t) {
    std::vector<std::string> out;
    if (t.root) collect_refs(*t.root, out);
    return out;
}

std::vector<ValidationIssue> validate_tree(const DecisionTree& t, const Schema& schema, const TreeResolver& lib) {
    Validator v(schema, lib);
    v.tree(t, "tree");
    if (t.root) v.references(t);
    return std::move(v.issues);
}

void require_valid(const DecisionTree& t, const Schema& schema, const TreeResolver& lib) {
    const auto issues = validate_tree(t, schema, lib);
    if (issues.empty()) return;
    std::string message;
    for (const auto& issue : issues) {
        if (!message.empty()) message += "; ";
        message += std::string(error_code_name(issue.code)) + ": " + issue.message;
    }
    const bool same_code = std::all_of(issues.begin(), issues.end(),
                                       [&](const ValidationIssue& i) { return i.code == issues.front().code; });
    throw Error(same_code ? issues.front().code : ErrorCode::ValidationFailed, message);
}

namespace {

// Fixes every split's missing-input branch to what the unexpanded tree would take.
NodePtr pin_missing_directions(const Node& n) {
    if (n.is_leaf()) return std::make_shared<const Node>(n);
    const auto& split = n.split();
    return make_split(split.rule, pin_missing_directions(*split.left), pin_missing_directions(*split.right),
                      missing_direction(split));
}

NodePtr graft(const Node& n, const NodePtr& positive_side, const NodePtr& negative_side) {
    if (n.is_leaf()) return n.leaf().label == ClassLabel::Positive ? positive_side : negative_side;
    const auto& split = n.split();
    return make_split(split.rule, graft(*split.left, positive_side, negative_side),
                      graft(*split.right, positive_side, negative_side), split.missing);
}

NodePtr expand(const Node& n, const TreeResolver& lib, std::vector<std::string>& stack);

NodePtr expand_referenced(const std::string& id, const TreeResolver& lib, std::vector<std::string>& stack) {
    if (std::find(stack.begin(), stack.end(), id) != stack.end()) {
        throw Error(ErrorCode::CyclicReference, "reference cycle through tree " + id);
    }
    const auto tree = lib.find(id);
    if (!tree) throw Error(ErrorCode::UnresolvableTreeRef, "tree not found: " + id);
    stack.push_back(id);
    auto pinned = pin_missing_directions(*tree->root);
    auto expanded = expand(*pinned, lib, stack);
    stack.pop_back();
    return expanded;
}

NodePtr expand(const Node& n, const TreeResolver& lib, std::vector<std::string>& stack) {
    if (n.is_leaf()) return std::make_shared<const Node>(n);
    const auto& split = n.split();
    auto left = expand(*split.left, lib, stack);
    auto right = expand(*split.right, lib, stack);
    if (const auto* ref = std::get_if<TreeRefRule>(&split.rule)) {
        const auto inner = expand_referenced(ref->tree_id, lib, stack);
        return graft(*inner, left, right);
    }
    return make_split(split.rule, std::move(left), std::move(right), split.missing);
}

}  // namespace

DecisionTree inline_tree_refs(const DecisionTree& t, const TreeResolver& lib) {
    if (direct_tree_refs(t).empty()) return t;
    std::vector<std::string> stack;
    if (!t.id.empty()) stack.push_back(t.id);
    DecisionTree out = t;
    out.root = expand(*pin_missing_directions(*t.root), lib, stack);
    return out;
}

// ---- JSON ----

namespace {

std::string_view direction_name(Direction d) { return d == Direction::Left ? "left" : "right"; }

nlohmann::json node_to_json(const Node& n) {
    if (n.is_leaf()) {
        const auto& leaf = n.leaf();
        return {{"leaf", {{"label", class_label_name(leaf.label)}, {"total", leaf.total}, {"positive", leaf.positive}}}};
    }
    const auto& split = n.split();
    nlohmann::json body = {{"rule", rule_to_json(split.rule)},
                           {"left", node_to_json(*split.left)},
                           {"right", node_to_json(*split.right)}};
    if (split.missing) body["missing"] = direction_name(*split.missing);
    return {{"split", std::move(body)}};
}

ClassLabel read_label(const JsonReader& r) {
    const auto s = r.string();
    if (s == "positive") return ClassLabel::Positive;
    if (s == "negative") return ClassLabel::Negative;
    r.fail("expected \"positive\" or \"negative\"");
}

std::vector<std::string> read_strings(const JsonReader& r) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < r.array_size(); ++i) out.push_back(r.at(i).string());
    return out;
}

SplitRule read_rule(const JsonReader& r) {
    const auto kind_reader = r.at("kind");
    const auto kind = kind_reader.string();
    if (kind == "feature") {
        r.expect_object({"kind", "feature", "threshold", "left"});
        SingleFeatureRule rule{r.at("feature").string(), std::nullopt, {}};
        if (r.has("threshold") == r.has("left")) r.fail("feature rule needs exactly one of 'threshold' or 'left'");
        if (r.has("threshold")) rule.threshold = r.at("threshold").number();
        else rule.left_categories = read_strings(r.at("left"));
        return rule;
    }
    if (kind == "custom") {
        r.expect_object({"kind", "name", "weights", "offset", "threshold"});
        CustomFeatureRule rule;
        rule.definition.name = r.at("name").string();
        const auto weights = r.at("weights");
        weights.expect_map();
        for (const auto& item : weights.raw().items()) {
            rule.definition.weights[item.key()] = weights.at(item.key()).number();
        }
        rule.definition.offset = r.at("offset").number();
        rule.threshold = r.at("threshold").number();
        return rule;
    }
    if (kind == "model") {
        r.expect_object({"kind", "features", "model"});
        return ModelRule{model_from_json(r.at("model")), read_strings(r.at("features"))};
    }
    if (kind == "treeref") {
        r.expect_object({"kind", "tree"});
        return TreeRefRule{r.at("tree").string()};
    }
    if (kind == "visual") {
        r.expect_object({"kind", "x", "y", "polygons"});
        VisualRule rule{r.at("x").string(), r.at("y").string(), {}};
        const auto polys = r.at("polygons");
        for (std::size_t i = 0; i < polys.array_size(); ++i) {
            const auto poly = polys.at(i);
            Polygon polygon;
            for (std::size_t k = 0; k < poly.array_size(); ++k) {
                const auto vertex = poly.at(k);
                if (vertex.array_size() != 2) vertex.fail("vertex must be [x, y]");
                polygon.push_back({vertex.at(0).number(), vertex.at(1).number()});
            }
            rule.polygons.push_back(std::move(polygon));
        }
        return rule;
    }
    kind_reader.fail("unknown rule kind '" + kind + "'");
}

// The {"leaf": ...} / {"split": ...} wrapper does not add a path segment.
NodePtr read_node(const JsonReader& r) {
    r.expect_object({"leaf", "split"});
    if (r.raw().size() != 1) r.fail("node must hold exactly one of 'leaf' or 'split'");
    if (r.has("leaf")) {
        const JsonReader leaf(r.raw().at("leaf"), r.path());
        leaf.expect_object({"label", "total", "positive"});
        const auto total = leaf.at("total").count();
        const auto positive = leaf.at("positive").count();
        if (positive > total) leaf.at("positive").fail("positive count exceeds total");
        return make_leaf(read_label(leaf.at("label")), total, positive);
    }
    const JsonReader split(r.raw().at("split"), r.path());
    split.expect_object({"rule", "left", "right", "missing"});
    std::optional<Direction> missing;
    if (split.has("missing")) {
        const auto m = split.at("missing").string();
        if (m == "left") missing = Direction::Left;
        else if (m == "right") missing = Direction::Right;
        else split.at("missing").fail("expected \"left\" or \"right\"");
    }
    auto rule = read_rule(split.at("rule"));
    auto left = read_node(split.at("left"));
    auto right = read_node(split.at("right"));
    return make_split(std::move(rule), std::move(left), std::move(right), missing);
}

}  // namespace

nlohmann::json rule_to_json(const SplitRule& rule) {
    return std::visit(
        [](const auto& r) -> nlohmann::json {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, SingleFeatureRule>) {
                nlohmann::json j = {{"kind", "feature"}, {"feature", r.feature}};
                if (r.threshold) j["threshold"] = *r.threshold;
                else j["left"] = r.left_categories;
                return j;
            } else if constexpr (std::is_same_v<R, CustomFeatureRule>) {
                return {{"kind", "custom"},
                        {"name", r.definition.name},
                        {"weights", r.definition.weights},
                        {"offset", r.definition.offset},
                        {"threshold", r.threshold}};
            } else if constexpr (std::is_same_v<R, ModelRule>) {
                return {{"kind", "model"}, {"features", r.feature_subset}, {"model", model_to_json(r.model)}};
            } else if constexpr (std::is_same_v<R, TreeRefRule>) {
                return {{"kind", "treeref"}, {"tree", r.tree_id}};
            } else {
                nlohmann::json polys = nlohmann::json::array();
                for (const auto& poly : r.polygons) {
                    nlohmann::json vertices = nlohmann::json::array();
                    for (const auto& p : poly) vertices.push_back({p.x, p.y});
                    polys.push_back(std::move(vertices));
                }
                return {{"kind", "visual"}, {"x", r.feature_x}, {"y", r.feature_y}, {"polygons", std::move(polys)}};
            }
        },
        rule);
}

SplitRule rule_from_json(const nlohmann::json& j) { return read_rule(JsonReader(j)); }

nlohmann::json tree_to_json_value(const DecisionTree& t) {
    nlohmann::json j = {{"id", t.id},
                        {"name", t.name},
                        {"dataset_signature", t.dataset_signature},
                        {"root", node_to_json(*t.root)}};
    if (t.created != 0) j["created"] = t.created;
    if (t.modified != 0) j["modified"] = t.modified;
    return j;
}

DecisionTree tree_from_json_value(const nlohmann::json& j) {
    const JsonReader r(j);
    r.expect_object({"id", "name", "dataset_signature", "root", "created", "modified"});
    DecisionTree t;
    t.id = r.at("id").string();
    t.name = r.at("name").string();
    t.dataset_signature = r.at("dataset_signature").string();
    t.root = read_node(r.at("root"));
    if (r.has("created")) t.created = r.at("created").integer();
    if (r.has("modified")) t.modified = r.at("modified").integer();
    return t;
}

std::string tree_to_json(const DecisionTree& t) { return canonical_dump(tree_to_json_value(t)); }

DecisionTree tree_from_json(std::string_view text) { return tree_from_json_value(parse_json(text)); }

}  // namespace branch
