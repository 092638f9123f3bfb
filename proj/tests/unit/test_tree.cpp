#include <doctest.h>

#include <cstring>
#include <set>

#include "branch/error.hpp"
#include "branch/json_io.hpp"
#include "branch/tree.hpp"
#include "support/oracles.hpp"

using namespace branch;

namespace {

const Dataset& fixture() {
    static const Dataset d = parse_csv(
        "g1,g2,a,b,cls\n"
        "3,x,1,3,P\n"
        "5,y,0,0,N\n"
        "NA,z,2,1,P\n"
        "7,x,NA,4,N\n",
        "cls", "P");
    return d;
}

Sample sample(std::vector<Value> values) { return Sample{std::move(values), ClassLabel::Positive}; }

const MapResolver& empty_lib() {
    static const MapResolver lib;
    return lib;
}

DecisionTree tree_of(NodePtr root, std::string id = "t", std::string signature = fixture().signature()) {
    return DecisionTree{std::move(id), "tree", std::move(signature), std::move(root)};
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::StoreIo;
}

std::vector<ErrorCode> issue_codes(const DecisionTree& t, const TreeResolver& lib) {
    std::vector<ErrorCode> out;
    for (const auto& i : validate_tree(t, fixture().schema(), lib)) out.push_back(i.code);
    return out;
}

const Schema& schema() { return fixture().schema(); }

}  // namespace

TEST_CASE("single-feature numeric routing: equality goes right") {
    const SplitRule rule = SingleFeatureRule{"g1", 5.0, {}};
    CHECK(route(rule, sample({3.0, std::string("x"), 0.0, 0.0}), schema(), empty_lib()) == Route::Left);
    CHECK(route(rule, sample({5.0, std::string("x"), 0.0, 0.0}), schema(), empty_lib()) == Route::Right);
    CHECK(route(rule, sample({Missing{}, std::string("x"), 0.0, 0.0}), schema(), empty_lib()) == Route::MissingInput);
}

TEST_CASE("single-feature categorical routing") {
    const SplitRule rule = SingleFeatureRule{"g2", std::nullopt, {"x", "z"}};
    CHECK(route(rule, sample({1.0, std::string("x"), 0.0, 0.0}), schema(), empty_lib()) == Route::Left);
    CHECK(route(rule, sample({1.0, std::string("y"), 0.0, 0.0}), schema(), empty_lib()) == Route::Right);
}

TEST_CASE("custom feature routing uses offset plus weighted sum") {
    const SplitRule rule = CustomFeatureRule{{"ab", {{"a", 2.0}, {"b", -1.0}}, 0.0}, 0.0};
    CHECK(route(rule, sample({0.0, std::string("x"), 1.0, 3.0}), schema(), empty_lib()) == Route::Left);
    CHECK(route(rule, sample({0.0, std::string("x"), 2.0, 3.0}), schema(), empty_lib()) == Route::Right);
    CHECK(route(rule, sample({0.0, std::string("x"), Missing{}, 3.0}), schema(), empty_lib()) == Route::MissingInput);
}

TEST_CASE("model routing sends probability >= 0.5 left") {
    TrainedModel stump;
    stump.kind = ModelKind::Stump;
    stump.feature = "a";
    stump.threshold = 1.5;
    stump.p_left = 0.9;
    stump.p_right = 0.2;
    const SplitRule rule = ModelRule{stump, {"a"}};
    CHECK(model_score(stump, sample({0.0, std::string("x"), 1.0, 0.0}), schema()) == 0.9);
    CHECK(route(rule, sample({0.0, std::string("x"), 1.0, 0.0}), schema(), empty_lib()) == Route::Left);
    CHECK(route(rule, sample({0.0, std::string("x"), 2.0, 0.0}), schema(), empty_lib()) == Route::Right);

    TrainedModel zero;
    zero.kind = ModelKind::LogReg;
    zero.features = {"a", "b"};
    zero.weights = {0.0, 0.0};
    zero.standardization = {{"a", 1.0, 2.0}, {"b", 0.0, 1.0}};
    CHECK(model_score(zero, sample({0.0, std::string("x"), 9.0, -4.0}), schema()) == 0.5);
    CHECK(route(ModelRule{zero, {"a", "b"}}, sample({0.0, std::string("x"), 9.0, -4.0}), schema(), empty_lib()) ==
          Route::Left);
}

TEST_CASE("sigmoid saturates without overflow") {
    CHECK(sigmoid(35.0) > 1.0 - 1e-15);
    CHECK(sigmoid(35.0) <= 1.0);
    CHECK(sigmoid(-800.0) >= 0.0);
    CHECK(sigmoid(800.0) == 1.0);
    CHECK(sigmoid(0.0) == 0.5);
}

TEST_CASE("visual rule membership on the unit square") {
    const Polygon square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    // Expected outcomes checked against the ray-casting oracle, then frozen.
    REQUIRE(oracle::ray_cast_inside(square, {0.5, 0.5}));
    REQUIRE(!oracle::ray_cast_inside(square, {2, 2}));
    const SplitRule rule = VisualRule{"a", "b", {square}};
    CHECK(route(rule, sample({0.0, std::string("x"), 0.5, 0.5}), schema(), empty_lib()) == Route::Left);
    CHECK(route(rule, sample({0.0, std::string("x"), 2.0, 2.0}), schema(), empty_lib()) == Route::Right);
    // boundary and vertices count as inside
    CHECK(point_in_polygon(square, {1.0, 0.5}));
    CHECK(point_in_polygon(square, {0.0, 0.0}));
    CHECK(point_in_polygon(square, {0.5, 1.0}));
    CHECK(!point_in_polygon(square, {1.0000001, 0.5}));
}

TEST_CASE("visual rule uses even-odd interiors") {
    // A self-intersecting bowtie: its two triangles are inside, the notches between them are not.
    const Polygon outer{{0, 0}, {4, 0}, {4, 4}, {0, 4}};
    const Polygon bowtie{{0, 0}, {2, 2}, {0, 4}, {4, 4}, {2, 2}, {4, 0}};
    CHECK(point_in_polygon(outer, {3.9, 2}));
    CHECK(point_in_polygon(bowtie, {2, 1}));
    CHECK(!point_in_polygon(bowtie, {1, 2}));
    CHECK(oracle::ray_cast_inside(bowtie, {2, 1}));
    CHECK(!oracle::ray_cast_inside(bowtie, {1, 2}));
}

TEST_CASE("property: point_in_polygon agrees with the ray-casting oracle") {
    oracle::Rng rng(21);
    for (int set = 0; set < 20; ++set) {
        const auto polys = oracle::random_polygons(rng, 1);
        for (int k = 0; k < 500; ++k) {
            const Point p = k % 2 == 0 ? Point{static_cast<double>(oracle::pick(rng, 25)) / 2.0 - 1.0,
                                               static_cast<double>(oracle::pick(rng, 25)) / 2.0 - 1.0}
                                       : Point{oracle::uniform(rng, -1, 11), oracle::uniform(rng, -1, 11)};
            CHECK(point_in_polygon(polys[0], p) == oracle::ray_cast_inside(polys[0], p));
        }
    }
}

TEST_CASE("treeref routing follows the referenced tree's prediction") {
    MapResolver lib;
    lib.add(tree_of(make_split(SingleFeatureRule{"g1", 4.0, {}}, make_leaf(ClassLabel::Positive, 3, 3),
                               make_leaf(ClassLabel::Negative, 3, 0)),
                    "inner"));
    const SplitRule rule = TreeRefRule{"inner"};
    CHECK(route(rule, sample({3.0, std::string("x"), 0.0, 0.0}), schema(), lib) == Route::Left);
    CHECK(route(rule, sample({6.0, std::string("x"), 0.0, 0.0}), schema(), lib) == Route::Right);
    CHECK(code_of([&] { route(TreeRefRule{"nope"}, sample({6.0, std::string("x"), 0.0, 0.0}), schema(), lib); }) ==
          ErrorCode::UnresolvableTreeRef);
}

TEST_CASE("predict returns the smoothed leaf score") {
    const auto bare = tree_of(make_leaf(ClassLabel::Positive, 10, 8));
    const auto p = predict(bare, sample({1.0, std::string("x"), 0.0, 0.0}), schema(), empty_lib());
    CHECK(p.label == ClassLabel::Positive);
    CHECK(p.score == doctest::Approx(0.75).epsilon(1e-15));

    const auto depth1 = tree_of(make_split(SingleFeatureRule{"g1", 5.0, {}}, make_leaf(ClassLabel::Negative, 5, 0),
                                           make_leaf(ClassLabel::Positive, 4, 3)));
    const auto q = predict(depth1, sample({1.0, std::string("x"), 0.0, 0.0}), schema(), empty_lib());
    CHECK(q.label == ClassLabel::Negative);
    CHECK(q.score == 1.0 / 7.0);
}

TEST_CASE("missing inputs follow the heavier child, ties left, explicit direction wins") {
    const auto s = sample({Missing{}, std::string("x"), 0.0, 0.0});
    auto with = [&](std::uint64_t l, std::uint64_t r, std::optional<Direction> dir = std::nullopt) {
        return tree_of(make_split(SingleFeatureRule{"g1", 5.0, {}}, make_leaf(ClassLabel::Negative, l, 0),
                                  make_leaf(ClassLabel::Positive, r, r), dir));
    };
    CHECK(locate_leaf(with(10, 3), s, schema(), empty_lib()).second == "L");
    CHECK(locate_leaf(with(3, 10), s, schema(), empty_lib()).second == "R");
    CHECK(locate_leaf(with(4, 4), s, schema(), empty_lib()).second == "L");
    CHECK(locate_leaf(with(10, 3, Direction::Right), s, schema(), empty_lib()).second == "R");
    // subtree totals, not just the immediate leaf
    const auto deep = tree_of(make_split(SingleFeatureRule{"g1", 5.0, {}}, make_leaf(ClassLabel::Negative, 5, 0),
                                         make_split(SingleFeatureRule{"a", 1.0, {}}, make_leaf(ClassLabel::Negative, 3, 0),
                                                    make_leaf(ClassLabel::Negative, 3, 0))));
    CHECK(locate_leaf(deep, s, schema(), empty_lib()).second == "RL");
}

TEST_CASE("fit_leaf_stats examples") {
    const auto d = parse_csv("x,cls\n1,P\n2,P\n3,P\n4,P\n6,N\n7,N\n8,N\n9,N\n", "cls", "P");
    const DecisionTree t{"t", "t", d.signature(),
                         make_split(SingleFeatureRule{"x", 5.0, {}}, make_leaf(ClassLabel::Negative),
                                    make_leaf(ClassLabel::Negative))};
    const auto fitted = fit_leaf_stats(t, d, empty_lib());
    CHECK(fitted.root->split().left->leaf() == Leaf{ClassLabel::Positive, 4, 4});
    CHECK(fitted.root->split().right->leaf() == Leaf{ClassLabel::Negative, 4, 0});

    // 2 pos + 2 neg at a leaf of a 7/3 dataset: tie goes to the larger class
    const auto d73 = parse_csv("x,cls\n1,P\n1,P\n1,N\n1,N\n9,P\n9,P\n9,P\n9,P\n9,P\n9,N\n", "cls", "P");
    const DecisionTree u{"u", "u", d73.signature(),
                         make_split(SingleFeatureRule{"x", 5.0, {}}, make_leaf(ClassLabel::Negative),
                                    make_leaf(ClassLabel::Negative))};
    CHECK(fit_leaf_stats(u, d73, empty_lib()).root->split().left->leaf() == Leaf{ClassLabel::Positive, 4, 2});
    const auto d37 = parse_csv("x,cls\n1,P\n1,P\n1,N\n1,N\n9,N\n9,N\n9,N\n9,N\n9,N\n9,P\n", "cls", "P");
    const DecisionTree v{"v", "v", d37.signature(), u.root};
    CHECK(fit_leaf_stats(v, d37, empty_lib()).root->split().left->leaf() == Leaf{ClassLabel::Negative, 4, 2});

    // unreached leaf takes (0,0) and the prior label
    const DecisionTree w{"w", "w", d73.signature(),
                         make_split(SingleFeatureRule{"x", 100.0, {}}, make_leaf(ClassLabel::Negative),
                                    make_leaf(ClassLabel::Negative))};
    CHECK(fit_leaf_stats(w, d73, empty_lib()).root->split().right->leaf() == Leaf{ClassLabel::Positive, 0, 0});
    CHECK(majority_label(0, 0, 5, 5) == ClassLabel::Positive);
}

TEST_CASE("validate_tree reports cycles, unknown features and kind errors") {
    MapResolver lib;
    const auto self = tree_of(make_split(TreeRefRule{"A"}, make_leaf(ClassLabel::Positive), make_leaf(ClassLabel::Negative)),
                              "A");
    lib.add(self);
    CHECK(issue_codes(self, lib) == std::vector<ErrorCode>{ErrorCode::CyclicReference});

    MapResolver chain;
    chain.add(tree_of(make_split(TreeRefRule{"B"}, make_leaf(ClassLabel::Positive), make_leaf(ClassLabel::Negative)), "A"));
    chain.add(tree_of(make_split(TreeRefRule{"A"}, make_leaf(ClassLabel::Positive), make_leaf(ClassLabel::Negative)), "B"));
    CHECK(issue_codes(*chain.find("A"), chain) == std::vector<ErrorCode>{ErrorCode::CyclicReference});
    CHECK(code_of([&] { require_valid(*chain.find("A"), schema(), chain); }) == ErrorCode::CyclicReference);

    auto leafs = [] { return std::pair{make_leaf(ClassLabel::Positive), make_leaf(ClassLabel::Negative)}; };
    auto [l, r] = leafs();
    CHECK(issue_codes(tree_of(make_split(SingleFeatureRule{"gX", 1.0, {}}, l, r)), lib) ==
          std::vector<ErrorCode>{ErrorCode::UnknownFeature});
    CHECK(issue_codes(tree_of(make_split(SingleFeatureRule{"g2", 1.0, {}}, l, r)), lib) ==
          std::vector<ErrorCode>{ErrorCode::KindMismatch});
    CHECK(issue_codes(tree_of(make_split(VisualRule{"a", "g2", {{{0, 0}, {1, 0}, {0, 1}}}}, l, r)), lib) ==
          std::vector<ErrorCode>{ErrorCode::KindMismatch});
    CHECK(issue_codes(tree_of(make_split(SingleFeatureRule{"g2", std::nullopt, {"x", "y", "z"}}, l, r)), lib) ==
          std::vector<ErrorCode>{ErrorCode::InvalidRule});
    CHECK(issue_codes(tree_of(make_split(VisualRule{"a", "b", {{{0, 0}, {1, 0}}}}, l, r)), lib) ==
          std::vector<ErrorCode>{ErrorCode::InvalidRule});
    CHECK(issue_codes(tree_of(make_split(TreeRefRule{"missing"}, l, r)), lib) ==
          std::vector<ErrorCode>{ErrorCode::UnresolvableTreeRef});
    CHECK(issue_codes(tree_of(make_leaf(ClassLabel::Negative, 10, 8)), lib) ==
          std::vector<ErrorCode>{ErrorCode::InvalidLeaf});

    MapResolver foreign;
    foreign.add(tree_of(make_leaf(ClassLabel::Positive), "F", "other-signature"));
    CHECK(issue_codes(tree_of(make_split(TreeRefRule{"F"}, l, r)), foreign) ==
          std::vector<ErrorCode>{ErrorCode::SignatureMismatch});

    CHECK(issue_codes(tree_of(make_split(SingleFeatureRule{"gX", 1.0, {}}, l,
                                         make_split(SingleFeatureRule{"g2", 1.0, {}}, l, r))),
                      lib)
              .size() == 2);
    CHECK(code_of([&] {
              require_valid(tree_of(make_split(SingleFeatureRule{"gX", 1.0, {}}, l,
                                               make_split(SingleFeatureRule{"g2", 1.0, {}}, l, r))),
                            schema(), lib);
          }) == ErrorCode::ValidationFailed);
    CHECK(validate_tree(tree_of(make_leaf(ClassLabel::Positive)), schema(), lib).empty());
}

TEST_CASE("inlining leaves a treeref-free tree unchanged") {
    oracle::Rng rng(3);
    const auto d = oracle::random_dataset(rng, {});
    for (int i = 0; i < 20; ++i) {
        const auto t = oracle::random_tree(rng, d, 3, {});
        CHECK(inline_tree_refs(t, empty_lib()) == t);
    }
}

TEST_CASE("inlining nested treerefs preserves predictions") {
    oracle::Rng rng(4);
    oracle::DatasetShape shape;
    shape.samples = 50;
    const auto d = oracle::random_dataset(rng, shape);
    oracle::Library lib;
    oracle::fill_library(rng, d, 4, lib);
    for (int i = 0; i < 30; ++i) {
        const auto t = oracle::random_tree_with_ref(rng, d, lib.ids, "root");
        REQUIRE(validate_tree(t, d.schema(), lib.resolver).empty());
        const auto flat = inline_tree_refs(t, lib.resolver);
        CHECK(!oracle::contains_treeref(*flat.root));
        CHECK(direct_tree_refs(flat).empty());
        for (const auto& s : d.samples()) {
            CHECK(predict(flat, s, d.schema(), empty_lib()) == predict(t, s, d.schema(), lib.resolver));
        }
    }
}

TEST_CASE("inlining a chain A uses B uses C") {
    MapResolver lib;
    lib.add(tree_of(make_split(SingleFeatureRule{"a", 1.0, {}}, make_leaf(ClassLabel::Positive, 2, 2),
                               make_leaf(ClassLabel::Negative, 2, 0)),
                    "C"));
    lib.add(tree_of(make_split(TreeRefRule{"C"}, make_leaf(ClassLabel::Negative, 3, 1), make_leaf(ClassLabel::Positive, 3, 2)),
                    "B"));
    const auto a = tree_of(
        make_split(TreeRefRule{"B"}, make_leaf(ClassLabel::Positive, 5, 4), make_leaf(ClassLabel::Negative, 5, 0)), "A");
    const auto flat = inline_tree_refs(a, lib);
    CHECK(!oracle::contains_treeref(*flat.root));
    for (double av : {0.0, 0.5, 1.0, 2.0}) {
        const auto s = sample({0.0, std::string("x"), av, 0.0});
        CHECK(predict(flat, s, schema(), empty_lib()) == predict(a, s, schema(), lib));
    }
    const auto s_missing = sample({0.0, std::string("x"), Missing{}, 0.0});
    CHECK(predict(flat, s_missing, schema(), empty_lib()) == predict(a, s_missing, schema(), lib));
}

TEST_CASE("property: tree JSON round-trips generated trees of all rule kinds") {
    oracle::Rng rng(8);
    const auto d = oracle::random_dataset(rng, {});
    oracle::Library lib;
    oracle::fill_library(rng, d, 3, lib);
    std::set<std::size_t> kinds;
    std::function<void(const Node&)> collect = [&](const Node& n) {
        if (n.is_leaf()) return;
        kinds.insert(n.split().rule.index());
        collect(*n.split().left);
        collect(*n.split().right);
    };
    for (int i = 0; i < 100; ++i) {
        auto t = oracle::random_tree(rng, d, 4, lib.ids, "t" + std::to_string(i));
        t.created = 1000 + i;
        t.modified = 2000 + i;
        collect(*t.root);
        const auto text = tree_to_json(t);
        const auto back = tree_from_json(text);
        CHECK(back == t);
        CHECK(tree_to_json(back) == text);
    }
    CHECK(kinds.size() == 5);
}

TEST_CASE("unknown rule kind is a schema violation at its JSON path") {
    const std::string doc = R"({"id":"x","name":"n","dataset_signature":"s","root":{"split":{
        "rule":{"kind":"hexagon"},"left":{"leaf":{"label":"positive","total":0,"positive":0}},
        "right":{"leaf":{"label":"negative","total":0,"positive":0}}}}})";
    try {
        tree_from_json(doc);
        FAIL("expected SchemaViolation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SchemaViolation);
        CHECK(e.location() == "$.root.rule.kind");
    }
}

TEST_CASE("unknown fields and malformed documents are rejected") {
    try {
        tree_from_json(R"({"id":"x","name":"n","dataset_signature":"s","colour":"red","root":{"leaf":{"label":"positive","total":0,"positive":0}}})");
        FAIL("expected SchemaViolation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SchemaViolation);
        CHECK(e.location() == "$.colour");
    }
    try {
        tree_from_json(R"({"id":"x","name":"n","dataset_signature":"s","root":{"leaf":{"label":"maybe","total":0,"positive":0}}})");
        FAIL("expected SchemaViolation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SchemaViolation);
        CHECK(e.location() == "$.root.label");
    }
    CHECK(code_of([] { tree_from_json("{not json"); }) == ErrorCode::SchemaViolation);
    CHECK(code_of([] { tree_from_json(R"({"id":"x","name":"n","dataset_signature":"s"})"); }) ==
          ErrorCode::SchemaViolation);
}

TEST_CASE("thresholds serialize as shortest round-trip decimals") {
    const double threshold = 0.1 + 0.2;
    const auto t = tree_of(make_split(SingleFeatureRule{"g1", threshold, {}}, make_leaf(ClassLabel::Positive),
                                      make_leaf(ClassLabel::Positive)));
    const auto text = tree_to_json(t);
    CHECK(text.find("0.30000000000000004") != std::string::npos);
    const auto back = tree_from_json(text);
    const double again = *std::get<SingleFeatureRule>(back.root->split().rule).threshold;
    CHECK(std::memcmp(&again, &threshold, sizeof(double)) == 0);
}

TEST_CASE("property: raising a threshold never moves a sample from left to right") {
    oracle::Rng rng(9);
    const auto d = oracle::random_dataset(rng, {});
    for (int i = 0; i < 200; ++i) {
        const auto feature = "n" + std::to_string(oracle::pick(rng, 3));
        const double lo = oracle::uniform(rng, 0, 10);
        const double hi = lo + oracle::uniform(rng, 0, 3);
        for (const auto& s : d.samples()) {
            const auto a = route(SingleFeatureRule{feature, lo, {}}, s, d.schema(), empty_lib());
            const auto b = route(SingleFeatureRule{feature, hi, {}}, s, d.schema(), empty_lib());
            if (a == Route::Left) CHECK(b == Route::Left);
        }
    }
}

TEST_CASE("property: routing is total for validated rules") {
    oracle::Rng rng(10);
    oracle::DatasetShape shape;
    shape.missing_rate = 0.2;
    const auto d = oracle::random_dataset(rng, shape);
    oracle::Library lib;
    oracle::fill_library(rng, d, 3, lib);
    for (int i = 0; i < 200; ++i) {
        const auto rule = oracle::random_rule(rng, d, lib.ids);
        const DecisionTree probe{"probe", "p", d.signature(),
                                 make_split(rule, make_leaf(ClassLabel::Positive), make_leaf(ClassLabel::Positive))};
        REQUIRE(validate_tree(probe, d.schema(), lib.resolver).empty());
        for (const auto& s : d.samples()) {
            const auto r = route(rule, s, d.schema(), lib.resolver);
            CHECK((r == Route::Left || r == Route::Right || r == Route::MissingInput));
        }
    }
}
