#include <doctest.h>

#include <cstring>
#include <numeric>

#include "branch/error.hpp"
#include "branch/json_io.hpp"
#include "branch/learners.hpp"
#include "branch/tree.hpp"
#include "support/oracles.hpp"

using namespace branch;

namespace {

std::vector<std::size_t> all_rows(const Dataset& d) {
    std::vector<std::size_t> rows(d.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
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

LearnerSpec logreg_spec(std::vector<std::string> features, double lr, std::uint64_t epochs, double l2 = 0.0) {
    LearnerSpec spec;
    spec.kind = ModelKind::LogReg;
    spec.feature_subset = std::move(features);
    spec.hyperparams = {lr, epochs, l2};
    return spec;
}

double training_accuracy(const TrainedModel& m, const Dataset& d) {
    std::size_t correct = 0;
    for (const auto& s : d.samples()) {
        const bool positive = model_score(m, s, d.schema()) >= 0.5;
        correct += positive == (s.label == ClassLabel::Positive);
    }
    return static_cast<double>(correct) / static_cast<double>(d.size());
}

}  // namespace

TEST_CASE("entropy bounds") {
    CHECK(entropy_bits(5, 10) == 1.0);
    CHECK(entropy_bits(0, 10) == 0.0);
    CHECK(entropy_bits(10, 10) == 0.0);
    CHECK(entropy_bits(0, 0) == 0.0);
    for (std::uint64_t n = 1; n <= 40; ++n) {
        for (std::uint64_t p = 0; p <= n; ++p) {
            const double h = entropy_bits(p, n);
            CHECK(h >= 0.0);
            CHECK(h <= 1.0);
            CHECK(h == doctest::Approx(oracle::entropy_nats_to_bits(double(p), double(n))).epsilon(1e-12));
        }
    }
}

TEST_CASE("stump fixture: threshold 5 with one bit of gain") {
    const auto d = parse_csv("x,y\n1,N\n2,N\n8,P\n9,P\n", "y", "P");
    // The brute-force grid agrees before the value is frozen.
    const auto expected = oracle::brute_force_stump(d, all_rows(d), {"x"});
    REQUIRE(expected);
    REQUIRE(expected->threshold == 5.0);
    REQUIRE(expected->gain == doctest::Approx(1.0));

    const auto m = train_stump(d, all_rows(d), {"x"}).model;
    CHECK(m.kind == ModelKind::Stump);
    CHECK(m.feature == "x");
    CHECK(m.threshold == 5.0);
    CHECK(m.gain == 1.0);
    CHECK(m.left_label == ClassLabel::Negative);
    CHECK(m.p_left == 0.25);
    CHECK(m.p_right == 0.75);
    CHECK(m.standardization.size() == 1);
    CHECK(m.standardization[0].mean == 5.0);
}

TEST_CASE("stump rejects degenerate data") {
    const auto pure = parse_csv("x,y\n1,P\n2,P\n3,Q\n", "y", "P");
    CHECK(code_of([&] { train_stump(pure, {0, 1}, {"x"}); }) == ErrorCode::DegenerateData);
    const auto flat = parse_csv("x,y\n1,P\n1,N\n1,P\n", "y", "P");
    CHECK(code_of([&] { train_stump(flat, all_rows(flat), {"x"}); }) == ErrorCode::DegenerateData);
    const auto cat = parse_csv("x,c,y\n1,a,P\n2,b,N\n", "y", "P");
    CHECK(code_of([&] { train_stump(cat, all_rows(cat), {"c"}); }) == ErrorCode::KindMismatch);
    CHECK(code_of([&] { train_stump(cat, all_rows(cat), {"zz"}); }) == ErrorCode::UnknownFeature);
}

TEST_CASE("stump ties go to the lower column, then the lower threshold") {
    const auto d = parse_csv("f2,f1,y\n1,1,N\n2,2,N\n8,8,P\n9,9,P\n", "y", "P");
    CHECK(train_stump(d, all_rows(d), {"f1", "f2"}).model.feature == "f2");
    const auto e = parse_csv("f1,f2,y\n1,1,N\n2,2,N\n8,8,P\n9,9,P\n", "y", "P");
    CHECK(train_stump(e, all_rows(e), {"f2", "f1"}).model.feature == "f1");
    // N P N: both cuts give the same gain; the lower one wins
    const auto g = parse_csv("x,y\n1,N\n2,P\n3,N\n", "y", "P");
    CHECK(train_stump(g, all_rows(g), {"x"}).model.threshold == 1.5);
}

TEST_CASE("stump excludes missing values per feature") {
    const auto d = parse_csv("a,b,y\n1,NA,N\n2,5,N\n8,6,P\nNA,7,P\n", "y", "P");
    const auto m = train_stump(d, all_rows(d), {"a", "b"}).model;
    const auto expected = oracle::brute_force_stump(d, all_rows(d), {"a", "b"});
    REQUIRE(expected);
    CHECK(m.feature == expected->feature);
    CHECK(m.threshold == expected->threshold);
    CHECK(m.gain == doctest::Approx(expected->gain).epsilon(1e-12));
}

TEST_CASE("property: stump matches the brute-force grid") {
    oracle::Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        oracle::DatasetShape shape;
        shape.samples = 4 + oracle::pick(rng, 16);
        shape.numeric = 1 + oracle::pick(rng, 3);
        shape.categorical = 0;
        shape.grid = 2 + oracle::pick(rng, 8);
        shape.missing_rate = 0.1;
        const auto d = oracle::random_dataset(rng, shape);
        const auto names = oracle::numeric_names(d);
        const auto rows = all_rows(d);
        const auto expected = oracle::brute_force_stump(d, rows, names);
        if (!expected) {
            CHECK(code_of([&] { train_stump(d, rows, names); }) == ErrorCode::DegenerateData);
            continue;
        }
        const auto m = train_stump(d, rows, names).model;
        CHECK(m.feature == expected->feature);
        CHECK(m.threshold == expected->threshold);
        CHECK(m.gain == doctest::Approx(expected->gain).epsilon(1e-12));
    }
}

TEST_CASE("logreg gradient at zero is the class imbalance") {
    LogRegProblem p;
    p.dims = 1;
    p.x = {-1.0, 1.0, -0.5, 0.5};
    p.y = {0, 1, 0, 1};
    CHECK(p.gradient({0.0}, 0.0)[1] == 0.0);
    p.y = {1, 1, 1, 0};
    CHECK(p.gradient({0.0}, 0.0)[1] == doctest::Approx(0.5 - 0.75));
    CHECK(p.loss({0.0}, 0.0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("logreg separable fixture reaches training accuracy 1") {
    const auto d = parse_csv("x,y\n-2,N\n-1,N\n1,P\n2,P\n", "y", "P");
    const auto result = train_logreg(d, all_rows(d), logreg_spec({"x"}, 0.5, 500));
    CHECK(training_accuracy(result.model, d) == 1.0);
    CHECK(result.loss_history.size() == 501);

    // Same fit from the textbook reference implementation.
    const auto ref = oracle::reference_logreg({{-2, -1, 1, 2}}, {0, 0, 1, 1}, 0.5, 500, 0.0);
    CHECK(result.model.weights[0] == doctest::Approx(ref.weights[0]).epsilon(1e-9));
    CHECK(result.model.bias == doctest::Approx(ref.bias).epsilon(1e-9));
    CHECK(result.model.standardization[0].stddev == doctest::Approx(ref.stddev[0]).epsilon(1e-15));
    CHECK(result.model.weights[0] > 0.0);
}

TEST_CASE("logreg matches the reference descent on random data") {
    oracle::Rng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        oracle::DatasetShape shape;
        shape.samples = 10 + oracle::pick(rng, 20);
        shape.numeric = 2;
        shape.categorical = 0;
        shape.missing_rate = 0.0;
        const auto d = oracle::random_dataset(rng, shape);
        const double l2 = trial % 2 == 0 ? 0.0 : 0.1;
        const auto m = train_logreg(d, all_rows(d), logreg_spec({"n0", "n1"}, 0.3, 100, l2)).model;
        std::vector<std::vector<double>> cols(2);
        std::vector<int> y;
        for (const auto& s : d.samples()) {
            cols[0].push_back(std::get<double>(s.values[0]));
            cols[1].push_back(std::get<double>(s.values[1]));
            y.push_back(s.label == ClassLabel::Positive);
        }
        const auto ref = oracle::reference_logreg(cols, y, 0.3, 100, l2);
        for (int j = 0; j < 2; ++j) CHECK(m.weights[j] == doctest::Approx(ref.weights[j]).epsilon(1e-9));
        CHECK(m.bias == doctest::Approx(ref.bias).epsilon(1e-9));
    }
}

TEST_CASE("property: analytic gradient matches central differences") {
    oracle::Rng rng(51);
    for (int trial = 0; trial < 50; ++trial) {
        LogRegProblem p;
        p.dims = 1 + oracle::pick(rng, 4);
        const std::size_t n = 3 + oracle::pick(rng, 20);
        for (std::size_t i = 0; i < n * p.dims; ++i) p.x.push_back(oracle::uniform(rng, -2, 2));
        for (std::size_t i = 0; i < n; ++i) p.y.push_back(oracle::coin(rng) ? 1.0 : 0.0);
        p.l2 = oracle::coin(rng) ? 0.0 : oracle::uniform(rng, 0, 1);
        std::vector<double> theta;
        for (std::size_t j = 0; j <= p.dims; ++j) theta.push_back(oracle::uniform(rng, -2, 2));
        auto split = [&](const std::vector<double>& t) {
            return std::pair{std::vector<double>(t.begin(), t.end() - 1), t.back()};
        };
        const auto [w, b] = split(theta);
        CHECK(p.loss(w, b) == doctest::Approx(oracle::reference_loss(p, w, b)).epsilon(1e-12));
        const auto numeric = oracle::central_differences(
            [&](const std::vector<double>& t) {
                const auto [tw, tb] = split(t);
                return oracle::reference_loss(p, tw, tb);
            },
            theta);
        const auto analytic = p.gradient(w, b);
        for (std::size_t j = 0; j < analytic.size(); ++j) {
            CHECK(oracle::relative_error(analytic[j], numeric[j]) <= 1e-5);
        }
    }
}

TEST_CASE("logreg loss is non-increasing at a small learning rate") {
    oracle::Rng rng(61);
    for (int trial = 0; trial < 10; ++trial) {
        oracle::DatasetShape shape;
        shape.samples = 20;
        shape.numeric = 3;
        shape.categorical = 0;
        shape.missing_rate = 0.0;
        const auto d = oracle::random_dataset(rng, shape);
        const auto h = train_logreg(d, all_rows(d), logreg_spec({"n0", "n1", "n2"}, 0.01, 300)).loss_history;
        for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1]);
    }
}

TEST_CASE("logreg errors and warnings") {
    const auto d = parse_csv("x,k,y\n-2,1,N\n-1,1,N\n1,1,P\n2,1,P\nNA,1,P\n", "y", "P");
    CHECK(code_of([&] { train_logreg(d, all_rows(d), logreg_spec({"x"}, 0.0, 10)); }) ==
          ErrorCode::BadHyperparameters);
    CHECK(code_of([&] { train_logreg(d, all_rows(d), logreg_spec({"x"}, 0.1, 0)); }) ==
          ErrorCode::BadHyperparameters);
    CHECK(code_of([&] { train_logreg(d, all_rows(d), logreg_spec({"x"}, 0.1, 10, -1.0)); }) ==
          ErrorCode::BadHyperparameters);
    CHECK(code_of([&] { train_logreg(d, all_rows(d), logreg_spec({"k"}, 0.1, 10)); }) == ErrorCode::DegenerateData);
    CHECK(code_of([&] { train_logreg(d, all_rows(d), logreg_spec({"x"}, 10.0, 500, 10.0)); }) ==
          ErrorCode::NonFiniteLoss);

    const auto r = train_logreg(d, all_rows(d), logreg_spec({"x", "k"}, 0.1, 10));
    CHECK(r.model.features == std::vector<std::string>{"x"});
    REQUIRE(r.warnings.size() == 2);
    CHECK(r.warnings[0].find("1 training rows dropped") != std::string::npos);
    CHECK(r.warnings[1].find("'k'") != std::string::npos);
}

TEST_CASE("training is deterministic") {
    oracle::Rng rng(71);
    oracle::DatasetShape shape;
    shape.categorical = 0;
    const auto d = oracle::random_dataset(rng, shape);
    const auto spec = logreg_spec({"n0", "n2"}, 0.2, 50, 0.01);
    const auto a = train_logreg(d, all_rows(d), spec).model;
    const auto b = train_logreg(d, all_rows(d), spec).model;
    CHECK(a == b);
    CHECK(std::memcmp(&a.bias, &b.bias, sizeof(double)) == 0);
    CHECK(train_stump(d, all_rows(d), {"n0", "n1"}).model == train_stump(d, all_rows(d), {"n0", "n1"}).model);
}

TEST_CASE("trained models embed in tree JSON and keep their scores") {
    const auto d = parse_csv("x,z,y\n-2,1,N\n-1,3,N\n1,2,P\n2,5,P\n", "y", "P");
    for (auto kind : {ModelKind::Stump, ModelKind::LogReg}) {
        auto spec = logreg_spec({"x", "z"}, 0.5, 100);
        spec.kind = kind;
        const auto m = train_model(d, all_rows(d), spec).model;
        const DecisionTree t{"t", "t", d.signature(),
                             make_split(ModelRule{m, {"x", "z"}}, make_leaf(ClassLabel::Positive, 2, 2),
                                        make_leaf(ClassLabel::Negative, 2, 0))};
        const auto back = tree_from_json(tree_to_json(t));
        CHECK(back == t);
        for (const auto& s : d.samples()) {
            CHECK(model_score(std::get<ModelRule>(back.root->split().rule).model, s, d.schema()) ==
                  model_score(m, s, d.schema()));
        }
    }
}

TEST_CASE("learner spec JSON round-trips") {
    auto spec = logreg_spec({"a", "b"}, 0.25, 30, 0.5);
    spec.seed = 9;
    const auto back = learner_spec_from_json(learner_spec_to_json(spec));
    CHECK(back.kind == spec.kind);
    CHECK(back.feature_subset == spec.feature_subset);
    CHECK(back.hyperparams == spec.hyperparams);
    CHECK(back.seed == 9);
    CHECK_THROWS_AS(learner_spec_from_json(nlohmann::json::parse(R"({"kind":"svm","feature_subset":["a"]})")), Error);
}
