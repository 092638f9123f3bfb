#include "branch/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "branch/error.hpp"
#include "branch/json_io.hpp"

namespace branch {

double auc(std::span<const double> scores, std::span<const ClassLabel> labels) {
    if (scores.size() != labels.size()) throw Error(ErrorCode::BadRequest, "scores and labels differ in length");
    std::uint64_t n_pos = 0;
    for (auto l : labels) n_pos += l == ClassLabel::Positive ? 1 : 0;
    const std::uint64_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::OneClassOnly, "AUC needs both classes");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Twice the positive rank sum; a tie group [i, j) shares midrank (i + 1 + j) / 2.
    std::uint64_t twice_rank_sum = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i + 1;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == ClassLabel::Positive) twice_rank_sum += i + 1 + j;
        }
        i = j;
    }
    const std::uint64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
    const std::uint64_t twice_pairs = 2 * n_pos * n_neg;

    // Divide on the smaller side so complementary labelings sum to exactly 1.
    const double pairs = static_cast<double>(twice_pairs);
    if (2 * twice_u <= twice_pairs) return static_cast<double>(twice_u) / pairs;
    return 1.0 - static_cast<double>(twice_pairs - twice_u) / pairs;
}

namespace {

void leaf_paths(const Node& n, std::string& path, std::vector<std::pair<std::string, ClassLabel>>& out) {
    if (n.is_leaf()) {
        out.emplace_back(path, n.leaf().label);
        return;
    }
    path.push_back('L');
    leaf_paths(*n.split().left, path, out);
    path.back() = 'R';
    leaf_paths(*n.split().right, path, out);
    path.pop_back();
}

struct Plan {
    const Dataset* fit_on = nullptr;
    std::vector<std::size_t> fit_rows;
    const Dataset* eval_on = nullptr;
    std::vector<std::size_t> eval_rows;
    std::vector<std::string> warnings;
};

std::vector<std::size_t> all_rows(const Dataset& d) {
    std::vector<std::size_t> rows(d.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

Plan plan_for(const Dataset& d, const EvalMode& mode, const Dataset* test_set) {
    Plan plan;
    plan.fit_on = &d;
    if (std::holds_alternative<TrainingSetMode>(mode)) {
        plan.fit_rows = all_rows(d);
        plan.eval_on = &d;
        plan.eval_rows = plan.fit_rows;
        plan.warnings.emplace_back(kOverfitWarning);
    } else if (std::holds_alternative<TestSetMode>(mode)) {
        if (test_set == nullptr) throw Error(ErrorCode::NotFound, "test-set evaluation needs a test dataset");
        if (test_set->signature() != d.signature()) {
            throw Error(ErrorCode::SignatureMismatch, "test dataset has a different signature");
        }
        plan.fit_rows = all_rows(d);
        plan.eval_on = test_set;
        plan.eval_rows = all_rows(*test_set);
    } else {
        const auto& split = std::get<PercentageSplitMode>(mode);
        auto part = percentage_split(d, split.fraction, split.seed);
        if (part.too_few_samples) {
            plan.warnings.emplace_back("a class has a single sample; it was placed on the training side");
        }
        plan.fit_rows = std::move(part.train);
        plan.eval_on = &d;
        plan.eval_rows = std::move(part.test);
    }
    return plan;
}

void check_signature(const DecisionTree& t, const Dataset& d) {
    if (t.dataset_signature != d.signature()) {
        throw Error(ErrorCode::SignatureMismatch, "tree '" + t.id + "' was built for a different dataset signature");
    }
}

void tally(ConfusionMatrix& c, ClassLabel actual, ClassLabel predicted) {
    if (actual == ClassLabel::Positive) {
        ++(predicted == ClassLabel::Positive ? c.tp : c.fn);
    } else {
        ++(predicted == ClassLabel::Positive ? c.fp : c.tn);
    }
}

void finish(EvaluationReport& report, const std::vector<double>& scores, const std::vector<ClassLabel>& labels) {
    const auto n = report.confusion.total();
    if (n == 0) throw Error(ErrorCode::OneClassOnly, "no samples to evaluate");
    report.accuracy = static_cast<double>(report.confusion.tp + report.confusion.tn) / static_cast<double>(n);
    report.auc = auc(scores, labels);
}

}  // namespace

EvaluationReport evaluate(const DecisionTree& t, const Dataset& d, const EvalMode& mode, const TreeResolver& lib,
                          const Dataset* test_set) {
    check_signature(t, d);
    require_valid(t, d.schema(), lib);
    auto plan = plan_for(d, mode, test_set);
    const auto fitted = fit_leaf_stats(t, *plan.fit_on, plan.fit_rows, lib);

    EvaluationReport report;
    report.mode = mode;
    report.warnings = std::move(plan.warnings);

    std::vector<std::pair<std::string, ClassLabel>> paths;
    std::string scratch;
    leaf_paths(*fitted.root, scratch, paths);
    std::vector<std::uint64_t> reached(paths.size(), 0);
    std::vector<std::uint64_t> correct(paths.size(), 0);

    std::vector<double> scores;
    std::vector<ClassLabel> labels;
    for (std::size_t row : plan.eval_rows) {
        const auto& s = plan.eval_on->samples()[row];
        const auto [leaf, path] = locate_leaf(fitted, s, plan.eval_on->schema(), lib);
        const auto slot = static_cast<std::size_t>(
            std::find_if(paths.begin(), paths.end(), [&](const auto& p) { return p.first == path; }) - paths.begin());
        ++reached[slot];
        if (leaf->label == s.label) ++correct[slot];
        tally(report.confusion, s.label, leaf->label);
        scores.push_back(leaf_score(*leaf));
        labels.push_back(s.label);
    }
    finish(report, scores, labels);

    const auto n = static_cast<double>(report.confusion.total());
    for (std::size_t i = 0; i < paths.size(); ++i) {
        LeafStat stat;
        stat.path = paths[i].first;
        stat.label = paths[i].second;
        stat.count = reached[i];
        stat.fraction = static_cast<double>(reached[i]) / n;
        if (reached[i] > 0) stat.accuracy = static_cast<double>(correct[i]) / static_cast<double>(reached[i]);
        report.leaves.push_back(std::move(stat));
    }
    return report;
}

namespace {

std::pair<ClassLabel, double> vote(std::span<const DecisionTree> trees, const Sample& s, const Schema& schema,
                                   const TreeResolver& lib) {
    std::size_t positive_votes = 0;
    double score_sum = 0.0;
    for (const auto& t : trees) {
        const auto p = predict(t, s, schema, lib);
        positive_votes += p.label == ClassLabel::Positive ? 1 : 0;
        score_sum += p.score;
    }
    const double mean = score_sum / static_cast<double>(trees.size());
    const std::size_t negative_votes = trees.size() - positive_votes;
    ClassLabel label;
    if (positive_votes != negative_votes) {
        label = positive_votes > negative_votes ? ClassLabel::Positive : ClassLabel::Negative;
    } else {
        label = mean >= 0.5 ? ClassLabel::Positive : ClassLabel::Negative;
    }
    return {label, mean};
}

void check_ensemble(std::span<const DecisionTree> trees) {
    if (trees.empty()) throw Error(ErrorCode::BadRequest, "ensemble needs at least one tree");
    for (const auto& t : trees) {
        if (t.dataset_signature != trees.front().dataset_signature) {
            throw Error(ErrorCode::SignatureMismatch, "ensemble trees disagree on dataset signature");
        }
    }
}

}  // namespace

ClassLabel ensemble_predict(std::span<const DecisionTree> trees, const Sample& s, const Schema& schema,
                            const TreeResolver& lib) {
    check_ensemble(trees);
    return vote(trees, s, schema, lib).first;
}

EvaluationReport evaluate_ensemble(std::span<const DecisionTree> trees, const Dataset& d, const EvalMode& mode,
                                   const TreeResolver& lib, const Dataset* test_set) {
    check_ensemble(trees);
    auto plan = plan_for(d, mode, test_set);
    std::vector<DecisionTree> fitted;
    for (const auto& t : trees) {
        check_signature(t, d);
        require_valid(t, d.schema(), lib);
        fitted.push_back(fit_leaf_stats(t, *plan.fit_on, plan.fit_rows, lib));
    }

    EvaluationReport report;
    report.mode = mode;
    report.warnings = std::move(plan.warnings);
    std::vector<double> scores;
    std::vector<ClassLabel> labels;
    for (std::size_t row : plan.eval_rows) {
        const auto& s = plan.eval_on->samples()[row];
        const auto [label, score] = vote(fitted, s, plan.eval_on->schema(), lib);
        tally(report.confusion, s.label, label);
        scores.push_back(score);
        labels.push_back(s.label);
    }
    finish(report, scores, labels);
    return report;
}

nlohmann::json mode_to_json(const EvalMode& mode) {
    if (std::holds_alternative<TrainingSetMode>(mode)) return {{"trainingSet", nlohmann::json::object()}};
    if (const auto* test = std::get_if<TestSetMode>(&mode)) {
        nlohmann::json body = nlohmann::json::object();
        if (!test->test_dataset_id.empty()) body["dataset"] = test->test_dataset_id;
        return {{"testSet", std::move(body)}};
    }
    const auto& split = std::get<PercentageSplitMode>(mode);
    return {{"percentageSplit", {{"fraction", split.fraction}, {"seed", split.seed}}}};
}

EvalMode mode_from_json(const nlohmann::json& j) {
    const JsonReader r(j);
    r.expect_object({"trainingSet", "testSet", "percentageSplit"});
    if (j.size() != 1) r.fail("mode must name exactly one of trainingSet, testSet, percentageSplit");
    if (r.has("trainingSet")) {
        r.at("trainingSet").expect_object({});
        return TrainingSetMode{};
    }
    if (r.has("testSet")) {
        const auto body = r.at("testSet");
        body.expect_object({"dataset"});
        return TestSetMode{body.has("dataset") ? body.at("dataset").string() : std::string{}};
    }
    const auto body = r.at("percentageSplit");
    body.expect_object({"fraction", "seed"});
    PercentageSplitMode split{body.at("fraction").number(), body.at("seed").count()};
    if (!(split.fraction > 0.0 && split.fraction < 1.0)) {
        throw Error(ErrorCode::BadFraction, "fraction must lie strictly between 0 and 1", body.path() + ".fraction");
    }
    return split;
}

nlohmann::json report_to_json(const EvaluationReport& r) {
    nlohmann::json leaves = nlohmann::json::array();
    for (const auto& leaf : r.leaves) {
        nlohmann::json item = {{"path", leaf.path},
                               {"count", leaf.count},
                               {"fraction", leaf.fraction},
                               {"label", class_label_name(leaf.label)}};
        if (leaf.accuracy) item["accuracy"] = *leaf.accuracy;
        leaves.push_back(std::move(item));
    }
    return {{"mode", mode_to_json(r.mode)},
            {"accuracy", r.accuracy},
            {"auc", r.auc},
            {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"fn", r.confusion.fn}, {"tn", r.confusion.tn}}},
            {"leaves", std::move(leaves)},
            {"warnings", r.warnings}};
}

std::string report_to_table(const EvaluationReport& r, const ClassNames& classes) {
    auto fixed = [](double v, int digits) {
        char buffer[32];
        std::snprintf(buffer, sizeof(buffer), "%.*f", digits, v);
        return std::string(buffer);
    };
    std::ostringstream out;
    out << "mode      " << mode_to_json(r.mode).dump() << '\n';
    out << "accuracy  " << fixed(r.accuracy, 3) << '\n';
    out << "auc       " << fixed(r.auc, 3) << '\n';
    out << "\nconfusion (rows: predicted, columns: actual)\n";
    const std::size_t width = std::max<std::size_t>({classes.positive.size(), classes.negative.size(), 8}) + 2;
    auto pad = [width](const std::string& s) { return s + std::string(width - std::min(width, s.size()), ' '); };
    out << pad("") << pad(classes.positive) << pad(classes.negative) << '\n';
    out << pad(classes.positive) << pad(std::to_string(r.confusion.tp)) << pad(std::to_string(r.confusion.fp)) << '\n';
    out << pad(classes.negative) << pad(std::to_string(r.confusion.fn)) << pad(std::to_string(r.confusion.tn)) << '\n';
    if (!r.leaves.empty()) {
        out << "\nleaves\n";
        for (const auto& leaf : r.leaves) {
            out << "  " << pad(leaf.path.empty() ? "(root)" : leaf.path)
                << pad(leaf.label == ClassLabel::Positive ? classes.positive : classes.negative);
            if (leaf.accuracy) {
                out << fixed(100.0 * leaf.fraction, 1) << "% of samples, " << fixed(100.0 * *leaf.accuracy, 1)
                    << "% accurate\n";
            } else {
                out << "no samples reached this leaf\n";
            }
        }
    }
    for (const auto& w : r.warnings) out << "\nwarning: " << w << '\n';
    return out.str();
}

}  // namespace branch
