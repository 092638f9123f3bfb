#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "branch/dataset.hpp"
#include "branch/tree.hpp"

namespace branch {

struct TrainingSetMode {
    bool operator==(const TrainingSetMode&) const = default;
};

struct TestSetMode {
    std::string test_dataset_id;  // empty: the training dataset's companion
    bool operator==(const TestSetMode&) const = default;
};

struct PercentageSplitMode {
    double fraction = 0.66;
    std::uint64_t seed = 0;
    bool operator==(const PercentageSplitMode&) const = default;
};

using EvalMode = std::variant<TrainingSetMode, TestSetMode, PercentageSplitMode>;

struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

struct LeafStat {
    std::string path;  // L/R steps from the root, "" for a bare leaf
    std::uint64_t count = 0;
    double fraction = 0.0;
    std::optional<double> accuracy;  // absent when no sample reached the leaf
    ClassLabel label = ClassLabel::Negative;

    bool operator==(const LeafStat&) const = default;
};

struct EvaluationReport {
    EvalMode mode;
    double accuracy = 0.0;
    double auc = 0.5;
    ConfusionMatrix confusion;
    std::vector<LeafStat> leaves;
    std::vector<std::string> warnings;

    bool operator==(const EvaluationReport&) const = default;
};

inline constexpr const char* kOverfitWarning = "training-set evaluation may overfit";

// Mann-Whitney AUC with half credit for tied scores, O(n log n).
double auc(std::span<const double> scores, std::span<const ClassLabel> labels);

// `test_set` is required for TestSetMode and ignored otherwise.
EvaluationReport evaluate(const DecisionTree& t, const Dataset& d, const EvalMode& mode, const TreeResolver& lib,
                          const Dataset* test_set = nullptr);

// Majority vote; a split vote goes to Positive when the mean leaf score of all
// trees is >= 0.5, i.e. toward the side the trees are more confident about.
ClassLabel ensemble_predict(std::span<const DecisionTree> trees, const Sample& s, const Schema& schema,
                            const TreeResolver& lib);

// Each tree is refitted on the mode's training side; the ensemble's score is
// the mean leaf score. The report has no per-leaf statistics.
EvaluationReport evaluate_ensemble(std::span<const DecisionTree> trees, const Dataset& d, const EvalMode& mode,
                                   const TreeResolver& lib, const Dataset* test_set = nullptr);

nlohmann::json mode_to_json(const EvalMode& mode);
EvalMode mode_from_json(const nlohmann::json& j);
nlohmann::json report_to_json(const EvaluationReport& r);

// Text rendering of the report in the layout of the evaluation sidebar.
std::string report_to_table(const EvaluationReport& r, const ClassNames& classes);

}  // namespace branch
