#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "branch/dataset.hpp"
#include "branch/model.hpp"

namespace branch {

struct LogRegParams {
    double learning_rate = 0.1;
    std::uint64_t epochs = 200;
    double l2 = 0.0;

    bool operator==(const LogRegParams&) const = default;
};

struct LearnerSpec {
    ModelKind kind = ModelKind::Stump;
    std::vector<std::string> feature_subset;
    LogRegParams hyperparams;
    std::uint64_t seed = 0;
};

struct TrainingResult {
    TrainedModel model;
    std::vector<std::string> warnings;
    // LogReg only: objective before each epoch's update, then the final value.
    std::vector<double> loss_history;
};

// Binary Shannon entropy in bits of a set with `positive` of `total` positive.
double entropy_bits(std::uint64_t positive, std::uint64_t total) noexcept;

// Information gain of splitting `parent` into `left` + the remainder.
double information_gain(std::uint64_t parent_pos, std::uint64_t parent_total, std::uint64_t left_pos,
                        std::uint64_t left_total) noexcept;

// Exhaustive (feature, midpoint) search; ties prefer the lower dataset column,
// then the lower threshold. Rows missing a feature sit out that feature.
TrainingResult train_stump(const Dataset& d, const std::vector<std::size_t>& rows,
                           const std::vector<std::string>& subset);

// Full-batch gradient descent on mean NLL + l2 * |w|^2 / 2 over standardized
// features, starting from zero. Rows with any missing subset feature are dropped.
TrainingResult train_logreg(const Dataset& d, const std::vector<std::size_t>& rows, const LearnerSpec& spec);

TrainingResult train_model(const Dataset& d, const std::vector<std::size_t>& rows, const LearnerSpec& spec);

// Logistic-regression objective on an already standardized design matrix
// (row-major, `x.size() == labels.size() * weights.size()`).
struct LogRegProblem {
    std::vector<double> x;
    std::vector<double> y;  // 1 positive, 0 negative
    std::size_t dims = 0;
    double l2 = 0.0;

    std::size_t rows() const noexcept { return y.size(); }
    double loss(const std::vector<double>& w, double b) const;
    // Gradient with respect to (w..., b); the last entry is the bias.
    std::vector<double> gradient(const std::vector<double>& w, double b) const;
};

LearnerSpec learner_spec_from_json(const nlohmann::json& j);
nlohmann::json learner_spec_to_json(const LearnerSpec& spec);
nlohmann::json training_result_to_json(const TrainingResult& r);

}  // namespace branch
