#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "branch/dataset.hpp"

namespace branch {

enum class ModelKind { Stump, LogReg };

struct FeatureStats {
    std::string feature;
    double mean = 0.0;
    double stddev = 1.0;

    bool operator==(const FeatureStats&) const = default;
};

// Parameters of a learner usable as a split rule. Self-contained: the
// standardization statistics travel with the model.
struct TrainedModel {
    ModelKind kind = ModelKind::Stump;

    // Stump
    std::string feature;
    double threshold = 0.0;
    ClassLabel left_label = ClassLabel::Positive;
    double p_left = 0.5;
    double p_right = 0.5;
    double gain = 0.0;

    // LogReg; weights align with `features`
    std::vector<std::string> features;
    std::vector<double> weights;
    double bias = 0.0;

    std::vector<FeatureStats> standardization;

    bool operator==(const TrainedModel&) const = default;
};

double sigmoid(double z) noexcept;

// Features whose values model_score reads.
std::vector<std::string> model_inputs(const TrainedModel& m);

// Positive-class probability. Every input feature must be present in `s`.
double model_score(const TrainedModel& m, const Sample& s, const Schema& schema);

nlohmann::json model_to_json(const TrainedModel& m);
class JsonReader;
TrainedModel model_from_json(const JsonReader& r);

}  // namespace branch
