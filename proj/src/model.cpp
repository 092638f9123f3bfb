#include "branch/model.hpp"

#include <cmath>

#include "branch/error.hpp"
#include "branch/json_io.hpp"

namespace branch {

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::vector<std::string> model_inputs(const TrainedModel& m) {
    if (m.kind == ModelKind::Stump) return {m.feature};
    return m.features;
}

namespace {

double numeric_value(const Sample& s, const Schema& schema, const std::string& name) {
    const auto* f = schema.find(name);
    if (f == nullptr) throw Error(ErrorCode::UnknownFeature, "model input not in dataset: " + name);
    const auto* v = std::get_if<double>(&s.values.at(f->index));
    if (v == nullptr) throw Error(ErrorCode::KindMismatch, "model input is not numeric: " + name);
    return *v;
}

const FeatureStats* stats_for(const TrainedModel& m, const std::string& name) {
    for (const auto& st : m.standardization) {
        if (st.feature == name) return &st;
    }
    return nullptr;
}

}  // namespace

double model_score(const TrainedModel& m, const Sample& s, const Schema& schema) {
    if (m.kind == ModelKind::Stump) {
        return numeric_value(s, schema, m.feature) < m.threshold ? m.p_left : m.p_right;
    }
    double z = m.bias;
    for (std::size_t i = 0; i < m.features.size(); ++i) {
        const auto* st = stats_for(m, m.features[i]);
        if (st == nullptr) throw Error(ErrorCode::InvalidRule, "missing standardization for " + m.features[i]);
        z += m.weights[i] * (numeric_value(s, schema, m.features[i]) - st->mean) / st->stddev;
    }
    return sigmoid(z);
}

nlohmann::json model_to_json(const TrainedModel& m) {
    nlohmann::json stats = nlohmann::json::array();
    for (const auto& st : m.standardization) {
        stats.push_back({{"feature", st.feature}, {"mean", st.mean}, {"stddev", st.stddev}});
    }
    if (m.kind == ModelKind::Stump) {
        return {{"kind", "stump"},
                {"feature", m.feature},
                {"threshold", m.threshold},
                {"left_label", class_label_name(m.left_label)},
                {"p_left", m.p_left},
                {"p_right", m.p_right},
                {"gain", m.gain},
                {"standardization", std::move(stats)}};
    }
    return {{"kind", "logreg"},
            {"features", m.features},
            {"weights", m.weights},
            {"bias", m.bias},
            {"standardization", std::move(stats)}};
}

namespace {

ClassLabel read_label(const JsonReader& r) {
    const auto s = r.string();
    if (s == "positive") return ClassLabel::Positive;
    if (s == "negative") return ClassLabel::Negative;
    r.fail("expected \"positive\" or \"negative\"");
}

double read_probability(const JsonReader& r) {
    const double p = r.number();
    if (p < 0.0 || p > 1.0) r.fail("probability outside [0,1]");
    return p;
}

}  // namespace

TrainedModel model_from_json(const JsonReader& r) {
    TrainedModel m;
    const auto kind = r.at("kind").string();
    if (kind == "stump") {
        r.expect_object({"kind", "feature", "threshold", "left_label", "p_left", "p_right", "gain", "standardization"});
        m.kind = ModelKind::Stump;
        m.feature = r.at("feature").string();
        m.threshold = r.at("threshold").number();
        m.left_label = read_label(r.at("left_label"));
        m.p_left = read_probability(r.at("p_left"));
        m.p_right = read_probability(r.at("p_right"));
        m.gain = r.at("gain").number();
    } else if (kind == "logreg") {
        r.expect_object({"kind", "features", "weights", "bias", "standardization"});
        m.kind = ModelKind::LogReg;
        const auto features = r.at("features");
        const auto weights = r.at("weights");
        if (features.array_size() != weights.array_size()) weights.fail("weights must align with features");
        for (std::size_t i = 0; i < features.array_size(); ++i) {
            m.features.push_back(features.at(i).string());
            m.weights.push_back(weights.at(i).number());
        }
        m.bias = r.at("bias").number();
    } else {
        r.at("kind").fail("unknown model kind '" + kind + "'");
    }
    const auto stats = r.at("standardization");
    for (std::size_t i = 0; i < stats.array_size(); ++i) {
        const auto st = stats.at(i);
        st.expect_object({"feature", "mean", "stddev"});
        FeatureStats fs{st.at("feature").string(), st.at("mean").number(), st.at("stddev").number()};
        if (!(fs.stddev > 0.0)) st.at("stddev").fail("stddev must be positive");
        m.standardization.push_back(std::move(fs));
    }
    if (m.kind == ModelKind::LogReg) {
        for (const auto& name : m.features) {
            if (stats_for(m, name) == nullptr) r.at("standardization").fail("no statistics for feature " + name);
        }
    }
    return m;
}

}  // namespace branch
