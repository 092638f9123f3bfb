#include "branch/learners.hpp"

#include <algorithm>
#include <cmath>

#include "branch/error.hpp"
#include "branch/json_io.hpp"

namespace branch {

double entropy_bits(std::uint64_t positive, std::uint64_t total) noexcept {
    if (total == 0 || positive == 0 || positive == total) return 0.0;
    const double p = static_cast<double>(positive) / static_cast<double>(total);
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double information_gain(std::uint64_t parent_pos, std::uint64_t parent_total, std::uint64_t left_pos,
                        std::uint64_t left_total) noexcept {
    const std::uint64_t right_pos = parent_pos - left_pos;
    const std::uint64_t right_total = parent_total - left_total;
    const double n = static_cast<double>(parent_total);
    return entropy_bits(parent_pos, parent_total) -
           static_cast<double>(left_total) / n * entropy_bits(left_pos, left_total) -
           static_cast<double>(right_total) / n * entropy_bits(right_pos, right_total);
}

namespace {

// Gains closer than this count as tied, so that mirrored count patterns whose
// entropies round differently still fall back to the column/threshold order.
constexpr double kGainTieTolerance = 1e-12;

std::vector<const FeatureDescriptor*> numeric_subset(const Dataset& d, const std::vector<std::string>& subset) {
    if (subset.empty()) throw Error(ErrorCode::BadRequest, "feature subset is empty");
    std::vector<const FeatureDescriptor*> out;
    for (const auto& name : subset) {
        const auto* f = d.feature(name);
        if (f == nullptr) throw Error(ErrorCode::UnknownFeature, "unknown feature: " + name);
        if (f->kind != FeatureKind::Numeric) throw Error(ErrorCode::KindMismatch, "feature is not numeric: " + name);
        if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
    }
    return out;
}

void require_both_classes(const Dataset& d, const std::vector<std::size_t>& rows) {
    bool pos = false;
    bool neg = false;
    for (std::size_t r : rows) {
        (d.samples().at(r).label == ClassLabel::Positive ? pos : neg) = true;
    }
    if (rows.size() < 2 || !pos || !neg) {
        throw Error(ErrorCode::DegenerateData, "training data needs at least two samples from both classes");
    }
}

// Population mean/stddev over present values; nullopt for constant or empty columns.
std::optional<FeatureStats> column_stats(const Dataset& d, const std::vector<std::size_t>& rows,
                                         const FeatureDescriptor& f) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t r : rows) {
        if (const auto* v = std::get_if<double>(&d.samples()[r].values[f.index])) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r : rows) {
        if (const auto* v = std::get_if<double>(&d.samples()[r].values[f.index])) ss += (*v - mean) * (*v - mean);
    }
    const double stddev = std::sqrt(ss / static_cast<double>(n));
    if (!(stddev > 0.0)) return std::nullopt;
    return FeatureStats{f.name, mean, stddev};
}

}  // namespace

TrainingResult train_stump(const Dataset& d, const std::vector<std::size_t>& rows,
                           const std::vector<std::string>& subset) {
    auto features = numeric_subset(d, subset);
    std::sort(features.begin(), features.end(), [](auto* a, auto* b) { return a->index < b->index; });
    require_both_classes(d, rows);

    TrainingResult result;
    auto& m = result.model;
    m.kind = ModelKind::Stump;

    bool found = false;
    double best_gain = 0.0;
    for (const auto* f : features) {
        std::vector<std::pair<double, bool>> column;
        for (std::size_t r : rows) {
            const auto& s = d.samples()[r];
            if (const auto* v = std::get_if<double>(&s.values[f->index])) {
                column.emplace_back(*v, s.label == ClassLabel::Positive);
            }
        }
        std::sort(column.begin(), column.end());
        std::uint64_t parent_pos = 0;
        for (const auto& [v, pos] : column) parent_pos += pos ? 1 : 0;

        std::uint64_t left_pos = 0;
        for (std::size_t i = 0; i + 1 < column.size(); ++i) {
            left_pos += column[i].second ? 1 : 0;
            const double lo = column[i].first;
            const double hi = column[i + 1].first;
            if (lo == hi) continue;
            double threshold = lo + (hi - lo) / 2.0;
            if (!(threshold > lo)) threshold = hi;
            const double gain = information_gain(parent_pos, column.size(), left_pos, i + 1);
            if (!found || gain > best_gain + kGainTieTolerance) {
                found = true;
                best_gain = gain;
                m.feature = f->name;
                m.threshold = threshold;
                m.gain = gain;
                const double left_total = static_cast<double>(i + 1);
                const double right_total = static_cast<double>(column.size() - i - 1);
                m.p_left = (static_cast<double>(left_pos) + 1.0) / (left_total + 2.0);
                m.p_right = (static_cast<double>(parent_pos - left_pos) + 1.0) / (right_total + 2.0);
                m.left_label = m.p_left >= 0.5 ? ClassLabel::Positive : ClassLabel::Negative;
            }
        }
    }
    if (!found) throw Error(ErrorCode::DegenerateData, "no feature in the subset takes two distinct values");

    for (const auto* f : features) {
        if (auto st = column_stats(d, rows, *f)) {
            m.standardization.push_back(std::move(*st));
        } else {
            result.warnings.push_back("feature '" + f->name + "' is constant on the training rows");
        }
    }
    return result;
}

double LogRegProblem::loss(const std::vector<double>& w, double b) const {
    double total = 0.0;
    for (std::size_t i = 0; i < rows(); ++i) {
        double z = b;
        for (std::size_t j = 0; j < dims; ++j) z += w[j] * x[i * dims + j];
        // log(1 + e^z) - y z, evaluated without overflow
        const double softplus = std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0);
        total += softplus - y[i] * z;
    }
    double penalty = 0.0;
    for (double wj : w) penalty += wj * wj;
    return total / static_cast<double>(rows()) + l2 * penalty / 2.0;
}

std::vector<double> LogRegProblem::gradient(const std::vector<double>& w, double b) const {
    std::vector<double> g(dims + 1, 0.0);
    for (std::size_t i = 0; i < rows(); ++i) {
        double z = b;
        for (std::size_t j = 0; j < dims; ++j) z += w[j] * x[i * dims + j];
        const double residual = sigmoid(z) - y[i];
        for (std::size_t j = 0; j < dims; ++j) g[j] += residual * x[i * dims + j];
        g[dims] += residual;
    }
    const double n = static_cast<double>(rows());
    for (std::size_t j = 0; j < dims; ++j) g[j] = g[j] / n + l2 * w[j];
    g[dims] /= n;
    return g;
}

TrainingResult train_logreg(const Dataset& d, const std::vector<std::size_t>& rows, const LearnerSpec& spec) {
    const auto& hp = spec.hyperparams;
    if (!(hp.learning_rate > 0.0) || !std::isfinite(hp.learning_rate) || hp.epochs < 1 || !(hp.l2 >= 0.0) ||
        !std::isfinite(hp.l2)) {
        throw Error(ErrorCode::BadHyperparameters, "need learning_rate > 0, epochs >= 1, l2 >= 0");
    }
    const auto features = numeric_subset(d, spec.feature_subset);

    std::vector<std::size_t> complete;
    for (std::size_t r : rows) {
        const auto& s = d.samples().at(r);
        if (std::none_of(features.begin(), features.end(), [&](auto* f) { return is_missing(s.values[f->index]); })) {
            complete.push_back(r);
        }
    }
    require_both_classes(d, complete);

    TrainingResult result;
    auto& m = result.model;
    m.kind = ModelKind::LogReg;
    if (complete.size() < rows.size()) {
        result.warnings.push_back(std::to_string(rows.size() - complete.size()) +
                                  " training rows dropped for missing values");
    }
    std::vector<const FeatureDescriptor*> used;
    for (const auto* f : features) {
        if (auto st = column_stats(d, complete, *f)) {
            m.standardization.push_back(std::move(*st));
            m.features.push_back(f->name);
            used.push_back(f);
        } else {
            result.warnings.push_back("feature '" + f->name + "' is constant on the training rows and was dropped");
        }
    }
    if (used.empty()) throw Error(ErrorCode::DegenerateData, "every feature in the subset is constant");

    LogRegProblem problem;
    problem.dims = used.size();
    problem.l2 = hp.l2;
    problem.x.reserve(complete.size() * used.size());
    for (std::size_t r : complete) {
        const auto& s = d.samples()[r];
        for (std::size_t j = 0; j < used.size(); ++j) {
            const auto& st = m.standardization[j];
            problem.x.push_back((std::get<double>(s.values[used[j]->index]) - st.mean) / st.stddev);
        }
        problem.y.push_back(s.label == ClassLabel::Positive ? 1.0 : 0.0);
    }

    std::vector<double> w(problem.dims, 0.0);
    double b = 0.0;
    auto record = [&] {
        const double loss = problem.loss(w, b);
        if (!std::isfinite(loss)) {
            throw Error(ErrorCode::NonFiniteLoss, "training diverged; lower the learning rate");
        }
        result.loss_history.push_back(loss);
    };
    for (std::uint64_t epoch = 0; epoch < hp.epochs; ++epoch) {
        record();
        const auto g = problem.gradient(w, b);
        for (std::size_t j = 0; j < problem.dims; ++j) w[j] -= hp.learning_rate * g[j];
        b -= hp.learning_rate * g[problem.dims];
    }
    record();

    m.weights = std::move(w);
    m.bias = b;
    return result;
}

TrainingResult train_model(const Dataset& d, const std::vector<std::size_t>& rows, const LearnerSpec& spec) {
    if (spec.kind == ModelKind::Stump) return train_stump(d, rows, spec.feature_subset);
    return train_logreg(d, rows, spec);
}

LearnerSpec learner_spec_from_json(const nlohmann::json& j) {
    const JsonReader r(j);
    r.expect_object({"kind", "feature_subset", "hyperparams", "seed"});
    LearnerSpec spec;
    const auto kind = r.at("kind").string();
    if (kind == "stump") spec.kind = ModelKind::Stump;
    else if (kind == "logreg") spec.kind = ModelKind::LogReg;
    else r.at("kind").fail("unknown learner kind '" + kind + "'");
    const auto subset = r.at("feature_subset");
    for (std::size_t i = 0; i < subset.array_size(); ++i) spec.feature_subset.push_back(subset.at(i).string());
    if (r.has("hyperparams")) {
        const auto hp = r.at("hyperparams");
        hp.expect_object({"learning_rate", "epochs", "l2"});
        if (hp.has("learning_rate")) spec.hyperparams.learning_rate = hp.at("learning_rate").number();
        if (hp.has("epochs")) spec.hyperparams.epochs = hp.at("epochs").count();
        if (hp.has("l2")) spec.hyperparams.l2 = hp.at("l2").number();
    }
    if (r.has("seed")) spec.seed = r.at("seed").count();
    return spec;
}

nlohmann::json learner_spec_to_json(const LearnerSpec& spec) {
    return {{"kind", spec.kind == ModelKind::Stump ? "stump" : "logreg"},
            {"feature_subset", spec.feature_subset},
            {"hyperparams",
             {{"learning_rate", spec.hyperparams.learning_rate},
              {"epochs", spec.hyperparams.epochs},
              {"l2", spec.hyperparams.l2}}},
            {"seed", spec.seed}};
}

nlohmann::json training_result_to_json(const TrainingResult& r) {
    nlohmann::json j = {{"model", model_to_json(r.model)}, {"warnings", r.warnings}};
    if (!r.loss_history.empty()) j["loss_history"] = r.loss_history;
    return j;
}

}  // namespace branch
