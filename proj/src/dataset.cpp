#include "branch/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

#include "branch/error.hpp"
#include "branch/hash.hpp"
#include "branch/random.hpp"

namespace branch {

std::string_view feature_kind_name(FeatureKind kind) noexcept {
    return kind == FeatureKind::Numeric ? "numeric" : "categorical";
}

std::string_view class_label_name(ClassLabel label) noexcept {
    return label == ClassLabel::Positive ? "positive" : "negative";
}

const FeatureDescriptor* Schema::find(std::string_view name) const noexcept {
    for (const auto& f : features) {
        if (f.name == name) return &f;
    }
    return nullptr;
}

std::string compute_signature(const std::vector<FeatureDescriptor>& features, const ClassNames& classes) {
    std::vector<const FeatureDescriptor*> sorted;
    sorted.reserve(features.size());
    for (const auto& f : features) sorted.push_back(&f);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->name < b->name; });

    std::string canonical;
    for (const auto* f : sorted) {
        canonical += "feature\t";
        canonical += f->name;
        canonical += '\t';
        canonical += feature_kind_name(f->kind);
        canonical += '\n';
    }
    canonical += "class\t" + classes.positive + '\t' + classes.negative + '\n';
    return sha256_hex(canonical);
}

Dataset::Dataset(std::string id, std::string name, std::vector<FeatureDescriptor> features,
                 std::vector<Sample> samples, ClassNames classes)
    : id_(std::move(id)), name_(std::move(name)), samples_(std::move(samples)) {
    if (features.empty()) throw Error(ErrorCode::EmptyDataset, "dataset has no feature columns");
    if (samples_.empty()) throw Error(ErrorCode::EmptyDataset, "dataset has no samples");
    if (classes.positive == classes.negative) {
        throw Error(ErrorCode::BadClassColumn, "class names must be distinct");
    }

    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < features.size(); ++i) {
        auto& f = features[i];
        f.index = i;
        if (f.name.empty()) throw Error(ErrorCode::MalformedCsv, "empty feature name");
        if (!seen.insert(f.name).second) throw Error(ErrorCode::MalformedCsv, "duplicate feature name: " + f.name);
        if (f.kind == FeatureKind::Numeric && !f.categories.empty()) {
            throw Error(ErrorCode::KindMismatch, "numeric feature with categories: " + f.name);
        }
        if (f.kind == FeatureKind::Categorical) {
            std::sort(f.categories.begin(), f.categories.end());
            f.categories.erase(std::unique(f.categories.begin(), f.categories.end()), f.categories.end());
            if (f.categories.empty()) {
                throw Error(ErrorCode::KindMismatch, "categorical feature without categories: " + f.name);
            }
        }
    }

    for (const auto& s : samples_) {
        if (s.values.size() != features.size()) {
            throw Error(ErrorCode::MalformedCsv, "sample width does not match feature count");
        }
        for (std::size_t i = 0; i < features.size(); ++i) {
            const auto& v = s.values[i];
            if (is_missing(v)) continue;
            const auto& f = features[i];
            if (f.kind == FeatureKind::Numeric) {
                if (!std::holds_alternative<double>(v) || !std::isfinite(std::get<double>(v))) {
                    throw Error(ErrorCode::KindMismatch, "non-numeric value in numeric feature " + f.name);
                }
            } else {
                const auto* str = std::get_if<std::string>(&v);
                if (str == nullptr || !std::binary_search(f.categories.begin(), f.categories.end(), *str)) {
                    throw Error(ErrorCode::KindMismatch, "value outside category set of " + f.name);
                }
            }
        }
    }

    schema_.hash = compute_signature(features, classes);
    schema_.features = std::move(features);
    schema_.classes = std::move(classes);
}

std::size_t Dataset::count(ClassLabel label) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(samples_.begin(), samples_.end(), [label](const Sample& s) { return s.label == label; }));
}

Dataset Dataset::with_identity(std::string id, std::string name) const {
    Dataset copy = *this;
    copy.id_ = std::move(id);
    copy.name_ = std::move(name);
    return copy;
}

namespace {

using Row = std::vector<std::string>;

std::vector<Row> split_records(std::string_view text) {
    std::vector<Row> rows;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    bool row_has_content = false;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
    };
    auto end_row = [&] {
        end_field();
        if (row_has_content) rows.push_back(std::move(row));
        row.clear();
        row_has_content = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty() || field_was_quoted) {
                    throw Error(ErrorCode::MalformedCsv, "stray quote inside unquoted field");
                }
                in_quotes = true;
                field_was_quoted = true;
                row_has_content = true;
                break;
            case ',':
                end_field();
                row_has_content = true;
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
                end_row();
                break;
            case '\n':
                end_row();
                break;
            default:
                if (field_was_quoted) throw Error(ErrorCode::MalformedCsv, "text after closing quote");
                field.push_back(c);
                row_has_content = true;
        }
    }
    if (in_quotes) throw Error(ErrorCode::MalformedCsv, "unterminated quoted field");
    end_row();
    return rows;
}

bool is_missing_token(std::string_view cell) noexcept { return cell.empty() || cell == "NA"; }

std::optional<double> parse_number(std::string_view cell) noexcept {
    double value = 0.0;
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::general);
    if (ec != std::errc{} || ptr != last || !std::isfinite(value)) return std::nullopt;
    return value;
}

std::string format_number(double v) {
    char buffer[64];
    auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), v);
    return std::string(buffer, ptr);
}

std::string quote_if_needed(std::string_view cell) {
    if (cell.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(cell);
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

Dataset parse_csv(std::string_view text, std::string_view class_column, std::string_view positive_name) {
    if (text.empty()) throw Error(ErrorCode::EmptyDataset, "empty CSV text");
    auto rows = split_records(text);
    if (rows.empty()) throw Error(ErrorCode::EmptyDataset, "CSV has no header");

    const Row& header = rows.front();
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != header.size()) {
            throw Error(ErrorCode::MalformedCsv, "row " + std::to_string(r + 1) + " has " +
                                                     std::to_string(rows[r].size()) + " fields, header has " +
                                                     std::to_string(header.size()));
        }
    }
    if (rows.size() < 2) throw Error(ErrorCode::EmptyDataset, "CSV has no data rows");

    const auto class_it = std::find(header.begin(), header.end(), class_column);
    if (class_it == header.end()) {
        throw Error(ErrorCode::BadClassColumn, "class column not in header: " + std::string(class_column));
    }
    const auto class_index = static_cast<std::size_t>(class_it - header.begin());

    std::set<std::string> class_values;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& cell = rows[r][class_index];
        if (is_missing_token(cell)) {
            throw Error(ErrorCode::BadClassColumn, "missing class value in row " + std::to_string(r + 1));
        }
        class_values.insert(cell);
    }
    if (class_values.size() != 2 || class_values.count(std::string(positive_name)) == 0) {
        throw Error(ErrorCode::BadClassColumn,
                    "class column must hold exactly two values including '" + std::string(positive_name) + "'");
    }
    ClassNames classes;
    classes.positive = std::string(positive_name);
    for (const auto& v : class_values) {
        if (v != positive_name) classes.negative = v;
    }

    std::vector<std::size_t> columns;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c != class_index) columns.push_back(c);
    }
    if (columns.empty()) throw Error(ErrorCode::EmptyDataset, "CSV has no feature columns");

    std::vector<FeatureDescriptor> features;
    features.reserve(columns.size());
    for (std::size_t c : columns) {
        FeatureDescriptor f;
        f.name = header[c];
        f.kind = FeatureKind::Numeric;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto& cell = rows[r][c];
            if (!is_missing_token(cell) && !parse_number(cell)) {
                f.kind = FeatureKind::Categorical;
                break;
            }
        }
        if (f.kind == FeatureKind::Categorical) {
            std::set<std::string> cats;
            for (std::size_t r = 1; r < rows.size(); ++r) {
                if (!is_missing_token(rows[r][c])) cats.insert(rows[r][c]);
            }
            f.categories.assign(cats.begin(), cats.end());
        }
        features.push_back(std::move(f));
    }

    std::vector<Sample> samples;
    samples.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        Sample s;
        s.values.reserve(columns.size());
        for (std::size_t k = 0; k < columns.size(); ++k) {
            const auto& cell = rows[r][columns[k]];
            if (is_missing_token(cell)) {
                s.values.emplace_back(Missing{});
            } else if (features[k].kind == FeatureKind::Numeric) {
                s.values.emplace_back(*parse_number(cell));
            } else {
                s.values.emplace_back(cell);
            }
        }
        s.label = rows[r][class_index] == positive_name ? ClassLabel::Positive : ClassLabel::Negative;
        samples.push_back(std::move(s));
    }

    return Dataset({}, {}, std::move(features), std::move(samples), std::move(classes));
}

std::string to_csv(const Dataset& d, std::string_view class_column) {
    std::string out;
    for (const auto& f : d.features()) {
        out += quote_if_needed(f.name);
        out += ',';
    }
    out += quote_if_needed(class_column);
    out += '\n';
    for (const auto& s : d.samples()) {
        for (const auto& v : s.values) {
            if (const auto* num = std::get_if<double>(&v)) {
                out += format_number(*num);
            } else if (const auto* str = std::get_if<std::string>(&v)) {
                out += quote_if_needed(*str);
            }
            out += ',';
        }
        out += quote_if_needed(s.label == ClassLabel::Positive ? d.classes().positive : d.classes().negative);
        out += '\n';
    }
    return out;
}

DataPartition percentage_split(const Dataset& d, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw Error(ErrorCode::BadFraction, "fraction must lie strictly between 0 and 1");
    }
    DataPartition part;
    part.seed = seed;
    part.fraction = fraction;

    SplitMix64 rng(seed);
    for (ClassLabel label : {ClassLabel::Positive, ClassLabel::Negative}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (d.samples()[i].label == label) members.push_back(i);
        }
        const std::size_t n = members.size();
        if (n == 0) throw Error(ErrorCode::TooFewSamples, "class without samples cannot be split");

        auto take = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
        if (n >= 2) {
            take = std::clamp<std::size_t>(take, 1, n - 1);
        } else {
            take = 1;
            part.too_few_samples = true;
        }

        fisher_yates_shuffle(std::span<std::size_t>(members), rng);
        part.train.insert(part.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
        part.test.insert(part.test.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
    }
    std::sort(part.train.begin(), part.train.end());
    std::sort(part.test.begin(), part.test.end());
    return part;
}

std::vector<FeatureDescriptor> search_features(const Dataset& d, std::string_view query) {
    auto lower = [](std::string_view s) {
        std::string out(s);
        std::transform(out.begin(), out.end(), out.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return out;
    };
    const std::string needle = lower(query);

    std::vector<std::pair<std::size_t, const FeatureDescriptor*>> hits;
    for (const auto& f : d.features()) {
        const auto pos = lower(f.name).find(needle);
        if (pos != std::string::npos) hits.emplace_back(pos, &f);
    }
    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second->name < b.second->name;
    });

    std::vector<FeatureDescriptor> out;
    out.reserve(hits.size());
    for (const auto& [pos, f] : hits) out.push_back(*f);
    return out;
}

nlohmann::json feature_to_json(const FeatureDescriptor& f) {
    return {{"name", f.name}, {"kind", feature_kind_name(f.kind)}, {"categories", f.categories}};
}

nlohmann::json dataset_to_json(const Dataset& d) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& f : d.features()) features.push_back(feature_to_json(f));

    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : d.samples()) {
        nlohmann::json row = nlohmann::json::array();
        for (const auto& v : s.values) {
            if (const auto* num = std::get_if<double>(&v)) {
                row.push_back(*num);
            } else if (const auto* str = std::get_if<std::string>(&v)) {
                row.push_back(*str);
            } else {
                row.push_back(nullptr);
            }
        }
        row.push_back(s.label == ClassLabel::Positive ? d.classes().positive : d.classes().negative);
        rows.push_back(std::move(row));
    }

    return {{"id", d.id()},
            {"name", d.name()},
            {"features", std::move(features)},
            {"class", {{"positive", d.classes().positive}, {"negative", d.classes().negative}}},
            {"rows", std::move(rows)}};
}

Dataset dataset_from_json(const nlohmann::json& j) {
    try {
        ClassNames classes{j.at("class").at("positive").get<std::string>(),
                           j.at("class").at("negative").get<std::string>()};
        std::vector<FeatureDescriptor> features;
        for (const auto& fj : j.at("features")) {
            FeatureDescriptor f;
            f.name = fj.at("name").get<std::string>();
            const auto kind = fj.at("kind").get<std::string>();
            if (kind == "numeric") {
                f.kind = FeatureKind::Numeric;
            } else if (kind == "categorical") {
                f.kind = FeatureKind::Categorical;
            } else {
                throw Error(ErrorCode::SchemaViolation, "unknown feature kind: " + kind);
            }
            f.categories = fj.at("categories").get<std::vector<std::string>>();
            features.push_back(std::move(f));
        }

        std::vector<Sample> samples;
        for (const auto& rj : j.at("rows")) {
            if (!rj.is_array() || rj.size() != features.size() + 1) {
                throw Error(ErrorCode::SchemaViolation, "dataset row width mismatch");
            }
            Sample s;
            for (std::size_t i = 0; i < features.size(); ++i) {
                const auto& cell = rj[i];
                if (cell.is_null()) {
                    s.values.emplace_back(Missing{});
                } else if (cell.is_number()) {
                    s.values.emplace_back(cell.get<double>());
                } else {
                    s.values.emplace_back(cell.get<std::string>());
                }
            }
            const auto label = rj.back().get<std::string>();
            if (label == classes.positive) {
                s.label = ClassLabel::Positive;
            } else if (label == classes.negative) {
                s.label = ClassLabel::Negative;
            } else {
                throw Error(ErrorCode::BadClassColumn, "unknown class label: " + label);
            }
            samples.push_back(std::move(s));
        }
        return Dataset(j.at("id").get<std::string>(), j.at("name").get<std::string>(), std::move(features),
                       std::move(samples), std::move(classes));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("malformed dataset document: ") + e.what());
    }
}

std::string demo_csv() {
    return "PSRC1,AURKA,TOP2A,grade,outcome\n"
           "2.1,7.9,3.2,high,relapse\n"
           "1.8,8.4,2.9,high,relapse\n"
           "2.6,6.8,4.1,mid,relapse\n"
           "3.0,7.2,NA,high,relapse\n"
           "1.2,9.1,3.8,mid,relapse\n"
           "2.9,5.9,3.5,low,relapse\n"
           "4.4,6.1,2.2,high,relapse\n"
           "5.6,4.2,5.0,low,no_relapse\n"
           "6.1,3.9,4.6,low,no_relapse\n"
           "5.2,5.0,5.3,mid,no_relapse\n";
}

}  // namespace branch
