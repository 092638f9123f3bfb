#include "branch/store.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "branch/error.hpp"
#include "branch/hash.hpp"
#include "branch/json_io.hpp"

namespace fs = std::filesystem;

namespace branch {

std::string_view visibility_name(Visibility v) noexcept { return v == Visibility::Public ? "public" : "private"; }

Visibility visibility_from_name(std::string_view name) {
    if (name == "public") return Visibility::Public;
    if (name == "private") return Visibility::Private;
    throw Error(ErrorCode::SchemaViolation, "visibility must be \"public\" or \"private\"");
}

std::string hash_token(std::string_view token) {
    const auto salt = random_hex(16);
    return "sha256$" + salt + "$" + sha256_hex(salt + std::string(token));
}

bool token_matches(std::string_view stored_hash, std::string_view token) {
    if (token.empty()) return false;
    const auto first = stored_hash.find('$');
    const auto second = stored_hash.find('$', first + 1);
    if (first == std::string_view::npos || second == std::string_view::npos) return false;
    const auto salt = stored_hash.substr(first + 1, second - first - 1);
    return sha256_hex(std::string(salt) + std::string(token)) == stored_hash.substr(second + 1);
}

TreeRecord LibraryStore::save_tree(DecisionTree t, std::string_view token, Visibility visibility) {
    if (!t.id.empty() && get_tree(t.id, token)) {
        auto id = t.id;
        return update_tree(id, std::move(t), token, visibility);
    }
    return create_tree(std::move(t), token, visibility);
}

struct DirectoryStore::State {
    std::map<std::string, std::shared_ptr<const TreeRecord>> trees;
    std::map<std::string, DatasetRecord> datasets;
    std::vector<std::string> dataset_order;
    std::map<std::string, CustomFeatureRecord> features;
    std::int64_t clock = 0;
};

namespace {

class SnapshotResolver final : public TreeResolver {
public:
    explicit SnapshotResolver(std::shared_ptr<const DirectoryStore::State> state) : state_(std::move(state)) {}

    std::shared_ptr<const DecisionTree> find(std::string_view id) const override;

private:
    std::shared_ptr<const DirectoryStore::State> state_;
};

std::shared_ptr<const DecisionTree> SnapshotResolver::find(std::string_view id) const {
    const auto it = state_->trees.find(std::string(id));
    if (it == state_->trees.end()) return nullptr;
    return std::shared_ptr<const DecisionTree>(it->second, &it->second->tree);
}

bool visible_to(const TreeRecord& r, std::string_view token) {
    return r.visibility == Visibility::Public || token_matches(r.owner_token_hash, token);
}

void require_token(std::string_view token) {
    if (token.size() < kMinTokenBytes) {
        throw Error(ErrorCode::Unauthorized, "writes need a bearer token of at least 16 bytes");
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::StoreIo, "cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file_atomic(const fs::path& path, const std::string& text) {
    const auto tmp = fs::path(path).concat(".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::StoreIo, "cannot write " + tmp.string());
        out << text;
        if (!out.flush()) throw Error(ErrorCode::StoreIo, "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::StoreIo, "cannot commit " + path.string() + ": " + ec.message());
}

nlohmann::json tree_record_document(const TreeRecord& r) {
    return {{"tree", tree_to_json_value(r.tree)},
            {"owner", r.owner_token_hash},
            {"visibility", visibility_name(r.visibility)},
            {"created_at", r.created_at},
            {"updated_at", r.updated_at}};
}

TreeRecord tree_record_from_document(const nlohmann::json& j) {
    const JsonReader r(j);
    r.expect_object({"tree", "owner", "visibility", "created_at", "updated_at"});
    TreeRecord rec;
    rec.tree = tree_from_json_value(j.at("tree"));
    rec.owner_token_hash = r.at("owner").string();
    rec.visibility = visibility_from_name(r.at("visibility").string());
    rec.created_at = r.at("created_at").integer();
    rec.updated_at = r.at("updated_at").integer();
    return rec;
}

nlohmann::json dataset_record_document(const DatasetRecord& r) {
    return {{"dataset", dataset_to_json(*r.dataset)},
            {"description", r.description},
            {"companion", r.companion_test_dataset_id ? nlohmann::json(*r.companion_test_dataset_id) : nullptr},
            {"is_companion", r.is_companion},
            {"created_at", r.created_at}};
}

DatasetRecord dataset_record_from_document(const nlohmann::json& j) {
    const JsonReader r(j);
    r.expect_object({"dataset", "description", "companion", "is_companion", "created_at"});
    DatasetRecord rec;
    rec.dataset = std::make_shared<const Dataset>(dataset_from_json(j.at("dataset")));
    rec.description = r.at("description").string();
    if (!j.at("companion").is_null()) rec.companion_test_dataset_id = r.at("companion").string();
    rec.is_companion = r.at("is_companion").boolean();
    rec.created_at = r.at("created_at").integer();
    return rec;
}

nlohmann::json feature_document(const CustomFeatureRecord& r) {
    return {{"id", r.id},
            {"dataset_signature", r.dataset_signature},
            {"name", r.definition.name},
            {"weights", r.definition.weights},
            {"offset", r.definition.offset},
            {"created_at", r.created_at}};
}

CustomFeatureRecord feature_from_document(const nlohmann::json& j) {
    const JsonReader r(j);
    r.expect_object({"id", "dataset_signature", "name", "weights", "offset", "created_at"});
    CustomFeatureRecord rec;
    rec.id = r.at("id").string();
    rec.dataset_signature = r.at("dataset_signature").string();
    rec.definition.name = r.at("name").string();
    const auto weights = r.at("weights");
    weights.expect_map();
    for (const auto& item : j.at("weights").items()) rec.definition.weights[item.key()] = weights.at(item.key()).number();
    rec.definition.offset = r.at("offset").number();
    rec.created_at = r.at("created_at").integer();
    return rec;
}

nlohmann::json index_document(const DirectoryStore::State& s) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& [id, rec] : s.trees) trees.push_back(id);
    nlohmann::json features = nlohmann::json::array();
    for (const auto& [id, rec] : s.features) features.push_back(id);
    return {{"version", 1}, {"clock", s.clock}, {"datasets", s.dataset_order}, {"trees", trees}, {"features", features}};
}

std::string fresh_id(const DirectoryStore::State& s) {
    for (;;) {
        auto id = random_hex(8);
        if (!s.trees.count(id) && !s.datasets.count(id) && !s.features.count(id)) return id;
    }
}

}  // namespace

DirectoryStore::DirectoryStore(fs::path root) : root_(std::move(root)) {
    auto state = std::make_shared<State>();
    try {
        fs::create_directories(root_ / "datasets");
        fs::create_directories(root_ / "trees");
        fs::create_directories(root_ / "features");
    } catch (const fs::filesystem_error& e) {
        throw Error(ErrorCode::StoreIo, std::string("cannot create store: ") + e.what());
    }
    const auto index_path = root_ / "index.json";
    if (fs::exists(index_path)) {
        try {
            const auto index = parse_json(read_file(index_path));
            state->clock = index.at("clock").get<std::int64_t>();
            for (const auto& id : index.at("datasets")) {
                const auto key = id.get<std::string>();
                state->datasets[key] = dataset_record_from_document(parse_json(read_file(root_ / "datasets" / (key + ".json"))));
                state->dataset_order.push_back(key);
            }
            for (const auto& id : index.at("trees")) {
                const auto key = id.get<std::string>();
                state->trees[key] = std::make_shared<const TreeRecord>(
                    tree_record_from_document(parse_json(read_file(root_ / "trees" / (key + ".json")))));
            }
            for (const auto& id : index.at("features")) {
                const auto key = id.get<std::string>();
                state->features[key] = feature_from_document(parse_json(read_file(root_ / "features" / (key + ".json"))));
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::StoreIo, std::string("corrupt store index: ") + e.what());
        } catch (const Error& e) {
            throw Error(ErrorCode::StoreIo, std::string("unreadable store: ") + e.what());
        }
    } else {
        write_file_atomic(index_path, canonical_dump(index_document(*state)));
    }
    state_ = std::move(state);
}

std::shared_ptr<const DirectoryStore::State> DirectoryStore::snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return state_;
}

void DirectoryStore::commit(std::shared_ptr<const State> next) {
    write_file_atomic(root_ / "index.json", canonical_dump(index_document(*next)));
    std::lock_guard lock(snapshot_mutex_);
    state_ = std::move(next);
}

std::int64_t DirectoryStore::tick(const State& s) const {
    const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    return std::max<std::int64_t>(now, s.clock + 1);
}

std::shared_ptr<const TreeResolver> DirectoryStore::resolver() const {
    return std::make_shared<SnapshotResolver>(snapshot());
}

void DirectoryStore::check_tree(const State& s, const DecisionTree& t, std::string_view token) const {
    if (!t.root) throw Error(ErrorCode::ValidationFailed, "tree has no root");
    const Dataset* dataset = nullptr;
    for (const auto& id : s.dataset_order) {
        if (s.datasets.at(id).dataset->signature() == t.dataset_signature) {
            dataset = s.datasets.at(id).dataset.get();
            break;
        }
    }
    if (dataset == nullptr) {
        throw Error(ErrorCode::SignatureMismatch, "no dataset in the library has signature " + t.dataset_signature);
    }
    for (const auto& ref : direct_tree_refs(t)) {
        if (ref == t.id) continue;
        const auto it = s.trees.find(ref);
        if (it == s.trees.end() || !visible_to(*it->second, token)) {
            throw Error(ErrorCode::UnresolvableTreeRef, "referenced tree not found: " + ref);
        }
    }
    const SnapshotResolver base(std::shared_ptr<const State>(&s, [](const State*) {}));
    const OverlayResolver lib(base, std::make_shared<const DecisionTree>(t));
    const auto issues = validate_tree(t, dataset->schema(), lib);
    if (issues.empty()) return;
    std::string message;
    for (const auto& issue : issues) {
        if (!message.empty()) message += "; ";
        message += std::string(error_code_name(issue.code)) + ": " + issue.message;
    }
    const bool cyclic = std::any_of(issues.begin(), issues.end(),
                                    [](const ValidationIssue& i) { return i.code == ErrorCode::CyclicReference; });
    throw Error(cyclic ? ErrorCode::CyclicReference : ErrorCode::ValidationFailed, message);
}

TreeRecord DirectoryStore::create_tree(DecisionTree t, std::string_view token, Visibility visibility) {
    require_token(token);
    std::lock_guard writer(write_mutex_);
    auto current = snapshot();
    if (!t.id.empty() && current->trees.count(t.id)) t.id.clear();
    check_tree(*current, t, token);

    auto next = std::make_shared<State>(*current);
    TreeRecord rec;
    rec.tree = std::move(t);
    rec.tree.id = fresh_id(*next);
    rec.owner_token_hash = hash_token(token);
    rec.visibility = visibility;
    rec.created_at = rec.updated_at = next->clock = tick(*next);
    rec.tree.created = rec.created_at;
    rec.tree.modified = rec.updated_at;
    write_file_atomic(root_ / "trees" / (rec.tree.id + ".json"), canonical_dump(tree_record_document(rec)));
    next->trees[rec.tree.id] = std::make_shared<const TreeRecord>(rec);
    commit(std::move(next));
    return rec;
}

TreeRecord DirectoryStore::update_tree(const std::string& id, DecisionTree t, std::string_view token,
                                       Visibility visibility) {
    require_token(token);
    std::lock_guard writer(write_mutex_);
    auto current = snapshot();
    const auto it = current->trees.find(id);
    if (it == current->trees.end() || !visible_to(*it->second, token)) {
        throw Error(ErrorCode::NotFound, "no tree with id " + id);
    }
    const auto& existing = *it->second;
    if (!token_matches(existing.owner_token_hash, token)) throw Error(ErrorCode::NotOwner, "tree " + id + " belongs to another owner");

    t.id = id;
    if (t.dataset_signature != existing.tree.dataset_signature) {
        for (const auto& [other_id, other] : current->trees) {
            const auto refs = direct_tree_refs(other->tree);
            if (other_id != id && std::find(refs.begin(), refs.end(), id) != refs.end()) {
                throw Error(ErrorCode::SignatureMismatch, "tree " + id + " is referenced by " + other_id +
                                                              " and cannot change dataset signature");
            }
        }
    }
    check_tree(*current, t, token);

    auto next = std::make_shared<State>(*current);
    TreeRecord rec = existing;
    rec.tree = std::move(t);
    rec.visibility = visibility;
    rec.updated_at = next->clock = tick(*next);
    rec.tree.created = rec.created_at;
    rec.tree.modified = rec.updated_at;
    write_file_atomic(root_ / "trees" / (id + ".json"), canonical_dump(tree_record_document(rec)));
    next->trees[id] = std::make_shared<const TreeRecord>(rec);
    commit(std::move(next));
    return rec;
}

void DirectoryStore::delete_tree(const std::string& id, std::string_view token) {
    require_token(token);
    std::lock_guard writer(write_mutex_);
    auto current = snapshot();
    const auto it = current->trees.find(id);
    if (it == current->trees.end() || !visible_to(*it->second, token)) {
        throw Error(ErrorCode::NotFound, "no tree with id " + id);
    }
    if (!token_matches(it->second->owner_token_hash, token)) throw Error(ErrorCode::NotOwner, "tree " + id + " belongs to another owner");
    for (const auto& [other_id, other] : current->trees) {
        const auto refs = direct_tree_refs(other->tree);
        if (other_id != id && std::find(refs.begin(), refs.end(), id) != refs.end()) {
            throw Error(ErrorCode::InUse, "tree " + id + " is referenced by " + other_id);
        }
    }
    auto next = std::make_shared<State>(*current);
    next->trees.erase(id);
    next->clock = tick(*next);
    commit(std::move(next));
    std::error_code ec;
    fs::remove(root_ / "trees" / (id + ".json"), ec);
}

std::optional<TreeRecord> DirectoryStore::get_tree(const std::string& id, std::string_view token) const {
    const auto s = snapshot();
    const auto it = s->trees.find(id);
    if (it == s->trees.end() || !visible_to(*it->second, token)) return std::nullopt;
    return *it->second;
}

std::vector<TreeRecord> DirectoryStore::list_trees(std::string_view token,
                                                   const std::optional<std::string>& signature) const {
    const auto s = snapshot();
    std::vector<TreeRecord> out;
    for (const auto& [id, rec] : s->trees) {
        if (!visible_to(*rec, token)) continue;
        if (signature && rec->tree.dataset_signature != *signature) continue;
        out.push_back(*rec);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const TreeRecord& a, const TreeRecord& b) { return a.updated_at > b.updated_at; });
    return out;
}

DatasetRecord DirectoryStore::import_dataset(const ImportRequest& request) {
    auto train = parse_csv(request.csv, request.class_column, request.positive_name);
    std::optional<Dataset> test;
    if (request.companion_csv) {
        test = parse_csv(*request.companion_csv, request.class_column, request.positive_name);
        if (test->signature() != train.signature()) {
            throw Error(ErrorCode::SignatureMismatch, "companion test dataset has different columns or classes");
        }
    }

    std::lock_guard writer(write_mutex_);
    auto next = std::make_shared<State>(*snapshot());
    const auto stamp = next->clock = tick(*next);
    const auto name = request.name.empty() ? "dataset-" + std::to_string(next->dataset_order.size() + 1) : request.name;

    DatasetRecord rec;
    const auto id = fresh_id(*next);
    rec.dataset = std::make_shared<const Dataset>(train.with_identity(id, name));
    rec.description = request.description;
    rec.created_at = stamp;
    if (test) {
        DatasetRecord companion;
        // Reserve `id` first so the companion cannot draw it.
        next->datasets[id] = rec;
        const auto test_id = fresh_id(*next);
        companion.dataset = std::make_shared<const Dataset>(test->with_identity(test_id, name + " (test)"));
        companion.description = "test set for " + id;
        companion.is_companion = true;
        companion.created_at = stamp;
        rec.companion_test_dataset_id = test_id;
        write_file_atomic(root_ / "datasets" / (test_id + ".json"), canonical_dump(dataset_record_document(companion)));
        next->datasets[test_id] = std::move(companion);
        next->dataset_order.push_back(id);
        next->dataset_order.push_back(test_id);
    } else {
        next->dataset_order.push_back(id);
    }
    write_file_atomic(root_ / "datasets" / (id + ".json"), canonical_dump(dataset_record_document(rec)));
    next->datasets[id] = rec;
    commit(std::move(next));
    return rec;
}

std::optional<DatasetRecord> DirectoryStore::get_dataset(const std::string& id) const {
    const auto s = snapshot();
    const auto it = s->datasets.find(id);
    if (it == s->datasets.end()) return std::nullopt;
    return it->second;
}

std::vector<DatasetRecord> DirectoryStore::list_datasets() const {
    const auto s = snapshot();
    std::vector<DatasetRecord> out;
    for (const auto& id : s->dataset_order) out.push_back(s->datasets.at(id));
    return out;
}

CustomFeatureRecord DirectoryStore::save_custom_feature(const std::string& dataset_signature, CustomFeatureDef def,
                                                        std::string_view token) {
    require_token(token);
    if (def.name.empty()) throw Error(ErrorCode::ValidationFailed, "custom feature needs a name");
    if (def.weights.empty()) throw Error(ErrorCode::ValidationFailed, "custom feature needs at least one weight");
    std::lock_guard writer(write_mutex_);
    auto next = std::make_shared<State>(*snapshot());
    const Schema* schema = nullptr;
    for (const auto& id : next->dataset_order) {
        if (next->datasets.at(id).dataset->signature() == dataset_signature) {
            schema = &next->datasets.at(id).dataset->schema();
            break;
        }
    }
    if (schema == nullptr) throw Error(ErrorCode::SignatureMismatch, "no dataset with signature " + dataset_signature);
    for (const auto& [name, w] : def.weights) {
        const auto* f = schema->find(name);
        if (f == nullptr) throw Error(ErrorCode::UnknownFeature, "unknown feature: " + name);
        if (f->kind != FeatureKind::Numeric) throw Error(ErrorCode::KindMismatch, "feature is not numeric: " + name);
    }

    CustomFeatureRecord rec;
    rec.id = fresh_id(*next);
    rec.dataset_signature = dataset_signature;
    rec.definition = std::move(def);
    rec.created_at = next->clock = tick(*next);
    write_file_atomic(root_ / "features" / (rec.id + ".json"), canonical_dump(feature_document(rec)));
    next->features[rec.id] = rec;
    commit(std::move(next));
    return rec;
}

std::vector<CustomFeatureRecord> DirectoryStore::list_custom_features(const std::optional<std::string>& signature) const {
    const auto s = snapshot();
    std::vector<CustomFeatureRecord> out;
    for (const auto& [id, rec] : s->features) {
        if (!signature || rec.dataset_signature == *signature) out.push_back(rec);
    }
    return out;
}

std::string DirectoryStore::canonical_dump_all() const {
    const auto s = snapshot();
    nlohmann::json all = {{"index", index_document(*s)}};
    for (const auto& [id, rec] : s->datasets) all["datasets"][id] = dataset_record_document(rec);
    for (const auto& [id, rec] : s->trees) all["trees"][id] = tree_record_document(*rec);
    for (const auto& [id, rec] : s->features) all["features"][id] = feature_document(rec);
    return canonical_dump(all);
}

nlohmann::json tree_record_to_json(const TreeRecord& r, std::string_view token) {
    return {{"tree", tree_to_json_value(r.tree)},
            {"visibility", visibility_name(r.visibility)},
            {"created_at", r.created_at},
            {"updated_at", r.updated_at},
            {"owned", token_matches(r.owner_token_hash, token)}};
}

nlohmann::json dataset_record_summary(const DatasetRecord& r) {
    const auto& d = *r.dataset;
    return {{"id", d.id()},
            {"name", d.name()},
            {"feature_count", d.features().size()},
            {"sample_count", d.size()},
            {"class", {{"positive", d.classes().positive}, {"negative", d.classes().negative}}},
            {"signature", d.signature()},
            {"description", r.description},
            {"companion", r.companion_test_dataset_id ? nlohmann::json(*r.companion_test_dataset_id) : nullptr},
            {"is_companion", r.is_companion}};
}

nlohmann::json custom_feature_record_to_json(const CustomFeatureRecord& r) { return feature_document(r); }

}  // namespace branch
