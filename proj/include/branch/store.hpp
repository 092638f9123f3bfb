#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "branch/dataset.hpp"
#include "branch/tree.hpp"

namespace branch {

enum class Visibility { Public, Private };

std::string_view visibility_name(Visibility v) noexcept;
Visibility visibility_from_name(std::string_view name);

struct TreeRecord {
    DecisionTree tree;
    std::string owner_token_hash;  // "sha256$<salt>$<digest>"
    Visibility visibility = Visibility::Public;
    std::int64_t created_at = 0;
    std::int64_t updated_at = 0;
};

struct DatasetRecord {
    std::shared_ptr<const Dataset> dataset;
    std::string description;
    std::optional<std::string> companion_test_dataset_id;
    bool is_companion = false;
    std::int64_t created_at = 0;
};

struct CustomFeatureRecord {
    std::string id;
    std::string dataset_signature;
    CustomFeatureDef definition;
    std::int64_t created_at = 0;
};

struct ImportRequest {
    std::string csv;
    std::string class_column;
    std::string positive_name;
    std::optional<std::string> companion_csv;
    std::string name;
    std::string description;
};

// Bearer tokens shorter than this are rejected for writes.
inline constexpr std::size_t kMinTokenBytes = 16;

std::string hash_token(std::string_view token);
bool token_matches(std::string_view stored_hash, std::string_view token);

// Shared library of datasets, trees, and custom feature definitions.
// An empty token means an anonymous caller: public reads only.
class LibraryStore {
public:
    virtual ~LibraryStore() = default;

    virtual TreeRecord create_tree(DecisionTree t, std::string_view token, Visibility visibility) = 0;
    virtual TreeRecord update_tree(const std::string& id, DecisionTree t, std::string_view token,
                                   Visibility visibility) = 0;
    // Creates when `t.id` is empty or unknown, otherwise updates.
    TreeRecord save_tree(DecisionTree t, std::string_view token, Visibility visibility);
    virtual void delete_tree(const std::string& id, std::string_view token) = 0;
    virtual std::optional<TreeRecord> get_tree(const std::string& id, std::string_view token) const = 0;
    virtual std::vector<TreeRecord> list_trees(std::string_view token,
                                               const std::optional<std::string>& signature) const = 0;

    virtual DatasetRecord import_dataset(const ImportRequest& request) = 0;
    virtual std::optional<DatasetRecord> get_dataset(const std::string& id) const = 0;
    // Import order.
    virtual std::vector<DatasetRecord> list_datasets() const = 0;

    virtual CustomFeatureRecord save_custom_feature(const std::string& dataset_signature, CustomFeatureDef def,
                                                    std::string_view token) = 0;
    virtual std::vector<CustomFeatureRecord> list_custom_features(const std::optional<std::string>& signature) const = 0;

    // Read-only view of every stored tree, consistent as of the call.
    virtual std::shared_ptr<const TreeResolver> resolver() const = 0;
};

// Directory of canonical JSON documents:
//   datasets/<id>.json, trees/<id>.json, features/<id>.json, index.json
// Each write lands its document first and then rewrites index.json, which is
// the commit point; documents not named by the index are ignored on open.
class DirectoryStore final : public LibraryStore {
public:
    explicit DirectoryStore(std::filesystem::path root);

    TreeRecord create_tree(DecisionTree t, std::string_view token, Visibility visibility) override;
    TreeRecord update_tree(const std::string& id, DecisionTree t, std::string_view token,
                           Visibility visibility) override;
    void delete_tree(const std::string& id, std::string_view token) override;
    std::optional<TreeRecord> get_tree(const std::string& id, std::string_view token) const override;
    std::vector<TreeRecord> list_trees(std::string_view token, const std::optional<std::string>& signature) const override;

    DatasetRecord import_dataset(const ImportRequest& request) override;
    std::optional<DatasetRecord> get_dataset(const std::string& id) const override;
    std::vector<DatasetRecord> list_datasets() const override;

    CustomFeatureRecord save_custom_feature(const std::string& dataset_signature, CustomFeatureDef def,
                                            std::string_view token) override;
    std::vector<CustomFeatureRecord> list_custom_features(const std::optional<std::string>& signature) const override;

    std::shared_ptr<const TreeResolver> resolver() const override;

    const std::filesystem::path& root() const noexcept { return root_; }

    // Every record as canonical JSON, in a fixed order. Two stores holding
    // the same records produce identical text.
    std::string canonical_dump_all() const;

    struct State;

private:
    std::shared_ptr<const State> snapshot() const;
    void commit(std::shared_ptr<const State> next);
    std::int64_t tick(const State& s) const;
    void check_tree(const State& s, const DecisionTree& t, std::string_view token) const;

    std::filesystem::path root_;
    mutable std::mutex snapshot_mutex_;
    std::mutex write_mutex_;
    std::shared_ptr<const State> state_;
};

nlohmann::json tree_record_to_json(const TreeRecord& r, std::string_view token);
nlohmann::json dataset_record_summary(const DatasetRecord& r);
nlohmann::json custom_feature_record_to_json(const CustomFeatureRecord& r);

}  // namespace branch
