#include "branch/service.hpp"

#include <algorithm>
#include <cmath>
#include <csignal>
#include <iostream>

#include <httplib.h>

#include "branch/evaluation.hpp"
#include "branch/json_io.hpp"
#include "branch/learners.hpp"

namespace branch {

int http_status_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MalformedCsv:
        case ErrorCode::BadClassColumn:
        case ErrorCode::EmptyDataset:
        case ErrorCode::BadFraction:
        case ErrorCode::TooFewSamples:
        case ErrorCode::SchemaViolation:
        case ErrorCode::BadHyperparameters:
        case ErrorCode::BadRequest:
            return 400;
        case ErrorCode::Unauthorized:
            return 401;
        case ErrorCode::NotOwner:
            return 403;
        case ErrorCode::NotFound:
            return 404;
        case ErrorCode::InUse:
            return 409;
        case ErrorCode::UnknownFeature:
        case ErrorCode::KindMismatch:
        case ErrorCode::SignatureMismatch:
        case ErrorCode::CyclicReference:
        case ErrorCode::UnresolvableTreeRef:
        case ErrorCode::InvalidRule:
        case ErrorCode::InvalidLeaf:
        case ErrorCode::ValidationFailed:
        case ErrorCode::DegenerateData:
        case ErrorCode::NonFiniteLoss:
        case ErrorCode::OneClassOnly:
            return 422;
        case ErrorCode::StoreIo:
            return 500;
    }
    return 500;
}

ApiError to_api_error(const Error& e) {
    return {http_status_for(e.code()), std::string(error_code_name(e.code())), e.what(), e.location()};
}

nlohmann::json api_error_to_json(const ApiError& e) {
    nlohmann::json body = {{"code", e.code}, {"message", e.message}};
    if (!e.location.empty()) body["location"] = e.location;
    return {{"error", std::move(body)}};
}

namespace {

constexpr const char* kJson = "application/json";

constexpr const char* kPlaceholderPage =
    "<!doctype html><html><head><title>Branch</title></head><body>"
    "<p>The Branch API is running under <code>/api</code>. No web UI bundle is installed; "
    "start the server with <code>--assets &lt;dir&gt;</code> to serve one.</p></body></html>\n";

std::string bearer_token(const httplib::Request& req) {
    const auto header = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (header.size() > prefix.size() && header.compare(0, prefix.size(), prefix) == 0) {
        return header.substr(prefix.size());
    }
    return {};
}

void require_writer(const std::string& token) {
    if (token.size() < kMinTokenBytes) {
        throw Error(ErrorCode::Unauthorized, "this request needs an Authorization: Bearer token (>= 16 bytes)");
    }
}

void send(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(canonical_dump(body), kJson);
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler inner) {
    return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
        try {
            inner(req, res);
        } catch (const Error& e) {
            const auto api = to_api_error(e);
            send(res, api.http_status, api_error_to_json(api));
        } catch (const nlohmann::json::exception& e) {
            const ApiError api{400, std::string(error_code_name(ErrorCode::SchemaViolation)), e.what(), "$"};
            send(res, api.http_status, api_error_to_json(api));
        } catch (const std::exception& e) {
            send(res, 500, api_error_to_json({500, "Internal", e.what(), {}}));
        }
    };
}

nlohmann::json body_json(const httplib::Request& req) {
    if (req.body.empty()) throw Error(ErrorCode::BadRequest, "request body is empty");
    return parse_json(req.body);
}

DatasetRecord require_dataset(const LibraryStore& store, const std::string& id) {
    auto rec = store.get_dataset(id);
    if (!rec) throw Error(ErrorCode::NotFound, "no dataset with id " + id);
    return *rec;
}

TreeRecord require_tree(const LibraryStore& store, const std::string& id, const std::string& token) {
    auto rec = store.get_tree(id, token);
    if (!rec) throw Error(ErrorCode::NotFound, "no tree with id " + id);
    return *rec;
}

// First non-companion dataset (in import order) with the given signature.
DatasetRecord dataset_for_signature(const LibraryStore& store, const std::string& signature) {
    for (const auto& rec : store.list_datasets()) {
        if (!rec.is_companion && rec.dataset->signature() == signature) return rec;
    }
    for (const auto& rec : store.list_datasets()) {
        if (rec.dataset->signature() == signature) return rec;
    }
    throw Error(ErrorCode::NotFound, "no dataset in the library matches signature " + signature);
}

struct EvalTarget {
    DatasetRecord dataset;
    EvalMode mode;
    std::shared_ptr<const Dataset> test_set;
};

// Pulls {dataset?, mode} out of a request body; a body that is itself a mode
// object is accepted as the mode.
EvalTarget resolve_target(const LibraryStore& store, const nlohmann::json& body, const std::string& signature) {
    const JsonReader r(body);
    const bool wrapped = r.has("mode") || r.has("dataset");
    EvalTarget target;
    if (wrapped) {
        r.expect_object({"dataset", "mode", "trees"});
        target.mode = mode_from_json(body.at("mode"));
    } else {
        target.mode = mode_from_json(body);
    }
    target.dataset = wrapped && r.has("dataset") ? require_dataset(store, r.at("dataset").string())
                                                 : dataset_for_signature(store, signature);
    if (auto* test = std::get_if<TestSetMode>(&target.mode)) {
        if (test->test_dataset_id.empty()) {
            if (!target.dataset.companion_test_dataset_id) {
                throw Error(ErrorCode::NotFound, "dataset " + target.dataset.dataset->id() + " has no companion test set");
            }
            test->test_dataset_id = *target.dataset.companion_test_dataset_id;
        }
        target.test_set = require_dataset(store, test->test_dataset_id).dataset;
    }
    return target;
}

std::pair<DecisionTree, Visibility> tree_submission(const nlohmann::json& body) {
    if (body.is_object() && body.contains("root")) return {tree_from_json_value(body), Visibility::Private};
    const JsonReader r(body);
    r.expect_object({"tree", "visibility"});
    DecisionTree t;
    try {
        t = tree_from_json_value(body.at("tree"));
    } catch (const Error& e) {
        auto location = e.location();
        if (location.rfind("$", 0) == 0) location = "$.tree" + location.substr(1);
        throw Error(e.code(), e.what(), location);
    }
    const auto vis = r.has("visibility") ? visibility_from_name(r.at("visibility").string()) : Visibility::Private;
    return {std::move(t), vis};
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

nlohmann::json dataset_summary_stats(const Dataset& d) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& f : d.features()) {
        nlohmann::json item = feature_to_json(f);
        std::size_t missing = 0;
        std::vector<double> values;
        for (const auto& s : d.samples()) {
            const auto& v = s.values[f.index];
            if (is_missing(v)) ++missing;
            else if (const auto* x = std::get_if<double>(&v)) values.push_back(*x);
        }
        item["missing"] = missing;
        if (!values.empty()) {
            item["min"] = *std::min_element(values.begin(), values.end());
            item["max"] = *std::max_element(values.begin(), values.end());
            item["median"] = median(values);
        }
        features.push_back(std::move(item));
    }
    return {{"id", d.id()},
            {"positive_count", d.count(ClassLabel::Positive)},
            {"negative_count", d.count(ClassLabel::Negative)},
            {"features", std::move(features)}};
}

}  // namespace

Service::Service(std::shared_ptr<LibraryStore> store, ServiceConfig config)
    : store_(std::move(store)), config_(std::move(config)), server_(std::make_unique<httplib::Server>()) {
    server_->set_read_timeout(config_.request_timeout);
    server_->set_write_timeout(config_.request_timeout);
    install_routes();
}

Service::~Service() { stop(); }

void Service::install_routes() {
    auto& srv = *server_;
    auto store = store_;

    srv.Get("/api/datasets", guarded([store](const httplib::Request&, httplib::Response& res) {
                nlohmann::json out = nlohmann::json::array();
                for (const auto& rec : store->list_datasets()) out.push_back(dataset_record_summary(rec));
                send(res, 200, out);
            }));

    srv.Post("/api/datasets", guarded([store](const httplib::Request& req, httplib::Response& res) {
                 require_writer(bearer_token(req));
                 ImportRequest import;
                 if (req.is_multipart_form_data()) {
                     auto field = [&](const std::string& key) -> std::optional<std::string> {
                         if (!req.has_file(key)) return std::nullopt;
                         return req.get_file_value(key).content;
                     };
                     auto required = [&](const std::string& key) {
                         auto v = field(key);
                         if (!v) throw Error(ErrorCode::BadRequest, "multipart field '" + key + "' is required");
                         return *v;
                     };
                     import.csv = required("csv");
                     import.class_column = required("class_column");
                     import.positive_name = required("positive");
                     import.companion_csv = field("test_csv");
                     import.name = field("name").value_or("");
                     import.description = field("description").value_or("");
                 } else {
                     const auto body = body_json(req);
                     const JsonReader r(body);
                     r.expect_object({"csv", "class_column", "positive", "test_csv", "name", "description"});
                     import.csv = r.at("csv").string();
                     import.class_column = r.at("class_column").string();
                     import.positive_name = r.at("positive").string();
                     if (r.has("test_csv")) import.companion_csv = r.at("test_csv").string();
                     if (r.has("name")) import.name = r.at("name").string();
                     if (r.has("description")) import.description = r.at("description").string();
                 }
                 send(res, 201, dataset_record_summary(store->import_dataset(import)));
             }));

    srv.Get(R"(/api/datasets/([^/]+))", guarded([store](const httplib::Request& req, httplib::Response& res) {
                send(res, 200, dataset_to_json(*require_dataset(*store, req.matches[1]).dataset));
            }));

    srv.Get(R"(/api/datasets/([^/]+)/summary)", guarded([store](const httplib::Request& req, httplib::Response& res) {
                send(res, 200, dataset_summary_stats(*require_dataset(*store, req.matches[1]).dataset));
            }));

    srv.Get(R"(/api/datasets/([^/]+)/features)", guarded([store](const httplib::Request& req, httplib::Response& res) {
                const auto rec = require_dataset(*store, req.matches[1]);
                nlohmann::json out = nlohmann::json::array();
                for (const auto& f : search_features(*rec.dataset, req.get_param_value("query"))) {
                    out.push_back(feature_to_json(f));
                }
                send(res, 200, out);
            }));

    // Per-sample routing of a single rule, for the visual split editor preview.
    srv.Post(R"(/api/datasets/([^/]+)/preview)", guarded([store](const httplib::Request& req, httplib::Response& res) {
                 const auto rec = require_dataset(*store, req.matches[1]);
                 const auto body = body_json(req);
                 JsonReader(body).expect_object({"rule"});
                 const auto rule = rule_from_json(body.at("rule"));
                 const auto& d = *rec.dataset;
                 DecisionTree probe{"", "preview", d.signature(),
                                    make_split(rule, make_leaf(ClassLabel::Positive), make_leaf(ClassLabel::Positive))};
                 const auto lib = store->resolver();
                 require_valid(probe, d.schema(), *lib);
                 nlohmann::json routes = nlohmann::json::array();
                 std::size_t counts[3] = {0, 0, 0};
                 for (const auto& s : d.samples()) {
                     const auto r = route(rule, s, d.schema(), *lib);
                     ++counts[static_cast<int>(r)];
                     routes.push_back(r == Route::Left ? "left" : r == Route::Right ? "right" : "missing");
                 }
                 send(res, 200, {{"routes", routes}, {"left", counts[0]}, {"right", counts[1]}, {"missing", counts[2]}});
             }));

    srv.Get("/api/trees", guarded([store](const httplib::Request& req, httplib::Response& res) {
                std::optional<std::string> signature;
                if (req.has_param("signature")) signature = req.get_param_value("signature");
                const auto token = bearer_token(req);
                nlohmann::json out = nlohmann::json::array();
                for (const auto& rec : store->list_trees(token, signature)) out.push_back(tree_record_to_json(rec, token));
                send(res, 200, out);
            }));

    srv.Post("/api/trees", guarded([store](const httplib::Request& req, httplib::Response& res) {
                 const auto token = bearer_token(req);
                 require_writer(token);
                 auto [tree, vis] = tree_submission(body_json(req));
                 send(res, 201, tree_record_to_json(store->create_tree(std::move(tree), token, vis), token));
             }));

    srv.Get(R"(/api/trees/([^/]+))", guarded([store](const httplib::Request& req, httplib::Response& res) {
                const auto token = bearer_token(req);
                send(res, 200, tree_record_to_json(require_tree(*store, req.matches[1], token), token));
            }));

    srv.Put(R"(/api/trees/([^/]+))", guarded([store](const httplib::Request& req, httplib::Response& res) {
                const auto token = bearer_token(req);
                require_writer(token);
                auto [tree, vis] = tree_submission(body_json(req));
                send(res, 200, tree_record_to_json(store->update_tree(req.matches[1], std::move(tree), token, vis), token));
            }));

    srv.Delete(R"(/api/trees/([^/]+))", guarded([store](const httplib::Request& req, httplib::Response& res) {
                   const auto token = bearer_token(req);
                   require_writer(token);
                   store->delete_tree(req.matches[1], token);
                   res.status = 204;
               }));

    srv.Post(R"(/api/trees/([^/]+)/evaluate)", guarded([store](const httplib::Request& req, httplib::Response& res) {
                 const auto token = bearer_token(req);
                 const auto rec = require_tree(*store, req.matches[1], token);
                 const auto target = resolve_target(*store, body_json(req), rec.tree.dataset_signature);
                 const auto lib = store->resolver();
                 const auto report =
                     evaluate(rec.tree, *target.dataset.dataset, target.mode, *lib, target.test_set.get());
                 send(res, 200, report_to_json(report));
             }));

    srv.Post("/api/models/train", guarded([store](const httplib::Request& req, httplib::Response& res) {
                 const auto body = body_json(req);
                 const JsonReader r(body);
                 r.expect_object({"dataset", "spec", "mode"});
                 const auto rec = require_dataset(*store, r.at("dataset").string());
                 const auto spec = learner_spec_from_json(body.at("spec"));
                 const auto& d = *rec.dataset;
                 std::vector<std::size_t> rows;
                 if (r.has("mode")) {
                     const auto mode = mode_from_json(body.at("mode"));
                     if (const auto* split = std::get_if<PercentageSplitMode>(&mode)) {
                         rows = percentage_split(d, split->fraction, split->seed).train;
                     }
                 }
                 if (rows.empty()) {
                     rows.resize(d.size());
                     for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
                 }
                 send(res, 200, training_result_to_json(train_model(d, rows, spec)));
             }));

    srv.Post("/api/ensemble/evaluate", guarded([store](const httplib::Request& req, httplib::Response& res) {
                 const auto token = bearer_token(req);
                 const auto body = body_json(req);
                 const JsonReader r(body);
                 r.expect_object({"trees", "dataset", "mode"});
                 const auto ids = r.at("trees");
                 if (ids.array_size() == 0) ids.fail("at least one tree id is required");
                 std::vector<DecisionTree> trees;
                 for (std::size_t i = 0; i < ids.array_size(); ++i) {
                     trees.push_back(require_tree(*store, ids.at(i).string(), token).tree);
                 }
                 const auto target = resolve_target(*store, body, trees.front().dataset_signature);
                 const auto lib = store->resolver();
                 const auto report =
                     evaluate_ensemble(trees, *target.dataset.dataset, target.mode, *lib, target.test_set.get());
                 send(res, 200, report_to_json(report));
             }));

    srv.Get("/api/custom-features", guarded([store](const httplib::Request& req, httplib::Response& res) {
                std::optional<std::string> signature;
                if (req.has_param("signature")) signature = req.get_param_value("signature");
                nlohmann::json out = nlohmann::json::array();
                for (const auto& rec : store->list_custom_features(signature)) {
                    out.push_back(custom_feature_record_to_json(rec));
                }
                send(res, 200, out);
            }));

    srv.Post("/api/custom-features", guarded([store](const httplib::Request& req, httplib::Response& res) {
                 const auto token = bearer_token(req);
                 require_writer(token);
                 const auto body = body_json(req);
                 const JsonReader r(body);
                 r.expect_object({"dataset_signature", "name", "weights", "offset"});
                 CustomFeatureDef def;
                 def.name = r.at("name").string();
                 const auto weights = r.at("weights");
                 weights.expect_map();
                 for (const auto& item : body.at("weights").items()) def.weights[item.key()] = weights.at(item.key()).number();
                 if (r.has("offset")) def.offset = r.at("offset").number();
                 send(res, 201,
                      custom_feature_record_to_json(
                          store->save_custom_feature(r.at("dataset_signature").string(), std::move(def), token)));
             }));

    bool mounted = false;
    if (!config_.assets.empty()) {
        mounted = srv.set_mount_point("/", config_.assets.string());
        if (!mounted) std::cerr << "warning: asset directory not found: " << config_.assets << '\n';
    }
    if (!mounted) {
        srv.Get("/", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(kPlaceholderPage, "text/html");
        });
    }
}

int Service::bind() {
    if (config_.port == 0) {
        bound_port_ = server_->bind_to_any_port(config_.host);
    } else {
        bound_port_ = server_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
    }
    if (bound_port_ < 0) {
        throw Error(ErrorCode::StoreIo, "cannot listen on " + config_.host + ":" + std::to_string(config_.port));
    }
    return bound_port_;
}

void Service::listen() { server_->listen_after_bind(); }

void Service::stop() {
    if (server_) server_->stop();
}

bool Service::running() const { return server_->is_running(); }

namespace {

Service* g_running = nullptr;

extern "C" void handle_stop_signal(int) {
    if (g_running != nullptr) g_running->stop();
}

}  // namespace

int serve_main(const ServiceConfig& config) {
    try {
        auto store = std::make_shared<DirectoryStore>(config.store);
        Service service(store, config);
        const int port = service.bind();
        std::cerr << "branch: serving " << config.store << " on http://" << config.host << ":" << port << '\n';
        g_running = &service;
        std::signal(SIGINT, handle_stop_signal);
        std::signal(SIGTERM, handle_stop_signal);
        service.listen();
        g_running = nullptr;
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << error_code_name(e.code()) << ": " << e.what() << '\n';
        return 1;
    }
}

}  // namespace branch
