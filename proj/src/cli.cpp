#include "branch/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "branch/error.hpp"
#include "branch/json_io.hpp"
#include "branch/learners.hpp"
#include "branch/service.hpp"
#include "branch/store.hpp"

namespace fs = std::filesystem;

namespace branch {

EvalMode parse_mode_spec(std::string_view spec) {
    if (spec == "train") return TrainingSetMode{};
    if (spec.rfind("test:", 0) == 0 && spec.size() > 5) return TestSetMode{std::string(spec.substr(5))};
    if (spec.rfind("split:", 0) == 0) {
        const auto rest = spec.substr(6);
        const auto colon = rest.find(':');
        if (colon != std::string_view::npos) {
            const auto frac_text = rest.substr(0, colon);
            const auto seed_text = rest.substr(colon + 1);
            double fraction = 0.0;
            std::uint64_t seed = 0;
            const auto f = std::from_chars(frac_text.data(), frac_text.data() + frac_text.size(), fraction);
            const auto s = std::from_chars(seed_text.data(), seed_text.data() + seed_text.size(), seed);
            const bool parsed = f.ec == std::errc{} && f.ptr == frac_text.data() + frac_text.size() &&
                                s.ec == std::errc{} && s.ptr == seed_text.data() + seed_text.size() &&
                                !seed_text.empty();
            if (parsed) {
                if (!(fraction > 0.0 && fraction < 1.0)) {
                    throw Error(ErrorCode::BadFraction, "split fraction must lie strictly between 0 and 1");
                }
                return PercentageSplitMode{fraction, seed};
            }
        }
    }
    throw Error(ErrorCode::BadRequest,
                "mode must be 'train', 'test:<dataset-id-or-path>' or 'split:<fraction>:<seed>', got '" +
                    std::string(spec) + "'");
}

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::NotFound, "cannot read " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text)) throw Error(ErrorCode::StoreIo, "cannot write " + path.string());
}

struct DataArgs {
    std::string dataset;
    std::string class_column;
    std::string positive;
};

void add_data_options(CLI::App& cmd, DataArgs& args) {
    cmd.add_option("--dataset", args.dataset, "Dataset CSV file")->required();
    cmd.add_option("--class", args.class_column, "Class column name")->required();
    cmd.add_option("--positive", args.positive, "Value of the class column that marks a positive sample")->required();
}

Dataset load_dataset(const DataArgs& args) {
    return parse_csv(read_text(args.dataset), args.class_column, args.positive);
}

std::vector<std::size_t> all_rows(const Dataset& d) {
    std::vector<std::size_t> rows(d.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return rows;
}

std::unique_ptr<DirectoryStore> open_store_if_present(const std::string& path) {
    if (path.empty() || !fs::exists(fs::path(path) / "index.json")) return nullptr;
    return std::make_unique<DirectoryStore>(path);
}

DecisionTree demo_example_tree(const Dataset& d) {
    CustomFeatureRule proliferation;
    proliferation.definition = {"proliferation", {{"AURKA", 1.0}, {"TOP2A", -1.0}}, 0.0};
    proliferation.threshold = 2.0;
    auto left = make_split(proliferation, make_leaf(ClassLabel::Negative), make_leaf(ClassLabel::Positive));
    auto right = make_split(SingleFeatureRule{"grade", std::nullopt, {"high"}}, make_leaf(ClassLabel::Positive),
                            make_leaf(ClassLabel::Negative));
    DecisionTree t{"demo-tree", "PSRC1 walkthrough", d.signature(),
                   make_split(SingleFeatureRule{"PSRC1", 4.8, {}}, std::move(left), std::move(right))};
    return fit_leaf_stats(t, d, MapResolver{});
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Build and evaluate decision trees over tabular datasets", "branch"};
    app.require_subcommand(1);

    std::string store_path;
    std::string format = "json";

    // import
    auto* import_cmd = app.add_subcommand("import", "Import a CSV dataset into the library");
    DataArgs import_data;
    ImportRequest import;
    std::string import_test;
    import_cmd->add_option("--csv", import_data.dataset, "Dataset CSV file")->required();
    import_cmd->add_option("--class", import_data.class_column, "Class column name")->required();
    import_cmd->add_option("--positive", import_data.positive, "Positive class value")->required();
    import_cmd->add_option("--test", import_test, "Companion test-set CSV with identical columns");
    import_cmd->add_option("--name", import.name, "Display name");
    import_cmd->add_option("--description", import.description, "Free-text description");
    import_cmd->add_option("--store", store_path, "Library directory")->envname("BRANCH_STORE")->default_val("store");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a tree file against a dataset");
    DataArgs eval_data;
    std::string tree_path;
    std::string mode_spec;
    add_data_options(*eval_cmd, eval_data);
    eval_cmd->add_option("--tree", tree_path, "Tree JSON file")->required();
    eval_cmd->add_option("--mode", mode_spec, "train | test:<dataset-id-or-path> | split:<fraction>:<seed>")->required();
    eval_cmd->add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "table"}));
    eval_cmd->add_option("--store", store_path, "Library used for tree references and test:<id>")
        ->envname("BRANCH_STORE");

    // train-model
    auto* train_cmd = app.add_subcommand("train-model", "Train a stump or logistic-regression model node");
    DataArgs train_data;
    std::string kind = "stump";
    std::vector<std::string> features;
    LogRegParams hyper;
    std::uint64_t seed = 0;
    std::string train_mode = "train";
    add_data_options(*train_cmd, train_data);
    train_cmd->add_option("--kind", kind, "Learner")->check(CLI::IsMember({"stump", "logreg"}));
    train_cmd->add_option("--features", features, "Feature subset")->required()->delimiter(',');
    train_cmd->add_option("--learning-rate", hyper.learning_rate, "LogReg step size");
    train_cmd->add_option("--epochs", hyper.epochs, "LogReg epochs");
    train_cmd->add_option("--l2", hyper.l2, "LogReg L2 penalty");
    train_cmd->add_option("--seed", seed, "Recorded with the learner settings");
    train_cmd->add_option("--mode", train_mode, "train, or split:<fraction>:<seed> to fit on the training side only");

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    ServiceConfig config;
    std::string assets;
    int timeout_seconds = 30;
    serve_cmd->add_option("--port", config.port, "Listen port")->envname("BRANCH_PORT");
    serve_cmd->add_option("--host", config.host, "Listen address");
    serve_cmd->add_option("--store", store_path, "Library directory")->envname("BRANCH_STORE")->default_val("store");
    serve_cmd->add_option("--assets", assets, "Web UI bundle directory")->envname("BRANCH_ASSETS");
    serve_cmd->add_option("--timeout", timeout_seconds, "Request timeout in seconds");

    // demo
    auto* demo_cmd = app.add_subcommand("demo", "Write the walkthrough dataset and example trees");
    std::string demo_dir = "demo";
    demo_cmd->add_option("--out", demo_dir, "Output directory");

    std::vector<const char*> argv;
    argv.push_back("branch");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (import_cmd->parsed()) {
            DirectoryStore store(store_path);
            import.csv = read_text(import_data.dataset);
            import.class_column = import_data.class_column;
            import.positive_name = import_data.positive;
            if (!import_test.empty()) import.companion_csv = read_text(import_test);
            out << canonical_dump(dataset_record_summary(store.import_dataset(import)));
            return 0;
        }

        if (eval_cmd->parsed()) {
            EvalMode mode;
            try {
                mode = parse_mode_spec(mode_spec);
            } catch (const Error& e) {
                throw UsageError(std::string(error_code_name(e.code())) + ": " + e.what());
            }
            const auto dataset = load_dataset(eval_data);
            const auto tree = tree_from_json(read_text(tree_path));
            const auto store = open_store_if_present(store_path);
            std::shared_ptr<const TreeResolver> lib =
                store ? store->resolver() : std::static_pointer_cast<const TreeResolver>(std::make_shared<MapResolver>());

            std::optional<Dataset> test_set;
            if (const auto* test = std::get_if<TestSetMode>(&mode)) {
                if (fs::is_regular_file(test->test_dataset_id)) {
                    test_set = parse_csv(read_text(test->test_dataset_id), eval_data.class_column, eval_data.positive);
                } else if (store) {
                    auto rec = store->get_dataset(test->test_dataset_id);
                    if (!rec) throw Error(ErrorCode::NotFound, "no test dataset file or library id " + test->test_dataset_id);
                    test_set = *rec->dataset;
                } else {
                    throw Error(ErrorCode::NotFound, "test dataset not found: " + test->test_dataset_id);
                }
            }
            const auto report = evaluate(tree, dataset, mode, *lib, test_set ? &*test_set : nullptr);
            if (format == "table") out << report_to_table(report, dataset.classes());
            else out << canonical_dump(report_to_json(report));
            return 0;
        }

        if (train_cmd->parsed()) {
            EvalMode mode;
            try {
                mode = parse_mode_spec(train_mode);
            } catch (const Error& e) {
                throw UsageError(std::string(error_code_name(e.code())) + ": " + e.what());
            }
            const auto dataset = load_dataset(train_data);
            LearnerSpec spec;
            spec.kind = kind == "logreg" ? ModelKind::LogReg : ModelKind::Stump;
            spec.feature_subset = features;
            spec.hyperparams = hyper;
            spec.seed = seed;
            auto rows = all_rows(dataset);
            if (const auto* split = std::get_if<PercentageSplitMode>(&mode)) {
                rows = percentage_split(dataset, split->fraction, split->seed).train;
            }
            out << canonical_dump(training_result_to_json(train_model(dataset, rows, spec)));
            return 0;
        }

        if (serve_cmd->parsed()) {
            config.store = store_path;
            config.assets = assets;
            config.request_timeout = std::chrono::seconds(timeout_seconds);
            return serve_main(config);
        }

        if (demo_cmd->parsed()) {
            fs::create_directories(demo_dir);
            const auto csv = demo_csv();
            const auto dataset = parse_csv(csv, kDemoClassColumn, kDemoPositive);
            const DecisionTree majority{"demo-majority", "majority leaf", dataset.signature(),
                                        make_leaf(ClassLabel::Positive, 10, 7)};
            const auto example = demo_example_tree(dataset);
            const fs::path dir(demo_dir);
            write_text(dir / "demo.csv", csv);
            write_text(dir / "majority_tree.json", tree_to_json(majority));
            write_text(dir / "example_tree.json", tree_to_json(example));
            out << canonical_dump({{"dataset", (dir / "demo.csv").string()},
                                   {"class_column", kDemoClassColumn},
                                   {"positive", kDemoPositive},
                                   {"trees", {(dir / "majority_tree.json").string(), (dir / "example_tree.json").string()}},
                                   {"signature", dataset.signature()}});
            return 0;
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        err << "error: " << error_code_name(e.code()) << ": " << e.what() << '\n';
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << error_code_name(ErrorCode::StoreIo) << ": " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace branch
