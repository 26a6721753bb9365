// fairpilot: headless exploration runner and HTTP service.
//
//   fairpilot run   --data toy.csv --target y --positive 1 --sensitive s --group0 a --out results/
//   fairpilot serve --listen 127.0.0.1:8080 --data-root ./fairpilot-data
//   fairpilot synth --rows 2000 --seed 1 > toy.csv

#include "fairpilot/config.hpp"
#include "fairpilot/pipeline.hpp"
#include "fairpilot/service.hpp"
#include "fairpilot/synthetic.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace fairpilot;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::vector<std::string> split_list(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    for (const auto& item : items) {
        std::size_t start = 0;
        while (start <= item.size()) {
            const auto comma = item.find(',', start);
            auto part = item.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            if (!part.empty()) {
                out.push_back(std::move(part));
            }
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
        }
    }
    return out;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class ProgressBar {
public:
    ProgressBar(const ProgressCounter& counter, bool enabled) : counter_(counter) {
        if (enabled) {
            thread_ = std::jthread([this](std::stop_token st) {
                while (!st.stop_requested()) {
                    draw();
                    std::this_thread::sleep_for(std::chrono::milliseconds(200));
                }
                draw();
                std::fputc('\n', stderr);
            });
        }
    }

private:
    void draw() const {
        constexpr int kWidth = 40;
        const double f = counter_.fraction();
        const int filled = static_cast<int>(f * kWidth);
        std::fprintf(stderr, "\r[%s%s] %5.1f%% (%zu/%zu)", std::string(static_cast<std::size_t>(filled), '#').c_str(),
                     std::string(static_cast<std::size_t>(kWidth - filled), ' ').c_str(), 100.0 * f,
                     counter_.completed(), counter_.total());
        std::fflush(stderr);
    }

    const ProgressCounter& counter_;
    std::jthread thread_;
};

struct RunArgs {
    std::string config;
    std::string data;
    std::string target;
    std::vector<std::string> positive;
    std::string sensitive;
    std::vector<std::string> group0;
    std::vector<std::string> models;
    std::vector<std::string> metrics;
    std::optional<std::size_t> splits;
    std::optional<double> test_fraction;
    std::optional<std::uint64_t> seed;
    std::string mode;
    std::optional<std::size_t> workers;
    std::vector<std::string> missing;
    std::string impute;
    std::string standardize;
    std::string out;
    std::string report;
    std::string id;
    bool quiet = false;
};

int run_command(const RunArgs& a) {
    Json doc = Json::object();
    std::string config_text;
    if (!a.config.empty()) {
        config_text = read_file(a.config);
        try {
            doc = Json::parse(config_text);
        } catch (const Json::parse_error& e) {
            throw ParseError("config file is not valid JSON: " + std::string(e.what()));
        }
        if (!doc.is_object()) {
            throw ValidationError("config file must contain a JSON object");
        }
    }
    const Json original = doc;

    if (!a.data.empty()) doc["data"] = a.data;
    auto task_field = [&](const char* key, Json value) {
        if (!doc.contains("task") || !doc["task"].is_object()) {
            doc["task"] = Json::object();
        }
        doc["task"][key] = std::move(value);
    };
    if (!a.target.empty()) task_field("target", a.target);
    if (!a.positive.empty()) task_field("positive", split_list(a.positive));
    if (!a.sensitive.empty()) task_field("sensitive", a.sensitive);
    if (!a.group0.empty()) task_field("group0", split_list(a.group0));
    auto pre_field = [&](const char* key, Json value) {
        if (!doc.contains("preprocess") || !doc["preprocess"].is_object()) {
            doc["preprocess"] = Json::object();
        }
        doc["preprocess"][key] = std::move(value);
    };
    if (!a.missing.empty()) pre_field("missing_codes", split_list(a.missing));
    if (!a.impute.empty()) pre_field("impute", a.impute);
    if (!a.standardize.empty()) pre_field("standardize", a.standardize);
    if (!a.models.empty()) doc["models"] = split_list(a.models);
    if (!a.metrics.empty()) doc["metrics"] = split_list(a.metrics);
    if (a.splits || a.test_fraction) {
        if (!doc.contains("splits") || !doc["splits"].is_object()) {
            doc["splits"] = Json::object();
        }
        if (a.splits) doc["splits"]["n_splits"] = *a.splits;
        if (a.test_fraction) doc["splits"]["test_fraction"] = *a.test_fraction;
    }
    if (a.seed) doc["seed"] = *a.seed;
    if (!a.mode.empty()) doc["mode"] = a.mode;
    if (a.workers) doc["workers"] = *a.workers;
    if (doc != original || config_text.empty()) {
        config_text = doc.dump(2) + "\n";
    }

    const auto cfg = config_from_json(doc);
    if (cfg.data.empty()) {
        throw ValidationError("no dataset given (--data or config field 'data')");
    }
    if (!cfg.task) {
        throw ValidationError("no task encoding given (--target/--positive/--sensitive/--group0)");
    }
    const auto dataset = prepare_dataset(read_file(cfg.data), cfg.preprocess.value_or(PreprocessConfig{}), *cfg.task,
                                         fs::path(cfg.data).filename().string());

    const fs::path out_dir = a.out;
    const std::string id = a.id.empty() ? fs::absolute(out_dir).lexically_normal().filename().string() : a.id;
    const auto started = utc_now();
    ProgressCounter progress;
    ExplorationResult result;
    {
        ProgressBar bar(progress, !a.quiet);
        result = run_exploration(dataset, cfg, id, RunHooks{&progress, {}});
    }
    write_outputs(out_dir, result, config_text, a.report.empty() ? fs::path{} : fs::path(a.report));
    write_file(out_dir / "meta.json", Json{{"exploration_id", id},
                                           {"started_at", started},
                                           {"finished_at", utc_now()},
                                           {"n_rows", dataset.n_rows()},
                                           {"n_features", dataset.feature_names.size()},
                                           {"preprocessing", dataset.provenance.steps}}
                                              .dump(2) + "\n");
    if (!a.quiet) {
        std::cerr << "wrote " << result.records.size() << " records to " << out_dir.string() << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fairness-aware hyperparameter exploration"};
    app.require_subcommand(1);

    RunArgs ra;
    auto* run = app.add_subcommand("run", "Run an exploration and write records, frontiers and a report");
    run->add_option("--config", ra.config, "Exploration config JSON (flags override its fields)");
    run->add_option("--data", ra.data, "CSV dataset");
    run->add_option("--target", ra.target, "Target column");
    run->add_option("--positive", ra.positive, "Target values encoded as 1 (comma separated)");
    run->add_option("--sensitive", ra.sensitive, "Sensitive attribute column");
    run->add_option("--group0", ra.group0, "Sensitive values forming group 0 (comma separated)");
    run->add_option("--models", ra.models, "Model families: dt,rf,lr,svc or full ids");
    run->add_option("--metrics", ra.metrics, "Fairness metric ids (comma separated)");
    run->add_option("--splits", ra.splits, "Number of repeated holdout splits");
    run->add_option("--test-fraction", ra.test_fraction, "Test share of each split");
    run->add_option("--seed", ra.seed, "Random seed");
    run->add_option("--mode", ra.mode, "Dominance mode")->check(CLI::IsMember({"weak", "strict"}));
    run->add_option("--workers", ra.workers, "Grid worker threads (0 = all cores)");
    run->add_option("--missing", ra.missing, "Raw values treated as missing (comma separated)");
    run->add_option("--impute", ra.impute, "none|mean|median");
    run->add_option("--standardize", ra.standardize, "none|zscore");
    run->add_option("--out", ra.out, "Output directory")->required();
    run->add_option("--report", ra.report, "Report path (default <out>/report.md)");
    run->add_option("--id", ra.id, "Exploration id recorded in frontier files (default: output directory name)");
    run->add_flag("--quiet", ra.quiet, "No progress bar");

    std::string listen = std::getenv("FAIRPILOT_LISTEN") ? std::getenv("FAIRPILOT_LISTEN") : "127.0.0.1:8080";
    ServiceOptions so = options_from_env();
    std::string data_root = so.data_root.string(), static_dir = so.static_dir.string();
    auto* serve = app.add_subcommand("serve", "Serve the HTTP API (and the explorer UI, if configured)");
    serve->add_option("--listen", listen, "host:port (env FAIRPILOT_LISTEN)");
    serve->add_option("--data-root", data_root, "Persistence directory (env FAIRPILOT_DATA_ROOT)");
    serve->add_option("--workers", so.workers, "Grid workers per job (env FAIRPILOT_WORKERS)");
    serve->add_option("--grid-cap", so.max_grid_size, "Maximum assignments per family (env FAIRPILOT_GRID_CAP)");
    serve->add_option("--static-dir", static_dir, "Explorer UI assets served at / (env FAIRPILOT_STATIC_DIR)");

    SyntheticSpec synth_spec;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with an injected group disparity");
    synth->add_option("--rows", synth_spec.n_rows, "Row count");
    synth->add_option("--seed", synth_spec.seed, "Seed");
    synth->add_option("--out", synth_out, "Output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*run) {
            return run_command(ra);
        }
        if (*serve) {
            so.data_root = data_root;
            so.static_dir = static_dir;
            const auto colon = listen.rfind(':');
            const std::string host = colon == std::string::npos ? listen : listen.substr(0, colon);
            const int port = colon == std::string::npos ? 8080 : std::stoi(listen.substr(colon + 1));
            ExplorationService service(so);
            std::cerr << "listening on " << host << ":" << port << "\n";
            return service.listen(host, port) ? 0 : kExitRuntime;
        }
        if (*synth) {
            const auto csv = synthetic_csv(synth_spec);
            if (synth_out.empty()) {
                std::cout << csv;
            } else {
                write_file(synth_out, csv);
            }
            return 0;
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
