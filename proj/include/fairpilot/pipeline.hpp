#ifndef FAIRPILOT_PIPELINE_HPP
#define FAIRPILOT_PIPELINE_HPP

#include "fairpilot/config.hpp"
#include "fairpilot/data.hpp"
#include "fairpilot/grid.hpp"
#include "fairpilot/report.hpp"
#include "fairpilot/serialize.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

namespace fairpilot {

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot read file '" + p.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, std::string_view bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write file '" + p.string() + "'");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// CSV bytes -> preprocessed, encoded dataset. The target and sensitive
/// columns are exempt from imputation and scaling.
inline Dataset prepare_dataset(std::string_view csv, PreprocessConfig pre, const TaskEncoding& task,
                               std::string source = "csv") {
    auto table = load_csv(csv, pre.missing_codes, std::move(source));
    if (!table.find(task.target)) {
        throw ValidationError("target column '" + task.target + "' not found");
    }
    if (!table.find(task.sensitive)) {
        throw ValidationError("sensitive column '" + task.sensitive + "' not found");
    }
    pre.passthrough_columns = {task.target, task.sensitive};
    return encode_task(preprocess(std::move(table), pre), task);
}

struct RunHooks {
    ProgressCounter* progress = nullptr;
    std::function<void(const TrainedModel&)> on_model;
};

/// Runs every selected family over one shared split list.
inline ExplorationResult run_exploration(const Dataset& d, const ExplorationConfig& cfg, std::string id = {},
                                         const RunHooks& hooks = {}) {
    ExplorationResult res;
    res.id = std::move(id);
    res.metrics = cfg.metrics;
    res.n_splits = cfg.n_splits;
    res.mode = cfg.mode;
    res.accuracy_objective = cfg.accuracy_objective;

    std::vector<FamilyViolation> violations;
    std::size_t total = 0;
    for (const auto& s : cfg.spaces) {
        for (auto& v : validate_space(s)) {
            violations.push_back({s.family, std::move(v)});
        }
    }
    if (!violations.empty()) {
        throw SpaceValidationError(std::move(violations));
    }
    for (const auto& s : cfg.spaces) {
        const auto n = expand(s, cfg.max_grid_size).size();
        res.families.push_back(s.family);
        res.grid_sizes.push_back(n);
        total += n * cfg.n_splits;
    }
    const auto splits = make_splits(d, cfg.split_plan());
    if (hooks.progress) {
        hooks.progress->add_total(total);
    }

    GridOptions opt;
    opt.workers = cfg.workers;
    opt.progress = hooks.progress;
    opt.count_total = false;
    opt.models = cfg.model_options;
    opt.max_grid_size = cfg.max_grid_size;
    opt.on_model = hooks.on_model;
    for (const auto& s : cfg.spaces) {
        auto recs = run_grid(d, s, splits, cfg.metrics, cfg.seed, opt);
        res.records.insert(res.records.end(), std::make_move_iterator(recs.begin()),
                           std::make_move_iterator(recs.end()));
    }
    return res;
}

/// Writes records.json, report.md and every frontier as CSV and JSON into
/// `dir` (named `<family>_<metric>_frontier.{csv,json}`).
inline void write_outputs(const std::filesystem::path& dir, const ExplorationResult& res, std::string_view config_text,
                          const std::filesystem::path& report_path = {}) {
    std::filesystem::create_directories(dir);
    write_file(dir / "records.json", records_document(res));
    for (const auto& fe : collect_frontiers(res)) {
        write_file(dir / (fe.stem + ".csv"), to_csv(fe.table));
        write_file(dir / (fe.stem + ".json"), to_json(fe.set, res.records).dump(2) + "\n");
    }
    write_file(report_path.empty() ? dir / "report.md" : report_path, generate_report(res, config_text));
}

} // namespace fairpilot

#endif
