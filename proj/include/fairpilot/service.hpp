#ifndef FAIRPILOT_SERVICE_HPP
#define FAIRPILOT_SERVICE_HPP

#include "fairpilot/config.hpp"
#include "fairpilot/pipeline.hpp"
#include "fairpilot/report.hpp"
#include "fairpilot/serialize.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <ctime>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fairpilot {

enum class JobState { pending, running, finished, failed };

inline const char* to_string(JobState s) {
    switch (s) {
    case JobState::pending: return "pending";
    case JobState::running: return "running";
    case JobState::finished: return "finished";
    case JobState::failed: return "failed";
    }
    return "unknown";
}

struct ServiceOptions {
    std::filesystem::path data_root = "fairpilot-data";
    std::size_t workers = 1;        // grid workers per job
    std::size_t concurrent_jobs = 1; // jobs executing at once; the rest queue FIFO
    std::size_t max_grid_size = kDefaultGridCap;
    std::size_t max_upload_bytes = 64u << 20;
    std::filesystem::path static_dir; // served at "/" when it exists
};

/// Reads FAIRPILOT_DATA_ROOT, FAIRPILOT_WORKERS, FAIRPILOT_GRID_CAP and
/// FAIRPILOT_STATIC_DIR on top of `base`.
inline ServiceOptions options_from_env(ServiceOptions base = {}) {
    if (const char* v = std::getenv("FAIRPILOT_DATA_ROOT")) base.data_root = v;
    if (const char* v = std::getenv("FAIRPILOT_WORKERS")) base.workers = std::stoul(v);
    if (const char* v = std::getenv("FAIRPILOT_GRID_CAP")) base.max_grid_size = std::stoul(v);
    if (const char* v = std::getenv("FAIRPILOT_STATIC_DIR")) base.static_dir = v;
    return base;
}

/// Exploration jobs and their HTTP routes.
///
///   POST /datasets                         multipart: file (CSV), config ({preprocess, task})
///   GET  /datasets/{id}
///   POST /explorations                     exploration config JSON
///   GET  /explorations/{id}
///   GET  /explorations/{id}/progress
///   GET  /explorations/{id}/records
///   GET  /explorations/{id}/frontier?metric=&grouping=&mode=
///   GET  /explorations/{id}/report
///   GET  /explorations/{id}/export/{csv|json}?metric=&family=&mode=
class ExplorationService {
public:
    explicit ExplorationService(ServiceOptions opt) : opt_(std::move(opt)) {
        std::filesystem::create_directories(opt_.data_root / "datasets");
        std::filesystem::create_directories(opt_.data_root / "explorations");
        reload();
        for (std::size_t i = 0; i < std::max<std::size_t>(1, opt_.concurrent_jobs); ++i) {
            runners_.emplace_back([this](std::stop_token st) { run_jobs(st); });
        }
        routes();
    }

    ~ExplorationService() {
        stop();
        for (auto& r : runners_) {
            r.request_stop();
        }
        queue_cv_.notify_all();
        runners_.clear();
    }

    ExplorationService(const ExplorationService&) = delete;
    ExplorationService& operator=(const ExplorationService&) = delete;

    httplib::Server& server() { return server_; }

    /// Binds to an ephemeral port and serves in a background thread.
    int start(const std::string& host = "127.0.0.1") {
        const int port = server_.bind_to_any_port(host);
        if (port < 0) {
            throw std::runtime_error("cannot bind to " + host);
        }
        listener_ = std::jthread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port;
    }

    /// Blocking listen on host:port.
    bool listen(const std::string& host, int port) { return server_.listen(host, port); }

    void stop() {
        server_.stop();
        if (listener_.joinable()) {
            listener_.join();
        }
    }

    /// Blocks until the job leaves pending/running. Used by tests and the
    /// CLI-equivalence check.
    JobState wait(const std::string& id) {
        auto job = find_job(id);
        if (!job) {
            throw ValidationError("unknown exploration '" + id + "'");
        }
        std::unique_lock lk(job->mu);
        job->cv.wait(lk, [&] { return job->state == JobState::finished || job->state == JobState::failed; });
        return job->state;
    }

private:
    struct DatasetEntry {
        std::string id;
        std::string csv;
        PreprocessConfig preprocess;
        TaskEncoding task;
        std::shared_ptr<const Dataset> encoded;
        Json summary;
    };

    struct Job {
        std::string id;
        std::string config_text;
        ExplorationConfig config;
        ProgressCounter progress;
        std::mutex mu;
        std::condition_variable cv;
        JobState state = JobState::pending;
        std::string error;
        std::string created_at;
        std::shared_ptr<const ExplorationResult> result;

        std::filesystem::path dir;
    };

    static std::string timestamp() {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    static void reply(httplib::Response& res, int status, const Json& body) {
        res.status = status;
        res.set_content(body.dump(2) + "\n", "application/json");
    }

    static void error(httplib::Response& res, int status, const std::string& message) {
        reply(res, status, Json{{"error", message}});
    }

    std::string next_id(const char* prefix, std::size_t& counter) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s-%06zu", prefix, ++counter);
        return buf;
    }

    std::shared_ptr<Job> find_job(const std::string& id) {
        std::lock_guard lk(mu_);
        auto it = jobs_.find(id);
        return it == jobs_.end() ? nullptr : it->second;
    }

    std::shared_ptr<const DatasetEntry> find_dataset(const std::string& id) {
        std::lock_guard lk(mu_);
        auto it = datasets_.find(id);
        return it == datasets_.end() ? nullptr : it->second;
    }

    static Json dataset_summary(const std::string& id, const Table& raw, const Dataset& d) {
        Json cols = Json::array();
        for (const auto& c : raw.columns) {
            cols.push_back(Json{{"name", c.name}, {"type", to_string(c.type)}});
        }
        std::array<std::size_t, 2> cls{}, grp{};
        for (std::size_t r = 0; r < d.n_rows(); ++r) {
            ++cls[d.target[r]];
            ++grp[d.sensitive[r]];
        }
        return Json{{"id", id},
                    {"n_rows", d.n_rows()},
                    {"n_raw_rows", raw.n_rows},
                    {"columns", std::move(cols)},
                    {"features", d.feature_names},
                    {"class_counts", Json{{"0", cls[0]}, {"1", cls[1]}}},
                    {"group_counts", Json{{"0", grp[0]}, {"1", grp[1]}}},
                    {"preprocessing", d.provenance.steps}};
    }

    std::shared_ptr<DatasetEntry> build_dataset(std::string id, std::string csv, const Json& cfg) {
        auto e = std::make_shared<DatasetEntry>();
        e->id = std::move(id);
        e->csv = std::move(csv);
        e->preprocess = cfg.contains("preprocess") && cfg["preprocess"].is_object() ? preprocess_from_json(cfg["preprocess"])
                                                                                     : PreprocessConfig{};
        if (!cfg.contains("task") || !cfg["task"].is_object()) {
            throw ValidationError("upload config requires a task object");
        }
        e->task = task_from_json(cfg["task"]);
        const auto raw = load_csv(e->csv, e->preprocess.missing_codes, e->id);
        e->encoded = std::make_shared<const Dataset>(prepare_dataset(e->csv, e->preprocess, e->task, e->id));
        e->summary = dataset_summary(e->id, raw, *e->encoded);
        return e;
    }

    void reload() {
        std::size_t max_ds = 0, max_exp = 0;
        for (const auto& ent : std::filesystem::directory_iterator(opt_.data_root / "datasets")) {
            const auto id = ent.path().filename().string();
            try {
                auto cfg = Json::parse(read_file(ent.path() / "upload.json"));
                datasets_[id] = build_dataset(id, read_file(ent.path() / "data.csv"), cfg);
                max_ds = std::max<std::size_t>(max_ds, std::stoul(id.substr(id.find('-') + 1)));
            } catch (const std::exception&) {
            }
        }
        for (const auto& ent : std::filesystem::directory_iterator(opt_.data_root / "explorations")) {
            const auto id = ent.path().filename().string();
            try {
                max_exp = std::max<std::size_t>(max_exp, std::stoul(id.substr(id.find('-') + 1)));
                auto status = Json::parse(read_file(ent.path() / "status.json"));
                if (status.at("state") != "finished" && status.at("state") != "failed") {
                    continue;
                }
                auto job = std::make_shared<Job>();
                job->id = id;
                job->dir = ent.path();
                job->config_text = read_file(ent.path() / "config.json");
                job->created_at = status.value("created_at", "");
                if (status.at("state") == "finished") {
                    job->state = JobState::finished;
                    job->result = std::make_shared<const ExplorationResult>(
                        result_from_json(Json::parse(read_file(ent.path() / "records.json")), id));
                    job->config = parse_config(job->config_text);
                } else {
                    job->state = JobState::failed;
                    job->error = status.value("error", "");
                }
                jobs_[id] = job;
            } catch (const std::exception&) {
            }
        }
        dataset_counter_ = max_ds;
        job_counter_ = max_exp;
    }

    void write_status(const Job& job, const std::string& finished_at = {}) {
        Json s{{"id", job.id}, {"state", to_string(job.state)}, {"created_at", job.created_at}};
        if (!finished_at.empty()) {
            s["finished_at"] = finished_at;
        }
        if (!job.error.empty()) {
            s["error"] = job.error;
        }
        write_file(job.dir / "status.json", s.dump(2) + "\n");
    }

    void run_jobs(std::stop_token st) {
        while (!st.stop_requested()) {
            std::shared_ptr<Job> job;
            {
                std::unique_lock lk(mu_);
                queue_cv_.wait(lk, st, [&] { return !queue_.empty(); });
                if (st.stop_requested() || queue_.empty()) {
                    return;
                }
                job = queue_.front();
                queue_.pop_front();
            }
            execute(*job);
        }
    }

    void execute(Job& job) {
        {
            std::lock_guard lk(job.mu);
            job.state = JobState::running;
        }
        write_status(job);
        try {
            auto ds = find_dataset(job.config.dataset_id);
            if (!ds) {
                throw ValidationError("dataset '" + job.config.dataset_id + "' no longer exists");
            }
            std::shared_ptr<const Dataset> data = ds->encoded;
            if (job.config.preprocess || job.config.task) {
                data = std::make_shared<const Dataset>(prepare_dataset(ds->csv, job.config.preprocess.value_or(ds->preprocess),
                                                                       job.config.task.value_or(ds->task), ds->id));
            }
            auto cfg = job.config;
            cfg.workers = opt_.workers;
            cfg.max_grid_size = std::min(cfg.max_grid_size, opt_.max_grid_size);
            auto result = std::make_shared<const ExplorationResult>(
                run_exploration(*data, cfg, job.id, RunHooks{&job.progress, {}}));
            write_outputs(job.dir, *result, job.config_text);
            {
                std::lock_guard lk(job.mu);
                job.result = std::move(result);
                job.state = JobState::finished;
            }
        } catch (const std::exception& e) {
            std::lock_guard lk(job.mu);
            job.state = JobState::failed;
            job.error = e.what();
        }
        write_status(job, timestamp());
        job.cv.notify_all();
    }

    struct Snapshot {
        JobState state;
        std::string error;
        std::shared_ptr<const ExplorationResult> result;
    };

    static Snapshot snapshot(Job& job) {
        std::lock_guard lk(job.mu);
        return {job.state, job.error, job.result};
    }

    static Json progress_json(Job& job) {
        const auto snap = snapshot(job);
        const auto completed = job.progress.completed();
        const auto total = job.progress.total();
        const double fraction = snap.state == JobState::finished ? 1.0 : job.progress.fraction();
        Json j{{"id", job.id},
               {"state", to_string(snap.state)},
               {"fraction", fraction},
               {"completed", completed},
               {"total", total}};
        if (snap.state == JobState::failed) {
            j["error"] = snap.error;
        }
        return j;
    }

    // Resolves a finished job for result routes, writing the error reply
    // otherwise.
    std::shared_ptr<const ExplorationResult> finished_result(const httplib::Request& req, httplib::Response& res) {
        auto job = find_job(req.matches[1]);
        if (!job) {
            error(res, 404, "unknown exploration '" + std::string(req.matches[1]) + "'");
            return nullptr;
        }
        auto snap = snapshot(*job);
        if (snap.state != JobState::finished) {
            error(res, 409, std::string("exploration is ") + to_string(snap.state));
            return nullptr;
        }
        return snap.result;
    }

    struct FrontierQuery {
        ObjectivePair pair;
        Dominance mode;
    };

    static std::optional<FrontierQuery> frontier_query(const httplib::Request& req, httplib::Response& res,
                                                       const ExplorationResult& r) {
        if (!req.has_param("metric")) {
            error(res, 400, "query parameter 'metric' is required");
            return std::nullopt;
        }
        const auto metric = parse_metric(req.get_param_value("metric"));
        if (!metric || std::find(r.metrics.begin(), r.metrics.end(), *metric) == r.metrics.end()) {
            error(res, 400, "unknown metric '" + req.get_param_value("metric") + "'");
            return std::nullopt;
        }
        auto mode = r.mode;
        if (req.has_param("mode")) {
            const auto m = parse_dominance(req.get_param_value("mode"));
            if (!m) {
                error(res, 400, "mode must be weak or strict");
                return std::nullopt;
            }
            mode = *m;
        }
        return FrontierQuery{{*metric, r.accuracy_objective}, mode};
    }

    void routes() {
        server_.set_payload_max_length(opt_.max_upload_bytes);

        server_.Post("/datasets", [this](const httplib::Request& req, httplib::Response& res) {
            if (!req.has_file("file")) {
                return error(res, 400, "multipart field 'file' (CSV) is required");
            }
            const auto& file = req.get_file_value("file");
            if (file.content.size() > opt_.max_upload_bytes) {
                return error(res, 413, "dataset exceeds the upload cap");
            }
            Json cfg = Json::object();
            if (req.has_file("config")) {
                try {
                    cfg = Json::parse(req.get_file_value("config").content);
                } catch (const Json::parse_error& e) {
                    return error(res, 400, std::string("config is not valid JSON: ") + e.what());
                }
            }
            std::string id;
            {
                std::lock_guard lk(mu_);
                id = next_id("ds", dataset_counter_);
            }
            try {
                auto entry = build_dataset(id, file.content, cfg);
                const auto dir = opt_.data_root / "datasets" / id;
                std::filesystem::create_directories(dir);
                write_file(dir / "data.csv", entry->csv);
                write_file(dir / "upload.json", cfg.dump(2) + "\n");
                const Json summary = entry->summary;
                {
                    std::lock_guard lk(mu_);
                    datasets_[id] = std::move(entry);
                }
                reply(res, 201, summary);
            } catch (const ParseError& e) {
                error(res, 400, e.what());
            } catch (const ValidationError& e) {
                error(res, 400, e.what());
            }
        });

        server_.Get(R"(/datasets/([\w-]+))", [this](const httplib::Request& req, httplib::Response& res) {
            auto ds = find_dataset(req.matches[1]);
            if (!ds) {
                return error(res, 404, "unknown dataset '" + std::string(req.matches[1]) + "'");
            }
            reply(res, 200, ds->summary);
        });

        server_.Post("/explorations", [this](const httplib::Request& req, httplib::Response& res) {
            Json doc;
            try {
                doc = Json::parse(req.body);
            } catch (const Json::parse_error& e) {
                return error(res, 400, std::string("config is not valid JSON: ") + e.what());
            }
            if (!doc.is_object() || !doc.contains("dataset_id") || !doc["dataset_id"].is_string()) {
                return error(res, 400, "config field 'dataset_id' is required");
            }
            if (!find_dataset(doc["dataset_id"].get<std::string>())) {
                return error(res, 404, "unknown dataset '" + doc["dataset_id"].get<std::string>() + "'");
            }
            auto job = std::make_shared<Job>();
            try {
                job->config = config_from_json(doc);
                for (const auto& s : job->config.spaces) {
                    expand(s, std::min(job->config.max_grid_size, opt_.max_grid_size));
                }
            } catch (const SpaceValidationError& e) {
                Json v = Json::array();
                for (const auto& fv : e.violations()) {
                    v.push_back(to_json(fv));
                }
                return reply(res, 422, Json{{"error", "invalid hyperparameter space"}, {"violations", std::move(v)}});
            } catch (const ValidationError& e) {
                return reply(res, 422, Json{{"error", e.what()}, {"violations", Json::array()}});
            }
            job->config_text = req.body;
            job->created_at = timestamp();
            {
                std::lock_guard lk(mu_);
                job->id = next_id("exp", job_counter_);
                job->dir = opt_.data_root / "explorations" / job->id;
                std::filesystem::create_directories(job->dir);
                write_file(job->dir / "config.json", job->config_text);
                write_status(*job);
                jobs_[job->id] = job;
                queue_.push_back(job);
            }
            queue_cv_.notify_one();
            reply(res, 202, Json{{"id", job->id}, {"state", "pending"}});
        });

        server_.Get(R"(/explorations/([\w-]+))", [this](const httplib::Request& req, httplib::Response& res) {
            auto job = find_job(req.matches[1]);
            if (!job) {
                return error(res, 404, "unknown exploration '" + std::string(req.matches[1]) + "'");
            }
            auto j = progress_json(*job);
            j["created_at"] = job->created_at;
            j["config"] = to_json(job->config);
            reply(res, 200, j);
        });

        server_.Get(R"(/explorations/([\w-]+)/progress)", [this](const httplib::Request& req, httplib::Response& res) {
            auto job = find_job(req.matches[1]);
            if (!job) {
                return error(res, 404, "unknown exploration '" + std::string(req.matches[1]) + "'");
            }
            reply(res, 200, progress_json(*job));
        });

        server_.Get(R"(/explorations/([\w-]+)/records)", [this](const httplib::Request& req, httplib::Response& res) {
            if (auto r = finished_result(req, res)) {
                res.set_content(records_document(*r), "application/json");
            }
        });

        server_.Get(R"(/explorations/([\w-]+)/frontier)", [this](const httplib::Request& req, httplib::Response& res) {
            auto r = finished_result(req, res);
            if (!r) {
                return;
            }
            const auto q = frontier_query(req, res, *r);
            if (!q) {
                return;
            }
            auto grouping = Grouping::all_families;
            if (req.has_param("grouping")) {
                const auto g = parse_grouping(req.get_param_value("grouping"));
                if (!g) {
                    return error(res, 400, "grouping must be per_family or all_families");
                }
                grouping = *g;
            }
            const auto sets = extract_frontier(r->records, q->pair, q->mode, grouping, r->id);
            Json body;
            if (grouping == Grouping::all_families) {
                body = to_json(sets.front(), r->records);
            } else {
                body = Json::array();
                for (const auto& ps : sets) {
                    body.push_back(to_json(ps, r->records));
                }
            }
            reply(res, 200, body);
        });

        server_.Get(R"(/explorations/([\w-]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
            auto r = finished_result(req, res);
            if (!r) {
                return;
            }
            auto job = find_job(req.matches[1]);
            res.set_content(generate_report(*r, job->config_text), "text/markdown; charset=utf-8");
        });

        server_.Get(R"(/explorations/([\w-]+)/export/(\w+))", [this](const httplib::Request& req,
                                                                     httplib::Response& res) {
            auto r = finished_result(req, res);
            if (!r) {
                return;
            }
            const std::string fmt = req.matches[2];
            if (fmt != "csv" && fmt != "json") {
                return error(res, 400, "unknown export format '" + fmt + "'");
            }
            const auto q = frontier_query(req, res, *r);
            if (!q) {
                return;
            }
            std::optional<ModelFamily> family;
            if (req.has_param("family") && req.get_param_value("family") != "all_families") {
                family = parse_family(req.get_param_value("family"));
                if (!family || std::find(r->families.begin(), r->families.end(), *family) == r->families.end()) {
                    return error(res, 400, "unknown family '" + req.get_param_value("family") + "'");
                }
            }
            ParetoSet ps;
            if (family) {
                const auto sets = extract_frontier(r->records, q->pair, q->mode, Grouping::per_family, r->id);
                auto it = std::find_if(sets.begin(), sets.end(), [&](const auto& s) { return s.family == family; });
                ps = it != sets.end() ? *it : ParetoSet{q->pair, q->mode, Grouping::per_family, family, {}, 0, r->id};
            } else {
                ps = extract_frontier(r->records, q->pair, q->mode, Grouping::all_families, r->id).front();
            }
            if (fmt == "csv") {
                res.set_content(to_csv(pareto_table(ps, r->records, r->metrics, r->families)), "text/csv");
            } else {
                res.set_content(to_json(ps, r->records).dump(2) + "\n", "application/json");
            }
        });

        if (!opt_.static_dir.empty() && std::filesystem::is_directory(opt_.static_dir)) {
            server_.set_mount_point("/", opt_.static_dir.string());
        } else {
            server_.Get("/", [](const httplib::Request&, httplib::Response& res) {
                res.set_content("<!doctype html><title>fairpilot</title><p>fairpilot service is running. "
                                "Set FAIRPILOT_STATIC_DIR to serve the explorer UI.</p>\n",
                                "text/html");
            });
        }
    }

    ServiceOptions opt_;
    httplib::Server server_;
    std::jthread listener_;

    std::mutex mu_;
    std::condition_variable_any queue_cv_;
    std::deque<std::shared_ptr<Job>> queue_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;
    std::map<std::string, std::shared_ptr<const DatasetEntry>> datasets_;
    std::size_t dataset_counter_ = 0;
    std::size_t job_counter_ = 0;
    std::vector<std::jthread> runners_;
};

} // namespace fairpilot

#endif
