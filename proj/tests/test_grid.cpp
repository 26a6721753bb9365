#include "fairpilot/grid.hpp"
#include "fairpilot/pipeline.hpp"
#include "fairpilot/serialize.hpp"
#include "fairpilot/synthetic.hpp"

#include <gtest/gtest.h>

#include <mutex>

using namespace fairpilot;

namespace {

const Dataset& toy() {
    static const Dataset d = [] {
        SyntheticSpec spec;
        spec.n_rows = 300;
        spec.seed = 4;
        return prepare_dataset(synthetic_csv(spec), {}, synthetic_task());
    }();
    return d;
}

HyperparamSpace lr_space(std::vector<ParamValue> cs, std::vector<ParamValue> penalties = {std::string("l2")}) {
    return {ModelFamily::logistic_regression, {{"C", std::move(cs)}, {"penalty", std::move(penalties)}}};
}

bool has_violation(const std::vector<Violation>& v, std::string_view text) {
    return std::any_of(v.begin(), v.end(), [&](const auto& x) { return x.message.find(text) != std::string::npos; });
}

} // namespace

TEST(DefaultSpace, CardinalitiesAreRangeProducts) {
    EXPECT_EQ(expand(default_space(ModelFamily::decision_tree)).size(), 2u * 3 * 6 * 6 * 2);
    EXPECT_EQ(expand(default_space(ModelFamily::random_forest)).size(), 864u);
    EXPECT_EQ(expand(default_space(ModelFamily::logistic_regression)).size(), 14u);
    EXPECT_EQ(expand(default_space(ModelFamily::svc)).size(), 28u);
}

TEST(DefaultSpace, ShapesAndLevels) {
    const auto dt = default_space(ModelFamily::decision_tree);
    EXPECT_EQ(dt.params.size(), 5u);
    EXPECT_EQ(default_space(ModelFamily::logistic_regression).find("C")->values.size(), 7u);
    EXPECT_EQ(default_space(ModelFamily::svc).find("kernel")->values.size(), 4u);
    for (auto f : kAllFamilies) {
        EXPECT_TRUE(validate_space(default_space(f)).empty()) << to_string(f);
    }
}

TEST(Expand, LexicographicWithLastParameterFastest) {
    const auto a = expand(default_space(ModelFamily::logistic_regression));
    EXPECT_EQ(std::get<double>(*a[0].get("C")), 0.001);
    EXPECT_EQ(std::get<std::string>(*a[0].get("penalty")), "l2");
    EXPECT_EQ(std::get<double>(*a[1].get("C")), 0.001);
    EXPECT_EQ(std::get<std::string>(*a[1].get("penalty")), "none");
    EXPECT_EQ(std::get<double>(*a[2].get("C")), 0.01);
    EXPECT_EQ(std::get<double>(*a.back().get("C")), 1000.0);
}

TEST(Expand, AllAssignmentsDistinct) {
    const auto a = expand(default_space(ModelFamily::random_forest));
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            ASSERT_FALSE(a[i] == a[j]);
        }
    }
}

TEST(Expand, SingleValueListsGiveOneAssignment) {
    EXPECT_EQ(expand(lr_space({1.0})).size(), 1u);
}

TEST(Expand, CapIsEnforced) {
    EXPECT_THROW(expand(default_space(ModelFamily::decision_tree), 100), ValidationError);
    EXPECT_EQ(grid_size(default_space(ModelFamily::decision_tree)), 432.0);
}

TEST(ValidateSpace, Violations) {
    EXPECT_TRUE(has_violation(validate_space(lr_space({0.0})), "C must be > 0"));
    EXPECT_TRUE(has_violation(validate_space(lr_space({-1.0, 1.0})), "C must be > 0"));
    auto dt = default_space(ModelFamily::decision_tree);
    dt.params[0].values.clear();
    EXPECT_TRUE(has_violation(validate_space(dt), "empty range"));
    EXPECT_TRUE(has_violation(validate_space(lr_space({1.0, 1.0})), "duplicate"));
    EXPECT_TRUE(has_violation(validate_space(lr_space({1.0}, {std::string("l1")})), "l1"));
    auto extra = lr_space({1.0});
    extra.params.push_back({"gamma", {1.0}});
    EXPECT_TRUE(has_violation(validate_space(extra), "unknown"));
    HyperparamSpace missing{ModelFamily::logistic_regression, {{"C", {1.0}}}};
    EXPECT_TRUE(has_violation(validate_space(missing), "missing"));
    auto leaf = default_space(ModelFamily::decision_tree);
    for (auto& p : leaf.params) {
        if (p.name == "min_samples_leaf") p.values = {std::int64_t{0}};
    }
    EXPECT_FALSE(validate_space(leaf).empty());
}

TEST(RunGrid, ProgressSinkReceivesOneTickPerTask) {
    ProgressCounter progress;
    GridOptions opt;
    opt.progress = &progress;
    SplitPlan plan;
    plan.n_splits = 3;
    plan.seed = 1;
    const auto recs = run_grid(toy(), lr_space({0.1, 1.0}), plan, kDefaultMetrics, 1, opt);
    EXPECT_EQ(recs.size(), 2u);
    EXPECT_EQ(progress.completed(), 6u);
    EXPECT_EQ(progress.total(), 6u);
    EXPECT_DOUBLE_EQ(progress.fraction(), 1.0);
}

TEST(RunGrid, SingleSplitHasZeroVariance) {
    SplitPlan plan;
    plan.n_splits = 1;
    const auto recs = run_grid(toy(), lr_space({1.0}), plan, kDefaultMetrics, 1);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].accuracy.variance, 0.0);
    for (const auto& m : recs[0].metrics) {
        EXPECT_EQ(m.gap.variance, 0.0);
        EXPECT_EQ(m.score.variance, 0.0);
    }
}

TEST(RunGrid, AggregatesMatchPerSplitOracle) {
    const auto& d = toy();
    SplitPlan plan;
    plan.n_splits = 4;
    plan.seed = 9;
    const auto splits = make_splits(d, plan);
    const auto space = default_space(ModelFamily::decision_tree);
    const auto recs = run_grid(d, space, splits, kDefaultMetrics, 77);
    const auto assignments = expand(space);
    for (std::size_t a : {0u, 17u, 431u}) {
        std::vector<double> acc;
        std::vector<std::vector<double>> gaps(kDefaultMetrics.size());
        for (std::size_t s = 0; s < splits.size(); ++s) {
            const auto m = train(d.features.select_rows(splits[s].train), detail::gather(d.target, splits[s].train),
                                 assignments[a], task_seed(77, ModelFamily::decision_tree, a, s));
            const auto pred = predict(m, d.features.select_rows(splits[s].test));
            const auto y = detail::gather(d.target, splits[s].test);
            const auto g = detail::gather(d.sensitive, splits[s].test);
            std::size_t ok = 0;
            for (std::size_t i = 0; i < y.size(); ++i) {
                ok += y[i] == pred[i];
            }
            acc.push_back(static_cast<double>(ok) / static_cast<double>(y.size()));
            for (std::size_t k = 0; k < kDefaultMetrics.size(); ++k) {
                if (auto gap = fairness_gap(confusion_by_group(y, pred, g), kDefaultMetrics[k])) {
                    gaps[k].push_back(*gap);
                }
            }
        }
        auto mean = [](const std::vector<double>& v) {
            double s = 0.0;
            for (double x : v) s += x;
            return s / static_cast<double>(v.size());
        };
        auto var = [&](const std::vector<double>& v) {
            const double mu = mean(v);
            double s = 0.0;
            for (double x : v) s += (x - mu) * (x - mu);
            return s / static_cast<double>(v.size());
        };
        EXPECT_NEAR(recs[a].accuracy.mean, mean(acc), 1e-12);
        EXPECT_NEAR(recs[a].accuracy.variance, var(acc), 1e-12);
        for (std::size_t k = 0; k < kDefaultMetrics.size(); ++k) {
            const auto& ms = recs[a].metrics[k];
            EXPECT_EQ(ms.defined, gaps[k].size() == splits.size());
            if (ms.defined) {
                EXPECT_NEAR(ms.gap.mean, mean(gaps[k]), 1e-12);
                EXPECT_NEAR(ms.score.mean, 1.0 - mean(gaps[k]), 1e-12);
                EXPECT_NEAR(ms.gap.variance, var(gaps[k]), 1e-12);
            }
        }
    }
}

TEST(RunGrid, WorkerCountDoesNotChangeRecords) {
    SplitPlan plan;
    plan.n_splits = 3;
    plan.seed = 2;
    auto space = default_space(ModelFamily::random_forest);
    for (auto& p : space.params) {
        if (p.name == "min_samples_leaf" || p.name == "min_samples_split") p.values.resize(2);
    }
    GridOptions serial, parallel;
    serial.models.rf_trees = parallel.models.rf_trees = 5;
    parallel.workers = 4;
    ExplorationResult a, b;
    a.records = run_grid(toy(), space, plan, kDefaultMetrics, 3, serial);
    b.records = run_grid(toy(), space, plan, kDefaultMetrics, 3, parallel);
    EXPECT_EQ(records_document(a), records_document(b));
}

TEST(RunGrid, FailedSplitsAreFlaggedAndOthersAggregated) {
    const auto& d = toy();
    std::vector<std::size_t> zeros, ones;
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
        (d.target[i] ? ones : zeros).push_back(i);
    }
    SplitPlan plan;
    plan.n_splits = 2;
    auto splits = make_splits(d, plan);
    // Single-class training partition: training fails on split 1.
    splits[1].train = {zeros.begin(), zeros.begin() + 20};
    const auto recs = run_grid(d, lr_space({1.0}), splits, kDefaultMetrics, 1);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].failed_splits, (std::vector<std::size_t>{1}));
    EXPECT_EQ(recs[0].n_splits, 1u);
    EXPECT_TRUE(recs[0].usable);
    EXPECT_FALSE(recs[0].failure.empty());

    splits[0].train = splits[1].train;
    const auto dead = run_grid(d, lr_space({1.0}), splits, kDefaultMetrics, 1);
    EXPECT_FALSE(dead[0].usable);
    EXPECT_EQ(dead[0].failed_splits.size(), 2u);
}

TEST(RunGrid, ModelHookSeesEveryTrainedModel) {
    std::mutex mu;
    std::size_t seen = 0;
    GridOptions opt;
    opt.workers = 3;
    opt.on_model = [&](const TrainedModel& m) {
        std::lock_guard lock(mu);
        EXPECT_EQ(m.family(), ModelFamily::svc);
        ++seen;
    };
    SplitPlan plan;
    plan.n_splits = 2;
    run_grid(toy(), default_space(ModelFamily::svc), plan, kDefaultMetrics, 1, opt);
    EXPECT_EQ(seen, 56u);
}

TEST(RunGrid, InvalidSpaceIsRejectedBeforeTraining) {
    SplitPlan plan;
    EXPECT_THROW(run_grid(toy(), lr_space({0.0}), plan, kDefaultMetrics, 1), ValidationError);
}
