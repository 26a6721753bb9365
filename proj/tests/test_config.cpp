#include "fairpilot/config.hpp"
#include "fairpilot/pipeline.hpp"
#include "fairpilot/serialize.hpp"
#include "fairpilot/synthetic.hpp"

#include <gtest/gtest.h>

using namespace fairpilot;

TEST(Config, DefaultsToAllFamiliesAndFiveMetrics) {
    const auto c = parse_config("{}");
    ASSERT_EQ(c.spaces.size(), 4u);
    EXPECT_EQ(c.metrics.size(), 5u);
    EXPECT_EQ(c.n_splits, 10u);
    EXPECT_EQ(c.mode, Dominance::weak);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(c.spaces[i].family, kAllFamilies[i]);
    }
}

TEST(Config, SpaceOverridesReplaceSingleParameters) {
    const auto c = parse_config(R"({"models": ["lr"], "spaces": {"lr": {"C": [1, 10]}}})");
    ASSERT_EQ(c.spaces.size(), 1u);
    EXPECT_EQ(expand(c.spaces[0]).size(), 4u);
    // Integer C values are normalized to reals.
    EXPECT_TRUE(std::holds_alternative<double>(c.spaces[0].find("C")->values[0]));
}

TEST(Config, CollectsEveryViolation) {
    try {
        parse_config(R"({"models": ["lr", "svc"], "spaces": {"lr": {"C": [0]}, "svc": {"C": [], "kernel": ["cubic"]}}})");
        FAIL();
    } catch (const SpaceValidationError& e) {
        EXPECT_EQ(e.violations().size(), 3u);
        EXPECT_NE(std::string(e.what()).find("C must be > 0"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("cubic"), std::string::npos);
    }
}

TEST(Config, RejectsBadFields) {
    EXPECT_THROW(parse_config("{"), ParseError);
    EXPECT_THROW(parse_config(R"({"models": ["knn"]})"), ValidationError);
    EXPECT_THROW(parse_config(R"({"metrics": ["happiness"]})"), ValidationError);
    EXPECT_THROW(parse_config(R"({"mode": "lenient"})"), ValidationError);
    EXPECT_THROW(parse_config(R"({"splits": {"n_splits": 0}})"), ValidationError);
    EXPECT_THROW(parse_config(R"({"splits": {"test_fraction": 1.5}})"), ValidationError);
    EXPECT_THROW(parse_config(R"({"seed": "seven"})"), ValidationError);
    EXPECT_THROW(parse_config(R"({"models": ["lr"], "spaces": {"svc": {}}})"), ValidationError);
}

TEST(Config, TaskAndPreprocessing) {
    const auto c = parse_config(R"({
      "task": {"target": "deg", "positive": [1], "sensitive": "race", "group0": ["Black", "Hispanic"]},
      "preprocess": {"missing_codes": [-9, "NA"], "impute": "median", "standardize": "zscore"}})");
    ASSERT_TRUE(c.task && c.preprocess);
    EXPECT_EQ(c.task->positive_values, (std::vector<std::string>{"1"}));
    EXPECT_EQ(c.preprocess->missing_codes, (std::vector<std::string>{"-9", "NA"}));
    EXPECT_EQ(c.preprocess->impute, Impute::median);
    EXPECT_EQ(c.preprocess->standardize, Standardize::zscore);
}

TEST(Config, JsonRoundTrip) {
    const auto c = parse_config(R"({"models": ["dt", "lr"], "metrics": ["statistical_parity"], "seed": 5,
                                    "splits": {"n_splits": 3}, "mode": "strict"})");
    const auto again = config_from_json(to_json(c));
    EXPECT_EQ(to_json(again).dump(), to_json(c).dump());
}

TEST(Serialize, RecordsRoundTripExactly) {
    SyntheticSpec spec;
    spec.n_rows = 200;
    const auto d = prepare_dataset(synthetic_csv(spec), {}, synthetic_task());
    const auto cfg = parse_config(R"({"models": ["lr", "dt"], "splits": {"n_splits": 2},
                                      "spaces": {"dt": {"min_samples_leaf": [1, 50]}}})");
    const auto res = run_exploration(d, cfg, "x");
    const auto text = records_document(res);
    const auto back = result_from_json(Json::parse(text), "x");
    EXPECT_EQ(records_document(back), text);
    ASSERT_EQ(back.records.size(), res.records.size());
    EXPECT_TRUE(back.records[3].assignment == res.records[3].assignment);
    EXPECT_EQ(back.families, res.families);
}

TEST(Serialize, ParamValues) {
    EXPECT_EQ(param_to_json(ParamValue{std::int64_t{3}}).dump(), "3");
    EXPECT_EQ(param_to_json(ParamValue{0.001}).dump(), "0.001");
    EXPECT_EQ(std::get<std::string>(param_from_json(Json(nullptr))), "none");
    EXPECT_THROW(param_from_json(Json::array()), ParseError);
}
