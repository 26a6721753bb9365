#include "fairpilot/data.hpp"
#include "fairpilot/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace fairpilot;

namespace {

std::vector<double> numeric(const Table& t, std::string_view name) {
    const auto* c = t.find(name);
    EXPECT_NE(c, nullptr);
    return c ? c->values : std::vector<double>{};
}

Dataset make_dataset(std::size_t n, std::size_t n_pos) {
    Dataset d;
    d.features = Matrix(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        d.features(i, 0) = static_cast<double>(i);
        d.target.push_back(i < n_pos ? 1 : 0);
        d.sensitive.push_back(i % 2);
    }
    d.feature_names = {"x"};
    return d;
}

} // namespace

TEST(LoadCsv, InfersNumericAndCategoricalColumns) {
    const auto t = load_csv("a,b\n1,x\n2,y\n3,z");
    ASSERT_EQ(t.columns.size(), 2u);
    EXPECT_EQ(t.n_rows, 3u);
    EXPECT_EQ(t.columns[0].type, ColumnType::numeric);
    EXPECT_EQ(t.columns[1].type, ColumnType::categorical);
    EXPECT_EQ(t.columns[0].values, (std::vector<double>{1, 2, 3}));
    EXPECT_EQ(t.columns[1].text, (std::vector<std::string>{"x", "y", "z"}));
}

TEST(LoadCsv, MissingCodesAreMarkedMissing) {
    const auto t = load_csv("a,b\n-9,x\n2,-9\n", {"-9"});
    EXPECT_EQ(t.columns[0].type, ColumnType::numeric);
    EXPECT_TRUE(t.columns[0].missing[0]);
    EXPECT_TRUE(std::isnan(t.columns[0].values[0]));
    EXPECT_FALSE(t.columns[0].missing[1]);
    EXPECT_TRUE(t.columns[1].missing[1]);
}

TEST(LoadCsv, EmptyCellsAreMissing) {
    const auto t = load_csv("a,b\n,x\n2,\n");
    EXPECT_TRUE(t.columns[0].missing[0]);
    EXPECT_TRUE(t.columns[1].missing[1]);
    EXPECT_EQ(t.columns[0].type, ColumnType::numeric);
}

TEST(LoadCsv, QuotedFieldsCrlfAndBom) {
    const auto t = load_csv("\xEF\xBB\xBFname,v\r\n\"Smith, J\",1\r\n\"say \"\"hi\"\"\",2\r\n");
    EXPECT_EQ(t.columns[0].name, "name");
    EXPECT_EQ(t.columns[0].text[0], "Smith, J");
    EXPECT_EQ(t.columns[0].text[1], "say \"hi\"");
    EXPECT_EQ(t.columns[1].values, (std::vector<double>{1, 2}));
}

TEST(LoadCsv, HeaderOnlyFileHasNoRowsAndCannotBeEncoded) {
    const auto t = load_csv("y,s,x\n");
    EXPECT_EQ(t.n_rows, 0u);
    EXPECT_ANY_THROW(encode_task(t, {"y", {"1"}, "s", {"a"}, {}, {}}));
}

TEST(LoadCsv, EmptyInputIsAnError) {
    EXPECT_THROW(load_csv(""), ParseError);
}

TEST(LoadCsv, RaggedRowNamesTheRow) {
    try {
        load_csv("a,b\n1,2\n3\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
    }
}

TEST(LoadCsv, DuplicateHeaderIsAnError) {
    EXPECT_THROW(load_csv("a,a\n1,2\n"), ParseError);
}

TEST(Preprocess, SparseRowIsDropped) {
    // 10 columns, second row has 8 missing cells (0.8 > 0.75).
    const auto t = load_csv("c0,c1,c2,c3,c4,c5,c6,c7,c8,c9\n"
                            "1,1,1,1,1,1,1,1,1,1\n"
                            "2,2,,,,,,,,\n"
                            "3,3,3,3,3,3,3,3,3,3\n");
    PreprocessConfig cfg;
    cfg.impute = Impute::mean;
    const auto p = preprocess(t, cfg);
    EXPECT_EQ(p.n_rows, 2u);
    EXPECT_EQ(numeric(p, "c0"), (std::vector<double>{1, 3}));
}

TEST(Preprocess, RowAtThresholdIsKept) {
    // 3 of 4 missing is exactly 0.75: not above the threshold.
    const auto t = load_csv("a,b,c,d\n1,,,\n2,2,2,2\n3,3,3,3\n");
    PreprocessConfig cfg;
    cfg.impute = Impute::mean;
    EXPECT_EQ(preprocess(t, cfg).n_rows, 3u);
}

TEST(Preprocess, ZscoreUsesSampleStd) {
    const auto t = load_csv("a\n1\n2\n3\n");
    PreprocessConfig cfg;
    cfg.standardize = Standardize::zscore;
    const auto v = numeric(preprocess(t, cfg), "a");
    ASSERT_EQ(v.size(), 3u);
    EXPECT_DOUBLE_EQ(v[0], -1.0);
    EXPECT_DOUBLE_EQ(v[1], 0.0);
    EXPECT_DOUBLE_EQ(v[2], 1.0);
}

TEST(Preprocess, ZscoreOracleOnRandomColumn) {
    Rng rng(17);
    std::string csv = "a\n";
    std::vector<double> raw;
    for (int i = 0; i < 37; ++i) {
        raw.push_back(5.0 + 3.0 * rng.normal());
        csv += detail::format_number(raw.back()) + "\n";
    }
    PreprocessConfig cfg;
    cfg.standardize = Standardize::zscore;
    const auto v = numeric(preprocess(load_csv(csv), cfg), "a");
    const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / raw.size();
    double ss = 0.0;
    for (double x : raw) {
        ss += (x - mean) * (x - mean);
    }
    const double sd = std::sqrt(ss / (raw.size() - 1));
    for (std::size_t i = 0; i < raw.size(); ++i) {
        EXPECT_NEAR(v[i], (raw[i] - mean) / sd, 1e-12);
    }
}

TEST(Preprocess, ConstantColumnStandardizesToZero) {
    PreprocessConfig cfg;
    cfg.standardize = Standardize::zscore;
    EXPECT_EQ(numeric(preprocess(load_csv("a\n4\n4\n4\n"), cfg), "a"), (std::vector<double>{0, 0, 0}));
}

TEST(Preprocess, MeanAndMedianImputation) {
    PreprocessConfig cfg;
    cfg.impute = Impute::mean;
    EXPECT_EQ(numeric(preprocess(load_csv("a,b\n1,x\n,y\n3,z\n"), cfg), "a"), (std::vector<double>{1, 2, 3}));
    cfg.impute = Impute::median;
    EXPECT_EQ(numeric(preprocess(load_csv("a,b\n1,x\n,y\n2,z\n10,w\n"), cfg), "a"), (std::vector<double>{1, 2, 2, 10}));
}

TEST(Preprocess, CategoricalImputationUsesMode) {
    PreprocessConfig cfg;
    cfg.impute = Impute::mean;
    const auto p = preprocess(load_csv("c,n\nx,1\ny,2\n,3\ny,4\n"), cfg);
    EXPECT_EQ(p.find("c")->text[2], "y");
}

TEST(Preprocess, NoImputationDropsIncompleteRows) {
    const auto p = preprocess(load_csv("a,b\n1,2\n,3\n4,5\n"), {});
    EXPECT_EQ(p.n_rows, 2u);
    EXPECT_EQ(numeric(p, "a"), (std::vector<double>{1, 4}));
}

TEST(Preprocess, AllRowsDroppedIsAnError) {
    EXPECT_THROW(preprocess(load_csv("a,b\n,1\n2,\n"), {}), ValidationError);
}

TEST(Preprocess, PassthroughColumnsAreNotScaled) {
    PreprocessConfig cfg;
    cfg.standardize = Standardize::zscore;
    cfg.passthrough_columns = {"y"};
    const auto p = preprocess(load_csv("x,y\n1,0\n2,1\n3,1\n"), cfg);
    EXPECT_EQ(numeric(p, "y"), (std::vector<double>{0, 1, 1}));
}

TEST(Preprocess, IsIdempotentAfterStandardization) {
    PreprocessConfig cfg;
    cfg.standardize = Standardize::zscore;
    const auto once = preprocess(load_csv("a,b\n1,7\n2,3\n6,5\n"), cfg);
    const auto twice = preprocess(once, cfg);
    const auto a1 = numeric(once, "a"), a2 = numeric(twice, "a");
    for (std::size_t i = 0; i < a1.size(); ++i) {
        EXPECT_NEAR(a1[i], a2[i], 1e-12);
    }
}

TEST(EncodeTask, GroupsRaceIntoTwoCategories) {
    const auto t = load_csv("race,deg,x\nBlack,1,0.1\nHispanic,0,0.2\nMR,1,0.3\nAsian,0,0.4\nWhite,1,0.5\nWhite,0,0.6\n");
    const auto d = encode_task(t, {"deg", {"1"}, "race", {"Black", "Hispanic", "MR"}, {}, {}});
    EXPECT_EQ(d.sensitive, (std::vector<std::uint8_t>{0, 0, 0, 1, 1, 1}));
    EXPECT_EQ(d.target, (std::vector<std::uint8_t>{1, 0, 1, 0, 1, 0}));
    EXPECT_EQ(d.feature_names, (std::vector<std::string>{"x"}));
}

TEST(EncodeTask, SingleClassIsAnError) {
    const auto t = load_csv("y,s\n1,a\n1,b\n");
    EXPECT_THROW(encode_task(t, {"y", {"1"}, "s", {"a"}, {}, {}}), ValidationError);
}

TEST(EncodeTask, EmptyGroupMessage) {
    const auto t = load_csv("y,s\n1,a\n0,a\n");
    try {
        encode_task(t, {"y", {"1"}, "s", {"a"}, {}, {}});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("sensitive group 1 empty"), std::string::npos) << e.what();
    }
}

TEST(EncodeTask, UnknownDeclaredValueIsNamed) {
    const auto t = load_csv("y,s\n1,a\n0,b\n");
    try {
        encode_task(t, {"y", {"1"}, "s", {"zebra"}, {}, {}});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("zebra"), std::string::npos) << e.what();
    }
}

TEST(EncodeTask, MissingColumnIsNamed) {
    const auto t = load_csv("y,s\n1,a\n0,b\n");
    try {
        encode_task(t, {"label", {"1"}, "s", {"a"}, {}, {}});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("label"), std::string::npos);
    }
}

TEST(EncodeTask, PartitionViolationListsOffendingValues) {
    const auto t = load_csv("y,s\n1,a\n0,b\n1,c\n");
    try {
        encode_task(t, {"y", {"1"}, "s", {"a"}, {}, {"b"}});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("c"), std::string::npos);
    }
}

TEST(EncodeTask, OneHotEncodesCategoricalFeatures) {
    const auto t = load_csv("y,s,color,n\n1,a,red,1\n0,b,green,2\n1,a,blue,3\n0,b,red,4\n");
    const auto d = encode_task(t, {"y", {"1"}, "s", {"a"}, {}, {}});
    const std::vector<std::string> expected{"color=blue", "color=green", "color=red", "n"};
    EXPECT_EQ(d.feature_names, expected);
    ASSERT_EQ(d.features.cols(), 4u);
    for (std::size_t r = 0; r < 4; ++r) {
        EXPECT_DOUBLE_EQ(d.features(r, 0) + d.features(r, 1) + d.features(r, 2), 1.0);
    }
    EXPECT_DOUBLE_EQ(d.features(0, 2), 1.0);
    EXPECT_DOUBLE_EQ(d.features(2, 0), 1.0);
}

TEST(MakeSplits, DeterministicForSeed) {
    const auto d = make_dataset(50, 20);
    SplitPlan p;
    p.seed = 42;
    EXPECT_EQ(make_splits(d, p), make_splits(d, p));
    SplitPlan q = p;
    q.seed = 43;
    EXPECT_NE(make_splits(d, p), make_splits(d, q));
}

TEST(MakeSplits, SizesDisjointAndCovering) {
    const auto d = make_dataset(100, 50);
    for (bool stratified : {false, true}) {
        SplitPlan p;
        p.stratified = stratified;
        p.seed = 1;
        const auto splits = make_splits(d, p);
        ASSERT_EQ(splits.size(), 10u);
        for (const auto& s : splits) {
            EXPECT_EQ(s.test.size(), 30u);
            std::set<std::size_t> all(s.train.begin(), s.train.end());
            for (auto i : s.test) {
                EXPECT_TRUE(all.insert(i).second) << "row in both train and test";
            }
            EXPECT_EQ(all.size(), 100u);
        }
    }
}

TEST(MakeSplits, StratifiedPreservesClassBalance) {
    const auto d = make_dataset(50, 30);
    SplitPlan p;
    p.n_splits = 25;
    p.test_fraction = 0.2;
    p.seed = 5;
    for (const auto& s : make_splits(d, p)) {
        ASSERT_EQ(s.test.size(), 10u);
        const auto pos = std::count_if(s.test.begin(), s.test.end(), [&](auto i) { return d.target[i] == 1; });
        EXPECT_GE(pos, 5);
        EXPECT_LE(pos, 7);
    }
}

TEST(MakeSplits, Preconditions) {
    SplitPlan p;
    EXPECT_THROW(make_splits(make_dataset(3, 1), p), ValidationError);
    EXPECT_THROW(make_splits(make_dataset(10, 1), p), ValidationError);
    p.stratified = false;
    EXPECT_NO_THROW(make_splits(make_dataset(10, 1), p));
    p.test_fraction = 1.0;
    EXPECT_THROW(make_splits(make_dataset(10, 5), p), ValidationError);
}
