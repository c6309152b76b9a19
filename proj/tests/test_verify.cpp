#include <gtest/gtest.h>

#include "bifract/verify.hpp"
#include "support.hpp"

using namespace bifract;
using bifract::testing::problem;
using bifract::testing::uniform_knots;
using bifract::testing::vec;

namespace {

verify::Options quick() {
    verify::Options o;
    o.trials = 5000;
    o.r = 4;
    o.depth = 5;
    o.oversample = 4;
    o.cylinder_words = 8;
    o.cylinder_max_length = 4;
    return o;
}

void expect_all_pass(const std::vector<verify::Record>& records) {
    ASSERT_FALSE(records.empty());
    for (const auto& r : records) EXPECT_TRUE(r.passed) << r.to_json().dump();
}

} // namespace

TEST(Verify, SuiteNames) {
    const auto& names = verify::suite_names();
    for (const char* s : {"metric", "contraction", "fixedpoint", "vertices", "recursion", "cylinder"})
        EXPECT_NE(std::find(names.begin(), names.end(), s), names.end()) << s;
    EXPECT_THROW(verify::run("bogus", problem({0, 1}, {0, 0}, {0, 0}), quick()), Error);
}

TEST(Verify, ZeroScalingProblemPassesEverything) {
    expect_all_pass(verify::run("all", Problem(uniform_knots(2), vec({0, 1, 0}), vec({0, 0, 0})), quick()));
}

TEST(Verify, DefaultProblemPassesEverything) {
    expect_all_pass(verify::run("all", Problem(uniform_knots(2), vec({0, 1, 0}), vec({0.6, 0.8, 0.6})), quick()));
}

TEST(Verify, NonUniformProblemSkipsDimensionSuites) {
    const auto records = verify::run("all", problem({0, 0.3, 1}, {0, 1, 0}, {0.5, 0.5, 0.5}), quick());
    expect_all_pass(records);
    bool skipped = false;
    for (const auto& r : records)
        if (r.suite == "recursion") skipped = skipped || r.skipped;
    EXPECT_TRUE(skipped);
}

TEST(Verify, ChainsPassEverything) {
    Xorshift64Star rng(61);
    for (int t = 0; t < 3; ++t) expect_all_pass(verify::run("all", bifract::testing::random_chain(rng, 3), quick()));
}

TEST(Verify, RecordsSerialize) {
    const auto records = verify::run("metric", Problem(uniform_knots(2), vec({0, 1, 0}), vec({0.5, 0.5, 0.5})), quick());
    for (const auto& r : records) {
        const auto j = r.to_json();
        EXPECT_EQ(j["suite"], "metric");
        EXPECT_TRUE(j["status"] == "pass" || j["status"] == "skipped");
        EXPECT_TRUE(j.contains("check"));
    }
}
