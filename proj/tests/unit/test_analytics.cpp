#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "ehrtl/analytics.hpp"
#include "ehrtl/errors.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace ehrtl;

namespace {

std::vector<SeriesPoint> points(std::initializer_list<double> values) {
    std::vector<SeriesPoint> out;
    int i = 0;
    for (double v : values) out.push_back(SeriesPoint{Day(i++), v, ResultCategory::Normal, false});
    return out;
}

std::vector<bool> flags(const std::vector<SeriesPoint>& ps) {
    std::vector<bool> out;
    for (const auto& p : ps) out.push_back(p.relevant_change);
    return out;
}

Dataset hb_patient() {
    Dataset d;
    const auto day = Day::from_ymd(2020, 5, 1);
    d.results = {gen::result("P1", day, "Hb", 5, 12, 16), gen::result("P1", day.plus(3), "Hb", 10, 12, 16),
                 gen::result("P1", day.plus(4), "Hb", 13, 12, 17), gen::result("P1", day, "CRP", 50, 0, 5),
                 gen::result("P1", day.plus(4), "CRP", 2, 0, 5)};
    std::sort(d.results.begin(), d.results.end(), result_key_less);
    add_missing_patients(d);
    d.cuts = compute_cuts(d.results);
    return d;
}

}  // namespace

TEST(RateOfChange, Examples) {
    EXPECT_EQ(rate_of_change(50, 100), 100.0);
    EXPECT_EQ(rate_of_change(100, 100), 0.0);
    EXPECT_NEAR(rate_of_change(100, 40), -60.0, 1e-12);
    EXPECT_NEAR(rate_of_change(100, 40), oracle::rate_of_change(100, 40), 1e-12);
    EXPECT_EQ(rate_of_change(0, 3), INFINITY);
    EXPECT_EQ(rate_of_change(0, -3), -INFINITY);
    EXPECT_EQ(rate_of_change(0, 0), 0.0);
}

TEST(RateOfChange, Relevance) {
    EXPECT_TRUE(is_relevant_change(100, 100));
    EXPECT_TRUE(is_relevant_change(-100, 100));
    EXPECT_FALSE(is_relevant_change(99.999, 100));
    EXPECT_TRUE(is_relevant_change(INFINITY, 100));
    EXPECT_TRUE(is_relevant_change(-INFINITY, 1e9));
    const auto obs = observe_change(5, 10);
    EXPECT_EQ(obs.rc_percent, 100.0);
    EXPECT_TRUE(obs.relevant);
}

TEST(RateOfChange, Properties) {
    gen::Rng rng(21);
    for (int i = 0; i < 5000; ++i) {
        const double a = rng.chance(0.5) ? rng.uniform(1e-6, 1e6) : -rng.uniform(1e-6, 1e6);
        const double b = rng.uniform(-1e6, 1e6);
        EXPECT_EQ(rate_of_change(a, a), 0.0);
        EXPECT_TRUE(oracle::close(rate_of_change(a, b), oracle::rate_of_change(a, b), 1e-9, 1e-6)) << a << " " << b;
        if (a > 0 && b != a) EXPECT_EQ(std::signbit(rate_of_change(a, b)), b < a);
        const double k = rng.uniform(1e-3, 1e3);
        EXPECT_TRUE(oracle::close(rate_of_change(a, b), rate_of_change(a * k, b * k), 1e-9, 1e-7));
    }
}

TEST(Flags, Examples) {
    EXPECT_EQ(flags(flag_relevant_changes(points({5, 10}))), (std::vector<bool>{false, true}));
    EXPECT_EQ(flags(flag_relevant_changes(points({100, 150}))), (std::vector<bool>{false, false}));
    EXPECT_EQ(flags(flag_relevant_changes(points({0, 0, 3}))), (std::vector<bool>{false, false, true}));
    EXPECT_EQ(flags(flag_relevant_changes(points({100, 160}), 50)), (std::vector<bool>{false, true}));
    EXPECT_TRUE(flag_relevant_changes({}).empty());
    EXPECT_THROW(flag_relevant_changes(points({1}), 0), std::invalid_argument);
    EXPECT_THROW(flag_relevant_changes(points({1}), -5), std::invalid_argument);
}

TEST(Flags, IndependentOfCalendarSpacing) {
    gen::Rng rng(22);
    for (int i = 0; i < 300; ++i) {
        std::vector<SeriesPoint> a, b;
        int day = 0;
        for (int k = 0; k < 12; ++k) {
            const double v = rng.chance(0.1) ? 0.0 : rng.uniform(0.1, 100);
            a.push_back({Day(k), v, ResultCategory::Normal, false});
            day += rng.integer(1, 30);
            b.push_back({Day(day), v, ResultCategory::Normal, false});
        }
        const double thr = rng.uniform(1, 300);
        const auto fa = flags(flag_relevant_changes(a, thr));
        EXPECT_EQ(fa, flags(flag_relevant_changes(b, thr)));
        for (std::size_t k = 1; k < a.size(); ++k)
            EXPECT_EQ(fa[k], oracle::relevant(oracle::rate_of_change(a[k - 1].value, a[k].value), thr));
    }
}

TEST(Series, PointsOverlayAndFlags) {
    const auto d = hb_patient();
    const auto s = test_series(d, "P1", "Hb");
    ASSERT_EQ(s.points.size(), 3u);
    EXPECT_EQ(s.unit, "u");
    EXPECT_EQ(s.overlay.ref_min, 12);
    EXPECT_EQ(s.overlay.ref_max, 17);  // latest record
    EXPECT_TRUE(s.points[1].relevant_change);
    EXPECT_EQ(s.relevant_change_days, std::vector<Day>{s.points[1].day});
    std::vector<Day> flagged;
    for (const auto& p : s.points)
        if (p.relevant_change) flagged.push_back(p.day);
    EXPECT_EQ(flagged, s.relevant_change_days);
}

TEST(Series, EmptyWindowStillReturnsOverlay) {
    const auto d = hb_patient();
    const auto far = Day::from_ymd(2030, 1, 1);
    const auto s = test_series(d, "P1", "Hb", DayFilter{far, far});
    EXPECT_TRUE(s.points.empty());
    EXPECT_EQ(s.overlay.ref_min, 12);
}

TEST(Series, WindowKeepsFullHistoryFlags) {
    const auto d = hb_patient();
    const auto day = Day::from_ymd(2020, 5, 1);
    const auto s = test_series(d, "P1", "Hb", DayFilter{day.plus(3), std::nullopt});
    ASSERT_EQ(s.points.size(), 2u);
    EXPECT_TRUE(s.points[0].relevant_change);  // doubled from a point outside the window
}

TEST(Series, UnknownIdsThrow) {
    const auto d = hb_patient();
    EXPECT_THROW(test_series(d, "nobody", "Hb"), NotFoundError);
    EXPECT_THROW(test_series(d, "P1", "PLT"), NotFoundError);
}

TEST(Summaries, CountsPerDay) {
    Dataset d;
    const auto day = Day::from_ymd(2020, 1, 1);
    d.results = {gen::result("P", day, "A", 5, 0, 10), gen::result("P", day, "B", 15, 0, 10),
                 gen::result("P", day, "C", -5, 0, 10), gen::result("P", day.plus(2), "A", 20, 0, 10)};
    std::sort(d.results.begin(), d.results.end(), result_key_less);
    add_missing_patients(d);
    const auto sums = day_summaries(d, "P");
    ASSERT_EQ(sums.size(), 2u);  // no entry for the day without tests
    EXPECT_EQ(sums[0], (DaySummary{day, 3, 1, 2, 0}));
    EXPECT_EQ(sums[1], (DaySummary{day.plus(2), 1, 0, 1, 1}));
    const auto act = activity_series(d, "P");
    ASSERT_EQ(act.size(), 2u);
    EXPECT_EQ(act[0], (ActivityPoint{day, 3, 0}));
}

TEST(Summaries, TotalsEqualWindowedResultCount) {
    gen::Rng rng(23);
    for (int i = 0; i < 200; ++i) {
        const auto d = gen::random_patient(rng);
        const auto rs = d.patient_results("P");
        const auto from = rs.front().day.plus(rng.integer(-3, 20));
        const DayFilter f{from, from.plus(rng.integer(0, 30))};
        const auto sums = day_summaries(d, "P", f);
        const auto total = std::accumulate(sums.begin(), sums.end(), 0, [](int a, const DaySummary& s) { return a + s.test_count; });
        const auto expected = std::count_if(rs.begin(), rs.end(), [&](const LabResult& r) { return f.contains(r.day); });
        EXPECT_EQ(total, expected);
        for (const auto& s : sums) EXPECT_EQ(s.test_count, s.normal_count + s.abnormal_count);
        const auto act = to_activity(sums);
        ASSERT_EQ(act.size(), sums.size());
        for (std::size_t k = 0; k < act.size(); ++k) {
            EXPECT_EQ(act[k].test_count, sums[k].test_count);
            EXPECT_EQ(act[k].relevant_change_count, sums[k].relevant_change_count);
        }
    }
}

TEST(Summaries, EmptyHistory) {
    Dataset d;
    d.patients["P"].patient_id = "P";
    EXPECT_TRUE(day_summaries(d, "P").empty());
    EXPECT_TRUE(activity_series(d, "P").empty());
}
