#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "ehrtl/errors.hpp"
#include "ehrtl/timeline.hpp"
#include "generators.hpp"

using namespace ehrtl;

namespace {

const Day kD1 = Day::from_ymd(2020, 4, 1);

Dataset two_days() {
    Dataset d;
    d.results = {gen::result("P", kD1, "Hb", 10, 12, 16), gen::result("P", kD1.plus(2), "Hb", 21, 12, 16),
                 gen::result("P", kD1.plus(2), "cTnI", 0.5, 0, 0.04)};
    std::sort(d.results.begin(), d.results.end(), result_key_less);
    add_missing_patients(d);
    d.patients["P"].day_status[kD1] = DayStatus::Hospitalized;
    d.cuts = compute_cuts(d.results);
    return d;
}

std::vector<Day> days(const ClinicalPath& p) {
    std::vector<Day> out;
    for (const auto& c : p.columns) out.push_back(c.day);
    return out;
}

std::vector<std::string> tests(const ClinicalPath& p) {
    std::vector<std::string> out;
    for (const auto& r : p.rows) out.push_back(r.test);
    return out;
}

// (test, day) -> relevant_change, independent of column/row indexing
std::map<std::pair<std::string, Day>, bool> cell_flags(const ClinicalPath& p) {
    std::map<std::pair<std::string, Day>, bool> out;
    for (const auto& c : p.cells) out[{p.rows[c.row].test, p.columns[c.column].day}] = c.relevant_change;
    return out;
}

}  // namespace

TEST(Path, OnlyDaysWithTests) {
    PathOptions o;
    o.only_days_with_tests = true;
    const auto p = build_clinical_path(two_days(), "P", o);
    EXPECT_EQ(days(p), (std::vector<Day>{kD1, kD1.plus(2)}));
    EXPECT_TRUE(p.columns[0].gap_after);
    EXPECT_FALSE(p.columns[1].gap_after);
    EXPECT_EQ(p.columns[0].status, DayStatus::Hospitalized);
    EXPECT_EQ(p.columns[1].status, DayStatus::Unknown);
}

TEST(Path, ContiguousWindow) {
    PathOptions o;
    o.date_from = kD1;
    o.date_to = kD1.plus(2);
    const auto p = build_clinical_path(two_days(), "P", o);
    EXPECT_EQ(days(p), (std::vector<Day>{kD1, kD1.next(), kD1.plus(2)}));
    for (const auto& c : p.columns) EXPECT_FALSE(c.gap_after);
    o.date_to = kD1.plus(5);
    EXPECT_EQ(build_clinical_path(two_days(), "P", o).columns.size(), 6u);
}

TEST(Path, RowsFollowGroupOrder) {
    const auto p = build_clinical_path(two_days(), "P", {});
    EXPECT_EQ(tests(p), (std::vector<std::string>{"Hb", "cTnI"}));
    EXPECT_EQ(p.rows[0].group, "Red Series Hemogram");
    EXPECT_EQ(p.rows[1].group, "Cardio Evaluation");
}

TEST(Path, CellsCategoriesAndFlags) {
    const auto p = build_clinical_path(two_days(), "P", {});
    ASSERT_EQ(p.cells.size(), 3u);
    const auto* hb2 = p.cell_at(0, 2);
    ASSERT_NE(hb2, nullptr);
    EXPECT_EQ(hb2->value, 21);
    EXPECT_TRUE(hb2->relevant_change);
    EXPECT_EQ(p.cell_at(0, 1), nullptr);
    EXPECT_EQ(p.cell_at(0, 0)->category, ResultCategory::Low);
    ASSERT_EQ(p.day_summaries.size(), 2u);
    EXPECT_EQ(p.day_summaries[1].test_count, 2);
    EXPECT_EQ(p.activity.size(), 2u);
}

TEST(Path, SelectionFilters) {
    PathOptions o;
    o.selected_tests = std::set<std::string, std::less<>>{"Hb"};
    const auto p = build_clinical_path(two_days(), "P", o);
    EXPECT_EQ(tests(p), std::vector<std::string>{"Hb"});
    EXPECT_EQ(p.cells.size(), 2u);
    o.selected_tests.reset();
    o.selected_groups = std::set<std::string, std::less<>>{"Cardio Evaluation"};
    EXPECT_EQ(tests(build_clinical_path(two_days(), "P", o)), std::vector<std::string>{"cTnI"});
}

TEST(Path, InvalidInput) {
    PathOptions o;
    o.date_from = kD1.plus(3);
    o.date_to = kD1;
    EXPECT_THROW(build_clinical_path(two_days(), "P", o), std::invalid_argument);
    EXPECT_THROW(build_clinical_path(two_days(), "Q", {}), NotFoundError);
    PathOptions wide;
    wide.date_from = Day::from_ymd(1900, 1, 1);
    wide.date_to = Day::from_ymd(2100, 1, 1);
    EXPECT_THROW(build_clinical_path(two_days(), "P", wide), std::invalid_argument);
    wide.only_days_with_tests = true;
    EXPECT_EQ(build_clinical_path(two_days(), "P", wide).columns.size(), 2u);
}

TEST(Path, ToggleOrder) {
    const auto asc = build_clinical_path(two_days(), "P", {});
    const auto desc = toggle_day_order(asc);
    EXPECT_EQ(desc.day_order, DayOrder::Descending);
    EXPECT_EQ(desc.columns.front().day, asc.columns.back().day);
    EXPECT_EQ(toggle_day_order(desc), asc);
    PathOptions o;
    o.day_order = DayOrder::Descending;
    EXPECT_EQ(build_clinical_path(two_days(), "P", o), desc);

    PathOptions one;
    one.date_from = one.date_to = kD1;
    const auto single = build_clinical_path(two_days(), "P", one);
    ASSERT_EQ(single.columns.size(), 1u);
    EXPECT_EQ(toggle_day_order(single).columns, single.columns);
    EXPECT_EQ(toggle_day_order(single).cells, single.cells);
}

TEST(Path, ExportDelimited) {
    std::ostringstream out;
    PathOptions o;
    o.only_days_with_tests = true;
    export_path_delimited(build_clinical_path(two_days(), "P", o), out);
    EXPECT_EQ(out.str(),
              "group|test|2020-04-01|2020-04-03\n"
              "Red Series Hemogram|Hb|L|H\n"
              "Cardio Evaluation|cTnI||H\n");
}

// Property suite over random patients.

TEST(PathProperty, FilterAndOrderInvariants) {
    gen::Rng rng(31);
    for (int i = 0; i < 500; ++i) {
        const auto d = gen::random_patient(rng);
        const auto rs = d.patient_results("P");

        PathOptions sparse;
        sparse.only_days_with_tests = true;
        const auto ps = build_clinical_path(d, "P", sparse);
        std::vector<int> per_column(ps.columns.size());
        for (const auto& c : ps.cells) ++per_column[c.column];
        for (int n : per_column) EXPECT_GT(n, 0);
        EXPECT_EQ(ps.cells.size(), rs.size());

        const auto pc = build_clinical_path(d, "P", {});
        for (std::size_t k = 1; k < pc.columns.size(); ++k) EXPECT_EQ(pc.columns[k].day - pc.columns[k - 1].day, 1);
        EXPECT_EQ(pc.cells.size(), rs.size());
        EXPECT_EQ(cell_flags(ps), cell_flags(pc));

        // flags equal a standalone per-series computation
        for (const auto& [key, flag] : cell_flags(pc)) {
            const auto s = test_series(d, "P", key.first);
            const auto it = std::find_if(s.points.begin(), s.points.end(), [&](const SeriesPoint& p) { return p.day == key.second; });
            ASSERT_NE(it, s.points.end());
            EXPECT_EQ(it->relevant_change, flag);
        }

        EXPECT_EQ(toggle_day_order(toggle_day_order(pc)), pc);
        EXPECT_EQ(toggle_day_order(toggle_day_order(ps)), ps);

        // window monotonicity
        const auto first = rs.front().day, last = std::max_element(rs.begin(), rs.end(), [](auto& a, auto& b) { return a.day < b.day; })->day;
        PathOptions outer;
        outer.date_from = first.plus(rng.integer(-5, 5));
        outer.date_to = last.plus(rng.integer(-5, 5));
        if (*outer.date_to < *outer.date_from) std::swap(*outer.date_from, *outer.date_to);
        PathOptions inner = outer;
        const int span = *outer.date_to - *outer.date_from;
        inner.date_from = outer.date_from->plus(rng.integer(0, span));
        inner.date_to = inner.date_from->plus(rng.integer(0, *outer.date_to - *inner.date_from));
        for (bool only : {false, true}) {
            outer.only_days_with_tests = inner.only_days_with_tests = only;
            const auto po = build_clinical_path(d, "P", outer);
            const auto pi = build_clinical_path(d, "P", inner);
            EXPECT_LE(pi.columns.size(), po.columns.size());
            EXPECT_LE(pi.cells.size(), po.cells.size());
            const auto fo = cell_flags(po);
            for (const auto& [key, flag] : cell_flags(pi)) {
                ASSERT_TRUE(fo.contains(key));
                EXPECT_EQ(fo.at(key), flag);
            }
        }
    }
}

TEST(PathProperty, RowOrderIndependentOfInputOrder) {
    gen::Rng rng(32);
    const GroupTable groups;
    for (int i = 0; i < 200; ++i) {
        const auto d = gen::random_patient(rng);
        auto shuffled = d;
        std::shuffle(shuffled.results.begin(), shuffled.results.end(), rng.engine());
        std::sort(shuffled.results.begin(), shuffled.results.end(), result_key_less);
        const auto rows = tests(build_clinical_path(d, "P", {}));
        EXPECT_EQ(rows, tests(build_clinical_path(shuffled, "P", {})));
        for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_TRUE(groups.row_less(rows[k - 1], rows[k]));
    }
}
