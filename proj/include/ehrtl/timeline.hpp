#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ehrtl/analytics.hpp"
#include "ehrtl/dataset.hpp"
#include "ehrtl/model.hpp"

namespace ehrtl {

enum class DayOrder { Ascending, Descending };

std::string_view to_string(DayOrder o) noexcept;

struct PathOptions {
    std::optional<Day> date_from;
    std::optional<Day> date_to;
    bool only_days_with_tests = false;
    DayOrder day_order = DayOrder::Ascending;
    std::optional<std::set<std::string, std::less<>>> selected_tests;
    std::optional<std::set<std::string, std::less<>>> selected_groups;
    double threshold_percent = kDefaultThresholdPercent;
};

struct PathColumn {
    Day day;
    DayStatus status = DayStatus::Unknown;
    /// The next visible column is not the adjacent calendar day.
    bool gap_after = false;

    friend bool operator==(const PathColumn&, const PathColumn&) = default;
};

struct PathRow {
    std::string group;
    std::string test;
    std::string unit;

    friend bool operator==(const PathRow&, const PathRow&) = default;
};

struct PathCell {
    std::size_t row = 0;
    std::size_t column = 0;
    double value = 0.0;
    ResultCategory category = ResultCategory::Normal;
    bool relevant_change = false;

    friend bool operator==(const PathCell&, const PathCell&) = default;
};

/// The day x test matrix of one patient, ready to render. Cells are sparse
/// and sorted by (row, column); summaries follow column order.
struct ClinicalPath {
    Patient patient;
    DayOrder day_order = DayOrder::Ascending;
    double threshold_percent = kDefaultThresholdPercent;
    std::vector<PathColumn> columns;
    std::vector<PathRow> rows;
    std::vector<PathCell> cells;
    std::vector<DaySummary> day_summaries;
    std::vector<ActivityPoint> activity;

    [[nodiscard]] const PathCell* cell_at(std::size_t row, std::size_t column) const;

    friend bool operator==(const ClinicalPath&, const ClinicalPath&) = default;
};

/// Longest contiguous window accepted when the "only days with tests" filter
/// is off.
inline constexpr std::int32_t kMaxContiguousDays = 36600;

/// Throws NotFoundError for an unknown patient and std::invalid_argument
/// for inconsistent options.
ClinicalPath build_clinical_path(const Dataset& dataset, std::string_view patient_id, const PathOptions& options,
                                 const GroupTable& groups = GroupTable{});

ClinicalPath toggle_day_order(ClinicalPath path);

/// Rows x columns of category codes (VL/L/N/H/VH, empty for no result),
/// with a header row of ISO dates.
void export_path_delimited(const ClinicalPath& path, std::ostream& out, char separator = '|');

}  // namespace ehrtl
