#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ehrtl/dataset.hpp"

namespace ehrtl {

inline constexpr double kDefaultThresholdPercent = 100.0;

/// Percentage change relative to the earlier value: (later / earlier - 1) * 100.
/// From a zero baseline the change is +/- infinity (sign of `later`), and
/// 0 -> 0 is no change.
double rate_of_change(double v_earlier, double v_later) noexcept;

/// |rc| >= threshold; infinite changes are always relevant.
bool is_relevant_change(double rc_percent, double threshold_percent) noexcept;

ChangeObservation observe_change(double v_earlier, double v_later,
                                 double threshold_percent = kDefaultThresholdPercent) noexcept;

/// Inclusive day window; either end may be open.
struct DayFilter {
    std::optional<Day> from;
    std::optional<Day> to;

    [[nodiscard]] bool contains(Day d) const noexcept {
        return (!from || *from <= d) && (!to || d <= *to);
    }
};

struct SeriesPoint {
    Day day;
    double value = 0.0;
    ResultCategory category = ResultCategory::Normal;
    bool relevant_change = false;

    friend bool operator==(const SeriesPoint&, const SeriesPoint&) = default;
};

/// Flags each point whose change from the previous observed point reaches
/// the threshold. The first point is never flagged; calendar gaps between
/// observations are irrelevant. Throws std::invalid_argument if
/// threshold_percent <= 0.
std::vector<SeriesPoint> flag_relevant_changes(std::vector<SeriesPoint> series,
                                               double threshold_percent = kDefaultThresholdPercent);

/// Horizontal lines drawn behind a single-test chart.
struct SeriesOverlay {
    double ref_min = 0.0;
    double ref_max = 0.0;
    std::optional<double> low_cut;   // effective, clamped to ref_min
    std::optional<double> high_cut;  // effective, clamped to ref_max
};

struct TestSeries {
    std::string patient_id;
    std::string test;
    std::string unit;
    std::vector<SeriesPoint> points;
    SeriesOverlay overlay;
    std::vector<Day> relevant_change_days;
};

/// Categorized and flagged points of one patient's test inside `filter`.
/// Flags are computed over the full history, then windowed. Overlay
/// reference lines come from the most recent result in the window (or in
/// the full history when the window is empty). Throws NotFoundError.
TestSeries test_series(const Dataset& dataset, std::string_view patient_id, std::string_view test,
                       const DayFilter& filter = {}, double threshold_percent = kDefaultThresholdPercent);

struct DaySummary {
    Day day;
    int test_count = 0;
    int normal_count = 0;
    int abnormal_count = 0;
    int relevant_change_count = 0;

    friend bool operator==(const DaySummary&, const DaySummary&) = default;
};

/// One entry per day with at least one result, ascending. Throws NotFoundError.
std::vector<DaySummary> day_summaries(const Dataset& dataset, std::string_view patient_id,
                                      const DayFilter& filter = {},
                                      double threshold_percent = kDefaultThresholdPercent);

struct ActivityPoint {
    Day day;
    int test_count = 0;
    int relevant_change_count = 0;

    friend bool operator==(const ActivityPoint&, const ActivityPoint&) = default;
};

std::vector<ActivityPoint> activity_series(const Dataset& dataset, std::string_view patient_id,
                                           const DayFilter& filter = {},
                                           double threshold_percent = kDefaultThresholdPercent);
std::vector<ActivityPoint> to_activity(std::span<const DaySummary> summaries);

/// A patient's full-history points for one test series, categorized and
/// flagged. `results` must be one sorted series.
std::vector<SeriesPoint> flagged_points(const Dataset& dataset, std::span<const LabResult> results,
                                        double threshold_percent);

}  // namespace ehrtl
