#include "ehrtl/analytics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "ehrtl/errors.hpp"

namespace ehrtl {

double rate_of_change(double v_earlier, double v_later) noexcept {
    if (v_earlier == 0.0) {
        if (v_later == 0.0) return 0.0;
        return std::copysign(std::numeric_limits<double>::infinity(), v_later);
    }
    return (v_later / v_earlier - 1.0) * 100.0;
}

bool is_relevant_change(double rc_percent, double threshold_percent) noexcept {
    return std::isinf(rc_percent) || std::fabs(rc_percent) >= threshold_percent;
}

ChangeObservation observe_change(double v_earlier, double v_later, double threshold_percent) noexcept {
    const double rc = rate_of_change(v_earlier, v_later);
    return ChangeObservation{v_earlier, v_later, rc, is_relevant_change(rc, threshold_percent), threshold_percent};
}

std::vector<SeriesPoint> flag_relevant_changes(std::vector<SeriesPoint> series, double threshold_percent) {
    if (!(threshold_percent > 0.0)) throw std::invalid_argument("threshold must be positive");
    for (std::size_t i = 0; i < series.size(); ++i)
        series[i].relevant_change =
            i > 0 && is_relevant_change(rate_of_change(series[i - 1].value, series[i].value), threshold_percent);
    return series;
}

std::vector<SeriesPoint> flagged_points(const Dataset& dataset, std::span<const LabResult> results,
                                        double threshold_percent) {
    std::vector<SeriesPoint> points;
    points.reserve(results.size());
    for (const auto& r : results) points.push_back(SeriesPoint{r.day, r.value, dataset.category_of(r), false});
    return flag_relevant_changes(std::move(points), threshold_percent);
}

namespace {

const Patient& require_patient(const Dataset& dataset, std::string_view patient_id) {
    const auto* p = dataset.find_patient(patient_id);
    if (!p) throw NotFoundError("unknown patient '" + std::string(patient_id) + "'");
    return *p;
}

}  // namespace

TestSeries test_series(const Dataset& dataset, std::string_view patient_id, std::string_view test,
                       const DayFilter& filter, double threshold_percent) {
    require_patient(dataset, patient_id);
    const auto results = dataset.series(patient_id, test);
    if (results.empty())
        throw NotFoundError("patient '" + std::string(patient_id) + "' has no results for test '" + std::string(test) + "'");

    TestSeries out;
    out.patient_id = std::string(patient_id);
    out.test = std::string(test);
    out.unit = results.back().unit;

    const auto all = flagged_points(dataset, results, threshold_percent);
    const LabResult* overlay_source = &results.back();
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (!filter.contains(all[i].day)) continue;
        out.points.push_back(all[i]);
        overlay_source = &results[i];
        if (all[i].relevant_change) out.relevant_change_days.push_back(all[i].day);
    }

    const auto& cuts = dataset.cuts_for(test);
    out.overlay.ref_min = overlay_source->ref_min;
    out.overlay.ref_max = overlay_source->ref_max;
    out.overlay.low_cut = effective_low_cut(overlay_source->ref_min, cuts);
    out.overlay.high_cut = effective_high_cut(overlay_source->ref_max, cuts);
    return out;
}

std::vector<DaySummary> day_summaries(const Dataset& dataset, std::string_view patient_id, const DayFilter& filter,
                                      double threshold_percent) {
    require_patient(dataset, patient_id);
    const auto results = dataset.patient_results(patient_id);
    std::map<Day, DaySummary> by_day;
    for (std::size_t i = 0; i < results.size();) {
        std::size_t j = i;
        while (j < results.size() && results[j].test == results[i].test) ++j;
        for (const auto& p : flagged_points(dataset, results.subspan(i, j - i), threshold_percent)) {
            if (!filter.contains(p.day)) continue;
            auto& s = by_day[p.day];
            s.day = p.day;
            ++s.test_count;
            if (is_abnormal(p.category)) ++s.abnormal_count;
            else ++s.normal_count;
            if (p.relevant_change) ++s.relevant_change_count;
        }
        i = j;
    }
    std::vector<DaySummary> out;
    out.reserve(by_day.size());
    for (auto& [day, s] : by_day) out.push_back(s);
    return out;
}

std::vector<ActivityPoint> to_activity(std::span<const DaySummary> summaries) {
    std::vector<ActivityPoint> out;
    out.reserve(summaries.size());
    for (const auto& s : summaries) out.push_back(ActivityPoint{s.day, s.test_count, s.relevant_change_count});
    return out;
}

std::vector<ActivityPoint> activity_series(const Dataset& dataset, std::string_view patient_id,
                                           const DayFilter& filter, double threshold_percent) {
    return to_activity(day_summaries(dataset, patient_id, filter, threshold_percent));
}

}  // namespace ehrtl
