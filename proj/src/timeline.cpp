#include "ehrtl/timeline.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "ehrtl/errors.hpp"

namespace ehrtl {

std::string_view to_string(DayOrder o) noexcept { return o == DayOrder::Ascending ? "asc" : "desc"; }

const PathCell* ClinicalPath::cell_at(std::size_t row, std::size_t column) const {
    auto it = std::lower_bound(cells.begin(), cells.end(), std::pair{row, column}, [](const PathCell& c, const auto& key) {
        return std::pair{c.row, c.column} < key;
    });
    if (it == cells.end() || it->row != row || it->column != column) return nullptr;
    return &*it;
}

namespace {

void mark_gaps(std::vector<PathColumn>& columns) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        const bool last = i + 1 == columns.size();
        columns[i].gap_after = !last && std::abs(columns[i + 1].day - columns[i].day) != 1;
    }
}

void sort_cells(std::vector<PathCell>& cells) {
    std::sort(cells.begin(), cells.end(),
              [](const PathCell& a, const PathCell& b) { return std::pair{a.row, a.column} < std::pair{b.row, b.column}; });
}

struct VisibleSeries {
    std::string test;
    std::string unit;
    std::vector<SeriesPoint> points;
};

}  // namespace

ClinicalPath build_clinical_path(const Dataset& dataset, std::string_view patient_id, const PathOptions& options,
                                 const GroupTable& groups) {
    const auto* patient = dataset.find_patient(patient_id);
    if (!patient) throw NotFoundError("unknown patient '" + std::string(patient_id) + "'");
    if (options.date_from && options.date_to && *options.date_to < *options.date_from)
        throw std::invalid_argument("date_from is after date_to");
    if (!(options.threshold_percent > 0.0)) throw std::invalid_argument("threshold must be positive");

    const DayFilter window{options.date_from, options.date_to};
    const auto results = dataset.patient_results(patient_id);

    // Flags come from the full series so that narrowing the window never
    // changes a highlight.
    std::vector<VisibleSeries> visible;
    for (std::size_t i = 0; i < results.size();) {
        std::size_t j = i;
        while (j < results.size() && results[j].test == results[i].test) ++j;
        const auto& test = results[i].test;
        const bool selected = (!options.selected_tests || options.selected_tests->contains(test)) &&
                              (!options.selected_groups || options.selected_groups->contains(groups.group_of(test)));
        if (selected) {
            VisibleSeries vs{test, results[j - 1].unit, {}};
            for (const auto& p : flagged_points(dataset, results.subspan(i, j - i), options.threshold_percent))
                if (window.contains(p.day)) vs.points.push_back(p);
            if (!vs.points.empty()) visible.push_back(std::move(vs));
        }
        i = j;
    }
    std::sort(visible.begin(), visible.end(),
              [&](const VisibleSeries& a, const VisibleSeries& b) { return groups.row_less(a.test, b.test); });

    ClinicalPath path;
    path.patient = *patient;
    path.threshold_percent = options.threshold_percent;

    std::set<Day> result_days;
    for (const auto& vs : visible)
        for (const auto& p : vs.points) result_days.insert(p.day);

    if (options.only_days_with_tests) {
        for (Day d : result_days) path.columns.push_back(PathColumn{d, patient->status_on(d), false});
    } else {
        std::optional<Day> first = options.date_from;
        std::optional<Day> last = options.date_to;
        if (!result_days.empty()) {
            if (!first) first = *result_days.begin();
            if (!last) last = *result_days.rbegin();
        }
        if (first && last) {
            if (*last - *first >= kMaxContiguousDays)
                throw std::invalid_argument("date window exceeds " + std::to_string(kMaxContiguousDays) + " days");
            for (Day d = *first; d <= *last; d = d.next()) path.columns.push_back(PathColumn{d, patient->status_on(d), false});
        }
    }

    std::unordered_map<Day, std::size_t> column_of;
    column_of.reserve(path.columns.size());
    for (std::size_t c = 0; c < path.columns.size(); ++c) column_of.emplace(path.columns[c].day, c);

    std::vector<DaySummary> per_column(path.columns.size());
    for (std::size_t r = 0; r < visible.size(); ++r) {
        const auto& vs = visible[r];
        path.rows.push_back(PathRow{std::string(groups.group_of(vs.test)), vs.test, vs.unit});
        for (const auto& p : vs.points) {
            const auto c = column_of.at(p.day);
            path.cells.push_back(PathCell{r, c, p.value, p.category, p.relevant_change});
            auto& s = per_column[c];
            s.day = p.day;
            ++s.test_count;
            if (is_abnormal(p.category)) ++s.abnormal_count;
            else ++s.normal_count;
            if (p.relevant_change) ++s.relevant_change_count;
        }
    }
    // summaries describe the visible rows only
    for (auto& s : per_column)
        if (s.test_count > 0) path.day_summaries.push_back(s);
    path.activity = to_activity(path.day_summaries);

    mark_gaps(path.columns);
    if (options.day_order == DayOrder::Descending) return toggle_day_order(std::move(path));
    return path;
}

ClinicalPath toggle_day_order(ClinicalPath path) {
    const auto n = path.columns.size();
    std::reverse(path.columns.begin(), path.columns.end());
    for (auto& cell : path.cells) cell.column = n - 1 - cell.column;
    sort_cells(path.cells);
    std::reverse(path.day_summaries.begin(), path.day_summaries.end());
    std::reverse(path.activity.begin(), path.activity.end());
    mark_gaps(path.columns);
    path.day_order = path.day_order == DayOrder::Ascending ? DayOrder::Descending : DayOrder::Ascending;
    return path;
}

void export_path_delimited(const ClinicalPath& path, std::ostream& out, char separator) {
    out << "group" << separator << "test";
    for (const auto& col : path.columns) out << separator << col.day.iso();
    out << '\n';
    auto cell = path.cells.begin();
    for (std::size_t r = 0; r < path.rows.size(); ++r) {
        out << path.rows[r].group << separator << path.rows[r].test;
        for (std::size_t c = 0; c < path.columns.size(); ++c) {
            out << separator;
            if (cell != path.cells.end() && cell->row == r && cell->column == c) {
                out << short_code(cell->category);
                ++cell;
            }
        }
        out << '\n';
    }
}

}  // namespace ehrtl
