#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ehrtl/day.hpp"

namespace ehrtl {

enum class Sex { F, M, Unknown };

std::string_view to_string(Sex s) noexcept;
std::optional<Sex> parse_sex(std::string_view text);

enum class DayStatus { Hospitalized, ExternalService, OutpatientCare, Discharged, Died, Unknown };

inline constexpr std::array<DayStatus, 6> kAllDayStatuses = {
    DayStatus::Hospitalized, DayStatus::ExternalService, DayStatus::OutpatientCare,
    DayStatus::Discharged,   DayStatus::Died,            DayStatus::Unknown};

std::string_view to_string(DayStatus s) noexcept;
std::optional<DayStatus> parse_day_status(std::string_view text);
/// Hospitalized red, external service green, outpatient blue, discharged
/// yellow, died orange, unknown gray.
std::string_view default_color(DayStatus s) noexcept;

struct Patient {
    std::string patient_id;
    Sex sex = Sex::Unknown;
    std::optional<int> age;
    std::map<Day, DayStatus> day_status;

    [[nodiscard]] DayStatus status_on(Day d) const {
        auto it = day_status.find(d);
        return it == day_status.end() ? DayStatus::Unknown : it->second;
    }

    friend bool operator==(const Patient&, const Patient&) = default;
};

/// One normalized measurement: canonical test acronym and unit, one-day
/// resolution, with the reference range reported alongside it.
struct LabResult {
    std::string patient_id;
    Day day;
    std::string test;
    double value = 0.0;
    std::string unit;
    double ref_min = 0.0;
    double ref_max = 0.0;
    std::string institution;

    friend bool operator==(const LabResult&, const LabResult&) = default;
};

/// Sort key of a dataset: (patient, test, day).
bool result_key_less(const LabResult& a, const LabResult& b) noexcept;
bool same_result_key(const LabResult& a, const LabResult& b) noexcept;

enum class ResultCategory { VeryLow, Low, Normal, High, VeryHigh };

inline constexpr std::array<ResultCategory, 5> kAllCategories = {
    ResultCategory::VeryLow, ResultCategory::Low, ResultCategory::Normal, ResultCategory::High,
    ResultCategory::VeryHigh};

constexpr int category_order(ResultCategory c) noexcept { return static_cast<int>(c); }
std::optional<ResultCategory> category_from_order(int order) noexcept;

std::string_view to_string(ResultCategory c) noexcept;
std::optional<ResultCategory> parse_category(std::string_view text);
/// double-down, down, neutral, up, double-up
std::string_view symbol_id(ResultCategory c) noexcept;
/// VL, L, N, H, VH
std::string_view short_code(ResultCategory c) noexcept;
/// Cold-to-warm palette: blues for low values, reds for high values.
std::string_view default_color(ResultCategory c) noexcept;

inline bool is_abnormal(ResultCategory c) noexcept { return c != ResultCategory::Normal; }

struct TestGroup {
    std::string name;
    std::vector<std::string> acronyms;
    int rank = 0;

    friend bool operator==(const TestGroup&, const TestGroup&) = default;
};

inline constexpr std::string_view kUncategorizedGroup = "Uncategorized";

/// Where a test sits in the vertical ordering.
struct GroupPosition {
    std::string_view group;
    int rank = 0;
    std::size_t row = 0;
};

/// The hemogram-first, COVID-last ordering of test groups with canonical
/// acronyms (VCM folded into MCV, cTnT into hs-cTnT, TNFa into TNF).
std::vector<TestGroup> default_group_table();

class GroupTable {
public:
    GroupTable();  // default table
    explicit GroupTable(std::vector<TestGroup> groups);

    /// Reads `rank | group name | acr1, acr2, ...` lines; '#' starts a comment.
    static GroupTable parse(std::istream& in);
    static GroupTable load(const std::string& path);

    [[nodiscard]] const std::vector<TestGroup>& groups() const noexcept { return groups_; }

    /// nullopt for tests in no group.
    [[nodiscard]] std::optional<GroupPosition> locate(std::string_view acronym) const;

    /// Group name, or "Uncategorized".
    [[nodiscard]] std::string_view group_of(std::string_view acronym) const;

    /// Strict weak ordering of rows: group rank, then table row, with
    /// uncategorized tests trailing in alphabetical order.
    [[nodiscard]] bool row_less(std::string_view a, std::string_view b) const;

private:
    std::vector<TestGroup> groups_;
    std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> index_;
};

/// A consecutive pair of results of one test and its percentage change.
struct ChangeObservation {
    double v_earlier = 0.0;
    double v_later = 0.0;
    double rc_percent = 0.0;  // may be +/- infinity
    bool relevant = false;
    double threshold_percent = 100.0;
};

}  // namespace ehrtl
