#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "ehrtl/model.hpp"

namespace ehrtl {

/// One row of a raw institution export, uninterpreted.
struct RawRecord {
    std::string institution;
    std::string patient_id;
    std::string date_text;
    std::string test_name_raw;
    std::string analyte_raw;
    std::string value_text;
    std::string unit_text;
    std::string ref_min_text;
    std::string ref_max_text;

    friend bool operator==(const RawRecord&, const RawRecord&) = default;
};

enum class RejectReason {
    MissingField,
    UnparseableValue,
    UnparseableDate,
    UnknownTest,
    UnknownUnit,
    MissingReference,
};

inline constexpr std::size_t kRejectReasonCount = 6;

std::string_view to_string(RejectReason r) noexcept;

struct Rejection {
    RawRecord raw;
    RejectReason reason = RejectReason::MissingField;
    std::size_t line = 0;  // 1-based line in the source file, 0 when unknown
    std::string detail;
    std::string source;
};

/// Lowercase, accents folded, punctuation and whitespace removed; '+', '#'
/// and '%' are kept because they distinguish tests (Ca/Ca++, eos#/eos%).
std::string normalize_name(std::string_view raw);

/// Lowercase, whitespace removed, micro sign folded to 'u', superscripts to
/// digits.
std::string normalize_unit(std::string_view raw);

/// Accepts a decimal comma or decimal point. When both appear, the last one
/// is the decimal separator and the other is digit grouping.
std::optional<double> parse_decimal(std::string_view text);

struct UnitConversion {
    std::string unit;
    double factor = 1.0;
};

/// Synonym, unit and status dictionaries loaded from a versioned JSON file.
class NormalizationRules {
public:
    struct TestRule {
        std::string acronym;
        std::string unit;
        std::map<std::string, double> unit_factors;  // normalized raw unit -> factor
        std::optional<std::pair<double, double>> fixed_reference;
    };

    static NormalizationRules parse(std::string_view json_text);
    static NormalizationRules load(const std::string& path);
    /// The rules file shipped with the library, compiled in.
    static const NormalizationRules& builtin();

    [[nodiscard]] const std::string& version() const noexcept { return version_; }
    [[nodiscard]] const std::vector<TestRule>& tests() const noexcept { return tests_; }
    [[nodiscard]] const TestRule* test_rule(std::string_view acronym) const;

    [[nodiscard]] std::optional<std::string> resolve_test(std::string_view raw_name) const;
    [[nodiscard]] std::optional<UnitConversion> resolve_unit(std::string_view acronym,
                                                             std::string_view raw_unit) const;
    [[nodiscard]] std::optional<double> qualitative_value(std::string_view text) const;
    [[nodiscard]] std::optional<DayStatus> resolve_status(std::string_view text) const;

private:
    std::string version_;
    std::vector<TestRule> tests_;
    std::map<std::string, std::size_t, std::less<>> by_acronym_;
    std::map<std::string, std::string, std::less<>> synonyms_;  // normalized -> acronym
    std::map<std::string, double, std::less<>> qualitative_;
    std::map<std::string, DayStatus, std::less<>> statuses_;
};

struct ParsedRecords {
    std::vector<RawRecord> records;
    std::vector<std::size_t> lines;  // source line of each record
    std::vector<Rejection> rejections;
    std::size_t rows = 0;  // data rows seen (excludes header and blank lines)
    std::string source;
};

/// Splits one delimited line; double-quoted fields may contain the separator.
std::vector<std::string> split_delimited(std::string_view line, char separator);

/// Result file columns: patient_id, date, test_name, analyte, value, unit,
/// ref_min, ref_max, institution. The first non-blank line is the header.
/// An empty institution column falls back to `institution`.
ParsedRecords parse_raw_file(std::istream& source, std::string_view institution,
                             char separator = '|');
ParsedRecords parse_raw_file(const std::string& path, std::string_view institution,
                             char separator = '|');

using NormalizeOutcome = std::variant<LabResult, Rejection>;

NormalizeOutcome normalize_record(const RawRecord& raw, const NormalizationRules& rules);

/// Renders a canonical result back to raw text (ISO date, canonical unit).
RawRecord to_raw(const LabResult& r);

struct Duplicate {
    std::string patient_id;
    std::string test;
    Day day;
    double dropped_value = 0.0;
    double kept_value = 0.0;
};

using DuplicateReport = std::vector<Duplicate>;

struct CleanResult {
    std::vector<LabResult> results;
    DuplicateReport duplicates;
};

/// Last record in input order wins on (patient, test, day) collisions;
/// output sorted by (patient, test, day).
CleanResult clean_dataset(std::vector<LabResult> records);

struct PatientMeta {
    std::string patient_id;
    Sex sex = Sex::Unknown;
    std::optional<int> age;
    std::optional<int> birth_year;
};

struct OutcomeEvent {
    std::string patient_id;
    Day day;
    DayStatus status = DayStatus::Unknown;
};

struct FileIssue {
    std::string file;
    std::size_t line = 0;
    std::string message;
};

/// Columns: patient_id, sex, birth_year_or_age. Values >= 1800 are read as
/// a birth year, smaller ones as an age in years.
std::vector<PatientMeta> parse_patient_file(std::istream& in, char separator,
                                            std::vector<FileIssue>& issues,
                                            const std::string& name = {});

/// Columns: patient_id, date, status_text.
std::vector<OutcomeEvent> parse_outcome_file(std::istream& in, char separator,
                                             const NormalizationRules& rules,
                                             std::vector<FileIssue>& issues,
                                             const std::string& name = {});

}  // namespace ehrtl
