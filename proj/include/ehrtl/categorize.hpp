#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ehrtl/model.hpp"

namespace ehrtl {

/// Population cut points of one test. `low_cut` is the median of all values
/// strictly below their own record's ref_min, `high_cut` the median of all
/// values strictly above their own record's ref_max.
struct ReferenceCuts {
    std::string test;
    std::optional<double> low_cut;
    std::optional<double> high_cut;

    friend bool operator==(const ReferenceCuts&, const ReferenceCuts&) = default;
};

using CutsTable = std::map<std::string, ReferenceCuts, std::less<>>;

/// Median with the mean of the two central values for even sizes; nullopt
/// for an empty input. Takes the values by value (partially reordered).
std::optional<double> median(std::vector<double> values);

/// Expects results grouped by test, as in a cleaned dataset; unsorted input
/// is also handled.
CutsTable compute_cuts(std::span<const LabResult> results);

/// Five-band classification. Normal is inclusive of both bounds. Above the
/// range, the effective cut is max(high_cut, ref_max); a value equal to the
/// cut stays High. Mirrored below the range. Without a cut every
/// out-of-range value is plain High or Low.
/// Throws std::domain_error for non-finite input.
ResultCategory categorize(double value, double ref_min, double ref_max, const ReferenceCuts& cuts);
ResultCategory categorize(double value, double ref_min, double ref_max);

/// Effective cut after clamping to the record's own range.
std::optional<double> effective_high_cut(double ref_max, const ReferenceCuts& cuts) noexcept;
std::optional<double> effective_low_cut(double ref_min, const ReferenceCuts& cuts) noexcept;

/// Writes `test|low_cut|high_cut` with a header; absent cuts are empty.
void write_cuts(std::ostream& out, const CutsTable& cuts, char separator = '|');
CutsTable read_cuts(std::istream& in, char separator = '|');

}  // namespace ehrtl
