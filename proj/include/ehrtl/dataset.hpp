#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ehrtl/categorize.hpp"
#include "ehrtl/model.hpp"

namespace ehrtl {

/// Normalized, cleaned results plus the population cuts used to categorize
/// them. Results are sorted by (patient, test, day) with at most one result
/// per key, so each patient and each series is a contiguous range.
struct Dataset {
    std::map<std::string, Patient, std::less<>> patients;
    std::vector<LabResult> results;
    CutsTable cuts;
    std::string rules_version;

    [[nodiscard]] const Patient* find_patient(std::string_view id) const;
    [[nodiscard]] std::span<const LabResult> patient_results(std::string_view id) const;
    [[nodiscard]] std::span<const LabResult> series(std::string_view patient_id, std::string_view test) const;
    /// Empty cuts (no VeryX bands) for tests with no entry.
    [[nodiscard]] const ReferenceCuts& cuts_for(std::string_view test) const;

    [[nodiscard]] ResultCategory category_of(const LabResult& r) const {
        return categorize(r.value, r.ref_min, r.ref_max, cuts_for(r.test));
    }

    /// Human-readable descriptions of every broken invariant, empty when valid.
    [[nodiscard]] std::vector<std::string> check_invariants() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Ensures a Patient entry exists for every result's patient_id.
void add_missing_patients(Dataset& d);

}  // namespace ehrtl
