#include "ehrtl/dataset.hpp"

#include <algorithm>
#include <cmath>

namespace ehrtl {

const Patient* Dataset::find_patient(std::string_view id) const {
    auto it = patients.find(id);
    return it == patients.end() ? nullptr : &it->second;
}

std::span<const LabResult> Dataset::patient_results(std::string_view id) const {
    auto lo = std::lower_bound(results.begin(), results.end(), id,
                               [](const LabResult& r, std::string_view v) { return r.patient_id < v; });
    auto hi = std::upper_bound(lo, results.end(), id,
                               [](std::string_view v, const LabResult& r) { return v < r.patient_id; });
    return {lo, hi};
}

std::span<const LabResult> Dataset::series(std::string_view patient_id, std::string_view test) const {
    auto all = patient_results(patient_id);
    auto lo = std::lower_bound(all.begin(), all.end(), test,
                               [](const LabResult& r, std::string_view v) { return r.test < v; });
    auto hi = std::upper_bound(lo, all.end(), test,
                               [](std::string_view v, const LabResult& r) { return v < r.test; });
    return {lo, hi};
}

const ReferenceCuts& Dataset::cuts_for(std::string_view test) const {
    static const ReferenceCuts kNone{};
    auto it = cuts.find(test);
    return it == cuts.end() ? kNone : it->second;
}

std::vector<std::string> Dataset::check_invariants() const {
    std::vector<std::string> problems;
    for (const auto& [id, p] : patients) {
        if (id.empty() || p.patient_id != id) problems.push_back("patient key '" + id + "' does not match its record");
        if (p.age && *p.age < 0) problems.push_back("patient " + id + ": negative age");
    }
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        const auto where = "result #" + std::to_string(i) + " (" + r.patient_id + ", " + r.test + ", " + r.day.iso() + ")";
        if (!patients.contains(r.patient_id)) problems.push_back(where + ": unknown patient");
        if (r.test.empty()) problems.push_back(where + ": empty test");
        if (!std::isfinite(r.value) || !std::isfinite(r.ref_min) || !std::isfinite(r.ref_max))
            problems.push_back(where + ": non-finite number");
        else if (r.ref_min > r.ref_max)
            problems.push_back(where + ": ref_min > ref_max");
        if (i > 0) {
            if (same_result_key(results[i - 1], r)) problems.push_back(where + ": duplicate (patient, test, day)");
            else if (!result_key_less(results[i - 1], r)) problems.push_back(where + ": out of order");
        }
    }
    for (const auto& [test, c] : cuts) {
        if (c.test != test) problems.push_back("cuts key '" + test + "' does not match its record");
        if ((c.low_cut && !std::isfinite(*c.low_cut)) || (c.high_cut && !std::isfinite(*c.high_cut)))
            problems.push_back("cuts " + test + ": non-finite cut");
    }
    return problems;
}

void add_missing_patients(Dataset& d) {
    for (const auto& r : d.results)
        if (!d.patients.contains(r.patient_id)) d.patients.emplace(r.patient_id, Patient{r.patient_id, Sex::Unknown, std::nullopt, {}});
}

}  // namespace ehrtl
