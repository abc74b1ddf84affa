#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ehrtl/dataset.hpp"

namespace ehrtl {

inline constexpr int kSchemaMajor = 1;
inline constexpr int kSchemaMinor = 0;

/// Line-delimited JSON: a header object (schema name, schema_version,
/// rules_version, record counts), then one object per patient, result and
/// cuts entry, each tagged by its "record" field. Output is byte-stable.
void save(const Dataset& dataset, std::ostream& out);
void save(const Dataset& dataset, const std::string& path);

/// Throws VersionError on a different major schema version and FormatError
/// (with line number) on a corrupt line.
Dataset load(std::istream& in);
Dataset load(const std::string& path);

struct Violation {
    std::size_t line = 0;  // 0 for file-level problems
    std::string message;
};

/// Reads the whole file and reports every structural and invariant problem
/// instead of stopping at the first.
std::vector<Violation> validate_file(std::istream& in);

struct GraphCounts {
    std::size_t nodes = 0;
    std::size_t edges = 0;
};

/// Patients and tests as nodes, one patient -> test edge per result with
/// its day, value and category.
GraphCounts export_graph(const Dataset& dataset, std::ostream& out);

struct SyntheticSpec {
    std::size_t n_patients = 20;
    std::size_t n_tests = 20;
    std::int32_t day_span = 60;
    std::uint64_t seed = 1;
    double out_of_range_fraction = 0.3;
    double visit_probability = 0.3;
    double test_probability = 0.5;
    /// Per-record jitter of the reference range (fraction of its bounds).
    double reference_jitter = 0.1;
    /// Adds patient "P0000" with `long_tests` tests over `long_days`
    /// consecutive days, about `long_results` results in total.
    bool long_patient = false;
    std::size_t long_tests = 46;
    std::int32_t long_days = 448;
    std::size_t long_results = 10000;
    Day start = Day::from_ymd(2020, 3, 1);
};

/// Canonical tests used by the generator: grouped tests in table order,
/// then the remaining ones from the builtin rules.
std::vector<std::string> synthetic_test_catalog();

/// Deterministic for a given spec. Throws std::invalid_argument for an
/// invalid spec.
Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace ehrtl
