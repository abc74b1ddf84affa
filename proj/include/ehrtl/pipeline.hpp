#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "ehrtl/dataset.hpp"
#include "ehrtl/ingest.hpp"

namespace ehrtl {

struct IngestInputs {
    std::vector<std::string> result_files;
    std::vector<std::string> patient_files;
    std::vector<std::string> outcome_files;
    char separator = '|';
};

struct IngestReport {
    std::size_t rows_in = 0;
    std::size_t kept = 0;
    std::size_t duplicates = 0;
    std::array<std::size_t, kRejectReasonCount> rejected_by_reason{};
    std::vector<Rejection> rejections;
    DuplicateReport duplicate_list;
    std::vector<FileIssue> issues;

    [[nodiscard]] std::size_t rejected() const noexcept;
    /// rows_in == kept + rejected + duplicates
    [[nodiscard]] bool conserved() const noexcept;
};

struct IngestRun {
    Dataset dataset;
    IngestReport report;
};

/// parse -> normalize -> clean -> compute cuts. Result files are parsed
/// concurrently and merged in argument order, so the output does not depend
/// on scheduling. Throws InputError for unreadable files.
IngestRun run_ingest(const IngestInputs& inputs, const NormalizationRules& rules);

/// In-memory variant over already-parsed records (one entry per source).
IngestRun run_ingest(const std::vector<ParsedRecords>& sources, const std::vector<PatientMeta>& patients,
                     const std::vector<OutcomeEvent>& outcomes, const NormalizationRules& rules);

void write_rejection_report(std::ostream& out, const std::vector<Rejection>& rejections, char separator = '|');
void write_ingest_summary(std::ostream& out, const IngestReport& report);

}  // namespace ehrtl
