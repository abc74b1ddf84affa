#include "ehrtl/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>
#include <ostream>

#include "ehrtl/errors.hpp"

namespace ehrtl {

std::size_t IngestReport::rejected() const noexcept {
    return std::accumulate(rejected_by_reason.begin(), rejected_by_reason.end(), std::size_t{0});
}

bool IngestReport::conserved() const noexcept { return rows_in == kept + rejected() + duplicates; }

namespace {

struct Normalized {
    std::vector<LabResult> results;
    std::vector<Rejection> rejections;
};

Normalized normalize_all(const ParsedRecords& parsed, const NormalizationRules& rules) {
    Normalized out;
    out.results.reserve(parsed.records.size());
    for (std::size_t i = 0; i < parsed.records.size(); ++i) {
        auto outcome = normalize_record(parsed.records[i], rules);
        if (auto* r = std::get_if<LabResult>(&outcome)) {
            out.results.push_back(std::move(*r));
        } else {
            auto& rej = std::get<Rejection>(outcome);
            rej.line = i < parsed.lines.size() ? parsed.lines[i] : 0;
            rej.source = parsed.source;
            out.rejections.push_back(std::move(rej));
        }
    }
    return out;
}

std::string institution_from_path(const std::string& path) { return std::filesystem::path(path).stem().string(); }

}  // namespace

IngestRun run_ingest(const std::vector<ParsedRecords>& sources, const std::vector<PatientMeta>& patients,
                     const std::vector<OutcomeEvent>& outcomes, const NormalizationRules& rules) {
    IngestRun run;
    auto& report = run.report;

    std::vector<LabResult> merged;
    for (const auto& parsed : sources) {
        report.rows_in += parsed.rows;
        auto n = normalize_all(parsed, rules);
        merged.insert(merged.end(), std::make_move_iterator(n.results.begin()), std::make_move_iterator(n.results.end()));
        for (const auto& rej : parsed.rejections) report.rejections.push_back(rej);
        for (auto& rej : n.rejections) report.rejections.push_back(std::move(rej));
    }
    for (const auto& rej : report.rejections) ++report.rejected_by_reason[static_cast<std::size_t>(rej.reason)];

    auto cleaned = clean_dataset(std::move(merged));
    report.kept = cleaned.results.size();
    report.duplicates = cleaned.duplicates.size();
    report.duplicate_list = std::move(cleaned.duplicates);

    Dataset& d = run.dataset;
    d.results = std::move(cleaned.results);
    d.rules_version = rules.version();
    for (const auto& m : patients) {
        auto& p = d.patients[m.patient_id];
        p.patient_id = m.patient_id;
        p.sex = m.sex;
        p.age = m.age;
        if (m.birth_year) {
            // age at the patient's most recent result
            const auto rs = d.patient_results(m.patient_id);
            std::optional<Day> last;
            for (const auto& r : rs)
                if (!last || *last < r.day) last = r.day;
            if (last) p.age = std::max(0, static_cast<int>(last->ymd().year()) - *m.birth_year);
        }
    }
    add_missing_patients(d);
    for (const auto& e : outcomes) {
        auto it = d.patients.find(e.patient_id);
        if (it == d.patients.end()) {
            report.issues.push_back({"", 0, "outcome for patient '" + e.patient_id + "' without results or metadata"});
            continue;
        }
        it->second.day_status[e.day] = e.status;
    }
    d.cuts = compute_cuts(d.results);
    return run;
}

IngestRun run_ingest(const IngestInputs& inputs, const NormalizationRules& rules) {
    // one worker per result file
    std::vector<std::future<ParsedRecords>> pending;
    for (const auto& path : inputs.result_files)
        pending.push_back(std::async(std::launch::async, [&path, sep = inputs.separator] {
            return parse_raw_file(path, institution_from_path(path), sep);
        }));
    std::vector<ParsedRecords> sources;
    for (auto& f : pending) sources.push_back(f.get());

    std::vector<FileIssue> issues;
    std::vector<PatientMeta> patients;
    for (const auto& path : inputs.patient_files) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw InputError("cannot open patient file '" + path + "'");
        auto part = parse_patient_file(in, inputs.separator, issues, path);
        patients.insert(patients.end(), part.begin(), part.end());
    }
    std::vector<OutcomeEvent> outcomes;
    for (const auto& path : inputs.outcome_files) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw InputError("cannot open outcome file '" + path + "'");
        auto part = parse_outcome_file(in, inputs.separator, rules, issues, path);
        outcomes.insert(outcomes.end(), part.begin(), part.end());
    }

    auto run = run_ingest(sources, patients, outcomes, rules);
    run.report.issues.insert(run.report.issues.begin(), issues.begin(), issues.end());
    return run;
}

void write_rejection_report(std::ostream& out, const std::vector<Rejection>& rejections, char sep) {
    out << "source" << sep << "line" << sep << "reason" << sep << "detail" << sep << "patient_id" << sep << "date" << sep
        << "test_name" << sep << "analyte" << sep << "value" << sep << "unit" << sep << "ref_min" << sep << "ref_max"
        << sep << "institution" << '\n';
    auto clean = [sep](const std::string& s) {
        std::string o = s;
        for (auto& c : o)
            if (c == sep || c == '\n' || c == '\r') c = ' ';
        return o;
    };
    for (const auto& r : rejections) {
        out << clean(r.source) << sep << r.line << sep << to_string(r.reason) << sep << clean(r.detail) << sep
            << clean(r.raw.patient_id) << sep << clean(r.raw.date_text) << sep << clean(r.raw.test_name_raw) << sep
            << clean(r.raw.analyte_raw) << sep << clean(r.raw.value_text) << sep << clean(r.raw.unit_text) << sep
            << clean(r.raw.ref_min_text) << sep << clean(r.raw.ref_max_text) << sep << clean(r.raw.institution) << '\n';
    }
}

void write_ingest_summary(std::ostream& out, const IngestReport& report) {
    out << "rows in:     " << report.rows_in << '\n'
        << "kept:        " << report.kept << '\n'
        << "rejected:    " << report.rejected() << '\n';
    for (std::size_t i = 0; i < kRejectReasonCount; ++i)
        if (report.rejected_by_reason[i] > 0)
            out << "  " << to_string(static_cast<RejectReason>(i)) << ": " << report.rejected_by_reason[i] << '\n';
    out << "duplicates:  " << report.duplicates << '\n';
    if (!report.issues.empty()) out << "warnings:    " << report.issues.size() << '\n';
}

}  // namespace ehrtl
