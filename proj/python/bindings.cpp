#include <fstream>
#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ehrtl/api.hpp"
#include "ehrtl/errors.hpp"
#include "ehrtl/pipeline.hpp"
#include "ehrtl/store.hpp"

namespace py = pybind11;
using namespace ehrtl;

namespace {

std::optional<Day> day_arg(const std::optional<std::string>& s) {
    if (!s) return std::nullopt;
    auto d = parse_iso_day(*s);
    if (!d) throw py::value_error("expected yyyy-MM-dd, got '" + *s + "'");
    return d;
}

std::string ingest_summary(const IngestReport& r) {
    std::ostringstream out;
    write_ingest_summary(out, r);
    return out.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Lab-result timeline engine";

    py::register_exception<NotFoundError>(m, "NotFoundError", PyExc_KeyError);
    py::register_exception<VersionError>(m, "VersionError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<InputError>(m, "InputError", PyExc_OSError);

    py::enum_<ResultCategory>(m, "ResultCategory")
        .value("VeryLow", ResultCategory::VeryLow)
        .value("Low", ResultCategory::Low)
        .value("Normal", ResultCategory::Normal)
        .value("High", ResultCategory::High)
        .value("VeryHigh", ResultCategory::VeryHigh);

    m.def(
        "categorize",
        [](double value, double ref_min, double ref_max, std::optional<double> low_cut, std::optional<double> high_cut) {
            return categorize(value, ref_min, ref_max, ReferenceCuts{"", low_cut, high_cut});
        },
        py::arg("value"), py::arg("ref_min"), py::arg("ref_max"), py::arg("low_cut") = py::none(),
        py::arg("high_cut") = py::none());
    m.def("median", &median, py::arg("values"));
    m.def("rate_of_change", &rate_of_change, py::arg("earlier"), py::arg("later"));
    m.def("is_relevant_change", &is_relevant_change, py::arg("rc_percent"),
          py::arg("threshold_percent") = kDefaultThresholdPercent);

    py::class_<Dataset, std::shared_ptr<Dataset>>(m, "Dataset")
        .def_property_readonly("patient_ids",
                               [](const Dataset& d) {
                                   std::vector<std::string> ids;
                                   for (const auto& [id, p] : d.patients) ids.push_back(id);
                                   return ids;
                               })
        .def_property_readonly("result_count", [](const Dataset& d) { return d.results.size(); })
        .def_property_readonly("rules_version", [](const Dataset& d) { return d.rules_version; })
        .def("cuts",
             [](const Dataset& d, const std::string& test) {
                 const auto& c = d.cuts_for(test);
                 return std::pair{c.low_cut, c.high_cut};
             })
        .def("check_invariants", &Dataset::check_invariants)
        .def("save", [](const Dataset& d, const std::string& path) { save(d, path); })
        .def("to_jsonl",
             [](const Dataset& d) {
                 std::ostringstream out;
                 save(d, out);
                 return out.str();
             })
        .def("export_graph",
             [](const Dataset& d) {
                 std::ostringstream out;
                 export_graph(d, out);
                 return out.str();
             })
        .def(
            "path_json",
            [](const Dataset& d, const std::string& patient, std::optional<std::string> date_from,
               std::optional<std::string> date_to, bool only_days_with_tests, bool descending,
               std::optional<std::vector<std::string>> tests, double threshold) {
                PathOptions o;
                o.date_from = day_arg(date_from);
                o.date_to = day_arg(date_to);
                o.only_days_with_tests = only_days_with_tests;
                o.day_order = descending ? DayOrder::Descending : DayOrder::Ascending;
                if (tests) o.selected_tests.emplace(tests->begin(), tests->end());
                o.threshold_percent = threshold;
                return to_json(build_clinical_path(d, patient, o));
            },
            py::arg("patient_id"), py::arg("date_from") = py::none(), py::arg("date_to") = py::none(),
            py::arg("only_days_with_tests") = false, py::arg("descending") = false, py::arg("tests") = py::none(),
            py::arg("threshold_percent") = kDefaultThresholdPercent)
        .def(
            "series_json",
            [](const Dataset& d, const std::string& patient, const std::string& test, double threshold) {
                return to_json(test_series(d, patient, test, {}, threshold));
            },
            py::arg("patient_id"), py::arg("test"), py::arg("threshold_percent") = kDefaultThresholdPercent);

    m.def("load", [](const std::string& path) { return std::make_shared<Dataset>(load(path)); }, py::arg("path"));
    m.def(
        "generate",
        [](std::uint64_t seed, std::size_t patients, std::size_t tests, std::int32_t days, bool long_patient) {
            SyntheticSpec spec;
            spec.seed = seed;
            spec.n_patients = patients;
            spec.n_tests = tests;
            spec.day_span = days;
            spec.long_patient = long_patient;
            return std::make_shared<Dataset>(generate_synthetic(spec));
        },
        py::arg("seed") = 1, py::arg("patients") = 20, py::arg("tests") = 20, py::arg("days") = 60,
        py::arg("long_patient") = false);
    m.def(
        "validate_file",
        [](const std::string& path) {
            std::ifstream in(path, std::ios::binary);
            if (!in) throw InputError("cannot open '" + path + "'");
            std::vector<std::pair<std::size_t, std::string>> out;
            for (auto& v : validate_file(in)) out.emplace_back(v.line, std::move(v.message));
            return out;
        },
        py::arg("path"));
    m.def(
        "ingest",
        [](std::vector<std::string> results, std::vector<std::string> patients, std::vector<std::string> outcomes,
           std::optional<std::string> rules_path) {
            const auto rules = rules_path ? NormalizationRules::load(*rules_path) : NormalizationRules::builtin();
            auto run = [&] {
                py::gil_scoped_release release;
                return run_ingest(IngestInputs{std::move(results), std::move(patients), std::move(outcomes)}, rules);
            }();
            py::dict report;
            report["rows_in"] = run.report.rows_in;
            report["kept"] = run.report.kept;
            report["rejected"] = run.report.rejected();
            report["duplicates"] = run.report.duplicates;
            py::dict by_reason;
            for (std::size_t i = 0; i < kRejectReasonCount; ++i)
                by_reason[py::str(std::string(to_string(static_cast<RejectReason>(i))))] = run.report.rejected_by_reason[i];
            report["rejected_by_reason"] = by_reason;
            report["summary"] = ingest_summary(run.report);
            return py::make_tuple(std::make_shared<Dataset>(std::move(run.dataset)), report);
        },
        py::arg("results"), py::arg("patients") = std::vector<std::string>{},
        py::arg("outcomes") = std::vector<std::string>{}, py::arg("rules") = py::none());
}
