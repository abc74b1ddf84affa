#include "ehrtl/store.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ehrtl/errors.hpp"
#include "ehrtl/ingest.hpp"

namespace ehrtl {

using nlohmann::json;

namespace {

constexpr const char* kSchemaName = "ehr-timeline-dataset";

json opt_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_number(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

json header_json(const Dataset& d) {
    return json{{"record", "header"},
                {"schema", kSchemaName},
                {"schema_version", std::to_string(kSchemaMajor) + "." + std::to_string(kSchemaMinor)},
                {"rules_version", d.rules_version},
                {"counts", {{"patients", d.patients.size()}, {"results", d.results.size()}, {"cuts", d.cuts.size()}}}};
}

json patient_json(const Patient& p) {
    json statuses = json::array();
    for (const auto& [day, status] : p.day_status) statuses.push_back({{"day", day.iso()}, {"status", to_string(status)}});
    return json{{"record", "patient"},
                {"patient_id", p.patient_id},
                {"sex", to_string(p.sex)},
                {"age", p.age ? json(*p.age) : json(nullptr)},
                {"day_status", std::move(statuses)}};
}

json result_json(const LabResult& r) {
    return json{{"record", "result"},  {"patient_id", r.patient_id}, {"day", r.day.iso()},
                {"test", r.test},      {"value", r.value},           {"unit", r.unit},
                {"ref_min", r.ref_min}, {"ref_max", r.ref_max},      {"institution", r.institution}};
}

json cuts_json(const ReferenceCuts& c) {
    return json{{"record", "cuts"}, {"test", c.test}, {"low_cut", opt_number(c.low_cut)}, {"high_cut", opt_number(c.high_cut)}};
}

Day day_field(const json& j, const char* key) {
    const auto text = j.at(key).get<std::string>();
    auto d = parse_iso_day(text);
    if (!d) throw std::invalid_argument(std::string("bad ") + key + " '" + text + "'");
    return *d;
}

Patient decode_patient(const json& j) {
    Patient p;
    p.patient_id = j.at("patient_id").get<std::string>();
    const auto sex = j.at("sex").get<std::string>();
    const auto parsed = parse_sex(sex);
    if (!parsed) throw std::invalid_argument("bad sex '" + sex + "'");
    p.sex = *parsed;
    if (!j.at("age").is_null()) p.age = j.at("age").get<int>();
    for (const auto& e : j.at("day_status")) {
        const auto text = e.at("status").get<std::string>();
        const auto status = parse_day_status(text);
        if (!status) throw std::invalid_argument("bad status '" + text + "'");
        if (!p.day_status.emplace(day_field(e, "day"), *status).second) throw std::invalid_argument("two statuses for one day");
    }
    return p;
}

LabResult decode_result(const json& j) {
    LabResult r;
    r.patient_id = j.at("patient_id").get<std::string>();
    r.day = day_field(j, "day");
    r.test = j.at("test").get<std::string>();
    r.value = j.at("value").get<double>();
    r.unit = j.at("unit").get<std::string>();
    r.ref_min = j.at("ref_min").get<double>();
    r.ref_max = j.at("ref_max").get<double>();
    r.institution = j.at("institution").get<std::string>();
    return r;
}

ReferenceCuts decode_cuts(const json& j) {
    return ReferenceCuts{j.at("test").get<std::string>(), opt_number(j, "low_cut"), opt_number(j, "high_cut")};
}

void check_header(const json& j) {
    if (j.value("record", "") != "header" || j.value("schema", "") != kSchemaName)
        throw std::invalid_argument("first line is not a dataset header");
    const auto version = j.at("schema_version").get<std::string>();
    int major = -1;
    try {
        major = std::stoi(version.substr(0, version.find('.')));
    } catch (const std::exception&) {
        throw std::invalid_argument("bad schema_version '" + version + "'");
    }
    if (major != kSchemaMajor)
        throw VersionError("dataset schema version " + version + " is not supported (expected " +
                           std::to_string(kSchemaMajor) + ".x)");
}

// Reads non-empty lines, tracking 1-based line numbers.
template <typename OnLine>
void for_each_line(std::istream& in, OnLine on_line) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        on_line(lineno, line);
    }
}

}  // namespace

void save(const Dataset& dataset, std::ostream& out) {
    out << header_json(dataset).dump() << '\n';
    for (const auto& [id, p] : dataset.patients) out << patient_json(p).dump() << '\n';
    for (const auto& r : dataset.results) out << result_json(r).dump() << '\n';
    for (const auto& [test, c] : dataset.cuts) out << cuts_json(c).dump() << '\n';
}

void save(const Dataset& dataset, const std::string& path) {
    // write-then-rename so a failed save never leaves a truncated file behind
    const auto tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write '" + tmp + "'");
        save(dataset, out);
        out.flush();
        if (!out) throw InputError("write failed for '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw InputError("cannot move dataset into '" + path + "': " + ec.message());
}

Dataset load(std::istream& in) {
    Dataset d;
    bool have_header = false;
    json counts;
    for_each_line(in, [&](std::size_t lineno, const std::string& line) {
        try {
            const auto j = json::parse(line);
            if (!have_header) {
                check_header(j);
                d.rules_version = j.at("rules_version").get<std::string>();
                counts = j.at("counts");
                have_header = true;
                return;
            }
            const auto kind = j.at("record").get<std::string>();
            if (kind == "patient") {
                auto p = decode_patient(j);
                const auto id = p.patient_id;
                if (!d.patients.emplace(id, std::move(p)).second) throw std::invalid_argument("duplicate patient " + id);
            } else if (kind == "result") {
                d.results.push_back(decode_result(j));
            } else if (kind == "cuts") {
                auto c = decode_cuts(j);
                const auto test = c.test;
                if (!d.cuts.emplace(test, std::move(c)).second) throw std::invalid_argument("duplicate cuts for " + test);
            } else {
                throw std::invalid_argument("unknown record type '" + kind + "'");
            }
        } catch (const VersionError&) {
            throw;
        } catch (const std::exception& e) {
            throw FormatError(lineno, e.what());
        }
    });
    if (in.bad()) throw InputError("read error");
    if (!have_header) throw FormatError(1, "missing dataset header");
    if (counts.value("patients", std::size_t{0}) != d.patients.size() ||
        counts.value("results", std::size_t{0}) != d.results.size() ||
        counts.value("cuts", std::size_t{0}) != d.cuts.size())
        throw FormatError(1, "record counts do not match the header (truncated file?)");
    return d;
}

Dataset load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open dataset '" + path + "'");
    return load(in);
}

std::vector<Violation> validate_file(std::istream& in) {
    std::vector<Violation> out;
    Dataset d;
    std::vector<std::size_t> result_lines;
    bool have_header = false;
    json counts;
    std::size_t patient_lines = 0, cut_lines = 0;

    for_each_line(in, [&](std::size_t lineno, const std::string& line) {
        try {
            const auto j = json::parse(line);
            if (!have_header) {
                have_header = true;
                check_header(j);
                d.rules_version = j.at("rules_version").get<std::string>();
                counts = j.at("counts");
                return;
            }
            const auto kind = j.at("record").get<std::string>();
            if (kind == "patient") {
                ++patient_lines;
                auto p = decode_patient(j);
                const auto id = p.patient_id;
                if (id.empty()) out.push_back({lineno, "empty patient_id"});
                if (!d.patients.emplace(id, std::move(p)).second) out.push_back({lineno, "duplicate patient " + id});
            } else if (kind == "result") {
                d.results.push_back(decode_result(j));
                result_lines.push_back(lineno);
            } else if (kind == "cuts") {
                ++cut_lines;
                auto c = decode_cuts(j);
                const auto test = c.test;
                if (!d.cuts.emplace(test, std::move(c)).second) out.push_back({lineno, "duplicate cuts for " + test});
            } else {
                out.push_back({lineno, "unknown record type '" + kind + "'"});
            }
        } catch (const std::exception& e) {
            out.push_back({lineno, e.what()});
        }
    });
    if (!have_header) {
        out.push_back({0, "missing dataset header"});
        return out;
    }
    if (counts.is_object() && (counts.value("patients", std::size_t{0}) != patient_lines ||
                               counts.value("results", std::size_t{0}) != d.results.size() ||
                               counts.value("cuts", std::size_t{0}) != cut_lines))
        out.push_back({1, "record counts do not match the header"});

    for (std::size_t i = 0; i < d.results.size(); ++i) {
        const auto& r = d.results[i];
        const auto line = result_lines[i];
        if (!d.patients.contains(r.patient_id)) out.push_back({line, "result for unknown patient '" + r.patient_id + "'"});
        if (r.test.empty()) out.push_back({line, "empty test"});
        if (!std::isfinite(r.value) || !std::isfinite(r.ref_min) || !std::isfinite(r.ref_max))
            out.push_back({line, "non-finite number"});
        else if (r.ref_min > r.ref_max)
            out.push_back({line, "ref_min > ref_max"});
        if (i > 0) {
            if (same_result_key(d.results[i - 1], r)) out.push_back({line, "duplicate (patient, test, day)"});
            else if (!result_key_less(d.results[i - 1], r)) out.push_back({line, "result out of (patient, test, day) order"});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Violation& a, const Violation& b) { return a.line < b.line; });
    return out;
}

GraphCounts export_graph(const Dataset& dataset, std::ostream& out) {
    const GroupTable groups;
    json nodes = json::array();
    json edges = json::array();
    std::set<std::string, std::less<>> tests;
    for (const auto& r : dataset.results) tests.insert(r.test);

    for (const auto& [id, p] : dataset.patients)
        nodes.push_back({{"id", "patient:" + id}, {"kind", "patient"}, {"patient_id", id}, {"sex", to_string(p.sex)},
                         {"age", p.age ? json(*p.age) : json(nullptr)}});
    for (const auto& t : tests)
        nodes.push_back({{"id", "test:" + t}, {"kind", "test"}, {"test", t}, {"group", groups.group_of(t)}});
    for (const auto& r : dataset.results)
        edges.push_back({{"source", "patient:" + r.patient_id},
                         {"target", "test:" + r.test},
                         {"day", r.day.iso()},
                         {"value", r.value},
                         {"category", to_string(dataset.category_of(r))}});

    GraphCounts counts{nodes.size(), edges.size()};
    json doc{{"schema", "ehr-timeline-graph"},
             {"schema_version", "1.0"},
             {"directed", true},
             {"nodes", std::move(nodes)},
             {"edges", std::move(edges)}};
    out << doc.dump(1) << '\n';
    return counts;
}

// ---------------------------------------------------------------------------
// Synthetic data

std::vector<std::string> synthetic_test_catalog() {
    std::vector<std::string> catalog;
    std::set<std::string> seen;
    for (const auto& g : default_group_table())
        for (const auto& a : g.acronyms)
            if (seen.insert(a).second) catalog.push_back(a);
    for (const auto& t : NormalizationRules::builtin().tests())
        if (seen.insert(t.acronym).second) catalog.push_back(t.acronym);
    return catalog;
}

namespace {

// Uniform doubles from the raw 64-bit engine output, so the sequence is the
// same on every standard library.
class Uniform {
public:
    explicit Uniform(std::uint64_t seed) : engine_(seed) {}
    double next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double between(double lo, double hi) { return lo + (hi - lo) * next(); }
    bool chance(double p) { return next() < p; }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() * static_cast<double>(n)); }

private:
    std::mt19937_64 engine_;
};

double round2(double v) { return std::round(v * 100.0) / 100.0; }

struct TestProfile {
    std::string acronym;
    std::string unit;
    bool binary = false;
    double base_min = 0.0;
    double base_max = 0.0;
};

TestProfile profile_for(std::size_t k, const std::string& acronym) {
    const auto& rules = NormalizationRules::builtin();
    TestProfile p;
    p.acronym = acronym;
    if (const auto* rule = rules.test_rule(acronym)) {
        p.unit = rule->unit;
        p.binary = rule->fixed_reference.has_value();
    }
    p.base_min = 10.0 * static_cast<double>(1 + k % 7) + static_cast<double>(k);
    p.base_max = round2(p.base_min * 1.6);
    return p;
}

void add_results(std::vector<LabResult>& out, Uniform& rng, const SyntheticSpec& spec, const std::string& patient,
                 const TestProfile& t, Day day) {
    LabResult r;
    r.patient_id = patient;
    r.day = day;
    r.test = t.acronym;
    r.unit = t.unit;
    r.institution = "SYN" + std::to_string(1 + rng.index(5));
    if (t.binary) {
        r.ref_min = 0.0;
        r.ref_max = 0.0;
        r.value = rng.chance(spec.out_of_range_fraction) ? 1.0 : 0.0;
        out.push_back(std::move(r));
        return;
    }
    const double j = spec.reference_jitter;
    r.ref_min = round2(t.base_min * (1.0 + rng.between(-j, j)));
    r.ref_max = round2(t.base_max * (1.0 + rng.between(-j, j)));
    if (r.ref_max < r.ref_min) std::swap(r.ref_min, r.ref_max);
    if (rng.chance(spec.out_of_range_fraction)) {
        if (rng.chance(0.5)) r.value = round2(rng.between(0.3 * r.ref_min, r.ref_min - 0.01));
        else r.value = round2(rng.between(r.ref_max + 0.01, 2.5 * r.ref_max));
    } else {
        r.value = round2(rng.between(r.ref_min, r.ref_max));
        r.value = std::clamp(r.value, r.ref_min, r.ref_max);
    }
    out.push_back(std::move(r));
}

std::map<Day, DayStatus> synthetic_statuses(Uniform& rng, Day start, std::int32_t span, const std::set<Day>& active) {
    static constexpr DayStatus kCare[] = {DayStatus::Hospitalized, DayStatus::OutpatientCare, DayStatus::ExternalService};
    std::map<Day, DayStatus> out;
    DayStatus current = kCare[rng.index(3)];
    for (std::int32_t i = 0; i < span; ++i) {
        const Day d = start.plus(i);
        if (rng.chance(0.05)) current = kCare[rng.index(3)];
        if (active.contains(d)) out.emplace(d, current);
    }
    if (!active.empty()) out[*active.rbegin()] = rng.chance(0.1) ? DayStatus::Died : DayStatus::Discharged;
    return out;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
    const auto catalog = synthetic_test_catalog();
    if (spec.n_patients == 0 && !spec.long_patient) throw std::invalid_argument("spec has no patients");
    if (spec.n_tests == 0 || spec.n_tests > catalog.size())
        throw std::invalid_argument("n_tests must be in [1, " + std::to_string(catalog.size()) + "]");
    if (spec.day_span <= 0) throw std::invalid_argument("day_span must be positive");
    auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!in_unit(spec.out_of_range_fraction) || !in_unit(spec.visit_probability) || !in_unit(spec.test_probability))
        throw std::invalid_argument("probabilities must be in [0, 1]");
    if (!(spec.reference_jitter >= 0.0 && spec.reference_jitter < 0.2))
        throw std::invalid_argument("reference_jitter must be in [0, 0.2)");
    if (spec.long_patient &&
        (spec.long_tests == 0 || spec.long_tests > catalog.size() || spec.long_days <= 0 ||
         spec.long_results > spec.long_tests * static_cast<std::size_t>(spec.long_days)))
        throw std::invalid_argument("long patient shape is infeasible");

    Uniform rng(spec.seed);
    std::vector<TestProfile> profiles;
    for (std::size_t k = 0; k < catalog.size(); ++k) profiles.push_back(profile_for(k, catalog[k]));

    Dataset d;
    d.rules_version = "synthetic-" + NormalizationRules::builtin().version();

    auto add_patient = [&](const std::string& id, std::size_t n_tests, std::int32_t span, double visit_p, double test_p) {
        Patient p;
        p.patient_id = id;
        p.sex = rng.chance(0.5) ? Sex::F : Sex::M;
        p.age = 18 + static_cast<int>(rng.index(75));
        std::set<Day> active;
        const auto before = d.results.size();
        for (std::int32_t i = 0; i < span; ++i) {
            const Day day = spec.start.plus(i);
            if (!rng.chance(visit_p)) continue;
            for (std::size_t k = 0; k < n_tests; ++k)
                if (rng.chance(test_p)) add_results(d.results, rng, spec, id, profiles[k], day);
        }
        for (auto i = before; i < d.results.size(); ++i) active.insert(d.results[i].day);
        p.day_status = synthetic_statuses(rng, spec.start, span, active);
        d.patients.emplace(id, std::move(p));
    };

    if (spec.long_patient) {
        const double p = static_cast<double>(spec.long_results) /
                         (static_cast<double>(spec.long_tests) * static_cast<double>(spec.long_days));
        add_patient("P0000", spec.long_tests, spec.long_days, 1.0, p);
    }
    for (std::size_t i = 1; i <= spec.n_patients; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "P%04zu", i);
        add_patient(id, spec.n_tests, spec.day_span, spec.visit_probability, spec.test_probability);
    }

    std::sort(d.results.begin(), d.results.end(), result_key_less);
    d.cuts = compute_cuts(d.results);
    return d;
}

}  // namespace ehrtl
