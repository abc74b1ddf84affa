#include "ehrtl/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ehrtl/errors.hpp"

namespace ehrtl {

extern const char* const kBuiltinRulesJson;

namespace {

constexpr std::size_t kResultColumns = 9;

// Latin-1 code point (0xC0..0xFF) to its unaccented ASCII letter, 0 if none.
char fold_latin1(unsigned char cp) {
    static constexpr char kTable[64] = {
        'A', 'A', 'A', 'A', 'A', 'A', 'A', 'C', 'E', 'E', 'E', 'E', 'I', 'I', 'I', 'I',
        'D', 'N', 'O', 'O', 'O', 'O', 'O', 'x', 'O', 'U', 'U', 'U', 'U', 'Y', 0,   's',
        'a', 'a', 'a', 'a', 'a', 'a', 'a', 'c', 'e', 'e', 'e', 'e', 'i', 'i', 'i', 'i',
        'd', 'n', 'o', 'o', 'o', 'o', 'o', 0,   'o', 'u', 'u', 'u', 'u', 'y', 0,   'y'};
    return cp >= 0xC0 ? kTable[cp - 0xC0] : 0;
}

// Decodes UTF-8 (falling back to Latin-1 for stray high bytes) and calls
// `emit` with an ASCII approximation of each character.
template <typename Emit>
void fold_text(std::string_view s, Emit emit) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto b = static_cast<unsigned char>(s[i]);
        if (b < 0x80) {
            emit(static_cast<char>(b));
            continue;
        }
        const bool has_cont = i + 1 < s.size() && (static_cast<unsigned char>(s[i + 1]) & 0xC0) == 0x80;
        if (b == 0xC2 && has_cont) {
            const auto c = static_cast<unsigned char>(s[++i]);
            if (c == 0xB5) emit('u');       // micro sign
            else if (c == 0xB2) emit('2');  // superscript two
            else if (c == 0xB3) emit('3');  // superscript three
            else if (c == 0xB9) emit('1');
            continue;
        }
        if (b == 0xC3 && has_cont) {
            const auto c = static_cast<unsigned char>(s[++i]);
            if (char f = fold_latin1(static_cast<unsigned char>(c + 0x40))) emit(f);
            continue;
        }
        if (b == 0xCE && has_cont && static_cast<unsigned char>(s[i + 1]) == 0xBC) {
            ++i;
            emit('u');  // greek mu
            continue;
        }
        if (b >= 0xC0 && !has_cont) {
            if (char f = fold_latin1(b)) emit(f);
            continue;
        }
        if (b == 0xB5) {
            emit('u');  // Latin-1 micro sign
            continue;
        }
        // skip the rest of an unrecognized multibyte sequence
        while (i + 1 < s.size() && (static_cast<unsigned char>(s[i + 1]) & 0xC0) == 0x80) ++i;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

Rejection reject(const RawRecord& raw, RejectReason reason, std::string detail) {
    return Rejection{raw, reason, 0, std::move(detail)};
}

std::optional<int> parse_int(std::string_view s) {
    s = trim(s);
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

// Reads the next logical row, skipping blank lines. Returns false at EOF.
bool next_row(std::istream& in, std::string& line, std::size_t& lineno) {
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!trim(line).empty()) return true;
    }
    return false;
}

}  // namespace

std::string_view to_string(RejectReason r) noexcept {
    switch (r) {
        case RejectReason::MissingField: return "MissingField";
        case RejectReason::UnparseableValue: return "UnparseableValue";
        case RejectReason::UnparseableDate: return "UnparseableDate";
        case RejectReason::UnknownTest: return "UnknownTest";
        case RejectReason::UnknownUnit: return "UnknownUnit";
        case RejectReason::MissingReference: return "MissingReference";
    }
    return "MissingField";
}

std::string normalize_name(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    fold_text(raw, [&](char c) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) out.push_back(static_cast<char>(std::tolower(u)));
        else if (c == '+' || c == '#' || c == '%') out.push_back(c);
    });
    return out;
}

std::string normalize_unit(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    fold_text(raw, [&](char c) {
        const auto u = static_cast<unsigned char>(c);
        if (!std::isspace(u)) out.push_back(static_cast<char>(std::tolower(u)));
    });
    return out;
}

std::optional<double> parse_decimal(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return std::nullopt;
    if (text.find_first_not_of("0123456789.,-eE") != std::string_view::npos) return std::nullopt;

    std::string s(text);
    const auto comma = s.rfind(',');
    const auto point = s.rfind('.');
    if (comma != std::string::npos && point != std::string::npos) {
        const char group = comma > point ? '.' : ',';
        s.erase(std::remove(s.begin(), s.end(), group), s.end());
    } else if (std::count(s.begin(), s.end(), ',') > 1 || std::count(s.begin(), s.end(), '.') > 1) {
        return std::nullopt;
    }
    std::replace(s.begin(), s.end(), ',', '.');

    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

// ---------------------------------------------------------------------------
// NormalizationRules

NormalizationRules NormalizationRules::parse(std::string_view json_text) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("rules: ") + e.what());
    }

    NormalizationRules rules;
    try {
        rules.version_ = doc.at("version").get<std::string>();
        if (rules.version_.empty()) throw std::invalid_argument("rules: empty version");

        for (const auto& t : doc.at("tests")) {
            TestRule rule;
            rule.acronym = t.at("acronym").get<std::string>();
            if (rule.acronym.empty()) throw std::invalid_argument("rules: test with empty acronym");
            rule.unit = t.value("unit", std::string{});
            rule.unit_factors[normalize_unit(rule.unit)] = 1.0;
            if (t.contains("units")) {
                for (const auto& [raw_unit, factor] : t.at("units").items()) {
                    const double f = factor.get<double>();
                    if (!(f > 0.0) || !std::isfinite(f))
                        throw std::invalid_argument("rules: non-positive factor for " + rule.acronym +
                                                    " unit '" + raw_unit + "'");
                    rule.unit_factors[normalize_unit(raw_unit)] = f;
                }
            }
            if (t.contains("fixed_reference")) {
                const auto& fr = t.at("fixed_reference");
                const double lo = fr.at(0).get<double>();
                const double hi = fr.at(1).get<double>();
                if (lo > hi) throw std::invalid_argument("rules: inverted fixed_reference for " + rule.acronym);
                rule.fixed_reference = std::pair{lo, hi};
            }

            const auto index = rules.tests_.size();
            if (!rules.by_acronym_.emplace(rule.acronym, index).second)
                throw std::invalid_argument("rules: duplicate test " + rule.acronym);

            std::vector<std::string> names{rule.acronym};
            if (t.contains("synonyms"))
                for (const auto& syn : t.at("synonyms")) names.push_back(syn.get<std::string>());
            for (const auto& name : names) {
                const auto key = normalize_name(name);
                if (key.empty()) throw std::invalid_argument("rules: synonym '" + name + "' normalizes to nothing");
                auto [it, inserted] = rules.synonyms_.emplace(key, rule.acronym);
                if (!inserted && it->second != rule.acronym)
                    throw std::invalid_argument("rules: synonym '" + name + "' maps to both " + it->second +
                                                " and " + rule.acronym);
            }
            rules.tests_.push_back(std::move(rule));
        }

        if (doc.contains("qualitative_values"))
            for (const auto& [text, v] : doc.at("qualitative_values").items())
                rules.qualitative_[normalize_name(text)] = v.get<double>();

        if (doc.contains("status_map")) {
            for (const auto& [text, v] : doc.at("status_map").items()) {
                const auto status = parse_day_status(v.get<std::string>());
                if (!status) throw std::invalid_argument("rules: unknown day status '" + v.get<std::string>() + "'");
                rules.statuses_[normalize_name(text)] = *status;
            }
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("rules: ") + e.what());
    }
    return rules;
}

NormalizationRules NormalizationRules::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open rules file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

const NormalizationRules& NormalizationRules::builtin() {
    static const NormalizationRules rules = parse(kBuiltinRulesJson);
    return rules;
}

const NormalizationRules::TestRule* NormalizationRules::test_rule(std::string_view acronym) const {
    auto it = by_acronym_.find(acronym);
    return it == by_acronym_.end() ? nullptr : &tests_[it->second];
}

std::optional<std::string> NormalizationRules::resolve_test(std::string_view raw_name) const {
    const auto key = normalize_name(raw_name);
    if (key.empty()) return std::nullopt;
    auto it = synonyms_.find(key);
    if (it == synonyms_.end()) return std::nullopt;
    return it->second;
}

std::optional<UnitConversion> NormalizationRules::resolve_unit(std::string_view acronym,
                                                               std::string_view raw_unit) const {
    const auto* rule = test_rule(acronym);
    if (!rule) return std::nullopt;
    auto it = rule->unit_factors.find(normalize_unit(raw_unit));
    if (it == rule->unit_factors.end()) return std::nullopt;
    return UnitConversion{rule->unit, it->second};
}

std::optional<double> NormalizationRules::qualitative_value(std::string_view text) const {
    auto it = qualitative_.find(normalize_name(text));
    if (it == qualitative_.end()) return std::nullopt;
    return it->second;
}

std::optional<DayStatus> NormalizationRules::resolve_status(std::string_view text) const {
    auto it = statuses_.find(normalize_name(text));
    if (it == statuses_.end()) return std::nullopt;
    return it->second;
}

// ---------------------------------------------------------------------------
// Parsing

std::vector<std::string> split_delimited(std::string_view line, char separator) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == separator) {
            fields.emplace_back(trim(cur));
            cur.clear();
        } else if (c == '"' && trim(cur).empty()) {
            cur.clear();
            quoted = true;
        } else {
            cur.push_back(c);
        }
    }
    fields.emplace_back(trim(cur));
    return fields;
}

ParsedRecords parse_raw_file(std::istream& source, std::string_view institution, char separator) {
    ParsedRecords out;
    std::string line;
    std::size_t lineno = 0;
    if (!next_row(source, line, lineno)) return out;  // header only or empty

    while (next_row(source, line, lineno)) {
        ++out.rows;
        auto f = split_delimited(line, separator);
        RawRecord raw;
        std::string* slots[kResultColumns] = {&raw.patient_id,   &raw.date_text,    &raw.test_name_raw,
                                              &raw.analyte_raw,  &raw.value_text,   &raw.unit_text,
                                              &raw.ref_min_text, &raw.ref_max_text, &raw.institution};
        for (std::size_t i = 0; i < std::min(f.size(), kResultColumns); ++i) *slots[i] = std::move(f[i]);
        if (raw.institution.empty()) raw.institution = std::string(institution);

        if (f.size() != kResultColumns) {
            out.rejections.push_back(Rejection{std::move(raw), RejectReason::MissingField, lineno,
                                               "expected 9 columns, found " + std::to_string(f.size())});
            continue;
        }
        out.records.push_back(std::move(raw));
        out.lines.push_back(lineno);
    }
    if (source.bad()) throw InputError("read error in result file");
    return out;
}

ParsedRecords parse_raw_file(const std::string& path, std::string_view institution, char separator) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open result file '" + path + "'");
    auto parsed = parse_raw_file(in, institution, separator);
    parsed.source = path;
    for (auto& rej : parsed.rejections) rej.source = path;
    return parsed;
}

NormalizeOutcome normalize_record(const RawRecord& raw, const NormalizationRules& rules) {
    if (trim(raw.patient_id).empty() || trim(raw.date_text).empty() || trim(raw.value_text).empty() ||
        (trim(raw.test_name_raw).empty() && trim(raw.analyte_raw).empty()))
        return reject(raw, RejectReason::MissingField, "empty required field");

    // the analyte is the more specific of the two names
    auto test = rules.resolve_test(raw.analyte_raw);
    if (!test) test = rules.resolve_test(raw.test_name_raw);
    if (!test)
        return reject(raw, RejectReason::UnknownTest, "'" + raw.test_name_raw + "' / '" + raw.analyte_raw + "'");

    const auto day = parse_day(raw.date_text);
    if (!day) return reject(raw, RejectReason::UnparseableDate, raw.date_text);

    auto value = parse_decimal(raw.value_text);
    if (!value) value = rules.qualitative_value(raw.value_text);
    if (!value) return reject(raw, RejectReason::UnparseableValue, raw.value_text);

    const auto* rule = rules.test_rule(*test);
    double ref_min = 0.0;
    double ref_max = 0.0;
    if (rule && rule->fixed_reference) {
        std::tie(ref_min, ref_max) = *rule->fixed_reference;
    } else {
        const auto lo = parse_decimal(raw.ref_min_text);
        const auto hi = parse_decimal(raw.ref_max_text);
        if (!lo || !hi) return reject(raw, RejectReason::MissingReference, "reference bounds missing or unparseable");
        if (*lo > *hi) return reject(raw, RejectReason::MissingReference, "reference bounds inverted");
        ref_min = *lo;
        ref_max = *hi;
    }

    const auto conv = rules.resolve_unit(*test, raw.unit_text);
    if (!conv) return reject(raw, RejectReason::UnknownUnit, "'" + raw.unit_text + "' for " + *test);

    LabResult r;
    r.patient_id = std::string(trim(raw.patient_id));
    r.day = *day;
    r.test = *test;
    r.value = *value * conv->factor;
    r.unit = conv->unit;
    r.ref_min = ref_min * conv->factor;
    r.ref_max = ref_max * conv->factor;
    r.institution = raw.institution;
    if (!std::isfinite(r.value) || !std::isfinite(r.ref_min) || !std::isfinite(r.ref_max))
        return reject(raw, RejectReason::UnparseableValue, "value overflows after unit scaling");
    return r;
}

RawRecord to_raw(const LabResult& r) {
    auto num = [](double v) {
        char buf[64];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, ptr);
    };
    RawRecord raw;
    raw.institution = r.institution;
    raw.patient_id = r.patient_id;
    raw.date_text = r.day.iso();
    raw.test_name_raw = r.test;
    raw.value_text = num(r.value);
    raw.unit_text = r.unit;
    raw.ref_min_text = num(r.ref_min);
    raw.ref_max_text = num(r.ref_max);
    return raw;
}

CleanResult clean_dataset(std::vector<LabResult> records) {
    std::stable_sort(records.begin(), records.end(), result_key_less);
    CleanResult out;
    out.results.reserve(records.size());
    for (std::size_t i = 0; i < records.size();) {
        std::size_t j = i + 1;
        while (j < records.size() && same_result_key(records[i], records[j])) ++j;
        const auto& kept = records[j - 1];
        for (std::size_t k = i; k + 1 < j; ++k)
            out.duplicates.push_back(
                Duplicate{records[k].patient_id, records[k].test, records[k].day, records[k].value, kept.value});
        out.results.push_back(std::move(records[j - 1]));
        i = j;
    }
    return out;
}

std::vector<PatientMeta> parse_patient_file(std::istream& in, char separator, std::vector<FileIssue>& issues,
                                            const std::string& name) {
    std::vector<PatientMeta> out;
    std::string line;
    std::size_t lineno = 0;
    if (!next_row(in, line, lineno)) return out;
    while (next_row(in, line, lineno)) {
        const auto f = split_delimited(line, separator);
        if (f.size() != 3 || f[0].empty()) {
            issues.push_back({name, lineno, "expected 3 columns: patient_id, sex, birth_year_or_age"});
            continue;
        }
        PatientMeta meta;
        meta.patient_id = f[0];
        if (auto sex = parse_sex(f[1])) {
            meta.sex = *sex;
        } else {
            issues.push_back({name, lineno, "unrecognized sex '" + f[1] + "'"});
        }
        if (!f[2].empty()) {
            const auto n = parse_int(f[2]);
            if (!n || *n < 0) issues.push_back({name, lineno, "bad birth year or age '" + f[2] + "'"});
            else if (*n >= 1800) meta.birth_year = *n;
            else meta.age = *n;
        }
        out.push_back(std::move(meta));
    }
    return out;
}

std::vector<OutcomeEvent> parse_outcome_file(std::istream& in, char separator, const NormalizationRules& rules,
                                             std::vector<FileIssue>& issues, const std::string& name) {
    std::vector<OutcomeEvent> out;
    std::string line;
    std::size_t lineno = 0;
    if (!next_row(in, line, lineno)) return out;
    while (next_row(in, line, lineno)) {
        const auto f = split_delimited(line, separator);
        if (f.size() != 3 || f[0].empty()) {
            issues.push_back({name, lineno, "expected 3 columns: patient_id, date, status_text"});
            continue;
        }
        const auto day = parse_day(f[1]);
        if (!day) {
            issues.push_back({name, lineno, "unparseable date '" + f[1] + "'"});
            continue;
        }
        auto status = rules.resolve_status(f[2]);
        if (!status) {
            issues.push_back({name, lineno, "unmapped status '" + f[2] + "', using Unknown"});
            status = DayStatus::Unknown;
        }
        out.push_back(OutcomeEvent{f[0], *day, *status});
    }
    return out;
}

}  // namespace ehrtl
