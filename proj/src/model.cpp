#include "ehrtl/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "ehrtl/errors.hpp"

namespace ehrtl {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

std::string_view to_string(Sex s) noexcept {
    switch (s) {
        case Sex::F: return "F";
        case Sex::M: return "M";
        case Sex::Unknown: break;
    }
    return "Unknown";
}

std::optional<Sex> parse_sex(std::string_view text) {
    const auto t = lower(trim(text));
    if (t == "f" || t == "female" || t == "feminino") return Sex::F;
    if (t == "m" || t == "male" || t == "masculino") return Sex::M;
    if (t.empty() || t == "unknown" || t == "u" || t == "i") return Sex::Unknown;
    return std::nullopt;
}

std::string_view to_string(DayStatus s) noexcept {
    switch (s) {
        case DayStatus::Hospitalized: return "Hospitalized";
        case DayStatus::ExternalService: return "ExternalService";
        case DayStatus::OutpatientCare: return "OutpatientCare";
        case DayStatus::Discharged: return "Discharged";
        case DayStatus::Died: return "Died";
        case DayStatus::Unknown: break;
    }
    return "Unknown";
}

std::optional<DayStatus> parse_day_status(std::string_view text) {
    for (auto s : kAllDayStatuses)
        if (to_string(s) == text) return s;
    return std::nullopt;
}

std::string_view default_color(DayStatus s) noexcept {
    switch (s) {
        case DayStatus::Hospitalized: return "#d62728";
        case DayStatus::ExternalService: return "#2ca02c";
        case DayStatus::OutpatientCare: return "#1f77b4";
        case DayStatus::Discharged: return "#f2d024";
        case DayStatus::Died: return "#ff7f0e";
        case DayStatus::Unknown: break;
    }
    return "#b0b0b0";
}

bool result_key_less(const LabResult& a, const LabResult& b) noexcept {
    return std::tie(a.patient_id, a.test, a.day) < std::tie(b.patient_id, b.test, b.day);
}

bool same_result_key(const LabResult& a, const LabResult& b) noexcept {
    return a.day == b.day && a.test == b.test && a.patient_id == b.patient_id;
}

std::optional<ResultCategory> category_from_order(int order) noexcept {
    if (order < 0 || order > 4) return std::nullopt;
    return static_cast<ResultCategory>(order);
}

std::string_view to_string(ResultCategory c) noexcept {
    switch (c) {
        case ResultCategory::VeryLow: return "VeryLow";
        case ResultCategory::Low: return "Low";
        case ResultCategory::Normal: return "Normal";
        case ResultCategory::High: return "High";
        case ResultCategory::VeryHigh: return "VeryHigh";
    }
    return "Normal";
}

std::optional<ResultCategory> parse_category(std::string_view text) {
    for (auto c : kAllCategories)
        if (to_string(c) == text || short_code(c) == text) return c;
    return std::nullopt;
}

std::string_view symbol_id(ResultCategory c) noexcept {
    switch (c) {
        case ResultCategory::VeryLow: return "double-down";
        case ResultCategory::Low: return "down";
        case ResultCategory::Normal: return "neutral";
        case ResultCategory::High: return "up";
        case ResultCategory::VeryHigh: return "double-up";
    }
    return "neutral";
}

std::string_view short_code(ResultCategory c) noexcept {
    switch (c) {
        case ResultCategory::VeryLow: return "VL";
        case ResultCategory::Low: return "L";
        case ResultCategory::Normal: return "N";
        case ResultCategory::High: return "H";
        case ResultCategory::VeryHigh: return "VH";
    }
    return "N";
}

std::string_view default_color(ResultCategory c) noexcept {
    switch (c) {
        case ResultCategory::VeryLow: return "#2166ac";
        case ResultCategory::Low: return "#67a9cf";
        case ResultCategory::Normal: return "#5e5e5e";
        case ResultCategory::High: return "#ef8a62";
        case ResultCategory::VeryHigh: return "#b2182b";
    }
    return "#5e5e5e";
}

std::vector<TestGroup> default_group_table() {
    return {
        {"Red Series Hemogram", {"RBC", "Hb", "HCT", "MCV", "MCH", "MCHC", "RDW"}, 0},
        {"White Series Hemogram",
         {"WBC", "basophil#", "basophil%", "eos#", "eos%", "lymphocyte#", "lymphocyte%",
          "monocyte#", "monocyte%", "neutrophil#", "neutrophil%"},
         1},
        {"Hemogram - Platelets", {"PLT"}, 2},
        {"Medium Platelet Volume", {"MPV"}, 3},
        {"Liver Function / Coagulation Factors",
         {"aPTT", "AT", "PT", "TT", "ALP", "ALT", "AST", "BILC", "BILU", "PT%", "D-D",
          "fibrinogen", "GGT", "TBIL", "albumin"},
         4},
        {"Liver Function", {"eGFR", "creatinine", "urea"}, 5},
        {"Ion Evaluation", {"Ca", "Ca++", "Ca++F", "Cl-", "HCO3-", "K+", "Na+", "pH"}, 6},
        {"Cardio Evaluation", {"cTnI", "hs-cTnT", "NT-proBNP"}, 7},
        {"Inflammatory Evaluation",
         {"CRP", "PCT", "ESR", "globulin", "IL-6", "IL-10", "TNF", "LDH"},
         8},
        {"Endocrine Evaluation", {"glucose", "HbA1c", "TSH", "PTH"}, 9},
        {"General Evaluation", {"cholesterol", "ferritin", "protein"}, 10},
        {"COVID", {"covid_pcr", "covid_iga", "covid_soro", "covid_igg", "covid_igm"}, 11},
    };
}

GroupTable::GroupTable() : GroupTable(default_group_table()) {}

GroupTable::GroupTable(std::vector<TestGroup> groups) : groups_(std::move(groups)) {
    std::stable_sort(groups_.begin(), groups_.end(),
                     [](const TestGroup& a, const TestGroup& b) { return a.rank < b.rank; });
    std::set<int> ranks;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        if (groups_[g].name.empty()) throw std::invalid_argument("group with empty name");
        if (groups_[g].name == kUncategorizedGroup)
            throw std::invalid_argument("group name 'Uncategorized' is reserved");
        if (!ranks.insert(groups_[g].rank).second)
            throw std::invalid_argument("duplicate group rank " + std::to_string(groups_[g].rank));
        for (std::size_t r = 0; r < groups_[g].acronyms.size(); ++r) {
            const auto& acr = groups_[g].acronyms[r];
            if (acr.empty()) throw std::invalid_argument("empty acronym in group " + groups_[g].name);
            if (!index_.emplace(acr, std::pair{g, r}).second)
                throw std::invalid_argument("acronym '" + acr + "' listed in more than one group");
        }
    }
}

GroupTable GroupTable::parse(std::istream& in) {
    std::vector<TestGroup> groups;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view v = line;
        if (auto hash = v.find('#'); hash != std::string_view::npos) {
            // '#' is also part of acronyms like "eos#"; a comment starts only at line start
            if (trim(v.substr(0, hash)).empty()) v = {};
        }
        v = trim(v);
        if (v.empty()) continue;

        const auto p1 = v.find('|');
        const auto p2 = p1 == std::string_view::npos ? p1 : v.find('|', p1 + 1);
        if (p2 == std::string_view::npos)
            throw FormatError(lineno, "expected 'rank | name | acronyms'");
        const auto rank_text = trim(v.substr(0, p1));
        int rank = 0;
        auto [ptr, ec] = std::from_chars(rank_text.data(), rank_text.data() + rank_text.size(), rank);
        if (ec != std::errc{} || ptr != rank_text.data() + rank_text.size())
            throw FormatError(lineno, "bad rank '" + std::string(rank_text) + "'");

        TestGroup g;
        g.rank = rank;
        g.name = std::string(trim(v.substr(p1 + 1, p2 - p1 - 1)));
        std::string_view rest = v.substr(p2 + 1);
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const auto item = trim(rest.substr(0, comma));
            if (!item.empty()) g.acronyms.emplace_back(item);
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        groups.push_back(std::move(g));
    }
    try {
        return GroupTable(std::move(groups));
    } catch (const std::invalid_argument& e) {
        throw FormatError(lineno, e.what());
    }
}

GroupTable GroupTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open group table '" + path + "'");
    return parse(in);
}

std::optional<GroupPosition> GroupTable::locate(std::string_view acronym) const {
    auto it = index_.find(std::string(acronym));
    if (it == index_.end()) return std::nullopt;
    const auto& g = groups_[it->second.first];
    return GroupPosition{g.name, g.rank, it->second.second};
}

std::string_view GroupTable::group_of(std::string_view acronym) const {
    auto pos = locate(acronym);
    return pos ? pos->group : kUncategorizedGroup;
}

bool GroupTable::row_less(std::string_view a, std::string_view b) const {
    const auto pa = locate(a);
    const auto pb = locate(b);
    if (pa && pb) return std::tie(pa->rank, pa->row) < std::tie(pb->rank, pb->row);
    if (pa.has_value() != pb.has_value()) return pa.has_value();
    return a < b;
}

}  // namespace ehrtl
