#include "ehrtl/categorize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "ehrtl/errors.hpp"
#include "ehrtl/ingest.hpp"

namespace ehrtl {

std::optional<double> median(std::vector<double> values) {
    if (values.empty()) return std::nullopt;
    const auto n = values.size();
    const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(values.begin(), mid, values.end());
    const double upper = *mid;
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), mid);
    return (lower + upper) / 2.0;
}

CutsTable compute_cuts(std::span<const LabResult> results) {
    struct Subsets {
        std::vector<double> below;
        std::vector<double> above;
    };
    std::map<std::string, Subsets, std::less<>> by_test;
    for (const auto& r : results) {
        auto& s = by_test[r.test];
        if (r.value < r.ref_min) s.below.push_back(r.value);
        else if (r.value > r.ref_max) s.above.push_back(r.value);
    }
    CutsTable cuts;
    for (auto& [test, s] : by_test)
        cuts.emplace(test, ReferenceCuts{test, median(std::move(s.below)), median(std::move(s.above))});
    return cuts;
}

std::optional<double> effective_high_cut(double ref_max, const ReferenceCuts& cuts) noexcept {
    if (!cuts.high_cut) return std::nullopt;
    return std::max(*cuts.high_cut, ref_max);
}

std::optional<double> effective_low_cut(double ref_min, const ReferenceCuts& cuts) noexcept {
    if (!cuts.low_cut) return std::nullopt;
    return std::min(*cuts.low_cut, ref_min);
}

ResultCategory categorize(double value, double ref_min, double ref_max, const ReferenceCuts& cuts) {
    if (!std::isfinite(value) || !std::isfinite(ref_min) || !std::isfinite(ref_max))
        throw std::domain_error("categorize: non-finite input");
    if (value > ref_max) {
        const auto h = effective_high_cut(ref_max, cuts);
        return (h && value > *h) ? ResultCategory::VeryHigh : ResultCategory::High;
    }
    if (value < ref_min) {
        const auto l = effective_low_cut(ref_min, cuts);
        return (l && value < *l) ? ResultCategory::VeryLow : ResultCategory::Low;
    }
    return ResultCategory::Normal;
}

ResultCategory categorize(double value, double ref_min, double ref_max) {
    return categorize(value, ref_min, ref_max, ReferenceCuts{});
}

void write_cuts(std::ostream& out, const CutsTable& cuts, char separator) {
    auto num = [](const std::optional<double>& v) -> std::string {
        if (!v) return {};
        char buf[64];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, *v);
        return std::string(buf, ptr);
    };
    out << "test" << separator << "low_cut" << separator << "high_cut" << '\n';
    for (const auto& [test, c] : cuts) out << test << separator << num(c.low_cut) << separator << num(c.high_cut) << '\n';
}

CutsTable read_cuts(std::istream& in, char separator) {
    CutsTable cuts;
    std::string line;
    std::size_t lineno = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        const auto f = split_delimited(line, separator);
        if (f.size() != 3 || f[0].empty()) throw FormatError(lineno, "expected test|low_cut|high_cut");
        ReferenceCuts c{f[0], std::nullopt, std::nullopt};
        for (int i : {1, 2}) {
            if (f[i].empty()) continue;
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(f[i].data(), f[i].data() + f[i].size(), v);
            if (ec != std::errc{} || ptr != f[i].data() + f[i].size()) throw FormatError(lineno, "bad cut '" + f[i] + "'");
            (i == 1 ? c.low_cut : c.high_cut) = v;
        }
        cuts.emplace(c.test, std::move(c));
    }
    return cuts;
}

}  // namespace ehrtl
