#include "ehrtl/day.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace ehrtl {

namespace {

bool parse_uint(std::string_view s, unsigned& out) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

std::optional<Day> make_day(unsigned y, unsigned m, unsigned d) {
    using namespace std::chrono;
    const year_month_day ymd{year{static_cast<int>(y)}, month{m}, day{d}};
    if (!ymd.ok()) return std::nullopt;
    return Day::from_sys_days(sys_days{ymd});
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

Day Day::from_ymd(int year, unsigned month, unsigned day) {
    if (year < 0) throw std::invalid_argument("negative year");
    auto d = make_day(static_cast<unsigned>(year), month, day);
    if (!d) throw std::invalid_argument("invalid calendar date");
    return *d;
}

std::string Day::iso() const {
    const auto v = ymd();
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(v.year()),
                  static_cast<unsigned>(v.month()), static_cast<unsigned>(v.day()));
    return buf;
}

std::string Day::br() const {
    const auto v = ymd();
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02u/%02u/%04d", static_cast<unsigned>(v.day()),
                  static_cast<unsigned>(v.month()), static_cast<int>(v.year()));
    return buf;
}

std::optional<Day> parse_iso_day(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    unsigned y = 0, m = 0, d = 0;
    if (!parse_uint(text.substr(0, 4), y) || !parse_uint(text.substr(5, 2), m) ||
        !parse_uint(text.substr(8, 2), d))
        return std::nullopt;
    return make_day(y, m, d);
}

std::optional<Day> parse_day(std::string_view text) {
    text = trim(text);
    if (const auto cut = text.find_first_of(" T"); cut != std::string_view::npos) {
        text = text.substr(0, cut);
    }
    if (auto iso = parse_iso_day(text)) return iso;

    // dd/MM/yyyy; single-digit day and month are tolerated
    const auto a = text.find('/');
    if (a == std::string_view::npos) return std::nullopt;
    const auto b = text.find('/', a + 1);
    if (b == std::string_view::npos) return std::nullopt;
    const auto ds = text.substr(0, a);
    const auto ms = text.substr(a + 1, b - a - 1);
    const auto ys = text.substr(b + 1);
    if (ds.size() > 2 || ms.size() > 2 || ys.size() != 4) return std::nullopt;
    unsigned y = 0, m = 0, d = 0;
    if (!parse_uint(ds, d) || !parse_uint(ms, m) || !parse_uint(ys, y)) return std::nullopt;
    return make_day(y, m, d);
}

}  // namespace ehrtl
