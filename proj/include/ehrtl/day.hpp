#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ehrtl {

/// A calendar day. Every timestamp in the engine is truncated to one-day
/// resolution; the serial is the number of days since 1970-01-01.
class Day {
public:
    constexpr Day() = default;
    constexpr explicit Day(std::int32_t serial) : serial_(serial) {}

    static Day from_ymd(int year, unsigned month, unsigned day);
    static Day from_sys_days(std::chrono::sys_days d) {
        return Day(static_cast<std::int32_t>(d.time_since_epoch().count()));
    }

    [[nodiscard]] constexpr std::int32_t serial() const noexcept { return serial_; }
    [[nodiscard]] std::chrono::sys_days sys_days() const noexcept {
        return std::chrono::sys_days{std::chrono::days{serial_}};
    }
    [[nodiscard]] std::chrono::year_month_day ymd() const noexcept {
        return std::chrono::year_month_day{sys_days()};
    }

    /// yyyy-MM-dd
    [[nodiscard]] std::string iso() const;
    /// dd/MM/yyyy
    [[nodiscard]] std::string br() const;

    [[nodiscard]] constexpr Day next() const noexcept { return Day(serial_ + 1); }
    [[nodiscard]] constexpr Day prev() const noexcept { return Day(serial_ - 1); }
    [[nodiscard]] constexpr Day plus(std::int32_t n) const noexcept { return Day(serial_ + n); }

    friend constexpr std::int32_t operator-(Day a, Day b) noexcept { return a.serial_ - b.serial_; }
    friend constexpr auto operator<=>(Day, Day) = default;
    friend constexpr bool operator==(Day, Day) = default;

private:
    std::int32_t serial_ = 0;
};

/// Strict ISO yyyy-MM-dd, as used in query strings and persisted files.
std::optional<Day> parse_iso_day(std::string_view text);

/// Accepts dd/MM/yyyy and yyyy-MM-dd, each optionally followed by a time
/// part (separated by a space or 'T') which is discarded.
std::optional<Day> parse_day(std::string_view text);

}  // namespace ehrtl

template <>
struct std::hash<ehrtl::Day> {
    std::size_t operator()(ehrtl::Day d) const noexcept { return std::hash<std::int32_t>{}(d.serial()); }
};
