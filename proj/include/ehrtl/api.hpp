#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "ehrtl/analytics.hpp"
#include "ehrtl/dataset.hpp"
#include "ehrtl/model.hpp"
#include "ehrtl/timeline.hpp"

namespace ehrtl {

enum class Theme { Light, Dark };

struct PresentationConfig {
    std::map<ResultCategory, std::string> category_colors;
    std::map<DayStatus, std::string> status_colors;
    Theme theme = Theme::Light;
    double rc_threshold_percent = kDefaultThresholdPercent;

    static PresentationConfig defaults();

    friend bool operator==(const PresentationConfig&, const PresentationConfig&) = default;
};

std::string to_json(const PresentationConfig& config);
/// Parses and validates: all five category colors, all six status colors,
/// theme "light" or "dark", threshold > 0. Returns an error message on failure.
std::variant<PresentationConfig, std::string> parse_config(std::string_view json_text);

std::string to_json(const ClinicalPath& path);
std::string to_json(const TestSeries& series);

/// Process-wide presentation settings. Readers get an immutable snapshot;
/// replace() swaps atomically and persists to the sidecar file when set.
class ConfigStore {
public:
    explicit ConfigStore(PresentationConfig initial = PresentationConfig::defaults(),
                         std::optional<std::string> sidecar = std::nullopt);

    /// Loads the sidecar when it exists, otherwise starts from defaults.
    static std::shared_ptr<ConfigStore> open(const std::string& sidecar);

    [[nodiscard]] std::shared_ptr<const PresentationConfig> current() const;
    void replace(PresentationConfig config);

private:
    mutable std::mutex mutex_;
    std::shared_ptr<const PresentationConfig> current_;
    std::optional<std::string> sidecar_;
};

struct ApiRequest {
    std::string method;
    std::string path;  // decoded
    std::multimap<std::string, std::string> query;
    std::string body;
};

struct ApiResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// Read-only JSON service over an immutable dataset. Routes live under /v1:
///   GET /patients
///   GET /patients/{id}/path?from&to&only_days_with_tests&order&tests&groups
///   GET /patients/{id}/path/export?...   (delimited text)
///   GET /patients/{id}/summaries?from&to
///   GET /patients/{id}/tests/{acronym[,acronym...]}/series?from&to&tests
///   GET /groups
///   GET, PUT /config
class ApiService {
public:
    ApiService(std::shared_ptr<const Dataset> dataset, std::shared_ptr<ConfigStore> config,
               GroupTable groups = GroupTable{});

    [[nodiscard]] ApiResponse handle(const ApiRequest& request) const;

    [[nodiscard]] const Dataset& dataset() const noexcept { return *dataset_; }
    [[nodiscard]] ConfigStore& config() const noexcept { return *config_; }

private:
    std::shared_ptr<const Dataset> dataset_;
    std::shared_ptr<ConfigStore> config_;
    GroupTable groups_;
};

/// Raised when the listen address cannot be bound.
class BindError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// HTTP transport for ApiService, optionally serving static UI assets.
class HttpServer {
public:
    HttpServer(const ApiService& service, std::optional<std::string> static_dir = std::nullopt);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Port 0 picks a free port. Throws BindError.
    int bind(const std::string& host, int port);
    /// Blocks until stop() is called.
    void serve();
    void stop();
    [[nodiscard]] bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace ehrtl
