#include "ehrtl/api.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ehrtl/errors.hpp"

namespace ehrtl {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Presentation config

PresentationConfig PresentationConfig::defaults() {
    PresentationConfig c;
    for (auto cat : kAllCategories) c.category_colors[cat] = std::string(default_color(cat));
    for (auto s : kAllDayStatuses) c.status_colors[s] = std::string(default_color(s));
    return c;
}

namespace {

json config_json(const PresentationConfig& c) {
    json cats = json::object();
    for (const auto& [k, v] : c.category_colors) cats[std::string(to_string(k))] = v;
    json stats = json::object();
    for (const auto& [k, v] : c.status_colors) stats[std::string(to_string(k))] = v;
    return json{{"category_colors", std::move(cats)},
                {"status_colors", std::move(stats)},
                {"theme", c.theme == Theme::Light ? "light" : "dark"},
                {"rc_threshold_percent", c.rc_threshold_percent}};
}

json opt_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json patient_json(const Patient& p) {
    return json{{"patient_id", p.patient_id}, {"sex", to_string(p.sex)}, {"age", p.age ? json(*p.age) : json(nullptr)}};
}

json summary_json(const DaySummary& s) {
    return json{{"day", s.day.iso()},
                {"test_count", s.test_count},
                {"normal_count", s.normal_count},
                {"abnormal_count", s.abnormal_count},
                {"relevant_change_count", s.relevant_change_count}};
}

json activity_json(const ActivityPoint& a) {
    return json{{"day", a.day.iso()}, {"test_count", a.test_count}, {"relevant_change_count", a.relevant_change_count}};
}

json path_json(const ClinicalPath& path) {
    json columns = json::array();
    for (const auto& c : path.columns)
        columns.push_back({{"day", c.day.iso()}, {"status", to_string(c.status)}, {"gap_after", c.gap_after}});
    json rows = json::array();
    for (const auto& r : path.rows) rows.push_back({{"group", r.group}, {"test", r.test}, {"unit", r.unit}});
    json cells = json::array();
    for (const auto& c : path.cells)
        cells.push_back({{"row", c.row},
                         {"column", c.column},
                         {"value", c.value},
                         {"category", to_string(c.category)},
                         {"symbol", symbol_id(c.category)},
                         {"relevant_change", c.relevant_change}});
    json summaries = json::array();
    for (const auto& s : path.day_summaries) summaries.push_back(summary_json(s));
    json activity = json::array();
    for (const auto& a : path.activity) activity.push_back(activity_json(a));
    return json{{"patient", patient_json(path.patient)},
                {"day_order", to_string(path.day_order)},
                {"threshold_percent", path.threshold_percent},
                {"columns", std::move(columns)},
                {"rows", std::move(rows)},
                {"cells", std::move(cells)},
                {"day_summaries", std::move(summaries)},
                {"activity", std::move(activity)}};
}

json series_json(const TestSeries& s) {
    json points = json::array();
    for (const auto& p : s.points)
        points.push_back({{"day", p.day.iso()},
                          {"value", p.value},
                          {"category", to_string(p.category)},
                          {"relevant_change", p.relevant_change}});
    json days = json::array();
    for (const auto& d : s.relevant_change_days) days.push_back(d.iso());
    return json{{"test", s.test},
                {"unit", s.unit},
                {"points", std::move(points)},
                {"overlay",
                 {{"ref_min", s.overlay.ref_min},
                  {"ref_max", s.overlay.ref_max},
                  {"low_cut", opt_number(s.overlay.low_cut)},
                  {"high_cut", opt_number(s.overlay.high_cut)}}},
                {"relevant_change_days", std::move(days)}};
}

}  // namespace

std::string to_json(const PresentationConfig& config) { return config_json(config).dump(); }
std::string to_json(const ClinicalPath& path) { return path_json(path).dump(); }
std::string to_json(const TestSeries& series) { return series_json(series).dump(); }

std::variant<PresentationConfig, std::string> parse_config(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        return std::string("malformed JSON: ") + e.what();
    }
    if (!j.is_object()) return std::string("config must be an object");

    PresentationConfig c;
    auto read_colors = [&](const char* key, auto& target, const auto& all, auto parse) -> std::optional<std::string> {
        if (!j.contains(key) || !j[key].is_object()) return std::string(key) + " missing";
        for (const auto& [name, color] : j[key].items()) {
            const auto k = parse(name);
            if (!k) return std::string(key) + ": unknown key '" + name + "'";
            if (!color.is_string() || color.template get<std::string>().empty())
                return std::string(key) + "." + name + " must be a non-empty string";
            target[*k] = color.template get<std::string>();
        }
        for (auto k : all)
            if (!target.contains(k)) return std::string(key) + "." + std::string(to_string(k)) + " missing";
        return std::nullopt;
    };
    if (auto err = read_colors("category_colors", c.category_colors, kAllCategories,
                               [](std::string_view s) { return parse_category(s); }))
        return *err;
    if (auto err = read_colors("status_colors", c.status_colors, kAllDayStatuses,
                               [](std::string_view s) { return parse_day_status(s); }))
        return *err;

    const auto theme = j.value("theme", std::string("light"));
    if (theme == "light") c.theme = Theme::Light;
    else if (theme == "dark") c.theme = Theme::Dark;
    else return std::string("theme must be 'light' or 'dark'");

    if (!j.contains("rc_threshold_percent") || !j["rc_threshold_percent"].is_number())
        return std::string("rc_threshold_percent missing");
    c.rc_threshold_percent = j["rc_threshold_percent"].get<double>();
    if (!(c.rc_threshold_percent > 0.0) || !std::isfinite(c.rc_threshold_percent))
        return std::string("rc_threshold_percent must be positive");
    return c;
}

ConfigStore::ConfigStore(PresentationConfig initial, std::optional<std::string> sidecar)
    : current_(std::make_shared<const PresentationConfig>(std::move(initial))), sidecar_(std::move(sidecar)) {}

std::shared_ptr<ConfigStore> ConfigStore::open(const std::string& sidecar) {
    PresentationConfig initial = PresentationConfig::defaults();
    if (std::filesystem::exists(sidecar)) {
        std::ifstream in(sidecar, std::ios::binary);
        if (!in) throw InputError("cannot read config '" + sidecar + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        auto parsed = parse_config(buf.str());
        if (auto* err = std::get_if<std::string>(&parsed)) throw InputError("config '" + sidecar + "': " + *err);
        initial = std::get<PresentationConfig>(std::move(parsed));
    }
    return std::make_shared<ConfigStore>(std::move(initial), sidecar);
}

std::shared_ptr<const PresentationConfig> ConfigStore::current() const {
    std::lock_guard lock(mutex_);
    return current_;
}

void ConfigStore::replace(PresentationConfig config) {
    auto next = std::make_shared<const PresentationConfig>(std::move(config));
    std::lock_guard lock(mutex_);
    if (sidecar_) {
        const auto tmp = *sidecar_ + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw InputError("cannot write config '" + tmp + "'");
            out << config_json(*next).dump(2) << '\n';
        }
        std::filesystem::rename(tmp, *sidecar_);
    }
    current_ = std::move(next);
}

// ---------------------------------------------------------------------------
// Routing

namespace {

struct HttpError {
    int status;
    std::string message;
};

ApiResponse json_response(int status, const json& body) { return ApiResponse{status, body.dump(), "application/json"}; }

ApiResponse error_response(int status, const std::string& message) {
    return json_response(status, json{{"error", message}, {"status", status}});
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto end = s.find(sep, start);
        const auto part = s.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        if (!part.empty()) out.emplace_back(part);
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

const std::string* query_value(const ApiRequest& req, const std::string& key) {
    auto it = req.query.find(key);
    return it == req.query.end() ? nullptr : &it->second;
}

std::optional<Day> query_day(const ApiRequest& req, const std::string& key) {
    const auto* v = query_value(req, key);
    if (!v || v->empty()) return std::nullopt;
    auto d = parse_iso_day(*v);
    if (!d) throw HttpError{400, key + " must be an ISO date (yyyy-MM-dd), got '" + *v + "'"};
    return d;
}

DayFilter query_window(const ApiRequest& req) {
    DayFilter f{query_day(req, "from"), query_day(req, "to")};
    if (f.from && f.to && *f.to < *f.from) throw HttpError{400, "from is after to"};
    return f;
}

std::optional<std::set<std::string, std::less<>>> query_list(const ApiRequest& req, const std::string& key) {
    auto [lo, hi] = req.query.equal_range(key);
    if (lo == hi) return std::nullopt;
    std::set<std::string, std::less<>> out;
    for (auto it = lo; it != hi; ++it)
        for (auto& item : split(it->second, ',')) out.insert(std::move(item));
    return out;
}

PathOptions path_options(const ApiRequest& req, double threshold) {
    PathOptions o;
    const auto window = query_window(req);
    o.date_from = window.from;
    o.date_to = window.to;
    if (const auto* v = query_value(req, "only_days_with_tests")) {
        if (*v == "true" || *v == "1" || v->empty()) o.only_days_with_tests = true;
        else if (*v == "false" || *v == "0") o.only_days_with_tests = false;
        else throw HttpError{400, "only_days_with_tests must be true or false"};
    }
    if (const auto* v = query_value(req, "order")) {
        if (*v == "asc" || *v == "ascending") o.day_order = DayOrder::Ascending;
        else if (*v == "desc" || *v == "descending") o.day_order = DayOrder::Descending;
        else throw HttpError{400, "order must be asc or desc"};
    }
    o.selected_tests = query_list(req, "tests");
    o.selected_groups = query_list(req, "groups");
    o.threshold_percent = threshold;
    return o;
}

json patients_json(const Dataset& d) {
    json out = json::array();
    for (const auto& [id, p] : d.patients) {
        const auto rs = d.patient_results(id);
        std::optional<Day> first, last;
        for (const auto& r : rs) {
            if (!first || r.day < *first) first = r.day;
            if (!last || *last < r.day) last = r.day;
        }
        auto entry = patient_json(p);
        entry["result_count"] = rs.size();
        entry["first_day"] = first ? json(first->iso()) : json(nullptr);
        entry["last_day"] = last ? json(last->iso()) : json(nullptr);
        out.push_back(std::move(entry));
    }
    return out;
}

json groups_json(const GroupTable& groups) {
    json out = json::array();
    for (const auto& g : groups.groups()) out.push_back({{"name", g.name}, {"rank", g.rank}, {"acronyms", g.acronyms}});
    return out;
}

}  // namespace

ApiService::ApiService(std::shared_ptr<const Dataset> dataset, std::shared_ptr<ConfigStore> config, GroupTable groups)
    : dataset_(std::move(dataset)), config_(std::move(config)), groups_(std::move(groups)) {
    if (!dataset_) throw std::invalid_argument("ApiService needs a dataset");
    if (!config_) config_ = std::make_shared<ConfigStore>();
}

ApiResponse ApiService::handle(const ApiRequest& req) const {
    const auto parts = split(req.path, '/');
    const bool is_get = req.method == "GET" || req.method == "HEAD";
    try {
        if (parts.empty() || parts[0] != "v1") throw HttpError{404, "no route for " + req.path};
        const auto n = parts.size();

        if (n == 2 && parts[1] == "config") {
            if (is_get) return ApiResponse{200, to_json(*config_->current()), "application/json"};
            if (req.method == "PUT") {
                auto parsed = parse_config(req.body);
                if (auto* err = std::get_if<std::string>(&parsed)) throw HttpError{422, *err};
                config_->replace(std::get<PresentationConfig>(std::move(parsed)));
                return ApiResponse{200, to_json(*config_->current()), "application/json"};
            }
            throw HttpError{405, "config supports GET and PUT"};
        }

        if (!is_get) throw HttpError{405, "clinical data is read-only"};
        // one snapshot per request
        const auto config = config_->current();
        const Dataset& d = *dataset_;

        if (n == 2 && parts[1] == "patients") return json_response(200, patients_json(d));
        if (n == 2 && parts[1] == "groups") return json_response(200, groups_json(groups_));

        if (n >= 4 && parts[1] == "patients") {
            const auto& id = parts[2];
            if (!d.find_patient(id)) throw HttpError{404, "unknown patient '" + id + "'"};

            if (n == 4 && parts[3] == "path")
                return ApiResponse{200, to_json(build_clinical_path(d, id, path_options(req, config->rc_threshold_percent), groups_)),
                                   "application/json"};
            if (n == 5 && parts[3] == "path" && parts[4] == "export") {
                std::ostringstream out;
                export_path_delimited(build_clinical_path(d, id, path_options(req, config->rc_threshold_percent), groups_), out);
                return ApiResponse{200, out.str(), "text/plain; charset=utf-8"};
            }
            if (n == 4 && parts[3] == "summaries") {
                const auto sums = day_summaries(d, id, query_window(req), config->rc_threshold_percent);
                json s = json::array();
                for (const auto& x : sums) s.push_back(summary_json(x));
                json a = json::array();
                for (const auto& x : to_activity(sums)) a.push_back(activity_json(x));
                return json_response(200, json{{"patient_id", id}, {"day_summaries", std::move(s)}, {"activity", std::move(a)}});
            }
            if (n == 6 && parts[3] == "tests" && parts[5] == "series") {
                const auto window = query_window(req);
                std::vector<std::string> tests = split(parts[4], ',');
                if (auto extra = query_list(req, "tests"))
                    for (const auto& t : *extra)
                        if (std::find(tests.begin(), tests.end(), t) == tests.end()) tests.push_back(t);
                json series = json::array();
                for (const auto& t : tests) series.push_back(series_json(test_series(d, id, t, window, config->rc_threshold_percent)));
                return json_response(200, json{{"patient_id", id}, {"series", std::move(series)}});
            }
        }
        throw HttpError{404, "no route for " + req.path};
    } catch (const HttpError& e) {
        return error_response(e.status, e.message);
    } catch (const NotFoundError& e) {
        return error_response(404, e.what());
    } catch (const std::invalid_argument& e) {
        return error_response(400, e.what());
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
}

}  // namespace ehrtl
