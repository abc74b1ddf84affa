#include <filesystem>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ehrtl/api.hpp"
#include "ehrtl/store.hpp"
#include "generators.hpp"

using namespace ehrtl;
using nlohmann::json;

namespace {

const Day kDay = Day::from_ymd(2020, 6, 1);

std::shared_ptr<const Dataset> fixture() {
    auto d = std::make_shared<Dataset>();
    d->results = {gen::result("P1", kDay, "Hb", 10, 12, 16),         gen::result("P1", kDay.plus(2), "Hb", 16, 12, 16),
                  gen::result("P1", kDay.plus(5), "Hb", 16.5, 12, 16), gen::result("P1", kDay, "HCT", 40, 36, 48),
                  gen::result("P1", kDay.plus(5), "HCT", 44, 36, 48),  gen::result("P2", kDay, "CRP", 3, 0, 5)};
    std::sort(d->results.begin(), d->results.end(), result_key_less);
    add_missing_patients(*d);
    d->cuts = compute_cuts(d->results);
    return d;
}

class Api : public ::testing::Test {
protected:
    ApiResponse get(const std::string& path, std::multimap<std::string, std::string> query = {}) const {
        return service.handle(ApiRequest{"GET", path, std::move(query), ""});
    }
    json get_json(const std::string& path, std::multimap<std::string, std::string> query = {}) const {
        const auto r = get(path, std::move(query));
        EXPECT_EQ(r.status, 200) << r.body;
        return json::parse(r.body);
    }
    ApiResponse put_config(const json& body) const {
        return service.handle(ApiRequest{"PUT", "/v1/config", {}, body.dump()});
    }

    std::shared_ptr<const Dataset> dataset = fixture();
    std::shared_ptr<ConfigStore> config = std::make_shared<ConfigStore>();
    ApiService service{dataset, config};
};

}  // namespace

TEST_F(Api, PatientsList) {
    const auto body = get_json("/v1/patients");
    ASSERT_EQ(body.size(), 2u);
    EXPECT_EQ(body[0]["patient_id"], "P1");
    EXPECT_EQ(body[0]["result_count"], 5);
    EXPECT_EQ(body[0]["first_day"], "2020-06-01");
    EXPECT_EQ(body[0]["last_day"], "2020-06-06");
    EXPECT_EQ(body[1]["result_count"], 1);

    ApiService empty(std::make_shared<const Dataset>(), config);
    EXPECT_EQ(empty.handle({"GET", "/v1/patients", {}, ""}).body, "[]");
}

TEST_F(Api, PathIsTheSerializedModel) {
    const auto r = get("/v1/patients/P1/path");
    EXPECT_EQ(r.status, 200);
    EXPECT_EQ(r.content_type, "application/json");
    EXPECT_EQ(r.body, to_json(build_clinical_path(*dataset, "P1", {})));
}

TEST_F(Api, PathQueryParameters) {
    const auto sparse = get_json("/v1/patients/P1/path", {{"only_days_with_tests", "true"}});
    std::set<int> used;
    for (const auto& c : sparse["cells"]) used.insert(c["column"].get<int>());
    EXPECT_EQ(used.size(), sparse["columns"].size());

    const auto asc = get_json("/v1/patients/P1/path", {{"order", "asc"}});
    const auto desc = get_json("/v1/patients/P1/path", {{"order", "desc"}});
    auto cols = desc["columns"];
    std::reverse(cols.begin(), cols.end());
    std::vector<std::string> a, b;
    for (const auto& c : asc["columns"]) a.push_back(c["day"]);
    for (const auto& c : cols) b.push_back(c["day"]);
    EXPECT_EQ(a, b);

    const auto hb = get_json("/v1/patients/P1/path", {{"tests", "Hb"}});
    ASSERT_EQ(hb["rows"].size(), 1u);
    EXPECT_EQ(hb["rows"][0]["test"], "Hb");

    const auto window = get_json("/v1/patients/P1/path", {{"from", "2020-06-02"}, {"to", "2020-06-03"}});
    EXPECT_EQ(window["columns"].size(), 2u);
}

TEST_F(Api, Errors) {
    EXPECT_EQ(get("/v1/patients/NOPE/path").status, 404);
    EXPECT_EQ(get("/v1/patients/P1/path", {{"from", "01/06/2020"}}).status, 400);
    EXPECT_EQ(get("/v1/patients/P1/path", {{"order", "sideways"}}).status, 400);
    EXPECT_EQ(get("/v1/patients/P1/path", {{"only_days_with_tests", "maybe"}}).status, 400);
    EXPECT_EQ(get("/v1/patients/P1/path", {{"from", "2020-06-05"}, {"to", "2020-06-01"}}).status, 400);
    EXPECT_EQ(get("/v1/patients/P1/tests/PLT/series").status, 404);
    EXPECT_EQ(get("/v1/nowhere").status, 404);
    EXPECT_EQ(get("/patients").status, 404);
    EXPECT_EQ(service.handle({"DELETE", "/v1/patients", {}, ""}).status, 405);
    EXPECT_EQ(service.handle({"PUT", "/v1/patients/P1/path", {}, ""}).status, 405);
    const auto err = json::parse(get("/v1/patients/NOPE/path").body);
    EXPECT_TRUE(err.contains("error"));
}

TEST_F(Api, Series) {
    const auto body = get_json("/v1/patients/P1/tests/Hb/series");
    ASSERT_EQ(body["series"].size(), 1u);
    const auto& s = body["series"][0];
    EXPECT_EQ(s["points"].size(), 3u);
    for (const char* k : {"ref_min", "ref_max", "low_cut", "high_cut"}) EXPECT_TRUE(s["overlay"].contains(k)) << k;
    std::vector<std::string> flagged;
    for (const auto& p : s["points"])
        if (p["relevant_change"].get<bool>()) flagged.push_back(p["day"]);
    EXPECT_EQ(flagged, s["relevant_change_days"].get<std::vector<std::string>>());
    EXPECT_EQ(s["overlay"]["low_cut"], 10.0);
    const auto hct = get_json("/v1/patients/P1/tests/HCT/series")["series"][0];
    EXPECT_EQ(hct["overlay"]["low_cut"], nullptr);
    EXPECT_EQ(hct["overlay"]["high_cut"], nullptr);

    const auto multi = get_json("/v1/patients/P1/tests/Hb,HCT/series");
    ASSERT_EQ(multi["series"].size(), 2u);
    EXPECT_EQ(multi["series"][1]["test"], "HCT");
    const auto via_query = get_json("/v1/patients/P1/tests/Hb/series", {{"tests", "Hb,HCT"}});
    EXPECT_EQ(via_query, multi);
}

TEST_F(Api, SummariesAndGroupsAndExport) {
    const auto s = get_json("/v1/patients/P1/summaries");
    EXPECT_EQ(s["day_summaries"].size(), 3u);
    EXPECT_EQ(s["day_summaries"][0]["test_count"], 2);
    const auto g = get_json("/v1/groups");
    EXPECT_EQ(g[0]["name"], "Red Series Hemogram");
    const auto e = get("/v1/patients/P1/path/export", {{"only_days_with_tests", "1"}});
    EXPECT_EQ(e.status, 200);
    EXPECT_EQ(e.body.substr(0, 16), "group|test|2020-");
}

TEST_F(Api, ConfigRoundTripAndValidation) {
    auto cfg = json::parse(get("/v1/config").body);
    EXPECT_EQ(cfg["category_colors"].size(), 5u);
    EXPECT_EQ(cfg["status_colors"].size(), 6u);
    cfg["theme"] = "dark";
    cfg["category_colors"]["VeryHigh"] = "#000000";
    EXPECT_EQ(put_config(cfg).status, 200);
    EXPECT_EQ(json::parse(get("/v1/config").body), cfg);

    auto missing = cfg;
    missing["category_colors"].erase("Low");
    EXPECT_EQ(put_config(missing).status, 422);
    auto zero = cfg;
    zero["rc_threshold_percent"] = 0;
    EXPECT_EQ(put_config(zero).status, 422);
    auto bad_theme = cfg;
    bad_theme["theme"] = "sepia";
    EXPECT_EQ(put_config(bad_theme).status, 422);
    EXPECT_EQ(service.handle({"PUT", "/v1/config", {}, "{oops"}).status, 422);
    EXPECT_EQ(json::parse(get("/v1/config").body), cfg);  // failed PUTs change nothing
}

TEST_F(Api, ThresholdChangeReevaluatesFlags) {
    // HCT 40 -> 44 is +10%; Hb 10 -> 16 is +60%
    auto flagged = [&] {
        const auto p = get_json("/v1/patients/P1/path");
        int n = 0;
        for (const auto& c : p["cells"]) n += c["relevant_change"].get<bool>();
        return n;
    };
    EXPECT_EQ(flagged(), 0);
    auto cfg = json::parse(get("/v1/config").body);
    cfg["rc_threshold_percent"] = 50;
    ASSERT_EQ(put_config(cfg).status, 200);
    EXPECT_EQ(flagged(), 1);
    EXPECT_EQ(get_json("/v1/patients/P1/path")["threshold_percent"], 50.0);
}

TEST_F(Api, ReadOnlyOverDataset) {
    const Dataset before = *dataset;
    for (const auto* p : {"/v1/patients", "/v1/patients/P1/path", "/v1/patients/P1/tests/Hb/series"}) {
        for (const auto* m : {"GET", "PUT", "POST", "DELETE"}) (void)service.handle({m, p, {}, "{}"});
    }
    EXPECT_EQ(*dataset, before);
}

TEST(ConfigStore, SidecarPersistence) {
    const auto path = (std::filesystem::temp_directory_path() / "ehrtl_config_sidecar.json").string();
    std::filesystem::remove(path);
    auto cfg = PresentationConfig::defaults();
    cfg.theme = Theme::Dark;
    cfg.rc_threshold_percent = 75;
    ConfigStore::open(path)->replace(cfg);
    EXPECT_EQ(*ConfigStore::open(path)->current(), cfg);
    std::filesystem::remove(path);
    EXPECT_EQ(*ConfigStore::open(path)->current(), PresentationConfig::defaults());
}

TEST(ConfigStore, SnapshotIsStableAcrossReplace) {
    ConfigStore store;
    const auto before = store.current();
    auto cfg = PresentationConfig::defaults();
    cfg.rc_threshold_percent = 10;
    store.replace(cfg);
    EXPECT_EQ(before->rc_threshold_percent, 100);
    EXPECT_EQ(store.current()->rc_threshold_percent, 10);
}

TEST(Http, ServesOverSocketAndReportsBindErrors) {
    auto config = std::make_shared<ConfigStore>();
    ApiService service(fixture(), config);
    HttpServer server(service);
    const int port = server.bind("127.0.0.1", 0);
    ASSERT_GT(port, 0);
    std::thread t([&] { server.serve(); });

    httplib::Client client("127.0.0.1", port);
    httplib::Result res;
    for (int i = 0; i < 50 && !(res = client.Get("/v1/patients")); ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(json::parse(res->body).size(), 2u);
    auto path = client.Get("/v1/patients/P1/path?only_days_with_tests=true&order=desc");
    ASSERT_TRUE(path);
    EXPECT_EQ(json::parse(path->body)["day_order"], "desc");
    EXPECT_EQ(client.Get("/v1/patients/X/path")->status, 404);

    HttpServer second(service);
    EXPECT_THROW(second.bind("127.0.0.1", port), BindError);

    server.stop();
    t.join();
}
