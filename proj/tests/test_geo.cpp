#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "doctest.h"
#include "geo_checks.hpp"
#include "httplib.h"
#include "lifestyles/geo.hpp"
#include "lifestyles/io.hpp"
#include "lifestyles/rng.hpp"
#include "test_util.hpp"

using namespace lifestyles;
using geo::TowerSite;

namespace {

std::vector<TowerSite> make_sites(const std::vector<std::pair<double, double>>& xy) {
    std::vector<TowerSite> sites;
    for (std::size_t i = 0; i < xy.size(); ++i) {
        TowerSite s;
        s.tower_id = "t" + std::to_string(i);
        s.x = xy[i].first;
        s.y = xy[i].second;
        sites.push_back(s);
    }
    return sites;
}

std::vector<TowerSite> random_sites(int n, Rng& rng) {
    std::vector<std::pair<double, double>> xy;
    for (int i = 0; i < n; ++i) xy.emplace_back(rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0));
    return make_sites(xy);
}

std::set<std::pair<int, int>> edge_set(const geo::Triangulation& tri) {
    return {tri.edges.begin(), tri.edges.end()};
}

}  // namespace

TEST_CASE("orient_sign matches the exact integer determinant") {
    CHECK(geo::orient_sign(0, 0, 1, 0, 0, 1) == 1);
    CHECK(geo::orient_sign(0, 0, 0, 1, 1, 0) == -1);
    CHECK(geo::orient_sign(0, 0, 1, 1, 2, 2) == 0);

    // Integer coordinates in [-50, 50]: the double determinant is exact, so its sign
    // is an independent oracle.
    Rng rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        double c[6];
        for (double& v : c) v = static_cast<double>(rng.uniform_int(101)) - 50.0;
        const double det = (c[2] - c[0]) * (c[5] - c[1]) - (c[3] - c[1]) * (c[4] - c[0]);
        const int expected = det > 0 ? 1 : det < 0 ? -1 : 0;
        CHECK(geo::orient_sign(c[0], c[1], c[2], c[3], c[4], c[5]) == expected);
        // Swapping two arguments flips the sign.
        CHECK(geo::orient_sign(c[2], c[3], c[0], c[1], c[4], c[5]) == -expected);
        // Cyclic rotation preserves it.
        CHECK(geo::orient_sign(c[2], c[3], c[4], c[5], c[0], c[1]) == expected);
    }
}

TEST_CASE("incircle_sign matches the exact integer determinant") {
    // Circle through (0,0),(1,0),(0,1): center (0.5,0.5), r^2 = 0.5.
    CHECK(geo::incircle_sign(0, 0, 1, 0, 0, 1, 0.25, 0.25) == 1);
    CHECK(geo::incircle_sign(0, 0, 1, 0, 0, 1, 2, 2) == -1);
    CHECK(geo::incircle_sign(0, 0, 1, 0, 0, 1, 1, 1) == 0);

    Rng rng(12);
    int nonzero = 0;
    for (int trial = 0; trial < 500; ++trial) {
        double c[8];
        for (double& v : c) v = static_cast<double>(rng.uniform_int(101)) - 50.0;
        if (geo::orient_sign(c[0], c[1], c[2], c[3], c[4], c[5]) <= 0) continue;
        // 3x3 expansion of the lifted determinant; exact in double for these magnitudes.
        const double adx = c[0] - c[6], ady = c[1] - c[7];
        const double bdx = c[2] - c[6], bdy = c[3] - c[7];
        const double cdx = c[4] - c[6], cdy = c[5] - c[7];
        const double ad2 = adx * adx + ady * ady;
        const double bd2 = bdx * bdx + bdy * bdy;
        const double cd2 = cdx * cdx + cdy * cdy;
        const double det = adx * (bdy * cd2 - cdy * bd2) - ady * (bdx * cd2 - cdx * bd2) +
                           ad2 * (bdx * cdy - cdx * bdy);
        const int expected = det > 0 ? 1 : det < 0 ? -1 : 0;
        CHECK(geo::incircle_sign(c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]) == expected);
        if (expected != 0) ++nonzero;
    }
    CHECK(nonzero > 100);  // the sweep exercised genuinely curved configurations
}

TEST_CASE("circumcenter is equidistant and rejects collinear input") {
    const auto c = geo::circumcenter(0, 0, 2, 0, 0, 2);
    CHECK(c[0] == 1.0);
    CHECK(c[1] == 1.0);

    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const double ax = rng.uniform(0.0, 10.0), ay = rng.uniform(0.0, 10.0);
        const double bx = rng.uniform(0.0, 10.0), by = rng.uniform(0.0, 10.0);
        const double cx = rng.uniform(0.0, 10.0), cy = rng.uniform(0.0, 10.0);
        if (geo::orient_sign(ax, ay, bx, by, cx, cy) == 0) continue;
        const auto u = geo::circumcenter(ax, ay, bx, by, cx, cy);
        const double da = std::hypot(ax - u[0], ay - u[1]);
        const double db = std::hypot(bx - u[0], by - u[1]);
        const double dc = std::hypot(cx - u[0], cy - u[1]);
        CHECK(std::abs(da - db) < 1e-9 * (1.0 + da));
        CHECK(std::abs(da - dc) < 1e-9 * (1.0 + da));
    }

    CHECK_THROWS_AS(geo::circumcenter(0, 0, 1, 1, 2, 2), std::invalid_argument);
}

TEST_CASE("delaunay of a triangle") {
    const auto tri = geo::delaunay(make_sites({{0, 0}, {4, 0}, {0, 3}}));
    REQUIRE(tri.triangles.size() == 1);
    CHECK(tri.triangles[0] == std::array<int, 3>{0, 1, 2});
    CHECK(edge_set(tri) == std::set<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 2}});
    CHECK(tri.neighbors[0] == std::vector<int>{1, 2});
    CHECK(tri.neighbors[1] == std::vector<int>{0, 2});
    CHECK(tri.neighbors[2] == std::vector<int>{0, 1});
}

TEST_CASE("delaunay of the unit square picks the index-determined diagonal") {
    // All four points are cocircular; the symbolic perturbation favours the smallest
    // site index, which selects diagonal (0,2).
    const auto tri = geo::delaunay(make_sites({{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
    REQUIRE(tri.triangles.size() == 2);
    CHECK(tri.triangles[0] == std::array<int, 3>{0, 1, 2});
    CHECK(tri.triangles[1] == std::array<int, 3>{0, 2, 3});
    CHECK(edge_set(tri) ==
          std::set<std::pair<int, int>>{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {2, 3}});
}

TEST_CASE("delaunay matches brute-force empty-circumcircle search on random instances") {
    Rng rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 3 + static_cast<int>(rng.uniform_int(10));
        const auto sites = random_sites(n, rng);
        const auto tri = geo::delaunay(sites);
        const auto reps = geochecks::representatives(tri);
        CHECK(edge_set(tri) == geochecks::brute_force_edges(sites, reps));
        CHECK(geochecks::circumcircle_violations(tri) == 0);

        // Triangles are CCW with the smallest vertex first, listed in sorted order.
        for (const auto& t : tri.triangles) {
            CHECK(t[0] < t[1]);
            CHECK(t[0] < t[2]);
            CHECK(geo::orient_sign(sites[t[0]].x, sites[t[0]].y, sites[t[1]].x, sites[t[1]].y,
                                   sites[t[2]].x, sites[t[2]].y) == 1);
        }
        CHECK(std::is_sorted(tri.triangles.begin(), tri.triangles.end()));
        CHECK(std::is_sorted(tri.edges.begin(), tri.edges.end()));
    }
}

TEST_CASE("delaunay edges are exactly the voronoi cell adjacencies") {
    Rng rng(15);
    for (int trial = 0; trial < 6; ++trial) {
        const int n = 5 + static_cast<int>(rng.uniform_int(8));
        const auto tri = geo::delaunay(random_sites(n, rng));
        const auto report = geochecks::check_voronoi_duality(tri);
        CHECK(report.witness_ok);
        CHECK(report.grid_ok);
        CHECK(report.witnessed_edges == static_cast<int>(tri.edges.size()));
        CHECK(report.grid_pairs > 0);
    }
}

TEST_CASE("duplicate sites collapse onto one representative") {
    const auto tri = geo::delaunay(make_sites({{0, 0}, {1, 0}, {0, 1}, {0, 0}, {1, 0}}));
    CHECK(tri.canonical == std::vector<int>{0, 1, 2, 0, 1});
    REQUIRE(tri.triangles.size() == 1);
    for (const auto& [i, j] : tri.edges) {
        CHECK(tri.canonical[i] == i);
        CHECK(tri.canonical[j] == j);
    }
    CHECK(tri.neighbors[3].empty());  // non-representatives carry no adjacency
    CHECK(geo::crawl_radius(tri, 3) == geo::crawl_radius(tri, 0));
}

TEST_CASE("crawl_radius is half the mean neighbor distance") {
    const auto tri = geo::delaunay(make_sites({{0, 0}, {2, 0}, {0, 4}}));
    CHECK(geo::crawl_radius(tri, 0) == 1.5);

    // Independent oracle: neighbor sets from the brute-force edge list.
    Rng rng(16);
    const auto sites = random_sites(9, rng);
    const auto big = geo::delaunay(sites);
    const auto reps = geochecks::representatives(big);
    const auto edges = geochecks::brute_force_edges(sites, reps);
    for (int i : reps) {
        double total = 0.0;
        int count = 0;
        for (const auto& [a, b] : edges) {
            int other = -1;
            if (a == i) other = b;
            if (b == i) other = a;
            if (other < 0) continue;
            total += std::hypot(sites[other].x - sites[i].x, sites[other].y - sites[i].y);
            ++count;
        }
        REQUIRE(count > 0);
        const double expected = 0.5 * total / count;
        CHECK(std::abs(geo::crawl_radius(big, i) - expected) < 1e-12 * (1.0 + expected));
    }

    CHECK_THROWS_AS(geo::crawl_radius(tri, -1), std::invalid_argument);
    CHECK_THROWS_AS(geo::crawl_radius(tri, 3), std::invalid_argument);

    geo::Triangulation isolated;
    isolated.sites = make_sites({{0, 0}});
    isolated.canonical = {0};
    isolated.neighbors = {{}};
    CHECK_THROWS_AS(geo::crawl_radius(isolated, 0), std::runtime_error);
}

TEST_CASE("delaunay rejects degenerate inputs") {
    CHECK_THROWS_AS(geo::delaunay(make_sites({{0, 0}, {1, 0}})), std::runtime_error);
    CHECK_THROWS_AS(geo::delaunay(make_sites({{0, 0}, {1, 0}, {0, 0}, {1, 0}, {0, 0}})),
                    std::runtime_error);
    CHECK_THROWS_AS(geo::delaunay(make_sites({{0, 0}, {1, 1}, {2, 2}, {3, 3}})),
                    std::runtime_error);
    auto bad = make_sites({{0, 0}, {1, 0}, {0, 1}});
    bad[1].x = std::nan("");
    CHECK_THROWS_AS(geo::delaunay(bad), std::invalid_argument);
}

TEST_CASE("read_towers parses the id,lat,lon table") {
    testutil::TempDir dir;
    const auto path = dir.path / "towers.csv";
    {
        std::ofstream out(path);
        out << "tower_id,lat,lon\nt0,40.0,-3.0\nt1,40.25,-3.5\n";
    }
    const auto table = geo::read_towers(path);
    CHECK(table.ids == std::vector<std::string>{"t0", "t1"});
    CHECK(table.lat == std::vector<double>{40.0, 40.25});
    CHECK(table.lon == std::vector<double>{-3.0, -3.5});

    const auto bad_header = dir.path / "bad_header.csv";
    {
        std::ofstream out(bad_header);
        out << "id,lat,lon\nt0,40.0,-3.0\n";
    }
    CHECK_THROWS_AS(geo::read_towers(bad_header), std::runtime_error);

    const auto bad_field = dir.path / "bad_field.csv";
    {
        std::ofstream out(bad_field);
        out << "tower_id,lat,lon\nt0,north,-3.0\n";
    }
    CHECK_THROWS_AS(geo::read_towers(bad_field), std::runtime_error);
}

TEST_CASE("project_sites centres on the centroid with metre-true local scale") {
    constexpr double kPi = 3.14159265358979323846;
    geo::TowerTable table;
    table.ids = {"a", "b", "c", "d"};
    table.lat = {50.00, 50.01, 50.00, 50.01};
    table.lon = {10.00, 10.00, 10.01, 10.01};
    const auto sites = geo::project_sites(table);
    REQUIRE(sites.size() == 4);
    CHECK(sites[0].tower_id == "a");
    CHECK(sites[0].lat == 50.00);
    CHECK(sites[0].lon == 10.00);

    double sx = 0.0, sy = 0.0;
    for (const auto& s : sites) {
        sx += s.x;
        sy += s.y;
    }
    CHECK(std::abs(sx / 4.0) < 1e-6);
    CHECK(std::abs(sy / 4.0) < 1e-6);

    const double dy = sites[1].y - sites[0].y;  // 0.01 degrees of latitude
    const double expected_dy = 6371000.0 * 0.01 * kPi / 180.0;
    CHECK(std::abs(dy - expected_dy) < 1e-9 * expected_dy);

    const double dx = sites[2].x - sites[0].x;  // 0.01 degrees of longitude at lat 50.005
    const double expected_dx = expected_dy * std::cos(50.005 * kPi / 180.0);
    CHECK(std::abs(dx - expected_dx) < 1e-9 * expected_dx);
}

TEST_CASE("filter_frequent_categories drops categories above the document-share cap") {
    const std::vector<std::vector<std::string>> docs = {
        {"cafe", "bar", "bank"}, {"cafe", "bar"}, {"cafe", "school"}, {"cafe"}};
    const auto result = geo::filter_frequent_categories(docs, 0.25);
    CHECK(result.removed == std::vector<std::string>{"bar", "cafe"});
    CHECK(result.vocabulary == std::vector<std::string>{"bank", "school"});
    REQUIRE(result.docs.size() == 4);
    CHECK(result.docs[0] == std::vector<std::string>{"bank"});
    CHECK(result.docs[1].empty());
    CHECK(result.docs[2] == std::vector<std::string>{"school"});
    CHECK(result.docs[3].empty());

    // Applying the same cap to the survivors changes nothing.
    const auto again = geo::filter_frequent_categories(result.docs, 0.25);
    CHECK(again.docs == result.docs);
    CHECK(again.removed.empty());

    // Threshold 1 keeps even categories present in every document.
    const std::vector<std::vector<std::string>> ubiquitous = {{"a"}, {"a"}};
    const auto kept = geo::filter_frequent_categories(ubiquitous, 1.0);
    CHECK(kept.vocabulary == std::vector<std::string>{"a"});

    CHECK_THROWS_AS(geo::filter_frequent_categories(docs, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(geo::filter_frequent_categories(docs, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(geo::filter_frequent_categories(docs, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(geo::filter_frequent_categories(ubiquitous, 0.25), std::runtime_error);
}

TEST_CASE("FilePoiProvider serves per-tower category multisets") {
    testutil::TempDir dir;
    const auto path = dir.path / "pois.csv";
    {
        std::ofstream out(path);
        out << "tower_id,category\nt0,cafe;bar;;cafe\nt1,school\n";
    }
    geo::FilePoiProvider provider(path);
    TowerSite t0;
    t0.tower_id = "t0";
    const auto r0 = geo::fetch_pois(provider, t0, 100.0);
    CHECK(r0.found);
    CHECK(r0.categories == std::vector<std::string>{"cafe", "bar", "cafe"});

    TowerSite t1;
    t1.tower_id = "t1";
    CHECK(provider.fetch(t1, 100.0).categories == std::vector<std::string>{"school"});

    TowerSite t9;
    t9.tower_id = "t9";
    const auto r9 = provider.fetch(t9, 100.0);
    CHECK_FALSE(r9.found);
    CHECK(r9.categories.empty());
    CHECK(provider.missing() == std::vector<std::string>{"t9"});

    CHECK_THROWS_AS(geo::fetch_pois(provider, t0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(geo::fetch_pois(provider, t0, -5.0), std::invalid_argument);

    const auto bad = dir.path / "bad.csv";
    {
        std::ofstream out(bad);
        out << "tower,category\nt0,cafe\n";
    }
    CHECK_THROWS_AS(geo::FilePoiProvider{bad}, std::runtime_error);
}

TEST_CASE("HttpPoiProvider talks to a live endpoint with retries") {
    httplib::Server server;
    std::mutex seen_mutex;
    std::string seen_lat, seen_lon, seen_radius, seen_key;
    std::atomic<int> flaky_hits{0};
    std::atomic<int> client_error_hits{0};

    server.Get("/poi", [&](const httplib::Request& req, httplib::Response& res) {
        {
            std::lock_guard<std::mutex> lock(seen_mutex);
            seen_lat = req.get_param_value("lat");
            seen_lon = req.get_param_value("lon");
            seen_radius = req.get_param_value("radius");
            seen_key = req.get_param_value("key");
        }
        res.set_content("cafe\nbar\n\ncafe\r\n", "text/plain");
    });
    server.Get("/flaky", [&](const httplib::Request&, httplib::Response& res) {
        if (flaky_hits.fetch_add(1) == 0)
            res.status = 500;
        else
            res.set_content("park\n", "text/plain");
    });
    server.Get("/missing", [&](const httplib::Request&, httplib::Response& res) {
        res.status = 404;
    });
    server.Get("/clienterr", [&](const httplib::Request&, httplib::Response& res) {
        client_error_hits.fetch_add(1);
        res.status = 400;
    });

    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    const std::string host = "http://127.0.0.1:" + std::to_string(port);

    setenv("POI_TEST_KEY", "sekrit", 1);
    TowerSite site;
    site.tower_id = "t7";
    site.lat = 40.5;
    site.lon = -3.25;

    {
        geo::HttpPoiConfig config;
        config.url_template = host + "/poi?lat={lat}&lon={lon}&radius={radius}&key={key}";
        config.api_key_env = "POI_TEST_KEY";
        config.rate_limit_per_sec = 0.0;
        geo::HttpPoiProvider provider(config);
        const auto result = provider.fetch(site, 250.0);
        CHECK(result.found);
        CHECK(result.categories == std::vector<std::string>{"cafe", "bar", "cafe"});
        std::lock_guard<std::mutex> lock(seen_mutex);
        CHECK(seen_lat == "40.5");
        CHECK(seen_lon == "-3.25");
        CHECK(seen_radius == "250");
        CHECK(seen_key == "sekrit");
    }

    {
        geo::HttpPoiConfig config;
        config.url_template = host + "/flaky?lat={lat}&lon={lon}&radius={radius}";
        config.rate_limit_per_sec = 0.0;
        geo::HttpPoiProvider provider(config);
        const auto result = provider.fetch(site, 250.0);
        CHECK(result.categories == std::vector<std::string>{"park"});
        CHECK(flaky_hits.load() == 2);  // one 500, one successful retry
    }

    {
        geo::HttpPoiConfig config;
        config.url_template = host + "/missing?lat={lat}&lon={lon}&radius={radius}";
        config.rate_limit_per_sec = 0.0;
        geo::HttpPoiProvider provider(config);
        const auto result = provider.fetch(site, 250.0);
        CHECK_FALSE(result.found);
        CHECK(result.categories.empty());
    }

    {
        geo::HttpPoiConfig config;
        config.url_template = host + "/clienterr?lat={lat}&lon={lon}&radius={radius}";
        config.rate_limit_per_sec = 0.0;
        geo::HttpPoiProvider provider(config);
        CHECK_THROWS_AS(provider.fetch(site, 250.0), std::runtime_error);
        CHECK(client_error_hits.load() == 1);  // 4xx does not retry
    }

    server.stop();
    server_thread.join();

    geo::HttpPoiConfig incomplete;
    incomplete.url_template = "http://example.invalid/poi?lat={lat}&lon={lon}";
    CHECK_THROWS_AS(geo::HttpPoiProvider{incomplete}, std::invalid_argument);
}

TEST_CASE("tower_classes yields a row-stochastic class matrix") {
    // Two planted tower groups with disjoint POI vocabularies.
    std::vector<std::vector<std::string>> docs;
    for (int t = 0; t < 30; ++t) {
        std::vector<std::string> doc;
        const std::string stem = (t % 2 == 0) ? "alpha" : "beta";
        for (int j = 0; j < 12; ++j) doc.push_back(stem + std::to_string(j % 5));
        docs.push_back(std::move(doc));
    }

    lda::TrainConfig config;
    config.iterations = 150;
    config.seed = 42;

    lda::TopicModel model;
    const auto result = geo::tower_classes(docs, 2, config, &model);
    CHECK(result.C.rows() == 30);
    CHECK(result.C.cols() == 2);
    REQUIRE(result.vocabulary.size() == 10);
    CHECK(std::is_sorted(result.vocabulary.begin(), result.vocabulary.end()));
    CHECK(result.vocabulary.front() == "alpha0");
    CHECK(result.vocabulary.back() == "beta4");
    for (int t = 0; t < 30; ++t) {
        CHECK(result.C.row(t).sum() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(result.C.row(t).minCoeff() >= 0.0);
    }
    CHECK(model.phi.rows() == 2);
    CHECK(model.phi.cols() == 10);

    // The parity groups should land on different classes for most towers.
    int even_class0 = 0, odd_class0 = 0;
    for (int t = 0; t < 30; ++t) {
        int arg = result.C(t, 0) >= result.C(t, 1) ? 0 : 1;
        if (t % 2 == 0)
            even_class0 += arg == 0 ? 1 : 0;
        else
            odd_class0 += arg == 0 ? 1 : 0;
    }
    const int even_modal = even_class0 >= 8 ? 0 : 1;
    const int odd_modal = odd_class0 >= 8 ? 0 : 1;
    CHECK(even_modal != odd_modal);
    const int agree = (even_modal == 0 ? even_class0 : 15 - even_class0) +
                      (odd_modal == 0 ? odd_class0 : 15 - odd_class0);
    CHECK(agree >= 24);  // at least 80% of 30 towers

    lda::TrainConfig single = config;
    const auto one = geo::tower_classes(docs, 1, single);
    CHECK(one.C.cols() == 1);
    for (int t = 0; t < 30; ++t) CHECK(one.C(t, 0) == 1.0);
}
