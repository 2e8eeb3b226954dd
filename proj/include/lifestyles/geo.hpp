#pragma once

#include <Eigen/Dense>
#include <array>
#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lifestyles/lda.hpp"

namespace lifestyles::geo {

struct TowerSite {
    std::string tower_id;
    double lat = 0.0;  // degrees, as read
    double lon = 0.0;
    double x = 0.0;  // local equirectangular metres about the dataset centroid
    double y = 0.0;
};

struct TowerTable {
    std::vector<std::string> ids;
    std::vector<double> lat;
    std::vector<double> lon;
};

// Reads `tower_id,lat,lon` CSV.
TowerTable read_towers(const std::filesystem::path& path);

std::vector<TowerSite> project_sites(const TowerTable& towers);

struct Triangulation {
    std::vector<TowerSite> sites;               // as given
    std::vector<int> canonical;                 // site -> representative with identical coordinates
    std::vector<std::array<int, 3>> triangles;  // finite triangles over representatives, CCW
    std::vector<std::pair<int, int>> edges;     // neighbor pairs (i < j), sorted
    std::vector<std::vector<int>> neighbors;    // per-site sorted neighbor lists (representatives)
};

// Incremental construction with exact rational predicates; cocircular ties broken by a
// symbolic perturbation of the paraboloid lift keyed to site index (smaller index dominant).
Triangulation delaunay(const std::vector<TowerSite>& sites);

// Half the mean Euclidean distance from a site to its Delaunay neighbors, in metres.
double crawl_radius(const Triangulation& tri, int site);

// Exact predicates, exposed for the geometry oracles.
// orient > 0: c strictly left of a->b.  incircle > 0: d strictly inside the circle
// through CCW (a,b,c); 0 on the circle.
int orient_sign(double ax, double ay, double bx, double by, double cx, double cy);
int incircle_sign(double ax, double ay, double bx, double by, double cx, double cy, double dx,
                  double dy);
std::array<double, 2> circumcenter(double ax, double ay, double bx, double by, double cx,
                                   double cy);

struct PoiResult {
    std::vector<std::string> categories;  // multiset, one entry per occurrence
    bool found = true;
};

class PoiProvider {
  public:
    virtual ~PoiProvider() = default;
    virtual PoiResult fetch(const TowerSite& site, double radius_m) = 0;
};

// Reads `tower_id,category` CSV; the category field may pack several occurrences
// separated by ';'. Towers absent from the file yield an empty, flagged result.
class FilePoiProvider : public PoiProvider {
  public:
    explicit FilePoiProvider(const std::filesystem::path& csv_path);
    PoiResult fetch(const TowerSite& site, double radius_m) override;
    const std::vector<std::string>& missing() const { return missing_; }

  private:
    std::unordered_map<std::string, std::vector<std::string>> by_tower_;
    std::vector<std::string> missing_;
};

struct HttpPoiConfig {
    std::string url_template;  // {lat},{lon},{radius} placeholders; optional {key}
    std::string api_key_env = "POI_API_KEY";
    int max_retries = 3;
    double rate_limit_per_sec = 5.0;
    int timeout_ms = 5000;
};

// Expects a plain-text body with one category per line. Retries with exponential
// backoff on connection errors and 5xx/429; a 404 marks the tower as missing.
class HttpPoiProvider : public PoiProvider {
  public:
    explicit HttpPoiProvider(HttpPoiConfig config);
    PoiResult fetch(const TowerSite& site, double radius_m) override;

  private:
    HttpPoiConfig config_;
    std::string api_key_;
    std::chrono::steady_clock::time_point last_request_;
    bool any_request_ = false;
};

PoiResult fetch_pois(PoiProvider& provider, const TowerSite& site, double radius_m);

struct PoiFilterResult {
    std::vector<std::vector<std::string>> docs;  // aligned with input docs
    std::vector<std::string> vocabulary;         // surviving categories, sorted
    std::vector<std::string> removed;            // dropped categories, sorted
};

// Drops every category contained in strictly more than `threshold` of the documents.
PoiFilterResult filter_frequent_categories(const std::vector<std::vector<std::string>>& docs,
                                           double threshold = 0.25);

struct TowerClassMatrix {
    Eigen::MatrixXd C;  // towers x d, rows sum to 1
    std::vector<std::string> vocabulary;
};

// When model_out is given it receives the trained topic model (for top-word reports).
TowerClassMatrix tower_classes(const std::vector<std::vector<std::string>>& filtered_docs, int d,
                               const lda::TrainConfig& config,
                               lda::TopicModel* model_out = nullptr);

}  // namespace lifestyles::geo
