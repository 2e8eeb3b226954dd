#include "lifestyles/geo.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "lifestyles/io.hpp"
#include "lifestyles/sparse.hpp"

namespace lifestyles::geo {

namespace {

constexpr double kEarthRadius = 6371000.0;
constexpr double kPi = 3.14159265358979323846;

double parse_double_field(const std::string& s, const char* what, std::size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::runtime_error("towers csv line " + std::to_string(line) + ": bad " +
                                 std::string(what) + " '" + s + "'");
    return v;
}

int sign_of(const mpq_class& v) { return mpq_sgn(v.get_mpq_t()); }

// Exact 2D orientation over rational coordinates.
int orient_mpq(const mpq_class& ax, const mpq_class& ay, const mpq_class& bx, const mpq_class& by,
               const mpq_class& cx, const mpq_class& cy) {
    mpq_class det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    return sign_of(det);
}

struct ExactPoint {
    mpq_class x, y;
};

class Predicates {
  public:
    explicit Predicates(const std::vector<TowerSite>& sites) {
        pts_.reserve(sites.size());
        for (const auto& s : sites) pts_.push_back({mpq_class(s.x), mpq_class(s.y)});
    }

    int orient(int a, int b, int c) const {
        return orient_mpq(pts_[a].x, pts_[a].y, pts_[b].x, pts_[b].y, pts_[c].x, pts_[c].y);
    }

    // Unperturbed in-circle: > 0 iff d strictly inside the circle through CCW (a,b,c).
    int incircle(int a, int b, int c, int d) const {
        const ExactPoint &pa = pts_[a], &pb = pts_[b], &pc = pts_[c], &pd = pts_[d];
        mpq_class adx = pa.x - pd.x, ady = pa.y - pd.y;
        mpq_class bdx = pb.x - pd.x, bdy = pb.y - pd.y;
        mpq_class cdx = pc.x - pd.x, cdy = pc.y - pd.y;
        mpq_class ad2 = adx * (pa.x + pd.x) + ady * (pa.y + pd.y);
        mpq_class bd2 = bdx * (pb.x + pd.x) + bdy * (pb.y + pd.y);
        mpq_class cd2 = cdx * (pc.x + pd.x) + cdy * (pc.y + pd.y);
        mpq_class det = adx * (bdy * cd2 - cdy * bd2) - ady * (bdx * cd2 - cdx * bd2) +
                        ad2 * (bdx * cdy - cdx * bdy);
        return sign_of(det);
    }

    // In-circle with the lift z_i = |p_i|^2 - eps^(i+1): a cocircular quadruple resolves to
    // the first nonzero delta coefficient in ascending site-index order, so the smallest
    // index dominates. Never returns 0 when (a,b,c) is a genuine CCW triangle.
    int incircle_perturbed(int a, int b, int c, int d) const {
        int s = incircle(a, b, c, d);
        if (s != 0) return s;
        struct Term {
            int site;
            int coeff;  // sign of the delta coefficient for this vertex
        };
        std::array<Term, 4> terms = {Term{a, -orient(b, c, d)}, Term{b, orient(a, c, d)},
                                     Term{c, -orient(a, b, d)}, Term{d, orient(a, b, c)}};
        std::sort(terms.begin(), terms.end(),
                  [](const Term& l, const Term& r) { return l.site < r.site; });
        for (const Term& t : terms)
            if (t.coeff != 0) return t.coeff;
        throw std::logic_error("incircle_perturbed on four collinear sites");
    }

  private:
    std::vector<ExactPoint> pts_;
};

// Assumes u, v, p collinear; exact because doubles compare exactly.
bool strictly_between(const TowerSite& u, const TowerSite& v, const TowerSite& p) {
    if (u.x != v.x) return (u.x < p.x && p.x < v.x) || (v.x < p.x && p.x < u.x);
    return (u.y < p.y && p.y < v.y) || (v.y < p.y && p.y < u.y);
}

constexpr int kInfinite = -1;

struct Tri {
    int a, b, c;  // c == kInfinite for hull triangles storing the reversed hull edge (a,b)
};

std::array<std::pair<int, int>, 3> directed_edges(const Tri& t) {
    return {std::pair{t.a, t.b}, std::pair{t.b, t.c}, std::pair{t.c, t.a}};
}

Tri rotate_infinite_last(int s, int t, int p) {
    if (s == kInfinite) return {t, p, kInfinite};
    if (t == kInfinite) return {p, s, kInfinite};
    return {s, t, p};
}

}  // namespace

TowerTable read_towers(const std::filesystem::path& path) {
    io::CsvTable csv = io::read_csv(path);
    if (csv.header != std::vector<std::string>{"tower_id", "lat", "lon"})
        throw std::runtime_error("towers csv: expected header tower_id,lat,lon in " +
                                 path.string());
    TowerTable out;
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        const auto& row = csv.rows[i];
        if (row.size() != 3)
            throw std::runtime_error("towers csv line " + std::to_string(i + 2) +
                                     ": expected 3 fields");
        out.ids.push_back(row[0]);
        out.lat.push_back(parse_double_field(row[1], "lat", i + 2));
        out.lon.push_back(parse_double_field(row[2], "lon", i + 2));
    }
    return out;
}

std::vector<TowerSite> project_sites(const TowerTable& towers) {
    const std::size_t n = towers.ids.size();
    if (n == 0) return {};
    double lat0 = 0.0, lon0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        lat0 += towers.lat[i];
        lon0 += towers.lon[i];
    }
    lat0 /= static_cast<double>(n);
    lon0 /= static_cast<double>(n);
    const double rad = kPi / 180.0;
    const double cos_lat0 = std::cos(lat0 * rad);
    std::vector<TowerSite> sites(n);
    for (std::size_t i = 0; i < n; ++i) {
        sites[i].tower_id = towers.ids[i];
        sites[i].lat = towers.lat[i];
        sites[i].lon = towers.lon[i];
        sites[i].x = kEarthRadius * (towers.lon[i] - lon0) * rad * cos_lat0;
        sites[i].y = kEarthRadius * (towers.lat[i] - lat0) * rad;
    }
    return sites;
}

int orient_sign(double ax, double ay, double bx, double by, double cx, double cy) {
    return orient_mpq(mpq_class(ax), mpq_class(ay), mpq_class(bx), mpq_class(by), mpq_class(cx),
                      mpq_class(cy));
}

int incircle_sign(double ax, double ay, double bx, double by, double cx, double cy, double dx,
                  double dy) {
    std::vector<TowerSite> pts(4);
    pts[0].x = ax; pts[0].y = ay;
    pts[1].x = bx; pts[1].y = by;
    pts[2].x = cx; pts[2].y = cy;
    pts[3].x = dx; pts[3].y = dy;
    return Predicates(pts).incircle(0, 1, 2, 3);
}

std::array<double, 2> circumcenter(double ax, double ay, double bx, double by, double cx,
                                   double cy) {
    const double d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    if (d == 0.0) throw std::invalid_argument("circumcenter of collinear points");
    const double a2 = ax * ax + ay * ay, b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
    return {(a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d,
            (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d};
}

Triangulation delaunay(const std::vector<TowerSite>& sites) {
    Triangulation out;
    out.sites = sites;
    const int n = static_cast<int>(sites.size());
    for (const auto& s : sites)
        if (!std::isfinite(s.x) || !std::isfinite(s.y))
            throw std::invalid_argument("delaunay: non-finite site coordinates (" + s.tower_id +
                                        ")");

    // Merge exact-coordinate duplicates onto the first occurrence.
    out.canonical.resize(sites.size());
    std::map<std::pair<double, double>, int> seen;
    std::vector<int> reps;
    for (int i = 0; i < n; ++i) {
        auto [it, inserted] = seen.emplace(std::pair{sites[i].x, sites[i].y}, i);
        out.canonical[i] = it->second;
        if (inserted) reps.push_back(i);
    }
    if (reps.size() < 3) throw std::runtime_error("delaunay: fewer than 3 distinct sites");

    Predicates pred(sites);

    // Bootstrap with the first non-collinear triple.
    const int r0 = reps[0], r1 = reps[1];
    int rj = -1;
    for (std::size_t k = 2; k < reps.size(); ++k) {
        if (pred.orient(r0, r1, reps[k]) != 0) {
            rj = reps[k];
            break;
        }
    }
    if (rj < 0) throw std::runtime_error("delaunay: all sites are collinear");

    std::vector<Tri> tris;
    {
        int a = r0, b = r1, c = rj;
        if (pred.orient(a, b, c) < 0) std::swap(b, c);
        tris.push_back({a, b, c});
        tris.push_back({b, a, kInfinite});
        tris.push_back({c, b, kInfinite});
        tris.push_back({a, c, kInfinite});
    }

    auto conflicts = [&](const Tri& t, int p) -> bool {
        if (t.c == kInfinite) {
            int s = pred.orient(t.a, t.b, p);
            if (s > 0) return true;
            return s == 0 && strictly_between(sites[t.a], sites[t.b], sites[p]);
        }
        return pred.incircle_perturbed(t.a, t.b, t.c, p) > 0;
    };

    for (int p : reps) {
        if (p == r0 || p == r1 || p == rj) continue;

        std::vector<Tri> keep, dead;
        for (const Tri& t : tris)
            (conflicts(t, p) ? dead : keep).push_back(t);
        if (dead.empty()) throw std::logic_error("delaunay: empty conflict region");

        std::set<std::pair<int, int>> dead_edges;
        for (const Tri& t : dead)
            for (auto e : directed_edges(t)) dead_edges.insert(e);

        // Cavity boundary: directed edges whose reverse lies outside the conflict set;
        // (edge, p) retriangulates the cavity with consistent orientation.
        for (const Tri& t : dead)
            for (auto [s, u] : directed_edges(t))
                if (!dead_edges.count({u, s})) keep.push_back(rotate_infinite_last(s, u, p));
        tris = std::move(keep);
    }

    // Internal consistency: every directed edge must appear exactly once.
    {
        std::set<std::pair<int, int>> all;
        for (const Tri& t : tris)
            for (auto e : directed_edges(t))
                if (!all.insert(e).second)
                    throw std::logic_error("delaunay: inconsistent triangulation");
        for (const auto& [s, u] : all)
            if (!all.count({u, s})) throw std::logic_error("delaunay: unmatched directed edge");
    }

    std::set<std::pair<int, int>> edge_set;
    for (const Tri& t : tris) {
        if (t.c == kInfinite) continue;
        std::array<int, 3> v = {t.a, t.b, t.c};
        int lo = static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
        out.triangles.push_back({v[lo], v[(lo + 1) % 3], v[(lo + 2) % 3]});
        edge_set.insert(std::minmax(t.a, t.b));
        edge_set.insert(std::minmax(t.b, t.c));
        edge_set.insert(std::minmax(t.c, t.a));
    }
    std::sort(out.triangles.begin(), out.triangles.end());
    out.edges.assign(edge_set.begin(), edge_set.end());

    out.neighbors.resize(sites.size());
    for (const auto& [i, j] : out.edges) {
        out.neighbors[i].push_back(j);
        out.neighbors[j].push_back(i);
    }
    for (auto& list : out.neighbors) std::sort(list.begin(), list.end());
    return out;
}

double crawl_radius(const Triangulation& tri, int site) {
    if (site < 0 || site >= static_cast<int>(tri.sites.size()))
        throw std::invalid_argument("crawl_radius: site index out of range");
    const int rep = tri.canonical[site];
    const auto& nbrs = tri.neighbors[rep];
    if (nbrs.empty()) throw std::runtime_error("crawl_radius: isolated site");
    double total = 0.0;
    for (int j : nbrs)
        total += std::hypot(tri.sites[j].x - tri.sites[rep].x, tri.sites[j].y - tri.sites[rep].y);
    return 0.5 * total / static_cast<double>(nbrs.size());
}

FilePoiProvider::FilePoiProvider(const std::filesystem::path& csv_path) {
    io::CsvTable csv = io::read_csv(csv_path);
    if (csv.header != std::vector<std::string>{"tower_id", "category"})
        throw std::runtime_error("poi csv: expected header tower_id,category in " +
                                 csv_path.string());
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        const auto& row = csv.rows[i];
        if (row.size() != 2)
            throw std::runtime_error("poi csv line " + std::to_string(i + 2) +
                                     ": expected 2 fields");
        auto& cats = by_tower_[row[0]];
        std::stringstream packed(row[1]);
        std::string cat;
        while (std::getline(packed, cat, ';'))
            if (!cat.empty()) cats.push_back(cat);
    }
}

PoiResult FilePoiProvider::fetch(const TowerSite& site, double /*radius_m*/) {
    auto it = by_tower_.find(site.tower_id);
    if (it == by_tower_.end()) {
        missing_.push_back(site.tower_id);
        return {{}, false};
    }
    return {it->second, true};
}

PoiResult fetch_pois(PoiProvider& provider, const TowerSite& site, double radius_m) {
    if (!(radius_m > 0)) throw std::invalid_argument("fetch_pois: radius must be positive");
    return provider.fetch(site, radius_m);
}

namespace {

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
        s.replace(pos, from.size(), to);
}

}  // namespace

HttpPoiProvider::HttpPoiProvider(HttpPoiConfig config) : config_(std::move(config)) {
    for (const char* ph : {"{lat}", "{lon}", "{radius}"})
        if (config_.url_template.find(ph) == std::string::npos)
            throw std::invalid_argument(std::string("http poi provider: url template missing ") +
                                        ph);
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

PoiResult HttpPoiProvider::fetch(const TowerSite& site, double radius_m) {
    if (config_.rate_limit_per_sec > 0 && any_request_) {
        auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / config_.rate_limit_per_sec));
        auto next_ok = last_request_ + interval;
        auto now = std::chrono::steady_clock::now();
        if (now < next_ok) std::this_thread::sleep_for(next_ok - now);
    }

    std::string url = config_.url_template;
    replace_all(url, "{lat}", io::format_double(site.lat));
    replace_all(url, "{lon}", io::format_double(site.lon));
    replace_all(url, "{radius}", io::format_double(radius_m));
    replace_all(url, "{key}", api_key_);

    auto path_start = url.find('/', url.find("//") == std::string::npos ? 0 : url.find("//") + 2);
    std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(100) * (1 << (attempt - 1)));
        last_request_ = std::chrono::steady_clock::now();
        any_request_ = true;

        httplib::Client client(base);
        client.set_connection_timeout(0, config_.timeout_ms * 1000);
        client.set_read_timeout(0, config_.timeout_ms * 1000);
        auto res = client.Get(path);
        if (!res) {
            last_error = "connection error " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            PoiResult out;
            std::stringstream body(res->body);
            std::string line;
            while (std::getline(body, line)) {
                while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
                    line.pop_back();
                if (!line.empty()) out.categories.push_back(line);
            }
            return out;
        }
        if (res->status == 404) return {{}, false};
        last_error = "http status " + std::to_string(res->status);
        if (res->status < 500 && res->status != 429) break;  // client errors don't retry
    }
    throw std::runtime_error("poi provider failed for tower " + site.tower_id + ": " + last_error);
}

PoiFilterResult filter_frequent_categories(const std::vector<std::vector<std::string>>& docs,
                                           double threshold) {
    if (!(threshold > 0.0) || threshold > 1.0)
        throw std::invalid_argument("filter_frequent_categories: threshold must be in (0, 1]");
    const double n = static_cast<double>(docs.size());
    std::map<std::string, int> doc_freq;
    for (const auto& doc : docs) {
        std::set<std::string> uniq(doc.begin(), doc.end());
        for (const auto& cat : uniq) doc_freq[cat]++;
    }

    PoiFilterResult out;
    std::set<std::string> dropped;
    for (const auto& [cat, df] : doc_freq) {
        if (static_cast<double>(df) > threshold * n)
            dropped.insert(cat);
        else
            out.vocabulary.push_back(cat);
    }
    out.removed.assign(dropped.begin(), dropped.end());

    out.docs.reserve(docs.size());
    bool any_token = false;
    for (const auto& doc : docs) {
        std::vector<std::string> filtered;
        for (const auto& cat : doc)
            if (!dropped.count(cat)) filtered.push_back(cat);
        any_token = any_token || !filtered.empty();
        out.docs.push_back(std::move(filtered));
    }
    if (!any_token)
        throw std::runtime_error("filter_frequent_categories: filtering emptied every document");
    return out;
}

TowerClassMatrix tower_classes(const std::vector<std::vector<std::string>>& filtered_docs, int d,
                               const lda::TrainConfig& config, lda::TopicModel* model_out) {
    std::set<std::string> vocab_set;
    for (const auto& doc : filtered_docs) vocab_set.insert(doc.begin(), doc.end());
    std::vector<std::string> vocabulary(vocab_set.begin(), vocab_set.end());
    std::unordered_map<std::string, int> index;
    for (int w = 0; w < static_cast<int>(vocabulary.size()); ++w)
        index.emplace(vocabulary[static_cast<std::size_t>(w)], w);

    SparseCountMatrix corpus(static_cast<int>(filtered_docs.size()),
                             static_cast<int>(vocabulary.size()));
    for (int t = 0; t < static_cast<int>(filtered_docs.size()); ++t)
        for (const auto& cat : filtered_docs[static_cast<std::size_t>(t)])
            corpus.add(t, index.at(cat), 1);

    lda::TrainConfig cfg = config;
    cfg.topics = d;
    lda::TopicModel model = lda::train(corpus, vocabulary, cfg);
    TowerClassMatrix out{model.theta, std::move(vocabulary)};
    if (model_out) *model_out = std::move(model);
    return out;
}

}  // namespace lifestyles::geo
