#include "lifestyles/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <unordered_map>

#include "lifestyles/common.hpp"
#include "lifestyles/io.hpp"

namespace lifestyles::ingest {

namespace {

// Hinnant's days-from-civil; proleptic Gregorian, no timezone dependence.
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    unsigned yoe = static_cast<unsigned>(y - era * 400);
    unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    unsigned doe = static_cast<unsigned>(z - era * 146097);
    unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

bool parse_fixed_int(const std::string& s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    out = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
        out = out * 10 + (s[i] - '0');
    }
    return true;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    return (a % b != 0 && ((a % b < 0) != (b < 0))) ? q - 1 : q;
}

bool parse_amount(const std::string& s, double& out) {
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

std::optional<std::int64_t> parse_timestamp(const std::string& s) {
    int y, mo, d, h, mi, sec;
    if (!parse_fixed_int(s, 0, 4, y) || s.size() < 20 || s[4] != '-' || s[7] != '-' ||
        (s[10] != 'T' && s[10] != ' ') || s[13] != ':' || s[16] != ':')
        return std::nullopt;
    if (!parse_fixed_int(s, 5, 2, mo) || !parse_fixed_int(s, 8, 2, d) ||
        !parse_fixed_int(s, 11, 2, h) || !parse_fixed_int(s, 14, 2, mi) ||
        !parse_fixed_int(s, 17, 2, sec))
        return std::nullopt;
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec > 60) return std::nullopt;

    std::int64_t offset = 0;
    if (s.size() == 20 && s[19] == 'Z') {
        // UTC
    } else if (s.size() == 25 && (s[19] == '+' || s[19] == '-') && s[22] == ':') {
        int oh, om;
        if (!parse_fixed_int(s, 20, 2, oh) || !parse_fixed_int(s, 23, 2, om)) return std::nullopt;
        offset = (s[19] == '+' ? 1 : -1) * (oh * 3600LL + om * 60LL);
    } else {
        return std::nullopt;
    }
    return days_from_civil(y, mo, d) * 86400LL + h * 3600LL + mi * 60LL + sec - offset;
}

std::string format_timestamp(std::int64_t utc_seconds) {
    std::int64_t days = floor_div(utc_seconds, 86400);
    std::int64_t rem = utc_seconds - days * 86400;
    int y, m, d;
    civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                  static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                  static_cast<int>(rem % 60));
    return buf;
}

ParseResult<CdrEvent> parse_cdr(std::istream& in,
                                const std::unordered_set<std::string>* known_towers) {
    ParseResult<CdrEvent> out;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = io::split_csv_line(line);
        if (!header_seen) {
            header_seen = true;
            if (fields != std::vector<std::string>{"user_id", "tower_id", "timestamp"})
                out.errors.push_back({line_no, "bad header, expected user_id,tower_id,timestamp"});
            continue;
        }
        if (fields.size() != 3) {
            out.errors.push_back({line_no, "expected 3 fields, got " + std::to_string(fields.size())});
            continue;
        }
        if (fields[0].empty()) {
            out.errors.push_back({line_no, "empty user_id"});
            continue;
        }
        auto ts = parse_timestamp(fields[2]);
        if (!ts) {
            out.errors.push_back({line_no, "unparseable timestamp '" + fields[2] + "'"});
            continue;
        }
        if (known_towers && !known_towers->count(fields[1])) {
            ++out.skipped_unknown;
            continue;
        }
        out.events.push_back({fields[0], fields[1], *ts});
    }
    return out;
}

ParseResult<CcrEvent> parse_ccr(std::istream& in) {
    ParseResult<CcrEvent> out;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = io::split_csv_line(line);
        if (!header_seen) {
            header_seen = true;
            if (fields != std::vector<std::string>{"user_id", "mcc", "amount", "timestamp"})
                out.errors.push_back({line_no, "bad header, expected user_id,mcc,amount,timestamp"});
            continue;
        }
        if (fields.size() != 4) {
            out.errors.push_back({line_no, "expected 4 fields, got " + std::to_string(fields.size())});
            continue;
        }
        if (fields[0].empty()) {
            out.errors.push_back({line_no, "empty user_id"});
            continue;
        }
        if (fields[1].empty()) {
            out.errors.push_back({line_no, "empty mcc"});
            continue;
        }
        double amount = 0.0;
        if (!parse_amount(fields[2], amount)) {
            out.errors.push_back({line_no, "unparseable amount '" + fields[2] + "'"});
            continue;
        }
        if (amount < 0) {
            out.errors.push_back({line_no, "negative amount"});
            continue;
        }
        auto ts = parse_timestamp(fields[3]);
        if (!ts) {
            out.errors.push_back({line_no, "unparseable timestamp '" + fields[3] + "'"});
            continue;
        }
        out.events.push_back({fields[0], fields[1], amount, *ts});
    }
    return out;
}

namespace {

std::unordered_map<std::string, int> index_map(const std::vector<std::string>& ids) {
    std::unordered_map<std::string, int> m;
    m.reserve(ids.size());
    for (int i = 0; i < static_cast<int>(ids.size()); ++i) {
        if (!m.emplace(ids[static_cast<std::size_t>(i)], i).second)
            throw std::invalid_argument("duplicate id in index: " + ids[static_cast<std::size_t>(i)]);
    }
    return m;
}

}  // namespace

SparseCountMatrix build_visit_matrix(const std::vector<CdrEvent>& events,
                                     const std::vector<std::string>& users,
                                     const std::vector<std::string>& towers) {
    auto user_idx = index_map(users);
    auto tower_idx = index_map(towers);
    // distinct (user, tower, UTC day) triples
    std::set<std::tuple<int, int, std::int64_t>> seen;
    for (const auto& e : events) {
        auto u = user_idx.find(e.user_id);
        auto t = tower_idx.find(e.tower_id);
        if (u == user_idx.end()) throw std::invalid_argument("user not in index: " + e.user_id);
        if (t == tower_idx.end()) throw std::invalid_argument("tower not in index: " + e.tower_id);
        seen.emplace(u->second, t->second, floor_div(e.timestamp, 86400));
    }
    SparseCountMatrix w(static_cast<int>(users.size()), static_cast<int>(towers.size()));
    for (const auto& [u, t, day] : seen) w.add(u, t, 1);
    return w;
}

MccDocuments build_mcc_documents(const std::vector<CcrEvent>& events,
                                 const std::vector<std::string>& users,
                                 std::optional<int> amount_buckets) {
    if (amount_buckets && *amount_buckets < 2)
        throw ConfigError("amount_buckets must be >= 2");
    auto user_idx = index_map(users);

    // Per-MCC quantile boundaries over the whole corpus.
    std::map<std::string, std::vector<double>> boundaries;
    if (amount_buckets) {
        std::map<std::string, std::vector<double>> amounts;
        for (const auto& e : events) amounts[e.mcc].push_back(e.amount);
        int B = *amount_buckets;
        for (auto& [mcc, v] : amounts) {
            std::sort(v.begin(), v.end());
            std::vector<double> b;
            for (int q = 1; q < B; ++q) {
                std::size_t rank = (static_cast<std::size_t>(q) * v.size() + B - 1) / B;  // ceil
                b.push_back(v[std::min(rank, v.size()) - 1]);
            }
            boundaries[mcc] = std::move(b);
        }
    }

    auto token_of = [&](const CcrEvent& e) {
        if (!amount_buckets) return e.mcc;
        const auto& b = boundaries[e.mcc];
        int bucket = 0;
        for (double q : b)
            if (e.amount > q) ++bucket;  // boundary values fall in the lower bucket
        return e.mcc + "@" + std::to_string(bucket);
    };

    std::set<std::string> vocab_set;
    for (const auto& e : events) vocab_set.insert(token_of(e));
    MccDocuments out;
    out.vocabulary.assign(vocab_set.begin(), vocab_set.end());
    auto tok_idx = index_map(out.vocabulary);

    out.counts.resize(static_cast<int>(users.size()), static_cast<int>(out.vocabulary.size()));
    for (const auto& e : events) {
        auto u = user_idx.find(e.user_id);
        if (u == user_idx.end()) throw std::invalid_argument("user not in index: " + e.user_id);
        out.counts.add(u->second, tok_idx[token_of(e)], 1);
    }
    return out;
}

std::vector<double> average_weekly_spend(const std::vector<CcrEvent>& events,
                                         const std::vector<std::string>& users) {
    auto user_idx = index_map(users);
    std::vector<double> totals(users.size(), 0.0);
    if (events.empty()) return totals;

    std::int64_t lo = events.front().timestamp, hi = events.front().timestamp;
    for (const auto& e : events) {
        lo = std::min(lo, e.timestamp);
        hi = std::max(hi, e.timestamp);
        auto u = user_idx.find(e.user_id);
        if (u == user_idx.end()) throw std::invalid_argument("user not in index: " + e.user_id);
        totals[static_cast<std::size_t>(u->second)] += e.amount;
    }
    double days = static_cast<double>(hi - lo) / 86400.0;
    double weeks = std::max(1.0, std::ceil(days / 7.0));
    for (auto& t : totals) t /= weeks;
    return totals;
}

Dataset build_dataset(const std::vector<CdrEvent>& cdr, const std::vector<CcrEvent>& ccr,
                      const std::vector<std::string>& towers,
                      std::optional<int> amount_buckets) {
    std::set<std::string> user_set;
    for (const auto& e : cdr) user_set.insert(e.user_id);
    for (const auto& e : ccr) user_set.insert(e.user_id);

    Dataset ds;
    ds.users.assign(user_set.begin(), user_set.end());
    ds.towers = towers;
    ds.visit_counts = build_visit_matrix(cdr, ds.users, ds.towers);
    auto docs = build_mcc_documents(ccr, ds.users, amount_buckets);
    ds.mccs = std::move(docs.vocabulary);
    ds.mcc_counts = std::move(docs.counts);
    return ds;
}

}  // namespace lifestyles::ingest
