#include "lifestyles/io.hpp"

#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "lifestyles/common.hpp"

namespace lifestyles::io {

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

namespace {

// Compact SHA-256 (FIPS 180-4). Self-contained so manifests carry no library dependency.
struct Sha256 {
    std::uint32_t h[8] = {0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
                          0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
    unsigned char block[64] = {};
    std::size_t block_len = 0;
    std::uint64_t total_len = 0;

    static constexpr std::uint32_t k[64] = {
        0x428a2f98u, 0x71374491u, 0xb5c0fbcfu, 0xe9b5dba5u, 0x3956c25bu, 0x59f111f1u,
        0x923f82a4u, 0xab1c5ed5u, 0xd807aa98u, 0x12835b01u, 0x243185beu, 0x550c7dc3u,
        0x72be5d74u, 0x80deb1feu, 0x9bdc06a7u, 0xc19bf174u, 0xe49b69c1u, 0xefbe4786u,
        0x0fc19dc6u, 0x240ca1ccu, 0x2de92c6fu, 0x4a7484aau, 0x5cb0a9dcu, 0x76f988dau,
        0x983e5152u, 0xa831c66du, 0xb00327c8u, 0xbf597fc7u, 0xc6e00bf3u, 0xd5a79147u,
        0x06ca6351u, 0x14292967u, 0x27b70a85u, 0x2e1b2138u, 0x4d2c6dfcu, 0x53380d13u,
        0x650a7354u, 0x766a0abbu, 0x81c2c92eu, 0x92722c85u, 0xa2bfe8a1u, 0xa81a664bu,
        0xc24b8b70u, 0xc76c51a3u, 0xd192e819u, 0xd6990624u, 0xf40e3585u, 0x106aa070u,
        0x19a4c116u, 0x1e376c08u, 0x2748774cu, 0x34b0bcb5u, 0x391c0cb3u, 0x4ed8aa4au,
        0x5b9cca4fu, 0x682e6ff3u, 0x748f82eeu, 0x78a5636fu, 0x84c87814u, 0x8cc70208u,
        0x90befffau, 0xa4506cebu, 0xbef9a3f7u, 0xc67178f2u};

    static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

    void compress() {
        std::uint32_t w[64];
        for (int i = 0; i < 16; ++i)
            w[i] = (std::uint32_t(block[i * 4]) << 24) | (std::uint32_t(block[i * 4 + 1]) << 16) |
                   (std::uint32_t(block[i * 4 + 2]) << 8) | std::uint32_t(block[i * 4 + 3]);
        for (int i = 16; i < 64; ++i) {
            std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
            std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }
        std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3];
        std::uint32_t e = h[4], f = h[5], g = h[6], hh = h[7];
        for (int i = 0; i < 64; ++i) {
            std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            std::uint32_t ch = (e & f) ^ (~e & g);
            std::uint32_t t1 = hh + s1 + ch + k[i] + w[i];
            std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
            std::uint32_t t2 = s0 + maj;
            hh = g; g = f; f = e; e = d + t1;
            d = c; c = b; b = a; a = t1 + t2;
        }
        h[0] += a; h[1] += b; h[2] += c; h[3] += d;
        h[4] += e; h[5] += f; h[6] += g; h[7] += hh;
    }

    void update(const unsigned char* data, std::size_t len) {
        total_len += len;
        while (len > 0) {
            std::size_t take = std::min(len, sizeof(block) - block_len);
            std::memcpy(block + block_len, data, take);
            block_len += take;
            data += take;
            len -= take;
            if (block_len == sizeof(block)) {
                compress();
                block_len = 0;
            }
        }
    }

    std::string finish() {
        std::uint64_t bits = total_len * 8;
        unsigned char pad = 0x80;
        update(&pad, 1);
        unsigned char zero = 0;
        while (block_len != 56) update(&zero, 1);
        unsigned char len_be[8];
        for (int i = 0; i < 8; ++i) len_be[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
        update(len_be, 8);
        static const char* hex = "0123456789abcdef";
        std::string out(64, '0');
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 4; ++j) {
                unsigned char byte = static_cast<unsigned char>(h[i] >> (24 - 8 * j));
                out[i * 8 + j * 2] = hex[byte >> 4];
                out[i * 8 + j * 2 + 1] = hex[byte & 0xf];
            }
        return out;
    }
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    Sha256 s;
    s.update(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
    return s.finish();
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for hashing: " + path.string());
    Sha256 s;
    std::array<char, 1 << 16> buf;
    while (in.read(buf.data(), buf.size()) || in.gcount() > 0)
        s.update(reinterpret_cast<const unsigned char*>(buf.data()),
                 static_cast<std::size_t>(in.gcount()));
    return s.finish();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            table.rows.push_back(std::move(fields));
        }
    }
    return table;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_sparse_triplets(const std::filesystem::path& path, const SparseCountMatrix& m,
                           const std::vector<std::string>& row_ids,
                           const std::vector<std::string>& col_ids) {
    if (static_cast<int>(row_ids.size()) != m.rows() || static_cast<int>(col_ids.size()) != m.cols())
        throw std::invalid_argument("write_sparse_triplets: id count does not match matrix shape");
    std::ostringstream out;
    out << "row_id,col_id,value\n";
    for (int r = 0; r < m.rows(); ++r)
        for (const auto& [c, v] : m.row(r))
            out << row_ids[static_cast<std::size_t>(r)] << ',' << col_ids[static_cast<std::size_t>(c)]
                << ',' << v << '\n';
    write_text_file(path, out.str());
}

SparseTriplets read_sparse_triplets(const std::filesystem::path& path,
                                    const std::vector<std::string>* row_order,
                                    const std::vector<std::string>* col_order) {
    CsvTable t = read_csv(path);
    if (t.header != std::vector<std::string>{"row_id", "col_id", "value"})
        throw std::runtime_error("unexpected triplet header in " + path.string());

    SparseTriplets out;
    std::unordered_map<std::string, int> row_idx, col_idx;
    auto index_of = [](std::unordered_map<std::string, int>& map, std::vector<std::string>& ids,
                       const std::string& id, const std::vector<std::string>* fixed,
                       const std::filesystem::path& p) {
        auto it = map.find(id);
        if (it != map.end()) return it->second;
        if (fixed) throw std::runtime_error("unknown id '" + id + "' in " + p.string());
        int idx = static_cast<int>(ids.size());
        ids.push_back(id);
        map.emplace(id, idx);
        return idx;
    };
    if (row_order) {
        out.row_ids = *row_order;
        for (int i = 0; i < static_cast<int>(out.row_ids.size()); ++i) row_idx[out.row_ids[i]] = i;
    }
    if (col_order) {
        out.col_ids = *col_order;
        for (int i = 0; i < static_cast<int>(out.col_ids.size()); ++i) col_idx[out.col_ids[i]] = i;
    }

    struct Trip { int r, c; long long v; };
    std::vector<Trip> trips;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        if (row.size() != 3) throw std::runtime_error("bad triplet row in " + path.string());
        int r = index_of(row_idx, out.row_ids, row[0], row_order, path);
        int c = index_of(col_idx, out.col_ids, row[1], col_order, path);
        long long v = 0;
        auto res = std::from_chars(row[2].data(), row[2].data() + row[2].size(), v);
        if (res.ec != std::errc() || res.ptr != row[2].data() + row[2].size())
            throw std::runtime_error("bad triplet value '" + row[2] + "' in " + path.string());
        trips.push_back({r, c, v});
    }
    out.matrix.resize(static_cast<int>(out.row_ids.size()), static_cast<int>(out.col_ids.size()));
    for (const auto& tr : trips) out.matrix.add(tr.r, tr.c, tr.v);
    return out;
}

void write_dense_with_ids(const std::filesystem::path& path, const std::string& id_header,
                          const std::vector<std::string>& col_headers,
                          const std::vector<std::string>& ids, const Eigen::MatrixXd& m) {
    if (static_cast<int>(ids.size()) != m.rows() || static_cast<int>(col_headers.size()) != m.cols())
        throw std::invalid_argument("write_dense_with_ids: shape mismatch");
    std::ostringstream out;
    out << id_header;
    for (const auto& h : col_headers) out << ',' << h;
    out << '\n';
    for (int r = 0; r < m.rows(); ++r) {
        out << ids[static_cast<std::size_t>(r)];
        for (int c = 0; c < m.cols(); ++c) out << ',' << format_double(m(r, c));
        out << '\n';
    }
    write_text_file(path, out.str());
}

DenseWithIds read_dense_with_ids(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    if (t.header.empty()) throw std::runtime_error("empty dense CSV: " + path.string());
    DenseWithIds out;
    out.col_headers.assign(t.header.begin() + 1, t.header.end());
    int cols = static_cast<int>(out.col_headers.size());
    out.matrix.resize(static_cast<int>(t.rows.size()), cols);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        if (static_cast<int>(row.size()) != cols + 1)
            throw std::runtime_error("ragged dense CSV row in " + path.string());
        out.ids.push_back(row[0]);
        for (int c = 0; c < cols; ++c) {
            double v = 0;
            const std::string& cell = row[static_cast<std::size_t>(c + 1)];
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
                throw std::runtime_error("bad numeric cell '" + cell + "' in " + path.string());
            out.matrix(static_cast<int>(i), c) = v;
        }
    }
    return out;
}

}  // namespace lifestyles::io
