#pragma once

#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lifestyles {

// Row/column-indexed nonnegative counts. Entries within a row keep their insertion
// order; samplers that iterate the matrix therefore see a stable, caller-controlled
// token order, which is what makes relabeling tests exact.
class SparseCountMatrix {
public:
    SparseCountMatrix() = default;
    SparseCountMatrix(int rows, int cols) { resize(rows, cols); }

    void resize(int rows, int cols) {
        rows_ = rows;
        cols_ = cols;
        entries_.assign(static_cast<std::size_t>(rows), {});
        pos_.assign(static_cast<std::size_t>(rows), {});
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    void add(int r, int c, long long v) {
        check(r, c);
        auto& row_pos = pos_[static_cast<std::size_t>(r)];
        auto it = row_pos.find(c);
        if (it == row_pos.end()) {
            if (v < 0) throw std::invalid_argument("SparseCountMatrix: negative count");
            if (v == 0) return;
            row_pos.emplace(c, entries_[static_cast<std::size_t>(r)].size());
            entries_[static_cast<std::size_t>(r)].emplace_back(c, v);
        } else {
            auto& cell = entries_[static_cast<std::size_t>(r)][it->second].second;
            if (cell + v < 0) throw std::invalid_argument("SparseCountMatrix: negative count");
            cell += v;
        }
    }

    long long get(int r, int c) const {
        check(r, c);
        const auto& row_pos = pos_[static_cast<std::size_t>(r)];
        auto it = row_pos.find(c);
        return it == row_pos.end() ? 0 : entries_[static_cast<std::size_t>(r)][it->second].second;
    }

    const std::vector<std::pair<int, long long>>& row(int r) const {
        if (r < 0 || r >= rows_) throw std::out_of_range("SparseCountMatrix: row out of range");
        return entries_[static_cast<std::size_t>(r)];
    }

    long long row_sum(int r) const {
        long long s = 0;
        for (const auto& [c, v] : row(r)) s += v;
        return s;
    }

    long long total() const {
        long long s = 0;
        for (int r = 0; r < rows_; ++r) s += row_sum(r);
        return s;
    }

    std::size_t nnz() const {
        std::size_t s = 0;
        for (const auto& row : entries_)
            for (const auto& [c, v] : row)
                if (v != 0) ++s;
        return s;
    }

    double zero_fraction() const {
        if (rows_ == 0 || cols_ == 0) throw std::invalid_argument("zero_fraction: empty matrix");
        double cells = static_cast<double>(rows_) * static_cast<double>(cols_);
        return (cells - static_cast<double>(nnz())) / cells;
    }

private:
    void check(int r, int c) const {
        if (r < 0 || r >= rows_ || c < 0 || c >= cols_)
            throw std::out_of_range("SparseCountMatrix: index out of range");
    }

    int rows_ = 0, cols_ = 0;
    std::vector<std::vector<std::pair<int, long long>>> entries_;
    std::vector<std::unordered_map<int, std::size_t>> pos_;
};

}  // namespace lifestyles
