#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lifestyles/sparse.hpp"

namespace lifestyles::io {

// Shortest round-trip decimal form; stable across runs of the same binary, which the
// byte-identical artifact contract depends on.
std::string format_double(double v);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

std::vector<std::string> split_csv_line(const std::string& line);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

// Sparse triplet CSV: header `row_id,col_id,value`, entries in row-major insertion order.
void write_sparse_triplets(const std::filesystem::path& path, const SparseCountMatrix& m,
                           const std::vector<std::string>& row_ids,
                           const std::vector<std::string>& col_ids);

struct SparseTriplets {
    SparseCountMatrix matrix;
    std::vector<std::string> row_ids;  // in first-appearance order
    std::vector<std::string> col_ids;
};

// Reads triplets; when an expected id ordering is supplied the matrix is aligned to it
// (unknown ids are an error), otherwise ids are indexed in first-appearance order.
SparseTriplets read_sparse_triplets(const std::filesystem::path& path,
                                    const std::vector<std::string>* row_order = nullptr,
                                    const std::vector<std::string>* col_order = nullptr);

// Dense CSV with a leading id column: `id,<col0>,<col1>,...`.
void write_dense_with_ids(const std::filesystem::path& path, const std::string& id_header,
                          const std::vector<std::string>& col_headers,
                          const std::vector<std::string>& ids, const Eigen::MatrixXd& m);

struct DenseWithIds {
    std::vector<std::string> ids;
    std::vector<std::string> col_headers;
    Eigen::MatrixXd matrix;
};

DenseWithIds read_dense_with_ids(const std::filesystem::path& path);

}  // namespace lifestyles::io
