#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "lifestyles/io.hpp"
#include "lifestyles/rng.hpp"
#include "test_util.hpp"

using namespace lifestyles;

TEST_CASE("format_double round-trips bit-exactly") {
    std::vector<double> values = {0.0,    -0.0,   1.0,     -1.0,   0.1,   1.0 / 3.0,
                                  2.5e-308, 1e308, 5e-324, 3.141592653589793,
                                  1234567.890123456, -0.05,  42.0,  1e-9};
    Rng rng(42);
    for (int i = 0; i < 500; ++i)
        values.push_back(rng.normal() * std::pow(10.0, std::floor(rng.uniform(-12.0, 12.0))));
    for (double v : values) {
        std::string s = io::format_double(v);
        double back = std::strtod(s.c_str(), nullptr);
        CHECK(std::memcmp(&back, &v, sizeof v) == 0);
    }
}

TEST_CASE("sha256 matches the FIPS 180-4 test vectors") {
    CHECK(io::sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(io::sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(io::sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    CHECK(io::sha256_hex(std::string(1000000, 'a')) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("sha256_file hashes the raw bytes") {
    testutil::TempDir tmp;
    std::string content = "line one\nline two\r\nbinary";
    content.push_back('\0');
    content += "tail";
    io::write_text_file(tmp.path / "f.bin", content);
    CHECK(io::sha256_file(tmp.path / "f.bin") == io::sha256_hex(content));
    CHECK(io::read_text_file(tmp.path / "f.bin") == content);
    CHECK_THROWS_AS(io::sha256_file(tmp.path / "absent.bin"), std::runtime_error);
    CHECK_THROWS_AS(io::read_text_file(tmp.path / "absent.bin"), std::runtime_error);
}

TEST_CASE("split_csv_line keeps empty fields and strips carriage returns") {
    CHECK(io::split_csv_line("a,b,c") == std::vector<std::string>{"a", "b", "c"});
    CHECK(io::split_csv_line("a,,c") == std::vector<std::string>{"a", "", "c"});
    CHECK(io::split_csv_line("a,b,") == std::vector<std::string>{"a", "b", ""});
    CHECK(io::split_csv_line("solo") == std::vector<std::string>{"solo"});
    CHECK(io::split_csv_line("") == std::vector<std::string>{""});
    CHECK(io::split_csv_line("a,b\r") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("read_csv splits header and rows, skipping blank lines") {
    testutil::TempDir tmp;
    io::write_text_file(tmp.path / "t.csv", "h1,h2\r\na,b\n\nc,d\n");
    io::CsvTable t = io::read_csv(tmp.path / "t.csv");
    CHECK(t.header == std::vector<std::string>{"h1", "h2"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0] == std::vector<std::string>{"a", "b"});
    CHECK(t.rows[1] == std::vector<std::string>{"c", "d"});
    CHECK_THROWS_AS(io::read_csv(tmp.path / "absent.csv"), std::runtime_error);
}

TEST_CASE("sparse triplets round-trip with explicit id alignment") {
    testutil::TempDir tmp;
    SparseCountMatrix m(3, 4);
    m.add(0, 1, 5);
    m.add(0, 3, 2);
    m.add(2, 0, 7);  // row 1 stays empty
    std::vector<std::string> rows = {"u0", "u1", "u2"};
    std::vector<std::string> cols = {"t0", "t1", "t2", "t3"};
    io::write_sparse_triplets(tmp.path / "m.csv", m, rows, cols);

    io::SparseTriplets back = io::read_sparse_triplets(tmp.path / "m.csv", &rows, &cols);
    CHECK(back.row_ids == rows);
    CHECK(back.col_ids == cols);
    REQUIRE(back.matrix.rows() == 3);
    REQUIRE(back.matrix.cols() == 4);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) CHECK(back.matrix.get(r, c) == m.get(r, c));

    // Without fixed orders ids index in first-appearance order; the empty row vanishes.
    io::SparseTriplets loose = io::read_sparse_triplets(tmp.path / "m.csv");
    CHECK(loose.row_ids == std::vector<std::string>{"u0", "u2"});
    CHECK(loose.col_ids == std::vector<std::string>{"t1", "t3", "t0"});
    CHECK(loose.matrix.get(0, 0) == 5);
    CHECK(loose.matrix.get(1, 2) == 7);
}

TEST_CASE("sparse triplet reader rejects unknown ids and malformed files") {
    testutil::TempDir tmp;
    io::write_text_file(tmp.path / "bad_id.csv", "row_id,col_id,value\nux,t0,1\n");
    std::vector<std::string> rows = {"u0"};
    std::vector<std::string> cols = {"t0"};
    CHECK_THROWS_AS(io::read_sparse_triplets(tmp.path / "bad_id.csv", &rows, &cols),
                    std::runtime_error);
    io::write_text_file(tmp.path / "bad_header.csv", "a,b,c\nu0,t0,1\n");
    CHECK_THROWS_AS(io::read_sparse_triplets(tmp.path / "bad_header.csv"), std::runtime_error);
    io::write_text_file(tmp.path / "bad_value.csv", "row_id,col_id,value\nu0,t0,1.5\n");
    CHECK_THROWS_AS(io::read_sparse_triplets(tmp.path / "bad_value.csv"), std::runtime_error);
    SparseCountMatrix m(1, 1);
    CHECK_THROWS_AS(io::write_sparse_triplets(tmp.path / "x.csv", m, {"a", "b"}, {"c"}),
                    std::invalid_argument);
}

TEST_CASE("dense csv with ids round-trips bit-exactly") {
    testutil::TempDir tmp;
    Rng rng(7);
    Eigen::MatrixXd m(4, 3);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = rng.normal();
    std::vector<std::string> ids = {"a", "b", "c", "d"};
    std::vector<std::string> headers = {"x", "y", "z"};
    io::write_dense_with_ids(tmp.path / "d.csv", "id", headers, ids, m);

    io::DenseWithIds back = io::read_dense_with_ids(tmp.path / "d.csv");
    CHECK(back.ids == ids);
    CHECK(back.col_headers == headers);
    REQUIRE(back.matrix.rows() == 4);
    REQUIRE(back.matrix.cols() == 3);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 3; ++c) CHECK(back.matrix(r, c) == m(r, c));
}

TEST_CASE("dense csv reader rejects ragged rows and bad cells") {
    testutil::TempDir tmp;
    io::write_text_file(tmp.path / "ragged.csv", "id,x,y\na,1\n");
    CHECK_THROWS_AS(io::read_dense_with_ids(tmp.path / "ragged.csv"), std::runtime_error);
    io::write_text_file(tmp.path / "nonnum.csv", "id,x\na,oops\n");
    CHECK_THROWS_AS(io::read_dense_with_ids(tmp.path / "nonnum.csv"), std::runtime_error);
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = 1.0;
    CHECK_THROWS_AS(io::write_dense_with_ids(tmp.path / "x.csv", "id", {"a", "b"}, {"r"}, m),
                    std::invalid_argument);
}
