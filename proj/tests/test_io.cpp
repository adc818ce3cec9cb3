#include "sflr/io.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace sflr;

TEST_SUITE_BEGIN("io");

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("sflr_io_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

std::filesystem::path write_file(const TempDir& dir, const std::string& name,
                                 const std::string& content) {
    const auto p = dir.path / name;
    std::ofstream out(p, std::ios::trunc);
    out << content;
    return p;
}

}  // namespace

TEST_CASE("sparse ingestion") {
    TempDir dir;
    const auto p =
        write_file(dir, "sparse.csv", "t,x,y\n1,0.2,1.5\n1,0.8,-0.3\n3,0.5,0.7\n");
    const SparseFTS data = ingest_sparse_csv(p);
    CHECK(data.T() == 3);
    CHECK(data.obs[0].size() == 2);
    CHECK(data.obs[1].size() == 0);
    CHECK(data.obs[2].size() == 1);
    CHECK(data.obs[2][0].x == doctest::Approx(0.5));
    CHECK(data.obs[2][0].y == doctest::Approx(0.7));

    SUBCASE("header-only file is empty data") {
        const auto empty = write_file(dir, "empty.csv", "t,x,y\n");
        CHECK_THROWS_AS(ingest_sparse_csv(empty), DataError);
    }
    SUBCASE("boundary location is accepted") {
        const auto b = write_file(dir, "boundary.csv", "t,x,y\n1,1.0,2.0\n1,0.0,1.0\n");
        CHECK_NOTHROW(ingest_sparse_csv(b));
    }
    SUBCASE("out-of-domain location names the line") {
        const auto bad = write_file(dir, "bad.csv", "t,x,y\n1,0.5,1.0\n2,1.5,1.0\n");
        try {
            ingest_sparse_csv(bad);
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find(":3") != std::string::npos);
        }
    }
    SUBCASE("non-integer time index is rejected") {
        const auto bad = write_file(dir, "badt.csv", "t,x,y\n1.5,0.5,1.0\n");
        CHECK_THROWS_AS(ingest_sparse_csv(bad), DataError);
    }
}

TEST_CASE("scalar ingestion") {
    TempDir dir;
    const auto p = write_file(dir, "scalar.csv", "t,z\n1,0.25\n2,\n3,-1.5\n");
    const ScalarTS z = ingest_scalar_csv(p);
    CHECK(z.T() == 3);
    CHECK(z.z[0] == doctest::Approx(0.25));
    CHECK(ScalarTS::missing(z.z[1]));
    CHECK(z.z[2] == doctest::Approx(-1.5));

    SUBCASE("header-only file is empty data") {
        const auto empty = write_file(dir, "empty.csv", "t,z\n");
        CHECK_THROWS_AS(ingest_scalar_csv(empty), DataError);
    }
    SUBCASE("junk numeric field is rejected with its line number") {
        const auto bad = write_file(dir, "bad.csv", "t,z\n1,0.5\n2,oops\n");
        try {
            ingest_scalar_csv(bad);
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find(":3") != std::string::npos);
        }
    }
}

TEST_CASE("filters round-trip at full precision") {
    TempDir dir;
    const SpatialGrid grid(17);
    FilterSet filters = FilterSet::zeros(2, grid.p);
    Rng rng(31);
    for (int k = -2; k <= 2; ++k)
        for (int j = 0; j < grid.p; ++j) filters.at(k)[j] = rng.normal() * std::pow(10.0, k);

    const auto path = dir.path / "filters.csv";
    write_filters_csv(path, filters, grid);
    const FilterSet back = ingest_filters_csv(path, grid);
    REQUIRE(back.M == 2);
    for (int k = -2; k <= 2; ++k)
        for (int j = 0; j < grid.p; ++j) CHECK(back.at(k)[j] == filters.at(k)[j]);
}

TEST_CASE("dense ingestion requires complete grids") {
    TempDir dir;
    const SpatialGrid grid(3);  // nodes 0, 0.5, 1
    const auto good = write_file(dir, "dense.csv",
                                 "t,x,value\n1,0,1.0\n1,0.5,2.0\n1,1,3.0\n"
                                 "2,0,4.0\n2,0.5,5.0\n2,1,6.0\n");
    const DenseFTS data = ingest_dense_csv(good, grid);
    CHECK(data.T() == 2);
    CHECK(data.curves(1, 2) == doctest::Approx(6.0));

    const auto incomplete =
        write_file(dir, "short.csv", "t,x,value\n1,0,1.0\n1,0.5,2.0\n");
    CHECK_THROWS_AS(ingest_dense_csv(incomplete, grid), DataError);

    const auto offgrid = write_file(dir, "off.csv", "t,x,value\n1,0.3,1.0\n");
    CHECK_THROWS_AS(ingest_dense_csv(offgrid, grid), DataError);
}

TEST_CASE("sparse and scalar writers round-trip") {
    TempDir dir;
    SparseFTS data;
    data.obs.resize(3);
    Rng rng(77);
    data.obs[0].push_back({0.25, 1.0 / 3.0});
    data.obs[2].push_back({rng.uniform(), rng.normal()});
    const auto sp = dir.path / "sparse.csv";
    write_sparse_csv(sp, data);
    const SparseFTS back = ingest_sparse_csv(sp);
    REQUIRE(back.T() == 3);
    CHECK(back.obs[0][0].x == data.obs[0][0].x);
    CHECK(back.obs[0][0].y == data.obs[0][0].y);
    CHECK(back.obs[2][0].y == data.obs[2][0].y);

    ScalarTS z;
    z.z = {0.1, std::numeric_limits<double>::quiet_NaN(), -2.0 / 7.0};
    const auto sc = dir.path / "scalar.csv";
    write_scalar_csv(sc, z);
    const ScalarTS zback = ingest_scalar_csv(sc);
    CHECK(zback.z[0] == z.z[0]);
    CHECK(ScalarTS::missing(zback.z[1]));
    CHECK(zback.z[2] == z.z[2]);
}

TEST_SUITE_END();
