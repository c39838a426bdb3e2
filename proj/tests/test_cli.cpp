#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "../tools/cli.hpp"
#include "quantlab/blockquant.hpp"
#include "quantlab/codebook.hpp"

namespace fs = std::filesystem;
using namespace quantlab;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("quantlab_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

double single_value(const Result& r) { return std::stod(r.out); }

Tensor normal_tensor(std::vector<std::size_t> dims, std::uint64_t seed) {
    Tensor t(std::move(dims));
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> n;
    for (auto& v : t.data) v = n(rng);
    return t;
}

}  // namespace

TEST_CASE("code gen") {
    TempDir dir;
    auto r = run({"code", "gen", "--kind", "nf4", "--out", dir / "nf4.json", "--csv"});
    REQUIRE(r.code == 0);
    const auto rows = csv_rows(r.out);
    REQUIRE(rows.size() == 17);
    CHECK(rows[1][1] == "-1");
    CHECK(rows[8][1] == "0");
    CHECK(rows[16][1] == "1");
    const auto code = code_read(dir / "nf4.json");
    CHECK(code.kind == CodeKind::nf4_quantile_of_average);

    r = run({"code", "gen", "--kind", "nf4", "--variant", "average-of-quantile", "--csv"});
    CHECK(r.code == 0);
    CHECK(std::abs(std::stod(csv_rows(r.out)[2][1]) - (-0.696129678376118)) < 1e-12);

    const auto a64 = run({"code", "gen", "--kind", "af4", "--block-size", "64", "--csv"});
    const auto a4096 = run({"code", "gen", "--kind", "af4", "-B", "4096", "--csv"});
    REQUIRE(a64.code == 0);
    REQUIRE(a4096.code == 0);
    const auto r64 = csv_rows(a64.out), r4096 = csv_rows(a4096.out);
    for (std::size_t j = 2; j <= 15; ++j) {
        if (j == 8) continue;
        CHECK(std::abs(std::stod(r4096[j][1])) < std::abs(std::stod(r64[j][1])));
    }
    // -B defaults to 64
    CHECK(run({"code", "gen", "--kind", "af4", "--csv"}).out == a64.out);

    r = run({"code", "gen", "--kind", "balanced", "-B", "4"});
    CHECK(r.code == 1);
    CHECK(r.err.find("block size must be >= 9") != std::string::npos);

    r = run({"code", "gen", "--kind", "balanced-endpoints", "-B", "64", "--out", dir / "be.json"});
    CHECK(r.code == 0);
    CHECK(code_read(dir / "be.json").kind == CodeKind::balanced_with_endpoints);

    CHECK(run({"code", "gen", "--kind", "nf5"}).code == 1);
    CHECK(run({"code", "gen", "--bogus"}).code == 1);
    CHECK(run({}).code == 1);
}

TEST_CASE("dist queries") {
    CHECK(std::abs(single_value(run({"dist", "absmax-median", "-B", "4096"})) - 3.76) < 0.01);
    CHECK(std::abs(single_value(run({"dist", "approx-cdf", "--x", "0.5", "-B", "32"})) - 0.8712) < 0.0005);
    CHECK(std::abs(single_value(run({"dist", "cdf", "--x", "0.5", "-B", "32"})) - 0.872778988895808) < 1e-9);
    CHECK(single_value(run({"dist", "cdf", "--x", "-1", "-B", "32"})) == 1.0 / 64.0);
    CHECK(std::abs(single_value(run({"dist", "quantile", "--p", "0.8728", "-B", "32"})) - 0.5) < 1e-3);
    const auto csv = run({"dist", "cdf", "--x", "0.25", "-B", "16", "--csv"});
    CHECK(csv_rows(csv.out)[0] == std::vector<std::string>{"query", "B", "value"});

    CHECK(run({"dist", "quantile", "--p", "0.001", "-B", "32"}).code == 1);
    CHECK(run({"dist", "cdf", "-B", "32"}).code == 1);
    CHECK(run({"dist", "median"}).code == 1);
}

TEST_CASE("quantize and dequantize") {
    TempDir dir;
    const auto code = storage_code(nf4_code());
    Tensor lattice({8, 64});
    for (std::size_t i = 0; i < lattice.size(); ++i) lattice.data[i] = static_cast<float>(code.values[(i * 7) % 16]) * 2.0f;
    tensor_write(lattice, dir / "lat.fqt");
    auto r = run({"quantize", "--in", dir / "lat.fqt", "--kind", "nf4", "--out", dir / "lat.fqz", "--report"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("mean_abs,0\n") != std::string::npos);
    CHECK(r.out.find("max_abs,0\n") != std::string::npos);

    const Tensor t = normal_tensor({1024, 1024}, 3);
    tensor_write(t, dir / "w.fqt");
    REQUIRE(run({"code", "gen", "--kind", "nf4", "--out", dir / "nf4.json"}).code == 0);
    r = run({"quantize", "--in", dir / "w.fqt", "--code", dir / "nf4.json", "-B", "64", "--out", dir / "w.fqz", "--report"});
    REQUIRE(r.code == 0);
    const auto reported = csv_rows(r.out);
    REQUIRE(reported.size() == 3);
    r = run({"dequantize", "--in", dir / "w.fqz", "--out", dir / "w2.fqt", "--reference", dir / "w.fqt", "--report"});
    REQUIRE(r.code == 0);
    CHECK(csv_rows(r.out) == reported);
    const Tensor back = tensor_read(dir / "w2.fqt");
    CHECK(std::stod(reported[0][1]) == reconstruction_error(t, back, ErrorMetric::mean_abs));

    // threads do not change the output file
    REQUIRE(run({"quantize", "--in", dir / "w.fqt", "--kind", "af4", "--out", dir / "a1.fqz", "--threads", "1"}).code == 0);
    REQUIRE(run({"quantize", "--in", dir / "w.fqt", "--kind", "af4", "--out", dir / "a3.fqz", "--threads", "3"}).code == 0);
    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(slurp(dir / "a1.fqz") == slurp(dir / "a3.fqz"));

    // B = 4096: AF4-4096 beats NF4
    const Tensor wide = normal_tensor({64, 4096}, 8);
    tensor_write(wide, dir / "wide.fqt");
    const auto nf = run({"quantize", "--in", dir / "wide.fqt", "--kind", "nf4", "-B", "4096", "--out", dir / "n.fqz", "--report"});
    const auto af = run({"quantize", "--in", dir / "wide.fqt", "--kind", "af4", "-B", "4096", "--out", dir / "a.fqz", "--report"});
    REQUIRE(nf.code == 0);
    REQUIRE(af.code == 0);
    CHECK(std::stod(csv_rows(af.out)[0][1]) < std::stod(csv_rows(nf.out)[0][1]));

    // axis 0
    r = run({"quantize", "--in", dir / "w.fqt", "--kind", "nf4", "--axis", "0", "--out", dir / "ax.fqz"});
    CHECK(r.code == 0);
    CHECK(qtensor_read(dir / "ax.fqz").block_axis == 0);
    CHECK(run({"quantize", "--in", dir / "w.fqt", "--axis", "2", "--out", dir / "bad.fqz"}).code == 1);
}

TEST_CASE("error exit codes") {
    TempDir dir;
    CHECK(run({"quantize", "--in", dir / "missing.fqt", "--out", dir / "x.fqz"}).code == 2);
    {
        std::ofstream f(dir / "junk.fqt", std::ios::binary);
        f << "FQT1garbage";
    }
    auto r = run({"quantize", "--in", dir / "junk.fqt", "--out", dir / "x.fqz"});
    CHECK(r.code == 2);
    CHECK(r.err.find("format error") != std::string::npos);
    CHECK(run({"dequantize", "--in", dir / "junk.fqt", "--out", dir / "y.fqt"}).code == 2);

    Tensor t({2, 4});
    t.data[5] = std::numeric_limits<float>::quiet_NaN();
    tensor_write(t, dir / "nan.fqt");
    r = run({"quantize", "--in", dir / "nan.fqt", "--out", dir / "x.fqz"});
    CHECK(r.code == 2);
    CHECK(r.err.find("[1, 1]") != std::string::npos);

    {
        std::ofstream f(dir / "short.json");
        f << R"({"format": "code16/v1", "kind": "custom", "block_size": null, "values": [-1, 0, 1]})";
    }
    tensor_write(Tensor({2, 4}), dir / "z.fqt");
    r = run({"quantize", "--in", dir / "z.fqt", "--code", dir / "short.json", "--out", dir / "x.fqz"});
    CHECK(r.code == 2);
    CHECK(r.err.find("expected 16 code values, found 3") != std::string::npos);

    ::setenv("QUANTLAB_QUAD_TOL", "1e-300", 1);
    r = run({"code", "gen", "--kind", "af4", "-B", "64"});
    ::unsetenv("QUANTLAB_QUAD_TOL");
    CHECK(r.code == 3);
    ::setenv("QUANTLAB_QUAD_TOL", "abc", 1);
    CHECK(run({"dist", "cdf", "--x", "0.1"}).code == 1);
    ::unsetenv("QUANTLAB_QUAD_TOL");

    CHECK(run({"mc", "sample", "--threads", "0"}).code == 1);
}

TEST_CASE("validate reports") {
    auto r = run({"validate", "usage", "--kind", "nf4", "-B", "64", "--n", "16384", "--csv"});
    REQUIRE(r.code == 0);
    auto rows = csv_rows(r.out);
    REQUIRE(rows.size() == 17);
    CHECK(rows[0] == std::vector<std::string>{"quantity", "B", "n", "estimate", "stderr", "analytic", "abs_diff"});
    double lo = 1.0, hi = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        lo = std::min(lo, std::stod(rows[i][3]));
        hi = std::max(hi, std::stod(rows[i][3]));
    }
    CHECK(lo < 0.04);
    CHECK(hi > 0.07);

    r = run({"validate", "cdf", "-B", "32", "--n", "65536", "--assert", "--csv"});
    CHECK(r.code == 0);
    rows = csv_rows(r.out);
    REQUIRE(rows.size() == 34);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][6]) <= 4.0 * std::stod(rows[i][4]) + 1e-12);

    r = run({"validate", "l1", "--kind", "af4", "--kind", "nf4", "-B", "4096", "--n", "4096", "--csv"});
    REQUIRE(r.code == 0);
    rows = csv_rows(r.out);
    REQUIRE(rows.size() == 3);
    CHECK(rows[1][0] == "l1:af4");
    CHECK(std::stod(rows[1][5]) < std::stod(rows[2][5]));

    r = run({"validate", "usage", "--kind", "balanced", "-B", "256", "--n", "4096", "--assert"});
    CHECK(r.code == 0);

    CHECK(run({"validate", "usage", "--kind", "balanced", "-B", "4"}).code == 1);
    CHECK(run({"validate", "pdf"}).code == 1);
    // identical output for repeated runs and any thread count
    const auto a = run({"validate", "cdf", "-B", "16", "--n", "5000", "--seed", "9", "--threads", "1"});
    const auto b = run({"validate", "cdf", "-B", "16", "--n", "5000", "--seed", "9", "--threads", "3"});
    CHECK(a.out == b.out);
}

TEST_CASE("mc sample") {
    TempDir dir;
    auto r = run({"mc", "sample", "--n", "20000", "-B", "16", "--x", "0.5", "--x", "-0.25", "--out", dir / "s.fqt", "--csv"});
    REQUIRE(r.code == 0);
    const auto rows = csv_rows(r.out);
    REQUIRE(rows.size() == 5);
    CHECK(rows[1][0] == "atom_minus_one");
    CHECK(rows[2][0] == "atom_plus_one");
    CHECK(rows[3][0] == "cdf@0.5");
    for (std::size_t i = 1; i <= 2; ++i) CHECK(std::abs(std::stod(rows[i][3]) - 1.0 / 32.0) <= 4.0 * std::stod(rows[i][4]));
    const auto s = tensor_read(dir / "s.fqt");
    CHECK(s.dims == std::vector<std::size_t>{20000, 16});
    for (std::size_t k = 0; k < 20000; ++k) {
        int ones = 0;
        for (std::size_t i = 0; i < 16; ++i) ones += std::abs(s.data[k * 16 + i]) == 1.0f;
        CHECK(ones >= 1);
    }
    CHECK(run({"mc", "sample", "--n", "100", "--seed", "4"}).out == run({"mc", "sample", "--n", "100", "--seed", "4"}).out);
}
