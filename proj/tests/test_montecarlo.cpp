#include <doctest.h>

#include <cmath>

#include "quantlab/montecarlo.hpp"

using namespace quantlab;

TEST_CASE("streams are reproducible and independent of scheduling") {
    McConfig cfg{42, 16, 1000, 64};
    const auto a = sample_blocks(cfg, 1);
    CHECK(sample_blocks(cfg, 1).values == a.values);
    CHECK(sample_blocks(cfg, 3).values == a.values);
    McConfig rechunked = cfg;
    rechunked.chunk_size = 7;
    CHECK(sample_blocks(rechunked, 2).values == a.values);

    std::vector<double> one(16);
    sample_block(cfg, 517, one);
    CHECK(std::equal(one.begin(), one.end(), a.block(517).begin()));

    McConfig other = cfg;
    other.seed = 43;
    CHECK(sample_blocks(other).values != a.values);

    // growing the run leaves earlier blocks unchanged
    McConfig longer = cfg;
    longer.num_blocks = 2000;
    const auto b = sample_blocks(longer);
    CHECK(std::equal(a.values.begin(), a.values.end(), b.values.begin()));

    CHECK_THROWS_AS(sample_blocks(McConfig{1, 0, 10}), DomainError);
    CHECK_THROWS_AS(sample_blocks(McConfig{1, 4, 0}), DomainError);
}

TEST_CASE("normal draws") {
    BlockStream u(7, 4);
    for (int i = 0; i < 10000; ++i) {
        const double v = u.next_uniform();
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    const int n = 200000;
    double sum = 0.0, sum_sq = 0.0;
    BlockStream t(7, 3);
    for (int i = 0; i < n; ++i) {
        const double z = t.next_normal();
        sum += z;
        sum_sq += z * z;
    }
    const double mean = sum / n, var = sum_sq / n - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
    CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("normalized blocks") {
    const McConfig cfg{5, 64, 2000};
    const auto batch = sample_blocks(cfg);
    for (std::uint64_t k = 0; k < cfg.num_blocks; ++k) {
        int extremes = 0;
        for (double v : batch.block(k)) {
            CHECK(std::abs(v) <= 1.0);
            extremes += std::abs(v) == 1.0;
        }
        CHECK(extremes == 1);
    }
    std::vector<double> buf(64);
    const auto arg = sample_block(cfg, 11, buf);
    CHECK(std::abs(buf[arg]) == 1.0);
}

TEST_CASE("B = 1 gives only the two atoms") {
    const McConfig cfg{3, 1, 20000};
    const auto ext = count_extremes(cfg);
    CHECK(ext.samples_at_minus_one + ext.samples_at_plus_one == ext.samples);
    const double p = static_cast<double>(ext.first_at_plus_one) / ext.blocks;
    CHECK(std::abs(p - 0.5) < 4.0 * std::sqrt(0.25 / ext.blocks));
    const auto batch = sample_blocks(cfg);
    CHECK(empirical_cdf(batch, 0.3, true).value == empirical_cdf(batch, -1.0, true).value);
}

TEST_CASE("atom frequencies and dependence") {
    for (int b : {4, 16, 64}) {
        const McConfig cfg{21, b, 1u << 16};
        const auto ext = count_extremes(cfg);
        CAPTURE(b);
        CHECK(ext.samples_at_minus_one + ext.samples_at_plus_one == ext.blocks);
        const double atom = 0.5 / b;
        const double se = std::sqrt(atom * (1.0 - atom) / ext.blocks);
        CHECK(std::abs(static_cast<double>(ext.first_at_minus_one) / ext.blocks - atom) < 4.0 * se);
        CHECK(std::abs(static_cast<double>(ext.first_at_plus_one) / ext.blocks - atom) < 4.0 * se);
        // independent draws would give X_1 = X_2 = 1 with probability 1/(4B^2) > 0
        CHECK(ext.first_two_both_one == 0);
    }
}

TEST_CASE("empirical CDF agrees with F_X") {
    std::vector<double> grid;
    for (int i = 0; i <= 32; ++i) grid.push_back(-1.0 + i / 16.0);
    for (auto [b, n] : {std::pair{16, 1u << 16}, {64, 1u << 15}, {1024, 1u << 13}}) {
        const ScaledMaxDistribution d(b);
        const McConfig cfg{99, b, n};
        const auto est = empirical_cdf_stream(cfg, grid, true, 2);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            CAPTURE(b);
            CAPTURE(grid[i]);
            CHECK(std::abs(est[i].value - d.cdf(grid[i])) <= 4.0 * est[i].std_error + 1e-12);
        }
        CHECK(est.back().value == 1.0);
    }
}

TEST_CASE("batch and streaming CDF estimates coincide") {
    const McConfig cfg{8, 32, 5000, 300};
    const auto batch = sample_blocks(cfg);
    const std::vector<double> xs = {0.5, -1.0, 0.0, 0.99, -0.3};
    for (bool indep : {true, false}) {
        const auto s = empirical_cdf_stream(cfg, xs, indep, 3);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const auto e = empirical_cdf(batch, xs[i], indep);
            CHECK(s[i].value == e.value);
            CHECK(s[i].n == e.n);
        }
    }
}

TEST_CASE("Kolmogorov-Smirnov against F_X") {
    for (int b : {16, 64, 1024}) {
        const std::uint64_t n = 1u << 13;
        const auto batch = sample_blocks(McConfig{1234, b, n});
        std::vector<double> first;
        for (std::uint64_t k = 0; k < n; ++k) first.push_back(batch.block(k)[0]);
        const double d = ks_distance(first, ScaledMaxDistribution(b));
        CAPTURE(b);
        CHECK(d < ks_critical_99(n));
    }
    CHECK(ks_critical_99(10000) == doctest::Approx(0.0162762).epsilon(1e-5));
}

TEST_CASE("uniform bins hold 1/16 of the mass") {
    const auto bins = uniform_bins(64);
    const std::vector<double> edges(bins.edges.begin(), bins.edges.end());
    const auto est = empirical_cdf_stream(McConfig{77, 64, 1u << 16}, edges, true);
    CHECK(std::abs(est[0].value - 1.0 / 128.0) <= 4.0 * est[0].std_error);
    for (std::size_t k = 1; k < 17; ++k) {
        CAPTURE(k);
        CHECK(std::abs(est[k].value - k / 16.0) <= 4.0 * est[k].std_error + 1e-12);
    }
}

TEST_CASE("usage estimates") {
    const auto nf4 = estimate_usage(nf4_code(), 64, 1u << 16, 5);
    double lo = 1.0, hi = 0.0;
    for (const auto& e : nf4.proportions) {
        lo = std::min(lo, e.value);
        hi = std::max(hi, e.value);
    }
    CHECK(lo < 0.04);
    CHECK(hi > 0.07);
    CHECK(nf4.histogram.counts[0] + nf4.histogram.counts[15] >= (1u << 16));

    for (const auto& code : {nf4_code(), af4_code(64)}) {
        const auto est = estimate_usage(code, 64, 1u << 15, 6);
        const auto analytic = expected_usage(storage_code(code), ScaledMaxDistribution(64));
        for (std::size_t j = 0; j < 16; ++j) {
            CAPTURE(j);
            CHECK(std::abs(est.proportions[j].value - analytic[j]) <= 4.0 * est.proportions[j].std_error);
        }
    }

    const auto bal = estimate_usage(balanced_code(256), 256, 1u << 14, 7);
    for (const auto& e : bal.proportions) CHECK(std::abs(e.value - 1.0 / 16.0) <= 4.0 * e.std_error);

    CHECK(estimate_usage(nf4_code(), 64, 3000, 1, 1).histogram.counts ==
          estimate_usage(nf4_code(), 64, 3000, 1, 4).histogram.counts);
}

TEST_CASE("expected L1 against sampling") {
    for (int b : {16, 64, 4096}) {
        const std::uint64_t n = b == 4096 ? (1u << 12) : (1u << 16);
        const McConfig cfg{31, b, n};
        for (const auto& code : {nf4_code(), af4_code(b)}) {
            const auto est = estimate_l1(code, cfg);
            CAPTURE(b);
            CHECK(std::abs(est.value - expected_l1(code, b)) <= 4.0 * est.std_error);
        }
    }
}

TEST_CASE("reconstruction error of normal tensors") {
    // Quantized N(0,1) blocks: E|w - w_hat| = E[M * min_j |X - a_j|].
    for (int b : {64, 1024}) {
        const std::uint64_t blocks = b == 64 ? (1u << 14) : (1u << 11);
        const McConfig cfg{55, b, blocks};
        const auto code = storage_code(nf4_code());
        Tensor t({blocks, static_cast<std::size_t>(b)});
        std::vector<double> z(b);
        for (std::uint64_t k = 0; k < blocks; ++k) {
            sample_normals(cfg, k, z);
            for (int i = 0; i < b; ++i) t.data[k * b + i] = static_cast<float>(z[i]);
        }
        const auto qt = quantize(t, code, b, 1);
        const auto back = dequantize(qt);
        // per-block mean errors are independent across blocks
        double sum = 0.0, sum_sq = 0.0;
        for (std::uint64_t k = 0; k < blocks; ++k) {
            double e = 0.0;
            for (int i = 0; i < b; ++i) e += std::abs(back.data[k * b + i] - t.data[k * b + i]);
            e /= b;
            sum += e;
            sum_sq += e * e;
        }
        const double mean = sum / blocks;
        const double se = std::sqrt((sum_sq / blocks - mean * mean) / (blocks - 1));
        CHECK(mean == doctest::Approx(reconstruction_error(t, back, ErrorMetric::mean_abs)).epsilon(1e-9));

        const ScaledMaxDistribution d(b);
        CAPTURE(b);
        CHECK(std::abs(mean - expected_abs_error(code, d)) <= 4.0 * se);
        // scaling relation with E[M]: close, though M and X are dependent
        const double mean_m = d.expect_over_absmax([](double m) { return m; });
        CHECK(std::abs(expected_l1(code, d) * mean_m / expected_abs_error(code, d) - 1.0) < 0.05);
    }
}

TEST_CASE("confidence half-widths") {
    CHECK(ci_halfwidth(0.5, 10000) == doctest::Approx(0.0098));
    CHECK(ci_halfwidth(0.8728, 1ull << 30) == doctest::Approx(1.993e-5).epsilon(1e-3));
    CHECK(std::abs(ci_halfwidth(0.8728, 1ull << 30) - 2.0e-5) < 1e-6);
    CHECK(ci_halfwidth(0.0, 100) == 0.0);
    CHECK(ci_halfwidth(1.0, 100) == 0.0);
    CHECK_THROWS_AS(ci_halfwidth(0.5, 0), DomainError);
    CHECK_THROWS_AS(ci_halfwidth(1.5, 10), DomainError);
}

TEST_CASE("block reduction is deterministic") {
    struct Sum {
        double s = 0.0;
        void merge(const Sum& o) { s += o.s; }
    };
    auto run = [](int threads, std::uint64_t chunk) {
        return reduce_blocks<Sum>(McConfig{4, 8, 10000, chunk}, threads,
                                  [](Sum& acc, std::span<const double> blk, std::uint64_t) {
                                      for (double v : blk) acc.s += v;
                                  })
            .s;
    };
    const double a = run(1, 256);
    CHECK(run(4, 256) == a);
    CHECK(run(2, 256) == a);
}
