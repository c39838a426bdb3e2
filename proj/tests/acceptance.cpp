// Acceptance checks: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>
#include <thread>

#include "quantlab/blockquant.hpp"
#include "quantlab/codebook.hpp"
#include "quantlab/distributions.hpp"
#include "quantlab/montecarlo.hpp"

using namespace quantlab;

namespace {

int failures = 0;
const int kThreads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

void report(int id, const char* name, bool ok, const std::string& detail, double seconds) {
    std::printf("%s  [%2d] %-34s %s (%.1fs)\n", ok ? "PASS" : "FAIL", id, name, detail.c_str(), seconds);
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

template <class F>
void criterion(int id, const char* name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    std::string detail;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(id, name, ok, detail, secs);
}

double max_deviation(const UsageEstimate& u) {
    double d = 0.0;
    for (const auto& e : u.proportions) d = std::max(d, std::abs(e.value - 1.0 / 16.0));
    return d;
}

Tensor normal_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Tensor t({rows, cols});
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> n;
    for (auto& v : t.data) v = n(rng);
    return t;
}

}  // namespace

int main() {
    criterion(1, "NF4 offset quantile and variants", [](std::string& d) {
        const double q = normal_quantile(1.0 - nf4_offset());
        const auto a = nf4_code(Nf4Variant::quantile_of_average);
        const auto b = nf4_code(Nf4Variant::average_of_quantile);
        double diff = 0.0;
        bool anchors = true;
        for (const auto* c : {&a, &b}) anchors = anchors && c->values[0] == -1.0 && c->values[7] == 0.0 && c->values[15] == 1.0;
        for (std::size_t j = 0; j < 16; ++j) diff = std::max(diff, std::abs(a.values[j] - b.values[j]));
        d = fmt("quantile=%.6f max variant diff=%.2e", q, diff);
        return std::abs(q - 1.848) <= 0.001 && diff < 0.001 && anchors;
    });

    criterion(2, "absmax median at B=4096", [](std::string& d) {
        const double m = absmax_median(4096);
        d = fmt("median=%.6f", m);
        return std::abs(m - 3.76) <= 0.01;
    });

    criterion(3, "truncated normal tail beyond 0.65", [](std::string& d) {
        const double m = absmax_median(4096);
        const double tail = 1.0 - trunc_normal_cdf(0.65 * m, m);
        d = fmt("tail=%.6f", tail);
        return std::abs(tail - 0.007) <= 0.0005;
    });

    criterion(4, "F_X(0.5; 32): approx, exact, MC", [](std::string& d) {
        const double approx = fx_cdf_approx(0.5, 32);
        const double exact = fx_cdf(0.5, 32);
        const double xs[] = {0.5};
        const auto est = empirical_cdf_stream(McConfig{2024, 32, 1u << 24}, xs, true, kThreads)[0];
        const double z = std::abs(est.value - exact) / est.std_error;
        d = fmt("approx=%.6f exact=%.6f mc=%.6f se=%.1e z=%.2f n=%llu", approx, exact, est.value, est.std_error, z,
                static_cast<unsigned long long>(est.n));
        return std::abs(approx - 0.8712) <= 0.0005 && std::abs(est.value - 0.8728) <= 0.001 && z <= 4.0 &&
               est.n >= (1u << 24);
    });

    criterion(5, "NF4 usage at B=64 is uneven", [](std::string& d) {
        const auto u = estimate_usage(nf4_code(), 64, 1u << 20, 11, kThreads);
        double lo = 1.0, hi = 0.0;
        for (const auto& e : u.proportions) {
            lo = std::min(lo, e.value);
            hi = std::max(hi, e.value);
        }
        d = fmt("min=%.4f max=%.4f over %llu entries", lo, hi, static_cast<unsigned long long>(u.histogram.total));
        return lo < 0.04 && hi > 0.07;
    });

    criterion(6, "balanced code usage at B=4096", [](std::string& d) {
        const auto bal = estimate_usage(balanced_code(4096), 4096, 1u << 12, 12, kThreads);
        const auto ends = estimate_usage(balanced_code_with_endpoints(4096), 4096, 1u << 12, 12, kThreads);
        double worst_z = 0.0;
        for (const auto& e : bal.proportions) worst_z = std::max(worst_z, std::abs(e.value - 1.0 / 16.0) / e.std_error);
        d = fmt("max |p-1/16|/se=%.2f dev=%.2e endpoints dev=%.2e", worst_z, max_deviation(bal), max_deviation(ends));
        return worst_z <= 4.0 && max_deviation(ends) > max_deviation(bal);
    });

    criterion(7, "AF4 median residuals and optimality", [](std::string& d) {
        double worst = 0.0;
        bool local_min = true;
        for (int b : {32, 64, 256, 1024, 4096}) {
            const ScaledMaxDistribution dist(b);
            const auto code = af4_code(b);
            const auto& a = code.values;
            const double base = expected_l1(code, dist);
            for (std::size_t j = 1; j < 15; ++j) {
                if (j == 7) continue;
                worst = std::max(worst, std::abs(median_residual(a[j - 1], a[j], a[j + 1], dist)));
                for (double eps : {-1e-3, 1e-3}) {
                    auto moved = code;
                    moved.values[j] += eps;
                    local_min = local_min && expected_l1(moved, dist) > base;
                }
            }
        }
        d = fmt("max residual=%.2e perturbations raise L1: %s", worst, local_min ? "yes" : "no");
        return worst < 1e-6 && local_min;
    });

    criterion(8, "AF4 vs NF4 and shrinkage with B", [](std::string& d) {
        const auto nf4 = nf4_code();
        const auto a64 = af4_code(64);
        const auto a4096 = af4_code(4096);
        double diff = 0.0;
        bool shrinks = true;
        for (std::size_t j = 0; j < 16; ++j) diff = std::max(diff, std::abs(a64.values[j] - nf4.values[j]));
        for (std::size_t j = 1; j < 15; ++j) {
            if (j != 7) shrinks = shrinks && std::abs(a4096.values[j]) < std::abs(a64.values[j]);
        }
        d = fmt("max |AF4-64 - NF4|=%.4f interior shrinks 64->4096: %s", diff, shrinks ? "yes" : "no");
        return diff <= 0.05 && shrinks;
    });

    criterion(9, "quantizer oracle and round trips", [](std::string& d) {
        std::size_t mismatches = 0, checked = 0;
        bool round_trip = true;
        std::uint64_t seed = 90;
        for (const auto& raw : {nf4_code(), nf4_code(Nf4Variant::average_of_quantile), af4_code(64),
                                balanced_code(64), balanced_code_with_endpoints(64)}) {
            const auto code = storage_code(raw);
            const Tensor t = normal_tensor(10000, 64, seed++);
            const auto qt = quantize(t, code, 64, 1);
            for (std::size_t b = 0; b < 10000; ++b) {
                float m = 0.0f;
                for (std::size_t k = 0; k < 64; ++k) m = std::max(m, std::abs(t.data[b * 64 + k]));
                for (std::size_t k = 0; k < 64; ++k) {
                    const double x = static_cast<float>(t.data[b * 64 + k] / m);
                    std::uint8_t best = 0;
                    for (std::uint8_t j = 1; j < 16; ++j)
                        if (std::abs(x - code.values[j]) < std::abs(x - code.values[best])) best = j;
                    mismatches += qt.index(b, k) != best;
                    ++checked;
                }
            }
            const auto qbytes = qtensor_to_bytes(qt);
            const auto qback = qtensor_from_bytes(qbytes);
            round_trip = round_trip && qtensor_to_bytes(qback) == qbytes && qback.packed == qt.packed &&
                         dequantize(qback).data == dequantize(qt).data;
            const auto tbytes = tensor_to_bytes(t);
            const auto tback = tensor_from_bytes(tbytes);
            round_trip = round_trip && std::memcmp(tback.data.data(), t.data.data(), 4 * t.size()) == 0;
            const auto text = code_to_string(raw);
            round_trip = round_trip && code_from_string(text).values == raw.values;
        }
        d = fmt("%zu/%zu indices match, bit-exact round trips: %s", checked - mismatches, checked, round_trip ? "yes" : "no");
        return mismatches == 0 && round_trip;
    });

    criterion(10, "4096x4096 reconstruction error", [](std::string& d) {
        const Tensor t = normal_tensor(4096, 4096, 10);
        auto err = [&](const Code16& code, std::size_t b) {
            return reconstruction_error(t, dequantize(quantize(t, code, b, 1, kThreads), kThreads), ErrorMetric::mean_abs);
        };
        const auto nf4 = nf4_code();
        const double nf_4096 = err(nf4, 4096), af_4096 = err(af4_code(4096), 4096);
        const double nf_64 = err(nf4, 64), af_64 = err(af4_code(64), 64);
        d = fmt("B=4096 af4=%.5f nf4=%.5f; B=64 af4=%.5f nf4=%.5f", af_4096, nf_4096, af_64, nf_64);
        return af_4096 < nf_4096 && std::abs(af_64 - nf_64) <= 0.10 * nf_64;
    });

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
