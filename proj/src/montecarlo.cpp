#include "quantlab/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace quantlab {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

void McConfig::validate() const {
    if (block_size < 1) throw DomainError("monte carlo block size must be >= 1");
    if (num_blocks < 1) throw DomainError("monte carlo num_blocks must be >= 1");
    if (chunk_size < 1) throw DomainError("monte carlo chunk_size must be >= 1");
}

BlockStream::BlockStream(std::uint64_t seed, std::uint64_t block_index)
    : key_(mix64(seed + kGolden) ^ mix64(block_index * kGolden + 0x632BE59BD9B4E019ULL)) {}

std::uint64_t BlockStream::next_bits() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double BlockStream::next_uniform() {
    return (static_cast<double>(next_bits() >> 11) + 0.5) * 0x1.0p-53;
}

double BlockStream::next_normal() { return normal_quantile(next_uniform()); }

void sample_normals(const McConfig& cfg, std::uint64_t block_index, std::span<double> out) {
    BlockStream stream(cfg.seed, block_index);
    for (auto& z : out) z = stream.next_normal();
}

std::size_t sample_block(const McConfig& cfg, std::uint64_t block_index, std::span<double> out) {
    sample_normals(cfg, block_index, out);
    std::size_t arg = 0;
    double absmax = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (std::abs(out[i]) > absmax) {
            absmax = std::abs(out[i]);
            arg = i;
        }
    }
    for (auto& z : out) z /= absmax;
    out[arg] = out[arg] < 0.0 ? -1.0 : 1.0;
    return arg;
}

SampleBatch sample_blocks(const McConfig& cfg, int threads) {
    cfg.validate();
    SampleBatch batch;
    batch.config = cfg;
    const auto b = static_cast<std::size_t>(cfg.block_size);
    batch.values.resize(static_cast<std::size_t>(cfg.num_blocks) * b);
    parallel_for_chunks(cfg.num_chunks(), threads, [&](std::size_t c) {
        const std::uint64_t end = std::min(cfg.num_blocks, (c + 1) * cfg.chunk_size);
        for (std::uint64_t k = c * cfg.chunk_size; k < end; ++k) {
            sample_block(cfg, k, std::span<double>(batch.values).subspan(k * b, b));
        }
    });
    return batch;
}

namespace {

Estimate proportion_estimate(std::uint64_t hits, std::uint64_t n) {
    Estimate e;
    e.n = n;
    if (n == 0) return e;
    e.value = static_cast<double>(hits) / static_cast<double>(n);
    e.std_error = std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(n));
    return e;
}

}  // namespace

Estimate empirical_cdf(const SampleBatch& batch, double x, bool independent_only) {
    if (batch.values.empty()) throw DomainError("empirical_cdf: empty batch");
    std::uint64_t hits = 0;
    std::uint64_t n = 0;
    if (independent_only) {
        for (std::uint64_t k = 0; k < batch.config.num_blocks; ++k) {
            hits += batch.block(k)[0] <= x;
            ++n;
        }
    } else {
        for (double v : batch.values) hits += v <= x;
        n = batch.values.size();
    }
    return proportion_estimate(hits, n);
}

namespace {

struct GridCounts {
    std::vector<std::uint64_t> bucket;  // bucket[i]: samples with xs[i-1] < v <= xs[i]
    std::uint64_t n = 0;
    void merge(const GridCounts& o) {
        if (bucket.size() < o.bucket.size()) bucket.resize(o.bucket.size(), 0);
        for (std::size_t i = 0; i < o.bucket.size(); ++i) bucket[i] += o.bucket[i];
        n += o.n;
    }
};

}  // namespace

std::vector<Estimate> empirical_cdf_stream(const McConfig& cfg, std::span<const double> xs,
                                           bool independent_only, int threads) {
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t g = sorted.size();
    auto counts = reduce_blocks<GridCounts>(cfg, threads, [&](GridCounts& acc, std::span<const double> block, std::uint64_t) {
        if (acc.bucket.empty()) acc.bucket.assign(g + 1, 0);
        auto tally = [&](double v) {
            const auto i = std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin();
            ++acc.bucket[static_cast<std::size_t>(i)];
            ++acc.n;
        };
        if (independent_only) {
            tally(block[0]);
        } else {
            for (double v : block) tally(v);
        }
    });
    counts.bucket.resize(g + 1, 0);
    std::vector<std::uint64_t> cumulative(g);
    std::uint64_t run = 0;
    for (std::size_t i = 0; i < g; ++i) {
        run += counts.bucket[i];
        cumulative[i] = run;
    }
    std::vector<Estimate> out;
    out.reserve(g);
    for (double x : xs) {
        const auto i = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin());
        out.push_back(proportion_estimate(cumulative[i], counts.n));
    }
    return out;
}

UsageEstimate estimate_usage(const Code16& code, int block_size, std::uint64_t num_blocks,
                             std::uint64_t seed, int threads) {
    McConfig cfg{seed, block_size, num_blocks};
    cfg.validate();
    const Code16 stored = storage_code(code);
    const std::span<const double, kCodeSize> values(stored.values);
    struct Acc {
        UsageHistogram h;
        std::array<double, kCodeSize> sum_sq{};  // squared per-block fractions
        void merge(const Acc& o) {
            h.merge(o.h);
            for (std::size_t j = 0; j < kCodeSize; ++j) sum_sq[j] += o.sum_sq[j];
        }
    };
    std::vector<Acc> partial(cfg.num_chunks());
    parallel_for_chunks(cfg.num_chunks(), threads, [&](std::size_t c) {
        const auto b = static_cast<std::size_t>(block_size);
        std::vector<double> z(b);
        std::vector<float> w(b);
        std::vector<std::uint8_t> idx(b);
        const std::uint64_t end = std::min(cfg.num_blocks, (c + 1) * cfg.chunk_size);
        for (std::uint64_t k = c * cfg.chunk_size; k < end; ++k) {
            sample_normals(cfg, k, z);
            std::transform(z.begin(), z.end(), w.begin(), [](double v) { return static_cast<float>(v); });
            quantize_block(w, 1, values, idx);
            std::array<std::uint32_t, kCodeSize> block_counts{};
            for (auto i : idx) {
                partial[c].h.add(i);
                ++block_counts[i];
            }
            for (std::size_t j = 0; j < kCodeSize; ++j) {
                const double f = static_cast<double>(block_counts[j]) / static_cast<double>(b);
                partial[c].sum_sq[j] += f * f;
            }
        }
    });
    Acc total;
    for (auto& p : partial) total.merge(p);

    UsageEstimate out;
    out.histogram = total.h;
    const double n = static_cast<double>(num_blocks);
    for (std::size_t j = 0; j < kCodeSize; ++j) {
        auto& e = out.proportions[j];
        e.n = num_blocks;
        e.value = total.h.proportion(j);
        if (num_blocks > 1) {
            const double var = std::max(0.0, total.sum_sq[j] / n - e.value * e.value) * n / (n - 1.0);
            e.std_error = std::sqrt(var / n);
        }
    }
    return out;
}

Estimate estimate_l1(const Code16& code, const McConfig& cfg, int threads) {
    code.validate();
    struct Acc {
        double sum = 0.0, sum_sq = 0.0;
        std::uint64_t n = 0;
        void merge(const Acc& o) {
            sum += o.sum;
            sum_sq += o.sum_sq;
            n += o.n;
        }
    };
    const auto& a = code.values;
    const auto acc = reduce_blocks<Acc>(cfg, threads, [&](Acc& s, std::span<const double> block, std::uint64_t) {
        double d = std::numeric_limits<double>::infinity();
        for (double v : a) d = std::min(d, std::abs(block[0] - v));
        s.sum += d;
        s.sum_sq += d * d;
        ++s.n;
    });
    Estimate e;
    e.n = acc.n;
    e.value = acc.sum / static_cast<double>(acc.n);
    const double var = std::max(0.0, acc.sum_sq / acc.n - e.value * e.value) * acc.n / std::max<double>(1.0, acc.n - 1.0);
    e.std_error = std::sqrt(var / static_cast<double>(acc.n));
    return e;
}

ExtremeCounts count_extremes(const McConfig& cfg, int threads) {
    struct Acc {
        ExtremeCounts c;
        void merge(const Acc& o) {
            c.blocks += o.c.blocks;
            c.first_at_minus_one += o.c.first_at_minus_one;
            c.first_at_plus_one += o.c.first_at_plus_one;
            c.first_two_both_one += o.c.first_two_both_one;
            c.samples += o.c.samples;
            c.samples_at_minus_one += o.c.samples_at_minus_one;
            c.samples_at_plus_one += o.c.samples_at_plus_one;
        }
    };
    return reduce_blocks<Acc>(cfg, threads, [](Acc& s, std::span<const double> block, std::uint64_t) {
               ++s.c.blocks;
               s.c.first_at_minus_one += block[0] == -1.0;
               s.c.first_at_plus_one += block[0] == 1.0;
               if (block.size() >= 2) s.c.first_two_both_one += block[0] == 1.0 && block[1] == 1.0;
               for (double v : block) {
                   s.c.samples_at_minus_one += v == -1.0;
                   s.c.samples_at_plus_one += v == 1.0;
               }
               s.c.samples += block.size();
           })
        .c;
}

double ci_halfwidth(double p, std::uint64_t n, double z) {
    if (n < 1) throw DomainError("ci_halfwidth: n must be >= 1");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("ci_halfwidth: p must lie in [0, 1]");
    return z * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

double ks_distance(std::vector<double> samples, const ScaledMaxDistribution& dist) {
    if (samples.empty()) throw DomainError("ks_distance: no samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    std::size_t i = 0;
    while (i < samples.size()) {
        std::size_t j = i;
        while (j < samples.size() && samples[j] == samples[i]) ++j;
        const double x = samples[i];
        if (x > -1.0 && x < 1.0) {
            // F_X is continuous on (-1, 1), so its left limit equals its value.
            const double f = dist.cdf(x);
            d = std::max({d, std::abs(static_cast<double>(j) / n - f), std::abs(static_cast<double>(i) / n - f)});
        }
        i = j;
    }
    return d;
}

double ks_critical_99(std::uint64_t n) {
    if (n < 1) throw DomainError("ks_critical_99: n must be >= 1");
    // sqrt(-ln(0.005) / 2)
    return 1.6276236115189504 / std::sqrt(static_cast<double>(n));
}

}  // namespace quantlab
