#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "quantlab/blockquant.hpp"
#include "quantlab/codebook.hpp"
#include "quantlab/distributions.hpp"
#include "quantlab/parallel.hpp"

namespace quantlab {

struct McConfig {
    std::uint64_t seed = 0;
    int block_size = 64;
    std::uint64_t num_blocks = 1;
    std::uint64_t chunk_size = 4096;  // blocks per work unit

    void validate() const;
    std::uint64_t num_chunks() const { return (num_blocks + chunk_size - 1) / chunk_size; }
};

/// Counter-based stream: draw i of block k is a pure function of
/// (seed, k, i), so any block can be regenerated in isolation.
class BlockStream {
public:
    BlockStream(std::uint64_t seed, std::uint64_t block_index);

    std::uint64_t next_bits();
    /// Uniform on the open interval (0, 1) with 53-bit resolution.
    double next_uniform();
    /// Standard normal by inversion of next_uniform().
    double next_normal();

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Raw N(0,1) draws for block k.
void sample_normals(const McConfig& cfg, std::uint64_t block_index, std::span<double> out);

/// Normalized block X_i = Z_i / max|Z|. Returns the position of the extreme
/// (first occurrence on ties), which is set to exactly +-1.
std::size_t sample_block(const McConfig& cfg, std::uint64_t block_index, std::span<double> out);

struct SampleBatch {
    McConfig config;
    std::vector<double> values;  // num_blocks x block_size, block-major

    std::span<const double> block(std::uint64_t k) const {
        const auto b = static_cast<std::size_t>(config.block_size);
        return std::span<const double>(values).subspan(k * b, b);
    }
};

SampleBatch sample_blocks(const McConfig& cfg, int threads = 1);

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
    std::uint64_t n = 0;
};

/// Proportion of samples <= x. With independent_only, only the element at
/// position 0 of each block is used, so the binomial standard error applies.
Estimate empirical_cdf(const SampleBatch& batch, double x, bool independent_only);

/// Streaming form over a grid of x values; does not materialize the batch.
std::vector<Estimate> empirical_cdf_stream(const McConfig& cfg, std::span<const double> xs,
                                           bool independent_only, int threads = 1);

struct UsageEstimate {
    UsageHistogram histogram;
    /// Proportion of entries mapped to each index. Entries of one block share
    /// the absmax and are not independent, so std_error comes from the spread
    /// of per-block fractions across blocks.
    std::array<Estimate, kCodeSize> proportions{};
};

/// Quantizes sampled N(0,1) blocks against `code` and tallies index usage.
UsageEstimate estimate_usage(const Code16& code, int block_size, std::uint64_t num_blocks,
                             std::uint64_t seed, int threads = 1);

/// Mean of min_j |X - a_j| over the position-0 sample of each block.
Estimate estimate_l1(const Code16& code, const McConfig& cfg, int threads = 1);

struct ExtremeCounts {
    std::uint64_t blocks = 0;
    std::uint64_t first_at_minus_one = 0;  // X_1 = -1
    std::uint64_t first_at_plus_one = 0;   // X_1 = +1
    std::uint64_t first_two_both_one = 0;  // X_1 = X_2 = 1
    std::uint64_t samples = 0;
    std::uint64_t samples_at_minus_one = 0;
    std::uint64_t samples_at_plus_one = 0;
};

ExtremeCounts count_extremes(const McConfig& cfg, int threads = 1);

/// z * sqrt(p (1 - p) / n).
double ci_halfwidth(double p, std::uint64_t n, double z = 1.96);

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `samples` restricted to (-1, 1) points and F_X, checked at each point and
/// its left limit. `samples` need not be sorted.
double ks_distance(std::vector<double> samples, const ScaledMaxDistribution& dist);

/// Asymptotic 99% critical value of the one-sample KS statistic.
double ks_critical_99(std::uint64_t n);

/// Deterministic map-reduce over sampled blocks. For each chunk a fresh Acc
/// is built, per_block(acc, block_values, block_index) is called for each
/// block, and chunk results are merged in chunk order with acc.merge(other).
template <class Acc, class PerBlock>
Acc reduce_blocks(const McConfig& cfg, int threads, PerBlock&& per_block) {
    cfg.validate();
    const std::uint64_t nchunks = cfg.num_chunks();
    std::vector<Acc> partial(nchunks);
    parallel_for_chunks(nchunks, threads, [&](std::size_t c) {
        std::vector<double> buf(static_cast<std::size_t>(cfg.block_size));
        const std::uint64_t end = std::min(cfg.num_blocks, (c + 1) * cfg.chunk_size);
        for (std::uint64_t k = c * cfg.chunk_size; k < end; ++k) {
            sample_block(cfg, k, buf);
            per_block(partial[c], std::span<const double>(buf), k);
        }
    });
    Acc total{};
    for (auto& p : partial) total.merge(p);
    return total;
}

}  // namespace quantlab
