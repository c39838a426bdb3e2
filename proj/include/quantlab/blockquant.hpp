#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "quantlab/codebook.hpp"

namespace quantlab {

/// Dense row-major float32 tensor.
struct Tensor {
    std::vector<std::size_t> dims;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> dims_);
    Tensor(std::vector<std::size_t> dims_, std::vector<float> data_);

    std::size_t size() const { return data.size(); }
};

/// Element count for `dims`; throws DomainError on size_t overflow.
std::size_t element_count(std::span<const std::size_t> dims);

/// Geometry of absmax blocks laid along one axis of a row-major tensor.
/// Blocks are enumerated in row-major order over the block grid (the tensor
/// dims with the axis extent replaced by the number of blocks along it).
struct BlockLayout {
    std::size_t outer = 1;        // product of extents before the axis
    std::size_t axis_extent = 0;
    std::size_t inner = 1;        // product of extents after the axis
    std::size_t block_size = 1;
    std::size_t blocks_per_line = 0;

    static BlockLayout make(std::span<const std::size_t> dims, std::size_t axis, std::size_t block_size);

    std::size_t num_blocks() const { return outer * blocks_per_line * inner; }
    std::size_t block_length(std::size_t block) const;
    /// Flat tensor offset of element k within `block`.
    std::size_t element_offset(std::size_t block, std::size_t k) const;
    std::size_t element_stride() const { return inner; }
    /// Bytes of packed indices for `block` (two indices per byte, padded).
    std::size_t packed_bytes(std::size_t block) const { return (block_length(block) + 1) / 2; }
    /// Offset of the block's first packed byte when blocks are stored back to back.
    std::size_t packed_offset(std::size_t block) const;
    std::size_t total_packed_bytes() const { return packed_offset(num_blocks()); }
};

struct QuantizedTensor {
    std::vector<std::size_t> dims;
    std::size_t block_axis = 0;
    std::size_t block_size = 1;
    Code16 code;                      // values are float32-representable
    std::vector<float> scales;        // one absmax per block
    std::vector<std::uint8_t> packed; // per-block nibbles, low nibble first

    BlockLayout layout() const { return BlockLayout::make(dims, block_axis, block_size); }
    std::uint8_t index(std::size_t block, std::size_t k) const;
    /// Throws DataError on inconsistent sizes, negative scales or nonzero
    /// padding nibbles.
    void validate() const;
};

struct UsageHistogram {
    std::array<std::uint64_t, kCodeSize> counts{};
    std::uint64_t total = 0;

    void add(std::uint8_t index) {
        ++counts[index];
        ++total;
    }
    void merge(const UsageHistogram& other);
    double proportion(std::size_t j) const;
    /// Binomial standard error of proportion(j).
    double std_error(std::size_t j) const;
    std::array<double, kCodeSize> proportions() const;
};

enum class ErrorMetric { mean_abs, mean_sq, max_abs };

/// Code with each value rounded to float32, the precision it is stored with.
Code16 storage_code(const Code16& code);

/// argmin_j |q_j - x| with ties resolved to the lower index.
std::uint8_t nearest_index(std::span<const double, kCodeSize> code, double x);

/// Quantizes one block of `values` (read with the given stride) against a
/// code whose values are float32-representable. Writes one index per element
/// and returns the absmax.
float quantize_block(std::span<const float> values, std::size_t stride,
                     std::span<const double, kCodeSize> code, std::span<std::uint8_t> indices);

QuantizedTensor quantize(const Tensor& tensor, const Code16& code, std::size_t block_size,
                         std::size_t axis, int threads = 1);
Tensor dequantize(const QuantizedTensor& qt, int threads = 1);
UsageHistogram usage_histogram(const QuantizedTensor& qt);
double reconstruction_error(const Tensor& original, const Tensor& reconstructed, ErrorMetric metric);

// FQT1 / FQZ1 binary files (little-endian).
std::vector<std::uint8_t> tensor_to_bytes(const Tensor& tensor);
Tensor tensor_from_bytes(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> qtensor_to_bytes(const QuantizedTensor& qt);
QuantizedTensor qtensor_from_bytes(std::span<const std::uint8_t> bytes);

void tensor_write(const Tensor& tensor, const std::filesystem::path& path);
Tensor tensor_read(const std::filesystem::path& path);
void qtensor_write(const QuantizedTensor& qt, const std::filesystem::path& path);
QuantizedTensor qtensor_read(const std::filesystem::path& path);

}  // namespace quantlab
