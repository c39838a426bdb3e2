#include "quantlab/blockquant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "quantlab/parallel.hpp"

namespace quantlab {

Tensor::Tensor(std::vector<std::size_t> dims_) : dims(std::move(dims_)) {
    data.assign(element_count(dims), 0.0f);
}

Tensor::Tensor(std::vector<std::size_t> dims_, std::vector<float> data_)
    : dims(std::move(dims_)), data(std::move(data_)) {
    if (element_count(dims) != data.size()) {
        throw DomainError("tensor data has " + std::to_string(data.size()) +
                          " elements, dims require " + std::to_string(element_count(dims)));
    }
}

std::size_t element_count(std::span<const std::size_t> dims) {
    std::size_t n = 1;
    for (std::size_t d : dims) {
        if (d != 0 && n > std::numeric_limits<std::size_t>::max() / d) {
            throw DomainError("tensor dimensions overflow the addressable size");
        }
        n *= d;
    }
    return n;
}

// ---------------------------------------------------------------------------
// BlockLayout
// ---------------------------------------------------------------------------

BlockLayout BlockLayout::make(std::span<const std::size_t> dims, std::size_t axis, std::size_t block_size) {
    if (block_size < 1) throw DomainError("block size must be >= 1");
    if (axis >= dims.size()) {
        throw DomainError("block axis " + std::to_string(axis) + " is invalid for a " +
                          std::to_string(dims.size()) + "-d tensor");
    }
    element_count(dims);
    BlockLayout l;
    for (std::size_t i = 0; i < axis; ++i) l.outer *= dims[i];
    for (std::size_t i = axis + 1; i < dims.size(); ++i) l.inner *= dims[i];
    l.axis_extent = dims[axis];
    l.block_size = block_size;
    l.blocks_per_line = (l.axis_extent + block_size - 1) / block_size;
    return l;
}

std::size_t BlockLayout::block_length(std::size_t block) const {
    const std::size_t along = (block / inner) % blocks_per_line;
    return std::min(block_size, axis_extent - along * block_size);
}

std::size_t BlockLayout::element_offset(std::size_t block, std::size_t k) const {
    const std::size_t i = block % inner;
    const std::size_t along = (block / inner) % blocks_per_line;
    const std::size_t o = block / (inner * blocks_per_line);
    return (o * axis_extent + along * block_size + k) * inner + i;
}

std::size_t BlockLayout::packed_offset(std::size_t block) const {
    if (blocks_per_line == 0) return 0;
    const std::size_t full = (block_size + 1) / 2;
    const std::size_t last_len = axis_extent - (blocks_per_line - 1) * block_size;
    const std::size_t last = (last_len + 1) / 2;
    // Blocks before `block` in the last position along the axis.
    const std::size_t per_outer = blocks_per_line * inner;
    const std::size_t o = block / per_outer;
    const std::size_t rem = block % per_outer;
    std::size_t last_before = o * inner;
    if (rem >= (blocks_per_line - 1) * inner) last_before += rem - (blocks_per_line - 1) * inner;
    return block * full - last_before * (full - last);
}

// ---------------------------------------------------------------------------
// QuantizedTensor
// ---------------------------------------------------------------------------

std::uint8_t QuantizedTensor::index(std::size_t block, std::size_t k) const {
    const auto l = layout();
    const std::uint8_t byte = packed[l.packed_offset(block) + k / 2];
    return (k % 2 == 0) ? (byte & 0x0F) : (byte >> 4);
}

void QuantizedTensor::validate() const {
    if (block_size < 1) throw DataError("quantized tensor block size must be >= 1");
    const auto l = layout();
    if (scales.size() != l.num_blocks()) {
        throw DataError("quantized tensor has " + std::to_string(scales.size()) + " scales, expected " +
                        std::to_string(l.num_blocks()));
    }
    if (packed.size() != l.total_packed_bytes()) {
        throw DataError("quantized tensor has " + std::to_string(packed.size()) +
                        " packed bytes, expected " + std::to_string(l.total_packed_bytes()));
    }
    for (std::size_t b = 0; b < scales.size(); ++b) {
        if (!(scales[b] >= 0.0f) || !std::isfinite(scales[b])) {
            throw DataError("block " + std::to_string(b) + " has invalid scale");
        }
        const std::size_t len = l.block_length(b);
        if (len % 2 == 1 && (packed[l.packed_offset(b) + len / 2] >> 4) != 0) {
            throw DataError("block " + std::to_string(b) + " has a nonzero padding nibble");
        }
    }
    try {
        code.validate();
    } catch (const DomainError& e) {
        throw DataError(std::string("quantized tensor code: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// UsageHistogram
// ---------------------------------------------------------------------------

void UsageHistogram::merge(const UsageHistogram& other) {
    for (std::size_t j = 0; j < kCodeSize; ++j) counts[j] += other.counts[j];
    total += other.total;
}

double UsageHistogram::proportion(std::size_t j) const {
    return total == 0 ? 0.0 : static_cast<double>(counts[j]) / static_cast<double>(total);
}

double UsageHistogram::std_error(std::size_t j) const {
    if (total == 0) return 0.0;
    const double p = proportion(j);
    return std::sqrt(p * (1.0 - p) / static_cast<double>(total));
}

std::array<double, kCodeSize> UsageHistogram::proportions() const {
    std::array<double, kCodeSize> p{};
    for (std::size_t j = 0; j < kCodeSize; ++j) p[j] = proportion(j);
    return p;
}

// ---------------------------------------------------------------------------
// Quantization
// ---------------------------------------------------------------------------

Code16 storage_code(const Code16& code) {
    Code16 out = code;
    for (double& v : out.values) v = static_cast<double>(static_cast<float>(v));
    out.validate();
    return out;
}

std::uint8_t nearest_index(std::span<const double, kCodeSize> code, double x) {
    const auto it = std::upper_bound(code.begin(), code.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - code.begin());
    if (j == 0) return 0;
    if (j == kCodeSize) return kCodeSize - 1;
    // code[j-1] <= x < code[j]; ties go to the lower index.
    return static_cast<std::uint8_t>((x - code[j - 1] <= code[j] - x) ? j - 1 : j);
}

float quantize_block(std::span<const float> values, std::size_t stride,
                     std::span<const double, kCodeSize> code, std::span<std::uint8_t> indices) {
    const std::size_t n = indices.size();
    float absmax = 0.0f;
    for (std::size_t k = 0; k < n; ++k) absmax = std::max(absmax, std::abs(values[k * stride]));
    if (absmax == 0.0f) {
        std::fill(indices.begin(), indices.end(), nearest_index(code, 0.0));
        return 0.0f;
    }
    for (std::size_t k = 0; k < n; ++k) {
        const float scaled = values[k * stride] / absmax;
        indices[k] = nearest_index(code, static_cast<double>(scaled));
    }
    return absmax;
}

namespace {

constexpr std::size_t kBlocksPerChunk = 256;

std::string position_string(std::span<const std::size_t> dims, std::size_t flat) {
    std::vector<std::size_t> idx(dims.size());
    for (std::size_t i = dims.size(); i-- > 0;) {
        idx[i] = flat % dims[i];
        flat /= dims[i];
    }
    std::string s = "[";
    for (std::size_t i = 0; i < idx.size(); ++i) s += (i ? ", " : "") + std::to_string(idx[i]);
    return s + "]";
}

}  // namespace

QuantizedTensor quantize(const Tensor& tensor, const Code16& code, std::size_t block_size,
                         std::size_t axis, int threads) {
    if (element_count(tensor.dims) != tensor.data.size()) {
        throw DomainError("tensor data does not match its dims");
    }
    for (std::size_t e = 0; e < tensor.data.size(); ++e) {
        if (!std::isfinite(tensor.data[e])) {
            throw DataError("non-finite value at position " + position_string(tensor.dims, e) +
                            " (flat index " + std::to_string(e) + ")");
        }
    }
    QuantizedTensor qt;
    qt.dims = tensor.dims;
    qt.block_axis = axis;
    qt.block_size = block_size;
    qt.code = storage_code(code);
    const auto layout = qt.layout();
    const std::size_t nblocks = layout.num_blocks();
    qt.scales.assign(nblocks, 0.0f);
    qt.packed.assign(layout.total_packed_bytes(), 0);

    const std::span<const double, kCodeSize> values(qt.code.values);
    const std::size_t nchunks = (nblocks + kBlocksPerChunk - 1) / kBlocksPerChunk;
    parallel_for_chunks(nchunks, threads, [&](std::size_t chunk) {
        std::vector<std::uint8_t> idx(block_size);
        const std::size_t end = std::min(nblocks, (chunk + 1) * kBlocksPerChunk);
        for (std::size_t b = chunk * kBlocksPerChunk; b < end; ++b) {
            const std::size_t len = layout.block_length(b);
            const std::size_t first = layout.element_offset(b, 0);
            const std::span<const float> src(tensor.data.data() + first,
                                             (len - 1) * layout.element_stride() + 1);
            qt.scales[b] = quantize_block(src, layout.element_stride(), values,
                                          std::span(idx.data(), len));
            std::uint8_t* out = qt.packed.data() + layout.packed_offset(b);
            for (std::size_t k = 0; k < len; ++k) {
                out[k / 2] |= (k % 2 == 0) ? idx[k] : static_cast<std::uint8_t>(idx[k] << 4);
            }
        }
    });
    return qt;
}

Tensor dequantize(const QuantizedTensor& qt, int threads) {
    qt.validate();
    Tensor out(qt.dims);
    const auto layout = qt.layout();
    const std::size_t nblocks = layout.num_blocks();
    const std::size_t nchunks = (nblocks + kBlocksPerChunk - 1) / kBlocksPerChunk;
    parallel_for_chunks(nchunks, threads, [&](std::size_t chunk) {
        const std::size_t end = std::min(nblocks, (chunk + 1) * kBlocksPerChunk);
        for (std::size_t b = chunk * kBlocksPerChunk; b < end; ++b) {
            const double scale = qt.scales[b];
            const std::uint8_t* in = qt.packed.data() + layout.packed_offset(b);
            const std::size_t len = layout.block_length(b);
            for (std::size_t k = 0; k < len; ++k) {
                const std::uint8_t c = (k % 2 == 0) ? (in[k / 2] & 0x0F) : (in[k / 2] >> 4);
                out.data[layout.element_offset(b, k)] = static_cast<float>(qt.code.values[c] * scale);
            }
        }
    });
    return out;
}

UsageHistogram usage_histogram(const QuantizedTensor& qt) {
    qt.validate();
    UsageHistogram h;
    const auto layout = qt.layout();
    for (std::size_t b = 0; b < layout.num_blocks(); ++b) {
        const std::uint8_t* in = qt.packed.data() + layout.packed_offset(b);
        const std::size_t len = layout.block_length(b);
        for (std::size_t k = 0; k < len; ++k) h.add((k % 2 == 0) ? (in[k / 2] & 0x0F) : (in[k / 2] >> 4));
    }
    return h;
}

double reconstruction_error(const Tensor& original, const Tensor& reconstructed, ErrorMetric metric) {
    if (original.dims != reconstructed.dims || original.data.size() != reconstructed.data.size()) {
        throw DomainError("reconstruction_error: tensor dims do not match");
    }
    const std::size_t n = original.data.size();
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = std::abs(static_cast<double>(original.data[i]) - reconstructed.data[i]);
        switch (metric) {
            case ErrorMetric::mean_abs: acc += d; break;
            case ErrorMetric::mean_sq: acc += d * d; break;
            case ErrorMetric::max_abs: acc = std::max(acc, d); break;
        }
    }
    return metric == ErrorMetric::max_abs ? acc : acc / static_cast<double>(n);
}

}  // namespace quantlab
