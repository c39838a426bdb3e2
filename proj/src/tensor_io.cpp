#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "quantlab/blockquant.hpp"

namespace quantlab {

namespace {

constexpr std::uint8_t kDtypeF32 = 0;
constexpr std::uint8_t kFqzVersion = 1;

class Writer {
public:
    void bytes(const char* s, std::size_t n) { buf_.insert(buf_.end(), s, s + n); }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    std::vector<std::uint8_t> take() { return std::move(buf_); }
    std::vector<std::uint8_t>& raw() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    Reader(std::span<const std::uint8_t> data, const char* what) : data_(data), what_(what) {}

    void need(std::size_t n, const char* field) const {
        if (data_.size() - pos_ < n) {
            throw FormatError(std::string(what_) + " truncated reading " + field + ": expected " +
                              std::to_string(pos_ + n) + " bytes, file has " +
                              std::to_string(data_.size()));
        }
    }
    std::uint8_t u8(const char* field) {
        need(1, field);
        return data_[pos_++];
    }
    std::uint32_t u32(const char* field) {
        need(4, field);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32(const char* field) { return std::bit_cast<float>(u32(field)); }
    std::span<const std::uint8_t> take(std::size_t n, const char* field) {
        need(n, field);
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }
    void expect_end() const {
        if (remaining() != 0) {
            throw FormatError(std::string(what_) + " has " + std::to_string(remaining()) +
                              " trailing bytes after the payload (expected length " +
                              std::to_string(pos_) + ", actual " + std::to_string(data_.size()) + ")");
        }
    }

private:
    std::span<const std::uint8_t> data_;
    const char* what_;
    std::size_t pos_ = 0;
};

void check_magic(Reader& r, const char* magic, const char* what) {
    auto m = r.take(4, "magic");
    if (std::memcmp(m.data(), magic, 4) != 0) {
        throw FormatError(std::string("bad magic: not an ") + what + " file");
    }
}

std::vector<std::size_t> read_dims(Reader& r, const char* what) {
    const std::uint8_t ndim = r.u8("ndim");
    if (ndim == 0) throw FormatError(std::string(what) + ": ndim must be >= 1");
    std::vector<std::size_t> dims(ndim);
    for (auto& d : dims) d = r.u32("extents");
    try {
        element_count(dims);
    } catch (const DomainError&) {
        throw FormatError(std::string(what) + ": dimension product overflows");
    }
    return dims;
}

void write_dims(Writer& w, const std::vector<std::size_t>& dims, const char* what) {
    if (dims.empty() || dims.size() > 255) {
        throw FormatError(std::string(what) + ": ndim must be in [1, 255]");
    }
    w.u8(static_cast<std::uint8_t>(dims.size()));
    for (std::size_t d : dims) {
        if (d > std::numeric_limits<std::uint32_t>::max()) {
            throw FormatError(std::string(what) + ": extent " + std::to_string(d) + " exceeds u32");
        }
        w.u32(static_cast<std::uint32_t>(d));
    }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("failed writing " + path.string());
}

}  // namespace

std::vector<std::uint8_t> tensor_to_bytes(const Tensor& tensor) {
    if (element_count(tensor.dims) != tensor.data.size()) {
        throw DomainError("tensor data does not match its dims");
    }
    Writer w;
    w.bytes("FQT1", 4);
    w.u8(kDtypeF32);
    write_dims(w, tensor.dims, "FQT1");
    w.raw().reserve(w.raw().size() + 4 * tensor.data.size());
    for (float v : tensor.data) w.f32(v);
    return w.take();
}

Tensor tensor_from_bytes(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "FQT1 file");
    check_magic(r, "FQT1", "FQT1");
    const std::uint8_t dtype = r.u8("dtype");
    if (dtype != kDtypeF32) {
        throw FormatError("FQT1: unsupported dtype tag " + std::to_string(dtype) + " (only 0 = f32)");
    }
    Tensor t;
    t.dims = read_dims(r, "FQT1");
    const std::size_t n = element_count(t.dims);
    if (n > r.remaining() / 4) {
        throw FormatError("FQT1 file truncated: expected " + std::to_string(r.position() + 4 * n) +
                          " bytes, file has " + std::to_string(bytes.size()));
    }
    t.data.resize(n);
    for (auto& v : t.data) v = r.f32("payload");
    r.expect_end();
    return t;
}

std::vector<std::uint8_t> qtensor_to_bytes(const QuantizedTensor& qt) {
    qt.validate();
    if (qt.block_size > std::numeric_limits<std::uint32_t>::max()) throw FormatError("FQZ1: block size exceeds u32");
    if (qt.block_axis > 255) throw FormatError("FQZ1: block axis exceeds u8");
    Writer w;
    w.bytes("FQZ1", 4);
    w.u8(kFqzVersion);
    write_dims(w, qt.dims, "FQZ1");
    w.u32(static_cast<std::uint32_t>(qt.block_size));
    w.u8(static_cast<std::uint8_t>(qt.block_axis));
    w.u8(static_cast<std::uint8_t>(kCodeSize));
    for (double v : qt.code.values) w.f32(static_cast<float>(v));
    const auto layout = qt.layout();
    for (std::size_t b = 0; b < layout.num_blocks(); ++b) {
        w.f32(qt.scales[b]);
        const auto off = layout.packed_offset(b);
        const auto n = layout.packed_bytes(b);
        w.raw().insert(w.raw().end(), qt.packed.begin() + off, qt.packed.begin() + off + n);
    }
    return w.take();
}

QuantizedTensor qtensor_from_bytes(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "FQZ1 file");
    check_magic(r, "FQZ1", "FQZ1");
    const std::uint8_t version = r.u8("version");
    if (version != kFqzVersion) throw FormatError("FQZ1: unsupported version " + std::to_string(version));
    QuantizedTensor qt;
    qt.dims = read_dims(r, "FQZ1");
    qt.block_size = r.u32("block_size");
    qt.block_axis = r.u8("block_axis");
    if (qt.block_size == 0) throw FormatError("FQZ1: block size must be >= 1");
    if (qt.block_axis >= qt.dims.size()) throw FormatError("FQZ1: block axis out of range");
    const std::uint8_t code_len = r.u8("code length");
    if (code_len != kCodeSize) {
        throw FormatError("FQZ1: code length must be 16, got " + std::to_string(code_len));
    }
    qt.code.kind = CodeKind::custom;
    qt.code.block_size = static_cast<int>(std::min<std::size_t>(qt.block_size, std::numeric_limits<int>::max()));
    for (auto& v : qt.code.values) v = r.f32("code values");
    try {
        qt.code.validate();
    } catch (const DomainError& e) {
        throw FormatError(std::string("FQZ1 code: ") + e.what());
    }
    const auto layout = qt.layout();
    const std::size_t nblocks = layout.num_blocks();
    if (nblocks > r.remaining() / 4) {
        throw FormatError("FQZ1 file truncated: " + std::to_string(nblocks) +
                          " blocks need at least " + std::to_string(nblocks) + " x 5 bytes, file has " +
                          std::to_string(bytes.size()));
    }
    const std::size_t expected = r.position() + 4 * nblocks + layout.total_packed_bytes();
    if (bytes.size() < expected) {
        throw FormatError("FQZ1 file truncated: expected " + std::to_string(expected) +
                          " bytes, file has " + std::to_string(bytes.size()));
    }
    qt.scales.resize(nblocks);
    qt.packed.reserve(layout.total_packed_bytes());
    for (std::size_t b = 0; b < nblocks; ++b) {
        qt.scales[b] = r.f32("scale");
        const auto s = r.take(layout.packed_bytes(b), "packed indices");
        qt.packed.insert(qt.packed.end(), s.begin(), s.end());
    }
    r.expect_end();
    try {
        qt.validate();
    } catch (const DataError& e) {
        throw FormatError(std::string("FQZ1 payload: ") + e.what());
    }
    return qt;
}

void tensor_write(const Tensor& tensor, const std::filesystem::path& path) {
    write_file(tensor_to_bytes(tensor), path);
}

Tensor tensor_read(const std::filesystem::path& path) { return tensor_from_bytes(read_file(path)); }

void qtensor_write(const QuantizedTensor& qt, const std::filesystem::path& path) {
    write_file(qtensor_to_bytes(qt), path);
}

QuantizedTensor qtensor_read(const std::filesystem::path& path) {
    return qtensor_from_bytes(read_file(path));
}

}  // namespace quantlab
