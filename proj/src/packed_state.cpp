#include "lowbit/packed_state.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>

namespace lowbit {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'L', 'B', 'Q', 'T'};
constexpr std::uint8_t kFlagHasBases = 0x1;

std::size_t packed_size(std::size_t count, int bits) {
    return (count * static_cast<std::size_t>(bits) + 7) / 8;
}

class Writer {
public:
    explicit Writer(std::vector<std::uint8_t>& out) : m_out(out) {}

    template <typename T>
    void put(T value) {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            m_out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
        }
    }

    void put_float(float value) { put(std::bit_cast<std::uint32_t>(value)); }

    void put_bytes(std::span<const std::uint8_t> bytes) { m_out.insert(m_out.end(), bytes.begin(), bytes.end()); }

private:
    std::vector<std::uint8_t>& m_out;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : m_in(in) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        std::uint64_t value = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            value |= static_cast<std::uint64_t>(m_in[m_pos + i]) << (8 * i);
        }
        m_pos += sizeof(T);
        return static_cast<T>(value);
    }

    float get_float() { return std::bit_cast<float>(get<std::uint32_t>()); }

    std::span<const std::uint8_t> get_bytes(std::size_t n) {
        need(n);
        auto out = m_in.subspan(m_pos, n);
        m_pos += n;
        return out;
    }

    std::size_t remaining() const { return m_in.size() - m_pos; }

private:
    void need(std::size_t n) const {
        if (m_in.size() - m_pos < n) {
            throw FormatError(FormatError::Kind::Truncated, "state stream truncated");
        }
    }

    std::span<const std::uint8_t> m_in;
    std::size_t m_pos = 0;
};

} // namespace

int storage_bits(int bits) {
    if (bits < kMinBits || bits > kMaxBits) {
        throw std::invalid_argument("bit width must be in [2, 8]");
    }
    if (bits <= 2) {
        return 2;
    }
    return bits <= 4 ? 4 : 8;
}

PackedCodes pack(std::span<const Code> codes, int bits) {
    if (bits != 2 && bits != 4 && bits != 8) {
        throw std::invalid_argument("packing supports 2, 4 and 8 bit codes");
    }
    PackedCodes packed;
    packed.bits = bits;
    packed.count = codes.size();
    packed.buffer.assign(packed_size(codes.size(), bits), 0);
    const Code limit = Code{1} << bits;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i] >= limit) {
            throw std::invalid_argument("code " + std::to_string(codes[i]) + " does not fit in " +
                                        std::to_string(bits) + " bits");
        }
        const std::size_t bit = i * static_cast<std::size_t>(bits);
        packed.buffer[bit / 8] |= static_cast<std::uint8_t>(codes[i] << (bit % 8));
    }
    return packed;
}

std::vector<Code> unpack(const PackedCodes& packed) {
    if (packed.bits != 2 && packed.bits != 4 && packed.bits != 8) {
        throw std::invalid_argument("packing supports 2, 4 and 8 bit codes");
    }
    if (packed.buffer.size() != packed_size(packed.count, packed.bits)) {
        throw std::invalid_argument("packed buffer length does not match the code count");
    }
    std::vector<Code> codes(packed.count);
    const unsigned mask = (1U << packed.bits) - 1U;
    for (std::size_t i = 0; i < packed.count; ++i) {
        const std::size_t bit = i * static_cast<std::size_t>(packed.bits);
        codes[i] = (packed.buffer[bit / 8] >> (bit % 8)) & mask;
    }
    return codes;
}

std::size_t BlockQuantizedTensor::block_count() const {
    return block_size == 0 ? 0 : (length + block_size - 1) / block_size;
}

void validate(const BlockQuantizedTensor& state) {
    if (state.block_size == 0) {
        throw std::invalid_argument("block size must be at least 1");
    }
    if (state.packed.bits != storage_bits(state.bits)) {
        throw std::invalid_argument("storage width does not match the scheme bit width");
    }
    if (state.packed.count != state.length ||
        state.packed.buffer.size() != packed_size(state.length, state.packed.bits)) {
        throw std::invalid_argument("packed codes do not match the tensor length");
    }
    const std::size_t blocks = state.block_count();
    if (state.scales.size() != blocks) {
        throw std::invalid_argument("one scale per block expected");
    }
    if (std::any_of(state.scales.begin(), state.scales.end(), [](float s) { return !(s >= 0.0F) || std::isinf(s); })) {
        throw std::invalid_argument("scales must be finite and non-negative");
    }
    if (is_log(state.scheme)) {
        if (state.bases.size() != blocks) {
            throw std::invalid_argument("one log base per block expected");
        }
        if (std::any_of(state.bases.begin(), state.bases.end(), [](float b) { return !(b > 0.0F && b < 1.0F); })) {
            throw std::invalid_argument("log bases must lie in (0, 1)");
        }
    } else if (!state.bases.empty()) {
        throw std::invalid_argument("only log tensors carry bases");
    }
    const Code limit = Code{1} << state.bits;
    for (Code code : unpack(state.packed)) {
        if (code >= limit) {
            throw std::invalid_argument("stored code exceeds the scheme's bit width");
        }
    }
}

BlockQuantizedTensor make_tensor(const QuantizedBlocks& blocks, std::size_t length, const BlockQuantization& config) {
    if (blocks.codes.size() != length) {
        throw std::invalid_argument("code count does not match tensor length");
    }
    BlockQuantizedTensor state;
    state.scheme = config.scheme;
    state.bits = config.bits;
    state.block_size = config.block_size;
    state.length = length;
    state.scales = blocks.scales;
    state.bases = blocks.bases;
    state.packed = pack(blocks.codes, storage_bits(config.bits));
    validate(state);
    return state;
}

QuantizedBlocks unpack_tensor(const BlockQuantizedTensor& state) {
    QuantizedBlocks blocks;
    blocks.codes = unpack(state.packed);
    blocks.scales = state.scales;
    blocks.bases = state.bases;
    return blocks;
}

BlockQuantizedTensor zero_tensor(std::size_t length, const BlockQuantization& config) {
    Rng unused;
    const std::vector<double> zeros(length, 0.0);
    return make_tensor(quantize_blocks(zeros, config, 0.0, unused), length, config);
}

std::vector<std::uint8_t> serialize(const BlockQuantizedTensor& state) {
    validate(state);
    std::vector<std::uint8_t> out;
    out.reserve(footprint_bytes(state));
    Writer w(out);
    w.put_bytes(kMagic);
    w.put(static_cast<std::uint16_t>(kFormatVersion));
    w.put(static_cast<std::uint8_t>(state.scheme));
    w.put(static_cast<std::uint8_t>(state.bits));
    w.put(static_cast<std::uint8_t>(state.packed.bits));
    w.put(static_cast<std::uint8_t>(state.bases.empty() ? 0 : kFlagHasBases));
    w.put(std::uint16_t{0});
    w.put(static_cast<std::uint32_t>(state.block_size));
    w.put(static_cast<std::uint64_t>(state.length));
    for (float s : state.scales) {
        w.put_float(s);
    }
    for (float b : state.bases) {
        w.put_float(b);
    }
    w.put_bytes(state.packed.buffer);
    return out;
}

BlockQuantizedTensor deserialize(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    const auto magic = r.get_bytes(kMagic.size());
    if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
        throw FormatError(FormatError::Kind::BadMagic, "not a quantized state container");
    }
    const auto version = r.get<std::uint16_t>();
    if (version != kFormatVersion) {
        throw FormatError(FormatError::Kind::UnsupportedVersion,
                          "unsupported container version " + std::to_string(version));
    }
    const auto scheme = r.get<std::uint8_t>();
    if (scheme > static_cast<std::uint8_t>(SchemeKind::LogUnsigned)) {
        throw FormatError(FormatError::Kind::Invalid, "unknown scheme tag " + std::to_string(scheme));
    }
    BlockQuantizedTensor state;
    state.scheme = static_cast<SchemeKind>(scheme);
    state.bits = r.get<std::uint8_t>();
    state.packed.bits = r.get<std::uint8_t>();
    const auto flags = r.get<std::uint8_t>();
    r.get<std::uint16_t>();
    state.block_size = r.get<std::uint32_t>();
    state.length = static_cast<std::size_t>(r.get<std::uint64_t>());
    state.packed.count = state.length;
    if (state.block_size == 0 || state.bits < kMinBits || state.bits > kMaxBits) {
        throw FormatError(FormatError::Kind::Invalid, "invalid header fields");
    }

    const std::size_t blocks = state.block_count();
    const bool has_bases = (flags & kFlagHasBases) != 0;
    if (state.length / 8 > r.remaining() || blocks * 4 > r.remaining()) {
        throw FormatError(FormatError::Kind::Truncated, "state stream truncated");
    }
    state.scales.reserve(blocks);
    for (std::size_t i = 0; i < blocks; ++i) {
        state.scales.push_back(r.get_float());
    }
    if (has_bases) {
        state.bases.reserve(blocks);
        for (std::size_t i = 0; i < blocks; ++i) {
            state.bases.push_back(r.get_float());
        }
    }
    if (state.packed.bits != 2 && state.packed.bits != 4 && state.packed.bits != 8) {
        throw FormatError(FormatError::Kind::Invalid, "invalid storage width");
    }
    const auto buffer = r.get_bytes(packed_size(state.length, state.packed.bits));
    state.packed.buffer.assign(buffer.begin(), buffer.end());
    if (r.remaining() != 0) {
        throw FormatError(FormatError::Kind::Invalid, "trailing bytes after the packed codes");
    }
    try {
        validate(state);
    } catch (const std::invalid_argument& e) {
        throw FormatError(FormatError::Kind::Invalid, e.what());
    }
    return state;
}

std::size_t footprint_bytes(const BlockQuantizedTensor& state) {
    return state.packed.buffer.size() + 4 * state.scales.size() + 4 * state.bases.size() + kHeaderBytes;
}

} // namespace lowbit
