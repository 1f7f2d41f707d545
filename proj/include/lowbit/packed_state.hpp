#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lowbit/levels.hpp"
#include "lowbit/quantizer.hpp"

namespace lowbit {

/// Codes packed least-significant bits first: code i occupies bits
/// [i * bits, (i + 1) * bits) of the buffer. Padding bits are zero.
struct PackedCodes {
    int bits = 8;
    std::size_t count = 0;
    std::vector<std::uint8_t> buffer;

    bool operator==(const PackedCodes&) const = default;
};

/// Width a scheme's codes occupy in storage: 2, 4 or 8 bits. Three-bit codes
/// are stored at four bits; 5 to 7 bits at eight.
int storage_bits(int bits);

PackedCodes pack(std::span<const Code> codes, int bits);
std::vector<Code> unpack(const PackedCodes& packed);

/// Persistent form of one quantized state tensor.
struct BlockQuantizedTensor {
    SchemeKind scheme = SchemeKind::LinearUnsigned;
    int bits = 8;
    std::size_t block_size = kDefaultBlockSize;
    std::size_t length = 0;
    std::vector<float> scales;
    std::vector<float> bases; ///< empty unless the scheme is LogUnsigned
    PackedCodes packed;

    std::size_t block_count() const;
    bool operator==(const BlockQuantizedTensor&) const = default;
};

/// Throws std::invalid_argument if any structural invariant fails.
void validate(const BlockQuantizedTensor& state);

BlockQuantizedTensor make_tensor(const QuantizedBlocks& blocks, std::size_t length, const BlockQuantization& config);
QuantizedBlocks unpack_tensor(const BlockQuantizedTensor& state);

/// An all-zero tensor of the given shape (zero scales, all codes 0).
BlockQuantizedTensor zero_tensor(std::size_t length, const BlockQuantization& config);

class FormatError : public std::runtime_error {
public:
    enum class Kind { BadMagic, UnsupportedVersion, Truncated, Invalid };

    FormatError(Kind kind, const std::string& what) : std::runtime_error(what), m_kind(kind) {}
    Kind kind() const noexcept { return m_kind; }

private:
    Kind m_kind;
};

inline constexpr std::uint32_t kFormatVersion = 1;
/// Fixed container header: magic (4), version u16, scheme u8, bits u8,
/// storage bits u8, flags u8, reserved u16, block size u32, length u64.
inline constexpr std::size_t kHeaderBytes = 24;

std::vector<std::uint8_t> serialize(const BlockQuantizedTensor& state);
BlockQuantizedTensor deserialize(std::span<const std::uint8_t> bytes);

/// Size of the serialized container: packed codes, 4 bytes per scale and per
/// base, plus the header.
std::size_t footprint_bytes(const BlockQuantizedTensor& state);

} // namespace lowbit
