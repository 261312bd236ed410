#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "semcom/image.hpp"
#include "semcom/mat.hpp"
#include "semcom/transceivers.hpp"

namespace semcom::baseline {

enum class SourceKind { TextUtf8, ImageRaw };

struct BitStream {
    std::vector<uint8_t> bits;  // values 0/1
    SourceKind origin = SourceKind::TextUtf8;
    size_t payload_bits = 0;  // length before any padding
};

// Token ids rendered as a space-separated decimal string, UTF-8 encoded,
// with a 32-bit byte-count header. Decode returns nullopt on any malformed
// header or byte sequence instead of crashing.
BitStream source_encode_text(const std::vector<int>& token_ids);
std::optional<std::vector<int>> source_decode_text(const BitStream& b);

// Raw 8-bit pixel stream with a small dimensions header. Images quantize to
// 8 bits on encode; an already-quantized image round-trips exactly.
BitStream source_encode_image(const Image& img);
std::optional<Image> source_decode_image(const BitStream& b);
Image quantize_image(const Image& img);

// Rate-1/3 convolutional code, constraint length 7, generator polynomials
// 133/171/165 (octal), zero-tail terminated. Coded length is exactly
// 3 * (payload + 6) bits.
struct CodedFrame {
    std::vector<uint8_t> bits;
    size_t payload_bits = 0;
    static constexpr int kConstraintLen = 7;
    static constexpr double kRate = 1.0 / 3.0;
};

CodedFrame channel_encode(const BitStream& b);
// Hard-decision Viterbi maximum-likelihood path over the terminated trellis.
// Throws on frame length mismatch.
std::vector<uint8_t> channel_decode(const std::vector<uint8_t>& coded_bits,
                                    size_t payload_bits);

enum class Modulation { BPSK, QPSK, QAM8 };

const char* to_string(Modulation m);
Modulation modulation_from_string(const std::string& s);
int bits_per_symbol(Modulation m);

// Gray-mapped unit-average-power constellations. Bit counts that do not fill
// the last symbol are zero padded; the pad is recorded in the result.
struct ModulatedSignal {
    std::vector<cplx> symbols;
    size_t bit_count = 0;  // before padding
};
ModulatedSignal modulate(const std::vector<uint8_t>& bits, Modulation m);
// Hard-decision demodulation to the nearest constellation point; returns
// exactly n_bits bits.
std::vector<uint8_t> demodulate(const std::vector<cplx>& symbols, Modulation m, size_t n_bits);

// Full traditional pipeline for K users sharing one MIMO block: source code,
// channel code, modulate, transmit with L-MMSE detection, then invert each
// stage. Users may run different modulations (e.g. 8QAM images next to BPSK
// text). decode_ok = false marks a decode failure.
struct BaselinePayload {
    SourceKind kind = SourceKind::TextUtf8;
    std::vector<int> text;  // TextUtf8
    Image image;            // ImageRaw
    Modulation mod = Modulation::QPSK;
};

struct BaselineUserResult {
    bool decode_ok = false;
    std::vector<int> text;
    Image image;
    int symbols = 0;  // complex symbols this user transmitted
};

std::vector<BaselineUserResult> baseline_end_to_end(const std::vector<BaselinePayload>& users,
                                                    const model::ChannelParams& ch,
                                                    double snr_db, uint64_t seed);

// Analytic symbol count for one payload under its modulation.
int baseline_symbol_count(const BaselinePayload& payload);

}  // namespace semcom::baseline
