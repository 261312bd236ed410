#include "semcom/baselines.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace semcom::baseline {

namespace {

void append_u32(std::vector<uint8_t>& bytes, uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

std::optional<uint32_t> read_u32(const std::vector<uint8_t>& bytes, size_t pos) {
    if (pos + 4 > bytes.size()) return std::nullopt;
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos + i]) << (8 * i);
    return v;
}

std::vector<uint8_t> bytes_to_bits(const std::vector<uint8_t>& bytes) {
    std::vector<uint8_t> bits;
    bits.reserve(bytes.size() * 8);
    for (uint8_t b : bytes)
        for (int i = 7; i >= 0; --i) bits.push_back((b >> i) & 1);
    return bits;
}

std::vector<uint8_t> bits_to_bytes(const std::vector<uint8_t>& bits) {
    std::vector<uint8_t> bytes(bits.size() / 8, 0);
    for (size_t i = 0; i < bytes.size(); ++i)
        for (int j = 0; j < 8; ++j) bytes[i] = static_cast<uint8_t>((bytes[i] << 1) | bits[i * 8 + j]);
    return bytes;
}

}  // namespace

BitStream source_encode_text(const std::vector<int>& token_ids) {
    std::string rendered;
    for (size_t i = 0; i < token_ids.size(); ++i) {
        if (i) rendered += ' ';
        rendered += std::to_string(token_ids[i]);
    }
    std::vector<uint8_t> bytes;
    append_u32(bytes, static_cast<uint32_t>(rendered.size()));
    bytes.insert(bytes.end(), rendered.begin(), rendered.end());
    BitStream b;
    b.origin = SourceKind::TextUtf8;
    b.bits = bytes_to_bits(bytes);
    b.payload_bits = b.bits.size();
    return b;
}

std::optional<std::vector<int>> source_decode_text(const BitStream& b) {
    if (b.bits.size() % 8 != 0) return std::nullopt;
    const auto bytes = bits_to_bytes(b.bits);
    const auto len = read_u32(bytes, 0);
    if (!len || *len != bytes.size() - 4) return std::nullopt;
    std::vector<int> ids;
    std::string tok;
    auto flush = [&]() -> bool {
        if (tok.empty()) return true;
        for (char c : tok)
            if (c < '0' || c > '9') return false;
        if (tok.size() > 9) return false;
        ids.push_back(std::stoi(tok));
        tok.clear();
        return true;
    };
    for (size_t i = 4; i < bytes.size(); ++i) {
        const char c = static_cast<char>(bytes[i]);
        if (c == ' ') {
            if (tok.empty()) return std::nullopt;
            if (!flush()) return std::nullopt;
        } else {
            tok += c;
        }
    }
    if (!flush()) return std::nullopt;
    return ids;
}

Image quantize_image(const Image& img) {
    Image q = img;
    for (double& v : q.px)
        v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
    return q;
}

BitStream source_encode_image(const Image& img) {
    if (img.h > 0xFFFF || img.w > 0xFFFF || img.c > 0xFF)
        throw std::invalid_argument("source_encode_image: dimensions too large");
    std::vector<uint8_t> bytes;
    bytes.push_back(static_cast<uint8_t>(img.h & 0xFF));
    bytes.push_back(static_cast<uint8_t>(img.h >> 8));
    bytes.push_back(static_cast<uint8_t>(img.w & 0xFF));
    bytes.push_back(static_cast<uint8_t>(img.w >> 8));
    bytes.push_back(static_cast<uint8_t>(img.c));
    for (double v : img.px)
        bytes.push_back(static_cast<uint8_t>(std::round(std::clamp(v, 0.0, 1.0) * 255.0)));
    BitStream b;
    b.origin = SourceKind::ImageRaw;
    b.bits = bytes_to_bits(bytes);
    b.payload_bits = b.bits.size();
    return b;
}

std::optional<Image> source_decode_image(const BitStream& b) {
    if (b.bits.size() % 8 != 0) return std::nullopt;
    const auto bytes = bits_to_bytes(b.bits);
    if (bytes.size() < 5) return std::nullopt;
    const int h = bytes[0] | (bytes[1] << 8);
    const int w = bytes[2] | (bytes[3] << 8);
    const int c = bytes[4];
    if (h <= 0 || w <= 0 || c <= 0) return std::nullopt;
    const size_t expected = static_cast<size_t>(h) * w * c;
    if (bytes.size() != 5 + expected) return std::nullopt;
    Image img(h, w, c);
    for (size_t i = 0; i < expected; ++i) img.px[i] = bytes[5 + i] / 255.0;
    return img;
}

namespace {
// Generator polynomials 133/171/165 octal over a 7-bit register whose MSB is
// the newest input bit.
constexpr std::array<uint32_t, 3> kPolys = {0133, 0171, 0165};
constexpr int kStates = 64;

inline void encode_step(uint32_t reg, uint8_t* out3) {
    for (int p = 0; p < 3; ++p) out3[p] = static_cast<uint8_t>(std::popcount(reg & kPolys[p]) & 1);
}
}  // namespace

CodedFrame channel_encode(const BitStream& b) {
    if (b.bits.empty()) throw std::invalid_argument("channel_encode: empty bit stream");
    CodedFrame frame;
    frame.payload_bits = b.bits.size();
    frame.bits.reserve(3 * (b.bits.size() + 6));
    uint32_t state = 0;  // previous 6 inputs, newest at bit 5
    uint8_t out3[3];
    auto push = [&](uint8_t bit) {
        const uint32_t reg = (static_cast<uint32_t>(bit) << 6) | state;
        encode_step(reg, out3);
        frame.bits.insert(frame.bits.end(), out3, out3 + 3);
        state = reg >> 1;
    };
    for (uint8_t bit : b.bits) push(bit);
    for (int i = 0; i < 6; ++i) push(0);  // zero tail drives the trellis home
    return frame;
}

std::vector<uint8_t> channel_decode(const std::vector<uint8_t>& coded_bits,
                                    size_t payload_bits) {
    const size_t steps = payload_bits + 6;
    if (coded_bits.size() != 3 * steps)
        throw std::invalid_argument("channel_decode: frame length mismatch");

    // Precomputed branch outputs: state x input -> 3-bit word.
    static const auto table = [] {
        std::array<std::array<uint8_t, 2>, kStates> t{};
        for (uint32_t s = 0; s < kStates; ++s)
            for (uint32_t in = 0; in < 2; ++in) {
                uint8_t o[3];
                encode_step((in << 6) | s, o);
                t[s][in] = static_cast<uint8_t>((o[0] << 2) | (o[1] << 1) | o[2]);
            }
        return t;
    }();

    constexpr int kInf = 1 << 28;
    std::vector<int> metric(kStates, kInf), next_metric(kStates, kInf);
    metric[0] = 0;  // encoder starts in the all-zero state
    std::vector<uint8_t> decisions(steps * kStates);

    for (size_t t = 0; t < steps; ++t) {
        const uint8_t rx = static_cast<uint8_t>((coded_bits[3 * t] << 2) |
                                                (coded_bits[3 * t + 1] << 1) |
                                                coded_bits[3 * t + 2]);
        std::fill(next_metric.begin(), next_metric.end(), kInf);
        uint8_t* dec = &decisions[t * kStates];
        for (uint32_t s = 0; s < kStates; ++s) {
            if (metric[s] >= kInf) continue;
            for (uint32_t in = 0; in < 2; ++in) {
                const uint32_t ns = ((in << 6) | s) >> 1;
                const int m = metric[s] + std::popcount(static_cast<uint32_t>(table[s][in] ^ rx));
                if (m < next_metric[ns]) {
                    next_metric[ns] = m;
                    // Surviving predecessor: its low state bit plus the input.
                    dec[ns] = static_cast<uint8_t>((s & 1) | (in << 1));
                }
            }
        }
        metric.swap(next_metric);
    }

    // Zero-tail termination: trace back from state 0.
    std::vector<uint8_t> path(steps);
    uint32_t state = 0;
    for (size_t t = steps; t-- > 0;) {
        const uint8_t d = decisions[t * kStates + state];
        path[t] = static_cast<uint8_t>(d >> 1);
        state = ((state << 1) | (d & 1)) & 0x3F;
    }
    return std::vector<uint8_t>(path.begin(), path.begin() + payload_bits);
}

const char* to_string(Modulation m) {
    switch (m) {
        case Modulation::BPSK: return "bpsk";
        case Modulation::QPSK: return "qpsk";
        case Modulation::QAM8: return "8qam";
    }
    return "?";
}

Modulation modulation_from_string(const std::string& s) {
    if (s == "bpsk") return Modulation::BPSK;
    if (s == "qpsk") return Modulation::QPSK;
    if (s == "8qam") return Modulation::QAM8;
    throw std::invalid_argument("unknown modulation: " + s);
}

int bits_per_symbol(Modulation m) {
    switch (m) {
        case Modulation::BPSK: return 1;
        case Modulation::QPSK: return 2;
        case Modulation::QAM8: return 3;
    }
    return 0;
}

namespace {
// 8QAM: rectangular 4x2 grid, Gray coded per axis, scaled to unit average
// power (E[I^2] = 5a^2, E[Q^2] = a^2, a = 1/sqrt(6)).
const double kQam8Amp = 1.0 / std::sqrt(6.0);
const std::array<double, 4> kGray4 = {-3.0, -1.0, +3.0, +1.0};  // 00,01,10,11

cplx map_symbol(Modulation m, const uint8_t* bits) {
    switch (m) {
        case Modulation::BPSK:
            return cplx(bits[0] ? -1.0 : 1.0, 0.0);
        case Modulation::QPSK: {
            const double inv = 1.0 / std::sqrt(2.0);
            return cplx(bits[0] ? -inv : inv, bits[1] ? -inv : inv);
        }
        case Modulation::QAM8: {
            const double i_level = kGray4[(bits[0] << 1) | bits[1]] * kQam8Amp;
            const double q_level = (bits[2] ? -1.0 : 1.0) * kQam8Amp;
            return cplx(i_level, q_level);
        }
    }
    return cplx();
}
}  // namespace

ModulatedSignal modulate(const std::vector<uint8_t>& bits, Modulation m) {
    const int bps = bits_per_symbol(m);
    ModulatedSignal out;
    out.bit_count = bits.size();
    std::vector<uint8_t> padded = bits;
    while (padded.size() % bps != 0) padded.push_back(0);
    out.symbols.reserve(padded.size() / bps);
    for (size_t i = 0; i < padded.size(); i += bps) out.symbols.push_back(map_symbol(m, &padded[i]));
    return out;
}

std::vector<uint8_t> demodulate(const std::vector<cplx>& symbols, Modulation m, size_t n_bits) {
    const int bps = bits_per_symbol(m);
    const int points = 1 << bps;
    std::vector<uint8_t> bits;
    bits.reserve(symbols.size() * bps);
    uint8_t cand[3];
    for (const cplx& s : symbols) {
        int best = 0;
        double best_d = 1e300;
        for (int p = 0; p < points; ++p) {
            for (int b = 0; b < bps; ++b) cand[b] = static_cast<uint8_t>((p >> (bps - 1 - b)) & 1);
            const double d = std::norm(s - map_symbol(m, cand));
            if (d < best_d) {
                best_d = d;
                best = p;
            }
        }
        for (int b = 0; b < bps; ++b) bits.push_back(static_cast<uint8_t>((best >> (bps - 1 - b)) & 1));
    }
    if (n_bits > bits.size()) throw std::invalid_argument("demodulate: fewer symbols than bits");
    bits.resize(n_bits);
    return bits;
}

int baseline_symbol_count(const BaselinePayload& payload) {
    const BitStream b = payload.kind == SourceKind::TextUtf8 ? source_encode_text(payload.text)
                                                             : source_encode_image(payload.image);
    const size_t coded = 3 * (b.bits.size() + 6);
    const int bps = bits_per_symbol(payload.mod);
    return static_cast<int>((coded + bps - 1) / bps);
}

std::vector<BaselineUserResult> baseline_end_to_end(const std::vector<BaselinePayload>& users,
                                                    const model::ChannelParams& ch,
                                                    double snr_db, uint64_t seed) {
    if (static_cast<int>(users.size()) != ch.users)
        throw std::invalid_argument("baseline_end_to_end: payload count != channel users");

    std::vector<BitStream> sources;
    std::vector<CodedFrame> frames;
    std::vector<std::vector<cplx>> rows;
    for (const auto& u : users) {
        BitStream b = u.kind == SourceKind::TextUtf8 ? source_encode_text(u.text)
                                                     : source_encode_image(u.image);
        CodedFrame f = channel_encode(b);
        auto sig = modulate(f.bits, u.mod);
        sources.push_back(std::move(b));
        frames.push_back(std::move(f));
        rows.push_back(std::move(sig.symbols));
    }

    auto block = chan::SymbolBlock::from_rows(rows);
    Rng rng(seed);
    auto h = chan::sample_channel(ch.model, ch.m_antennas, ch.users, ch.rician_r,
                                  rng.next_u64());
    auto csi = chan::estimate_csi(h, ch.csi_error_var, rng.next_u64());
    auto noise = chan::calibrate_noise(snr_db, h, block);
    auto y = chan::transmit(block, h, noise, rng.next_u64());
    auto detected = chan::lmmse_detect(y, csi, noise.sigma_n_sq);

    std::vector<BaselineUserResult> results;
    for (size_t k = 0; k < users.size(); ++k) {
        BaselineUserResult res;
        res.symbols = static_cast<int>(rows[k].size());
        std::vector<cplx> user_syms(rows[k].size());
        for (size_t j = 0; j < user_syms.size(); ++j)
            user_syms[j] = detected.symbols.at(static_cast<int>(k), static_cast<int>(j));
        auto hard = demodulate(user_syms, users[k].mod, frames[k].bits.size());
        auto decoded = channel_decode(hard, frames[k].payload_bits);
        BitStream rx;
        rx.origin = sources[k].origin;
        rx.bits = std::move(decoded);
        rx.payload_bits = rx.bits.size();
        if (rx.origin == SourceKind::TextUtf8) {
            auto text = source_decode_text(rx);
            res.decode_ok = text.has_value();
            if (text) res.text = std::move(*text);
        } else {
            auto img = source_decode_image(rx);
            res.decode_ok = img.has_value();
            if (img) res.image = std::move(*img);
        }
        results.push_back(std::move(res));
    }
    return results;
}

}  // namespace semcom::baseline
