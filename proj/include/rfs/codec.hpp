#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "rfs/binio.hpp"
#include "rfs/bitstream.hpp"
#include "rfs/face_kb.hpp"

namespace rfs {

// How one chunk is packed under the per-chunk bit budget tau*R: Q bits per
// coefficient, all M dims in the first frame (static dims carry the chunk
// mean), only the M_dyn dynamic dims for the remaining Nf-1 frames.
struct ChunkPlan {
    int N = 0;
    int M = 0;
    int M_dyn = 0;
    std::vector<int> dynamic_dims; // ascending, size M_dyn
    int Q = 0;
    int Nf = 0; // 0 means the budget cannot even carry the first frame
    double budget_bits = 0.0;
};

// The M_dyn dims with the largest within-chunk variance; ties go to the
// lower index. Returned ascending.
inline std::vector<int> classify_features(const ExpressionChunk& chunk, int m_dyn) {
    validate(chunk);
    const int m = chunk.dim();
    if (m_dyn < 0 || m_dyn > m)
        throw ConfigError("M_dyn must be in [0," + fmt_int(m) + "], got " + fmt_int(m_dyn));
    const double n = static_cast<double>(chunk.frame_count());
    std::vector<double> variance(m, 0.0);
    for (int d = 0; d < m; ++d) {
        double mean = 0.0;
        for (const auto& f : chunk.frames) mean += f[d];
        mean /= n;
        double acc = 0.0;
        for (const auto& f : chunk.frames) acc += (f[d] - mean) * (f[d] - mean);
        variance[d] = acc / n;
    }
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (variance[a] != variance[b]) return variance[a] > variance[b];
        return a < b;
    });
    order.resize(m_dyn);
    std::sort(order.begin(), order.end());
    return order;
}

// Largest Nf in [1,N] with Q*M + Q*(Nf-1)*M_dyn <= budget_bits; 0 when even
// the first frame does not fit.
inline int max_frames(int m, int m_dyn, int q, double budget_bits, int n) {
    if (m < 1 || m_dyn < 0 || m_dyn > m || q < 1 || n < 1 || budget_bits < 0.0)
        throw ConfigError("max_frames: invalid arguments");
    const double first_frame = static_cast<double>(q) * m;
    if (first_frame > budget_bits) return 0;
    if (m_dyn == 0) return n;
    double extra = std::floor((budget_bits - first_frame) / (static_cast<double>(q) * m_dyn));
    return static_cast<int>(std::min(static_cast<double>(n), 1.0 + extra));
}

struct EncodedChunk {
    ChunkPlan plan;
    std::vector<double> dim_min; // f32-exact values, size M
    std::vector<double> dim_max;
    std::vector<std::uint8_t> payload;
};

// Decoded receiver-side view of a chunk: Nf frames with per-frame dynamic
// values; static dims hold the chunk mean in every frame.
struct DecodedChunk {
    std::vector<ExpressionFrame> frames;
    std::vector<int> dynamic_dims;
    int full_length = 0; // N of the source chunk
};

namespace detail {

inline std::uint32_t quantize_value(double v, double lo, double hi, std::uint32_t levels) {
    if (hi <= lo) return 0;
    double q = std::round((v - lo) / (hi - lo) * levels);
    return static_cast<std::uint32_t>(std::clamp(q, 0.0, static_cast<double>(levels)));
}

inline double dequantize_value(std::uint32_t code, double lo, double hi, std::uint32_t levels) {
    if (hi <= lo) return lo;
    return lo + static_cast<double>(code) * (hi - lo) / levels;
}

} // namespace detail

// Packs a chunk: frame 1 carries every dim (chunk means in the static slots,
// actual first-frame values in the dynamic slots), frames 2..Nf carry the
// dynamic dims only. Each value is uniform-quantized to Q bits over that
// dimension's observed min/max across the whole chunk.
inline EncodedChunk encode_chunk(const ExpressionChunk& chunk, const std::vector<int>& dynamic_dims,
                                 int q, double budget_bits) {
    validate(chunk);
    const int m = chunk.dim();
    const int n = chunk.frame_count();
    if (q < 2 || q > 16) throw ConfigError("Q must be in [2,16], got " + fmt_int(q));
    std::vector<bool> is_dynamic(m, false);
    for (int d : dynamic_dims) {
        if (d < 0 || d >= m) throw ConfigError("dynamic dim " + fmt_int(d) + " out of range");
        if (is_dynamic[d]) throw ConfigError("dynamic dim " + fmt_int(d) + " listed twice");
        is_dynamic[d] = true;
    }
    const int m_dyn = static_cast<int>(dynamic_dims.size());

    EncodedChunk enc;
    enc.plan.N = n;
    enc.plan.M = m;
    enc.plan.M_dyn = m_dyn;
    enc.plan.dynamic_dims = dynamic_dims;
    std::sort(enc.plan.dynamic_dims.begin(), enc.plan.dynamic_dims.end());
    enc.plan.Q = q;
    enc.plan.budget_bits = budget_bits;
    enc.plan.Nf = max_frames(m, m_dyn, q, budget_bits, n);
    if (enc.plan.Nf < 1)
        throw Error("encode_chunk: budget of " + fmt_double(budget_bits) + " bits cannot carry the first frame (" +
                    fmt_int(static_cast<std::int64_t>(q) * m) + " bits)");

    enc.dim_min.resize(m);
    enc.dim_max.resize(m);
    std::vector<double> mean(m, 0.0);
    for (int d = 0; d < m; ++d) {
        double lo = chunk.frames[0][d], hi = chunk.frames[0][d], acc = 0.0;
        for (const auto& f : chunk.frames) {
            lo = std::min(lo, f[d]);
            hi = std::max(hi, f[d]);
            acc += f[d];
        }
        // quantizer endpoints live in the header as f32; use those exact values
        enc.dim_min[d] = static_cast<double>(static_cast<float>(lo));
        enc.dim_max[d] = static_cast<double>(static_cast<float>(hi));
        mean[d] = acc / n;
    }

    const std::uint32_t levels = (1u << q) - 1u;
    BitWriter bw;
    for (int d = 0; d < m; ++d) {
        double v = is_dynamic[d] ? chunk.frames[0][d] : mean[d];
        bw.put(detail::quantize_value(v, enc.dim_min[d], enc.dim_max[d], levels), q);
    }
    for (int i = 1; i < enc.plan.Nf; ++i)
        for (int d : enc.plan.dynamic_dims)
            bw.put(detail::quantize_value(chunk.frames[i][d], enc.dim_min[d], enc.dim_max[d], levels), q);
    enc.payload = bw.take();
    return enc;
}

inline DecodedChunk decode_chunk(const EncodedChunk& enc) {
    const int m = enc.plan.M;
    const std::uint32_t levels = (1u << enc.plan.Q) - 1u;
    std::vector<bool> is_dynamic(m, false);
    for (int d : enc.plan.dynamic_dims) is_dynamic[d] = true;

    DecodedChunk out;
    out.dynamic_dims = enc.plan.dynamic_dims;
    out.full_length = enc.plan.N;

    BitReader br(enc.payload.data(), enc.payload.size());
    ExpressionFrame first(m, 0.0);
    for (int d = 0; d < m; ++d)
        first[d] = detail::dequantize_value(br.get(enc.plan.Q), enc.dim_min[d], enc.dim_max[d], levels);
    out.frames.assign(enc.plan.Nf, first); // static slots replicate the mean
    for (int i = 1; i < enc.plan.Nf; ++i)
        for (int d : enc.plan.dynamic_dims)
            out.frames[i][d] = detail::dequantize_value(br.get(enc.plan.Q), enc.dim_min[d], enc.dim_max[d], levels);
    return out;
}

// ---- wire format "NFSC" ------------------------------------------------------
// magic(4) version u16 N u16 Nf u16 M u16 Q u8 (13 bytes), dynamic-dim bitmask
// of ceil(M/8) bytes (dim k -> byte k/8 bit k%8), per-dim min/max as 2*M f32,
// payload packed MSB-first and zero-padded to a byte boundary.

inline std::size_t encoded_chunk_bytes(int m, int m_dyn, int q, int nf) {
    std::size_t payload_bits = static_cast<std::size_t>(q) * (m + static_cast<std::size_t>(nf - 1) * m_dyn);
    return 13 + (static_cast<std::size_t>(m) + 7) / 8 + 8 * static_cast<std::size_t>(m) + (payload_bits + 7) / 8;
}

inline std::vector<std::uint8_t> serialize_chunk(const EncodedChunk& enc) {
    ByteWriter w;
    w.put_bytes(reinterpret_cast<const std::uint8_t*>("NFSC"), 4);
    w.put<std::uint16_t>(1);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(enc.plan.N));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(enc.plan.Nf));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(enc.plan.M));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(enc.plan.Q));
    std::vector<std::uint8_t> mask((enc.plan.M + 7) / 8, 0);
    for (int d : enc.plan.dynamic_dims) mask[d / 8] |= static_cast<std::uint8_t>(1u << (d % 8));
    w.put_bytes(mask.data(), mask.size());
    for (int d = 0; d < enc.plan.M; ++d) {
        w.put_f32(enc.dim_min[d]);
        w.put_f32(enc.dim_max[d]);
    }
    w.put_bytes(enc.payload.data(), enc.payload.size());
    return w.take();
}

inline EncodedChunk parse_chunk(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    r.expect_magic("NFSC", "encoded chunk");
    auto version = r.get<std::uint16_t>("version");
    if (version != 1) throw FormatError("unsupported encoded chunk version " + fmt_int(version));
    EncodedChunk enc;
    enc.plan.N = r.get<std::uint16_t>("N");
    enc.plan.Nf = r.get<std::uint16_t>("Nf");
    enc.plan.M = r.get<std::uint16_t>("M");
    enc.plan.Q = r.get<std::uint8_t>("Q");
    if (enc.plan.M < 1) throw FormatError("encoded chunk has M = 0");
    if (enc.plan.Q < 2 || enc.plan.Q > 16) throw FormatError("encoded chunk Q out of [2,16]");
    if (enc.plan.Nf < 1 || enc.plan.Nf > enc.plan.N)
        throw FormatError("encoded chunk Nf outside [1,N]");
    std::size_t mask_bytes = (static_cast<std::size_t>(enc.plan.M) + 7) / 8;
    if (r.remaining() < mask_bytes)
        throw FormatError("truncated dynamic-dim bitmask at byte offset " +
                          fmt_int(static_cast<std::int64_t>(r.offset())));
    for (int d = 0; d < enc.plan.M; ++d)
        if (r.cursor()[d / 8] & (1u << (d % 8))) enc.plan.dynamic_dims.push_back(d);
    r.skip(mask_bytes, "dynamic-dim bitmask");
    enc.plan.M_dyn = static_cast<int>(enc.plan.dynamic_dims.size());

    enc.dim_min.resize(enc.plan.M);
    enc.dim_max.resize(enc.plan.M);
    for (int d = 0; d < enc.plan.M; ++d) {
        enc.dim_min[d] = r.get_f32("dim min");
        enc.dim_max[d] = r.get_f32("dim max");
    }
    std::size_t payload_bits = static_cast<std::size_t>(enc.plan.Q) *
                               (enc.plan.M + static_cast<std::size_t>(enc.plan.Nf - 1) * enc.plan.M_dyn);
    std::size_t payload_bytes = (payload_bits + 7) / 8;
    if (r.remaining() < payload_bytes)
        throw FormatError("truncated payload at byte offset " + fmt_int(static_cast<std::int64_t>(r.offset())));
    if (r.remaining() > payload_bytes)
        throw FormatError("trailing bytes after payload at byte offset " +
                          fmt_int(static_cast<std::int64_t>(r.offset() + payload_bytes)));
    enc.payload.assign(r.cursor(), r.cursor() + payload_bytes);
    // budget is not transmitted; reconstruct the tightest bound the plan obeys
    enc.plan.budget_bits = static_cast<double>(payload_bits);
    return enc;
}

} // namespace rfs
