#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rfs/binio.hpp"
#include "rfs/bitstream.hpp"
#include "rfs/splat.hpp"

namespace rfs {

// Wire layout shared by both model formats: 14 scalars per gaussian in the
// order position x3, scale x3, quaternion wxyz, opacity, color x3.
constexpr int kGaussianFieldCount = 14;

inline double gaussian_field(const Gaussian3D& g, int k) {
    switch (k) {
        case 0: case 1: case 2: return g.position[k];
        case 3: case 4: case 5: return g.scale[k - 3];
        case 6: return g.rotation.w();
        case 7: return g.rotation.x();
        case 8: return g.rotation.y();
        case 9: return g.rotation.z();
        case 10: return g.opacity;
        default: return g.color[k - 11];
    }
}

inline void set_gaussian_field(Gaussian3D& g, int k, double v) {
    switch (k) {
        case 0: case 1: case 2: g.position[k] = v; break;
        case 3: case 4: case 5: g.scale[k - 3] = v; break;
        case 6: g.rotation.w() = v; break;
        case 7: g.rotation.x() = v; break;
        case 8: g.rotation.y() = v; break;
        case 9: g.rotation.z() = v; break;
        case 10: g.opacity = v; break;
        default: g.color[k - 11] = v; break;
    }
}

// ---- full precision format "SPLT" ------------------------------------------
// magic(4) version u16 count u32, then 14 f32 per gaussian.

inline std::size_t serialized_model_bytes(const SplatModel& m) {
    return 10 + m.size() * kGaussianFieldCount * 4;
}

inline std::vector<std::uint8_t> serialize_model(const SplatModel& m) {
    ByteWriter w;
    w.put_bytes(reinterpret_cast<const std::uint8_t*>("SPLT"), 4);
    w.put<std::uint16_t>(1);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.size()));
    for (const auto& g : m.gaussians)
        for (int k = 0; k < kGaussianFieldCount; ++k) w.put_f32(gaussian_field(g, k));
    return w.take();
}

inline SplatModel parse_model(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    r.expect_magic("SPLT", "splat model");
    auto version = r.get<std::uint16_t>("version");
    if (version != 1) throw FormatError("unsupported splat model version " + fmt_int(version));
    auto count = r.get<std::uint32_t>("gaussian count");
    SplatModel m;
    m.gaussians.resize(count);
    for (auto& g : m.gaussians)
        for (int k = 0; k < kGaussianFieldCount; ++k) set_gaussian_field(g, k, r.get_f32("gaussian field"));
    return m;
}

inline void save_model(const SplatModel& m, const std::string& path) {
    write_file_bytes(path, serialize_model(m));
}

inline SplatModel load_model(const std::string& path) { return parse_model(read_file_bytes(path)); }

// ---- quantized format "SPLQ" ------------------------------------------------
// magic(4) version u16 count u32 bits u8, 14 f32 min/max pairs, then one
// byte-aligned packed record of 14 codes per gaussian.

inline std::size_t serialized_quantized_bytes(std::size_t count, int bits) {
    std::size_t per_gaussian = (static_cast<std::size_t>(kGaussianFieldCount) * bits + 7) / 8;
    return 11 + 14 * 8 + count * per_gaussian;
}

struct QuantizedModel {
    SplatModel model;      // dequantized values
    std::size_t size_bytes; // serialized SPLQ size
    std::vector<std::uint8_t> bytes;
};

// Uniform per-field quantization over the model-wide min/max range. The
// range endpoints are stored (and used) at f32 precision so a decode of the
// serialized bytes reproduces the returned model bit for bit.
inline QuantizedModel quantize_model(const SplatModel& m, int bits) {
    if (bits < 2 || bits > 16) throw ConfigError("quantization bits must be in [2,16], got " + fmt_int(bits));

    std::array<double, kGaussianFieldCount> lo, hi;
    lo.fill(0.0);
    hi.fill(0.0);
    for (int k = 0; k < kGaussianFieldCount; ++k) {
        double mn = 0.0, mx = 0.0;
        for (size_t i = 0; i < m.size(); ++i) {
            double v = gaussian_field(m.gaussians[i], k);
            if (i == 0 || v < mn) mn = v;
            if (i == 0 || v > mx) mx = v;
        }
        // round through f32 once so encoder and decoder share exact endpoints
        lo[k] = static_cast<double>(static_cast<float>(mn));
        hi[k] = static_cast<double>(static_cast<float>(mx));
    }

    const std::uint32_t levels = (1u << bits) - 1u;
    ByteWriter w;
    w.put_bytes(reinterpret_cast<const std::uint8_t*>("SPLQ"), 4);
    w.put<std::uint16_t>(1);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.size()));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(bits));
    for (int k = 0; k < kGaussianFieldCount; ++k) {
        w.put_f32(lo[k]);
        w.put_f32(hi[k]);
    }

    QuantizedModel out;
    out.model = m;
    for (size_t i = 0; i < m.size(); ++i) {
        BitWriter bw;
        for (int k = 0; k < kGaussianFieldCount; ++k) {
            double range = hi[k] - lo[k];
            std::uint32_t code = 0;
            if (range > 0.0) {
                double v = gaussian_field(m.gaussians[i], k);
                double q = std::round((v - lo[k]) / range * levels);
                code = static_cast<std::uint32_t>(std::clamp(q, 0.0, static_cast<double>(levels)));
            }
            bw.put(code, bits);
            double deq = range > 0.0 ? lo[k] + static_cast<double>(code) * range / levels : lo[k];
            set_gaussian_field(out.model.gaussians[i], k, deq);
        }
        const auto& rec = bw.bytes();
        w.put_bytes(rec.data(), rec.size());
    }
    out.bytes = w.take();
    out.size_bytes = out.bytes.size();
    return out;
}

inline SplatModel parse_quantized_model(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    r.expect_magic("SPLQ", "quantized splat model");
    auto version = r.get<std::uint16_t>("version");
    if (version != 1) throw FormatError("unsupported quantized model version " + fmt_int(version));
    auto count = r.get<std::uint32_t>("gaussian count");
    int bits = r.get<std::uint8_t>("bits");
    if (bits < 2 || bits > 16) throw FormatError("quantization bits out of range: " + fmt_int(bits));
    std::array<double, kGaussianFieldCount> lo, hi;
    for (int k = 0; k < kGaussianFieldCount; ++k) {
        lo[k] = r.get_f32("field min");
        hi[k] = r.get_f32("field max");
    }
    const std::uint32_t levels = (1u << bits) - 1u;
    const std::size_t per_gaussian = (static_cast<std::size_t>(kGaussianFieldCount) * bits + 7) / 8;
    SplatModel m;
    m.gaussians.resize(count);
    for (auto& g : m.gaussians) {
        if (r.remaining() < per_gaussian)
            throw FormatError("truncated quantized record at byte offset " +
                              fmt_int(static_cast<std::int64_t>(r.offset())));
        BitReader br(r.cursor(), per_gaussian);
        for (int k = 0; k < kGaussianFieldCount; ++k) {
            std::uint32_t code = br.get(bits);
            double range = hi[k] - lo[k];
            double deq = range > 0.0 ? lo[k] + static_cast<double>(code) * range / levels : lo[k];
            set_gaussian_field(g, k, deq);
        }
        r.skip(per_gaussian, "quantized record");
    }
    return m;
}

// Keeps gaussians whose opacity is at or above the threshold, in order.
inline SplatModel prune_by_opacity(const SplatModel& m, double threshold) {
    if (threshold < 0.0 || threshold > 1.0)
        throw ConfigError("prune threshold must be in [0,1], got " + fmt_double(threshold));
    SplatModel out;
    out.frame_id = m.frame_id;
    out.frame_to_world = m.frame_to_world;
    out.gaussians.reserve(m.size());
    for (const auto& g : m.gaussians)
        if (g.opacity >= threshold) out.gaussians.push_back(g);
    return out;
}

} // namespace rfs
