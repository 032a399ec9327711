#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rfs/binio.hpp"
#include "rfs/image.hpp"
#include "rfs/rng.hpp"

namespace rfs {

using ExpressionFrame = std::vector<double>;

struct ExpressionChunk {
    std::vector<ExpressionFrame> frames;

    int frame_count() const { return static_cast<int>(frames.size()); }
    int dim() const { return frames.empty() ? 0 : static_cast<int>(frames.front().size()); }
};

inline void validate(const ExpressionChunk& c) {
    if (c.frames.empty()) throw ConfigError("expression chunk must hold at least one frame");
    for (const auto& f : c.frames)
        if (f.size() != c.frames.front().size())
            throw ConfigError("expression chunk frames differ in dimension");
}

// Linear blendshape knowledge base: a neutral face plus M expression bases.
// Shared by transmitter and receiver, it turns an M-vector of expression
// coefficients into an image.
struct BlendshapeModel {
    Image base;
    std::vector<Image> bases;

    int dim() const { return static_cast<int>(bases.size()); }
};

inline void validate(const BlendshapeModel& kb) {
    if (kb.bases.empty()) throw ConfigError("blendshape model needs at least one basis");
    for (const auto& b : kb.bases)
        if (b.height != kb.base.height || b.width != kb.base.width)
            throw ConfigError("blendshape basis dimensions differ from the base image");
}

// clamp(base + sum_i e_i * basis_i, 0, 1) per pixel/channel.
inline Image render_face(const BlendshapeModel& kb, const ExpressionFrame& e) {
    if (static_cast<int>(e.size()) != kb.dim())
        throw ConfigError("expression length " + fmt_int(static_cast<std::int64_t>(e.size())) +
                          " does not match knowledge base dimension " + fmt_int(kb.dim()));
    Image out = kb.base;
    for (int m = 0; m < kb.dim(); ++m) {
        const double w = e[m];
        if (w == 0.0) continue;
        const auto& basis = kb.bases[m].data;
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += w * basis[i];
    }
    for (auto& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

constexpr double kPsnrCapDb = 100.0;

// Peak signal-to-noise ratio against peak value 1.0, capped at 100 dB.
inline double psnr(const Image& a, const Image& b) {
    double m = mse(a, b);
    if (m <= 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / m));
}

namespace detail {

// Low-frequency field: a short sum of random plane-wave sinusoids.
inline std::vector<double> smooth_field(Rng& rng, int h, int w) {
    struct Wave {
        double amp, fx, fy, phase;
    };
    std::vector<Wave> waves(3);
    for (auto& wv : waves)
        wv = {rng.uniform(0.5, 1.0), rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0), rng.uniform(0.0, 2.0 * M_PI)};
    std::vector<double> field(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double v = 0.0;
            for (const auto& wv : waves)
                v += wv.amp * std::sin(2.0 * M_PI * (wv.fx * (x + 0.5) / w + wv.fy * (y + 0.5) / h) + wv.phase);
            field[static_cast<size_t>(y) * w + x] = v;
        }
    return field;
}

} // namespace detail

// Deterministic synthetic knowledge base: base image is a smooth field mapped
// into [0.2, 0.8], each basis a distinct smooth field scaled to max-abs 0.3.
inline BlendshapeModel gen_synthetic_kb(std::uint64_t seed, int m, int h, int w) {
    if (m < 1 || h < 1 || w < 1) throw ConfigError("knowledge base dimensions must all be >= 1");
    Rng rng(seed);
    BlendshapeModel kb;
    kb.base = Image(h, w);
    for (int c = 0; c < 3; ++c) {
        auto field = detail::smooth_field(rng, h, w);
        double lo = *std::min_element(field.begin(), field.end());
        double hi = *std::max_element(field.begin(), field.end());
        double span = hi - lo;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double v = span > 0.0 ? (field[static_cast<size_t>(y) * w + x] - lo) / span : 0.5;
                kb.base.at(y, x, c) = 0.2 + 0.6 * v;
            }
    }
    kb.bases.reserve(m);
    for (int i = 0; i < m; ++i) {
        Image basis(h, w);
        for (int c = 0; c < 3; ++c) {
            auto field = detail::smooth_field(rng, h, w);
            double peak = 0.0;
            for (double v : field) peak = std::max(peak, std::abs(v));
            double scale = peak > 0.0 ? 0.3 / peak : 0.0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) basis.at(y, x, c) = scale * field[static_cast<size_t>(y) * w + x];
        }
        kb.bases.push_back(std::move(basis));
    }
    return kb;
}

// Synthetic expression track over one chunk. Dimensions listed in
// dynamic_dims follow 0.5 + 0.4*sin(2*pi*f*n/N + phase) plus gaussian noise;
// the rest hold a constant with noise_std/10 jitter.
inline ExpressionChunk gen_trajectory(std::uint64_t seed, int m, int n,
                                      const std::vector<int>& dynamic_dims, double noise_std) {
    if (m < 1 || n < 1) throw ConfigError("trajectory dimensions must be >= 1");
    std::vector<bool> dynamic(m, false);
    for (int d : dynamic_dims) {
        if (d < 0 || d >= m) throw ConfigError("dynamic dim " + fmt_int(d) + " out of range [0," + fmt_int(m - 1) + "]");
        dynamic[d] = true;
    }
    Rng rng(seed);
    std::vector<double> freq(m), phase(m), level(m);
    for (int d = 0; d < m; ++d) {
        if (dynamic[d]) {
            freq[d] = rng.uniform(1.0, 4.0);
            phase[d] = rng.uniform(0.0, 2.0 * M_PI);
        } else {
            level[d] = rng.uniform(0.0, 1.0);
        }
    }
    ExpressionChunk chunk;
    chunk.frames.assign(n, ExpressionFrame(m, 0.0));
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < m; ++d) {
            if (dynamic[d]) {
                double v = 0.5 + 0.4 * std::sin(2.0 * M_PI * freq[d] * i / n + phase[d]);
                chunk.frames[i][d] = v + (noise_std > 0.0 ? rng.normal(0.0, noise_std) : 0.0);
            } else {
                chunk.frames[i][d] = level[d] + (noise_std > 0.0 ? rng.normal(0.0, noise_std / 10.0) : 0.0);
            }
        }
    return chunk;
}

// ---- knowledge base file format "BSKB" --------------------------------------
// magic(4) version u16 M u16 H u16 W u16, then (M+1) images of H*W*3 f32,
// base image first.

inline std::vector<std::uint8_t> serialize_kb(const BlendshapeModel& kb) {
    validate(kb);
    ByteWriter w;
    w.put_bytes(reinterpret_cast<const std::uint8_t*>("BSKB"), 4);
    w.put<std::uint16_t>(1);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(kb.dim()));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(kb.base.height));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(kb.base.width));
    for (double v : kb.base.data) w.put_f32(v);
    for (const auto& b : kb.bases)
        for (double v : b.data) w.put_f32(v);
    return w.take();
}

inline BlendshapeModel parse_kb(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    r.expect_magic("BSKB", "blendshape knowledge base");
    auto version = r.get<std::uint16_t>("version");
    if (version != 1) throw FormatError("unsupported knowledge base version " + fmt_int(version));
    int m = r.get<std::uint16_t>("M");
    int h = r.get<std::uint16_t>("H");
    int w = r.get<std::uint16_t>("W");
    if (m < 1 || h < 1 || w < 1) throw FormatError("knowledge base header has zero dimension");
    BlendshapeModel kb;
    kb.base = Image(h, w);
    for (auto& v : kb.base.data) v = r.get_f32("base image");
    kb.bases.assign(m, Image(h, w));
    for (auto& b : kb.bases)
        for (auto& v : b.data) v = r.get_f32("basis image");
    return kb;
}

inline void save_kb(const BlendshapeModel& kb, const std::string& path) {
    write_file_bytes(path, serialize_kb(kb));
}

inline BlendshapeModel load_kb(const std::string& path) { return parse_kb(read_file_bytes(path)); }

} // namespace rfs
