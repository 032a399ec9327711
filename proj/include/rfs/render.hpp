#pragma once

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "rfs/image.hpp"
#include "rfs/splat.hpp"

namespace rfs {

struct RenderOptions {
    int tile_size = 16;
    int threads = 1;
    // Transmittance below this stops per-pixel compositing; remaining splats
    // could change the pixel by at most this amount.
    double transmittance_floor = 1e-9;
};

namespace detail {

struct PreparedSplat {
    Splat2D splat;
    Mat2 inv_cov;
    int x0, x1, y0, y1; // inclusive pixel bounds of the footprint
    int index;          // position in the source model, breaks depth ties
};

// Projects, culls and depth-sorts the model for a camera. The footprint box
// is shared by tiling and per-pixel tests so output does not depend on the
// tile partition.
inline std::vector<PreparedSplat> prepare_splats(const SplatModel& model, const CameraPose& cam) {
    std::vector<PreparedSplat> out;
    out.reserve(model.size());
    for (size_t i = 0; i < model.gaussians.size(); ++i) {
        auto proj = project_gaussian(model.gaussians[i], cam);
        if (!proj) continue;
        PreparedSplat p;
        p.splat = *proj;
        double det = p.splat.cov2d(0, 0) * p.splat.cov2d(1, 1) - p.splat.cov2d(0, 1) * p.splat.cov2d(1, 0);
        p.inv_cov << p.splat.cov2d(1, 1) / det, -p.splat.cov2d(0, 1) / det,
                     -p.splat.cov2d(1, 0) / det, p.splat.cov2d(0, 0) / det;
        double radius = kFootprintSigma * std::sqrt(max_eigenvalue_2x2(p.splat.cov2d));
        // pixel x covers center x+0.5; keep pixels with |x+0.5-mean| <= radius
        p.x0 = std::max(0, static_cast<int>(std::ceil(p.splat.mean2d.x() - radius - 0.5)));
        p.x1 = std::min(cam.width - 1, static_cast<int>(std::floor(p.splat.mean2d.x() + radius - 0.5)));
        p.y0 = std::max(0, static_cast<int>(std::ceil(p.splat.mean2d.y() - radius - 0.5)));
        p.y1 = std::min(cam.height - 1, static_cast<int>(std::floor(p.splat.mean2d.y() + radius - 0.5)));
        if (p.x0 > p.x1 || p.y0 > p.y1) continue; // footprint misses the image
        p.index = static_cast<int>(i);
        out.push_back(p);
    }
    std::sort(out.begin(), out.end(), [](const PreparedSplat& a, const PreparedSplat& b) {
        if (a.splat.depth != b.splat.depth) return a.splat.depth < b.splat.depth;
        return a.index < b.index;
    });
    return out;
}

inline double gaussian_weight(const PreparedSplat& p, const Vec2& pix, Vec2* md_out = nullptr) {
    Vec2 d = pix - p.splat.mean2d;
    Vec2 md = p.inv_cov * d;
    if (md_out) *md_out = md;
    return std::exp(-0.5 * d.dot(md));
}

template <typename PerTile>
inline void for_each_tile(int height, int width, int tile_size, int threads, PerTile&& fn) {
    int tiles_x = (width + tile_size - 1) / tile_size;
    int tiles_y = (height + tile_size - 1) / tile_size;
    int total = tiles_x * tiles_y;
    auto run_range = [&](int begin, int end) {
        for (int t = begin; t < end; ++t) {
            int ty = t / tiles_x, tx = t % tiles_x;
            int x0 = tx * tile_size, x1 = std::min(width, x0 + tile_size);
            int y0 = ty * tile_size, y1 = std::min(height, y0 + tile_size);
            fn(x0, x1, y0, y1);
        }
    };
    threads = std::max(1, threads);
    if (threads == 1 || total <= 1) {
        run_range(0, total);
        return;
    }
    std::vector<std::thread> pool;
    int chunk = (total + threads - 1) / threads;
    for (int i = 0; i < threads; ++i) {
        int begin = i * chunk, end = std::min(total, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back(run_range, begin, end);
    }
    for (auto& th : pool) th.join();
}

} // namespace detail

// Front-to-back alpha compositing of the depth-sorted splats over a constant
// background. Tiles partition the pixels; each pixel walks the splats whose
// footprint covers it, in global depth order, so the result is bitwise
// independent of tile size and thread count.
inline Image render(const SplatModel& model, const CameraPose& cam, const Vec3& background,
                    const RenderOptions& opt = {}) {
    validate(cam);
    auto prepared = detail::prepare_splats(model, cam);

    Image img(cam.height, cam.width);
    detail::for_each_tile(cam.height, cam.width, opt.tile_size, opt.threads,
                          [&](int x0, int x1, int y0, int y1) {
        // splats whose footprint touches this tile, already depth sorted
        std::vector<const detail::PreparedSplat*> tile_splats;
        for (const auto& p : prepared)
            if (p.x1 >= x0 && p.x0 < x1 && p.y1 >= y0 && p.y0 < y1) tile_splats.push_back(&p);

        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                Vec2 pix(x + 0.5, y + 0.5);
                Vec3 color = Vec3::Zero();
                double transmittance = 1.0;
                for (const auto* p : tile_splats) {
                    if (x < p->x0 || x > p->x1 || y < p->y0 || y > p->y1) continue;
                    double alpha = std::min(p->splat.opacity * detail::gaussian_weight(*p, pix), kAlphaMax);
                    color += p->splat.color * (alpha * transmittance);
                    transmittance *= 1.0 - alpha;
                    if (transmittance < opt.transmittance_floor) break;
                }
                color += background * transmittance;
                img.set_pixel(y, x, color);
            }
        }
    });
    return img;
}

} // namespace rfs
