#pragma once

#include <cstddef>
#include <vector>

#include "rfs/errors.hpp"
#include "rfs/geometry.hpp"
#include "rfs/text.hpp"

namespace rfs {

// Row-major H x W x 3 raster, channel values in [0,1].
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> data; // height*width*3

    Image() = default;
    Image(int h, int w, double fill = 0.0) : height(h), width(w), data(static_cast<size_t>(h) * w * 3, fill) {}

    double& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    double at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }

    Vec3 pixel(int y, int x) const {
        size_t i = (static_cast<size_t>(y) * width + x) * 3;
        return Vec3(data[i], data[i + 1], data[i + 2]);
    }

    void set_pixel(int y, int x, const Vec3& v) {
        size_t i = (static_cast<size_t>(y) * width + x) * 3;
        data[i] = v[0];
        data[i + 1] = v[1];
        data[i + 2] = v[2];
    }

    size_t value_count() const { return data.size(); }
};

inline double mse(const Image& a, const Image& b) {
    if (a.height != b.height || a.width != b.width)
        throw ConfigError("image dimension mismatch: " + fmt_int(a.height) + "x" + fmt_int(a.width) +
                          " vs " + fmt_int(b.height) + "x" + fmt_int(b.width));
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return a.data.empty() ? 0.0 : acc / static_cast<double>(a.data.size());
}

} // namespace rfs
