#pragma once

#include <Eigen/SVD>
#include <vector>

#include "rfs/errors.hpp"
#include "rfs/geometry.hpp"
#include "rfs/text.hpp"

namespace rfs {

// Least-squares rigid transform (rotation + translation, unit scale) mapping
// src onto dst: minimizes sum ||R*src_i + t - dst_i||^2. Kabsch/Umeyama with
// the determinant sign fix.
inline RigidTransform align_pose(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
    if (src.size() != dst.size())
        throw ConfigError("align_pose: point counts differ: " + fmt_int(static_cast<std::int64_t>(src.size())) +
                          " vs " + fmt_int(static_cast<std::int64_t>(dst.size())));
    if (src.size() < 3)
        throw DegeneracyError("align_pose: needs at least 3 correspondences, got " +
                              fmt_int(static_cast<std::int64_t>(src.size())));

    const double n = static_cast<double>(src.size());
    Vec3 src_mean = Vec3::Zero(), dst_mean = Vec3::Zero();
    for (size_t i = 0; i < src.size(); ++i) {
        src_mean += src[i];
        dst_mean += dst[i];
    }
    src_mean /= n;
    dst_mean /= n;

    Mat3 cross = Mat3::Zero();
    for (size_t i = 0; i < src.size(); ++i)
        cross += (dst[i] - dst_mean) * (src[i] - src_mean).transpose();

    Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec3 s = svd.singularValues();
    // Rank < 2 leaves a rotation about the point line/cluster unconstrained.
    if (s(0) <= 0.0 || s(1) <= s(0) * 1e-9)
        throw DegeneracyError("align_pose: degenerate (collinear or coincident) correspondences");

    Mat3 d = Mat3::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;

    RigidTransform out;
    out.rotation = svd.matrixU() * d * svd.matrixV().transpose();
    out.translation = dst_mean - out.rotation * src_mean;
    return out;
}

} // namespace rfs
