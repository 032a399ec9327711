#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rfs/errors.hpp"
#include "rfs/geometry.hpp"
#include "rfs/text.hpp"

namespace rfs {

// Anisotropic 3D Gaussian splat: position, per-axis std-dev, orientation,
// opacity and RGB color. Covariance is implied as R * diag(scale^2) * R^T so
// it is symmetric positive definite whenever scale > 0.
struct Gaussian3D {
    Vec3 position = Vec3::Zero();
    Vec3 scale = Vec3::Ones();
    Quat rotation = Quat::Identity(); // unit (w,x,y,z)
    double opacity = 1.0;
    Vec3 color = Vec3::Zero();

    Mat3 covariance() const {
        Mat3 r = quat_to_matrix_raw(rotation.w(), rotation.x(), rotation.y(), rotation.z());
        Mat3 m = r * scale.asDiagonal();
        return m * m.transpose();
    }
};

constexpr double kScaleFloor = 1e-9;

inline void validate(const Gaussian3D& g, const std::string& who = "gaussian") {
    if (std::abs(g.rotation.norm() - 1.0) > 1e-9)
        throw ConfigError(who + ": quaternion norm " + fmt_double(g.rotation.norm()) + " not unit");
    if (!(g.scale.minCoeff() > 0.0)) throw ConfigError(who + ": scale must be positive");
    if (g.opacity < 0.0 || g.opacity > 1.0) throw ConfigError(who + ": opacity outside [0,1]");
    if (g.color.minCoeff() < 0.0 || g.color.maxCoeff() > 1.0)
        throw ConfigError(who + ": color outside [0,1]");
}

// Projects back onto the constraint set (unit quaternion, positive scale,
// clamped opacity/color). fit steps call this after every update.
inline void clamp_to_invariants(Gaussian3D& g) {
    double n = g.rotation.norm();
    if (n > 0.0)
        g.rotation.coeffs() /= n;
    else
        g.rotation = Quat::Identity();
    for (int i = 0; i < 3; ++i) g.scale[i] = std::max(g.scale[i], kScaleFloor);
    g.opacity = std::clamp(g.opacity, 0.0, 1.0);
    for (int i = 0; i < 3; ++i) g.color[i] = std::clamp(g.color[i], 0.0, 1.0);
}

// Ordered collection of gaussians tagged with the coordinate frame they live in.
struct SplatModel {
    std::vector<Gaussian3D> gaussians;
    std::string frame_id = "world";
    std::optional<RigidTransform> frame_to_world;

    size_t size() const { return gaussians.size(); }
    bool empty() const { return gaussians.empty(); }
};

inline void validate(const SplatModel& m) {
    for (size_t i = 0; i < m.gaussians.size(); ++i)
        validate(m.gaussians[i], "gaussian " + fmt_int(static_cast<std::int64_t>(i)));
}

// Pinhole camera: extrinsic maps world to camera coordinates, intrinsics in
// pixels. Pixel (x,y) samples the scene at center (x+0.5, y+0.5).
struct CameraPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    int height = 1, width = 1;
};

inline void validate(const CameraPose& cam) {
    if (!is_rotation_matrix(cam.rotation))
        throw ConfigError("camera extrinsic rotation is not orthonormal with det +1");
    if (cam.height < 1 || cam.width < 1)
        throw ConfigError("camera image size must be at least 1x1, got " + fmt_int(cam.height) + "x" +
                          fmt_int(cam.width));
}

// Screen-space footprint of one projected gaussian.
struct Splat2D {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity(); // includes the anti-alias floor on the diagonal
    double depth = 0.0;            // view-space z
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
};

constexpr double kNearPlane = 0.01;
constexpr double kCovRegularization = 0.3; // px^2 added to the diagonal
constexpr double kAlphaMax = 0.999;
// Footprint radius in units of the largest screen-space std-dev. Gaussians
// are evaluated only within this radius; exp(-0.5*7^2) ~ 2e-11 keeps the
// truncation far below the 1e-6 agreement bound against dense evaluation.
constexpr double kFootprintSigma = 7.0;

// Projects one gaussian; nullopt when the view-space depth is at or behind
// the near plane. cov2d = J W Sigma W^T J^T + reg*I with J the perspective
// Jacobian at the view-space mean.
inline std::optional<Splat2D> project_gaussian(const Gaussian3D& g, const CameraPose& cam) {
    Vec3 t = cam.rotation * g.position + cam.translation;
    if (t.z() <= kNearPlane) return std::nullopt;

    Splat2D s;
    s.depth = t.z();
    s.mean2d = Vec2(cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy);

    Eigen::Matrix<double, 2, 3> jac;
    jac << cam.fx / t.z(), 0.0, -cam.fx * t.x() / (t.z() * t.z()),
           0.0, cam.fy / t.z(), -cam.fy * t.y() / (t.z() * t.z());
    Eigen::Matrix<double, 2, 3> a = jac * cam.rotation;
    s.cov2d = a * g.covariance() * a.transpose() + kCovRegularization * Mat2::Identity();
    s.opacity = g.opacity;
    s.color = g.color;
    return s;
}

inline double max_eigenvalue_2x2(const Mat2& m) {
    double half_trace = 0.5 * (m(0, 0) + m(1, 1));
    double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    double disc = std::max(0.0, half_trace * half_trace - det);
    return half_trace + std::sqrt(disc);
}

} // namespace rfs
