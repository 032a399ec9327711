#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace rfs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Rigid motion x -> R*x + t.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    RigidTransform inverse() const {
        RigidTransform inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(rotation.transpose() * translation);
        return inv;
    }

    // this ∘ other: applies `other` first.
    RigidTransform compose(const RigidTransform& other) const {
        RigidTransform out;
        out.rotation = rotation * other.rotation;
        out.translation = rotation * other.translation + translation;
        return out;
    }

    static RigidTransform identity() { return {}; }
};

inline bool is_rotation_matrix(const Mat3& r, double tol = 1e-9) {
    return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(r.determinant() - 1.0) <= tol;
}

// Rotation matrix from quaternion components (w,x,y,z) without normalizing.
// For unit quaternions this is the usual rotation; for raw values it stays a
// smooth polynomial map, which is what the fit gradients differentiate.
inline Mat3 quat_to_matrix_raw(double w, double x, double y, double z) {
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

// d(quat_to_matrix_raw)/d(component), component order w,x,y,z.
inline void quat_to_matrix_jacobian(double w, double x, double y, double z, Mat3 d[4]) {
    d[0] << 0, -z, y,
            z, 0, -x,
            -y, x, 0;
    d[1] << 0, y, z,
            y, -2 * x, -w,
            z, w, -2 * x;
    d[2] << -2 * y, x, w,
            x, 0, z,
            -w, z, -2 * y;
    d[3] << -2 * z, -w, x,
            w, -2 * z, y,
            x, y, 0;
    for (int i = 0; i < 4; ++i) d[i] *= 2.0;
}

} // namespace rfs
