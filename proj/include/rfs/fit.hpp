#pragma once

#include <cmath>
#include <vector>

#include "rfs/render.hpp"

namespace rfs {

struct View {
    Image image;
    CameraPose camera;
};

// Per-gaussian parameter gradient, same layout as Gaussian3D.
struct GaussianGrad {
    Vec3 position = Vec3::Zero();
    Vec3 scale = Vec3::Zero();
    Vec4 rotation = Vec4::Zero(); // (w,x,y,z)
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
};

namespace detail {

// Screen-space gradient accumulator for one prepared splat.
struct Grad2D {
    Vec2 mean = Vec2::Zero();
    Mat2 cov = Mat2::Zero();
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
    Vec3 background = Vec3::Zero(); // unused per-splat, kept for clarity
};

struct PixelContribution {
    const PreparedSplat* splat;
    double alpha;        // clamped opacity * weight
    double weight;       // exp term
    Vec2 md;             // inv_cov * (pixel - mean)
    double transmittance; // at entry
};

// Chains screen-space gradients of one splat back to its 3D parameters.
inline void chain_to_params(const PreparedSplat& p, const Grad2D& g2, const Gaussian3D& g,
                            const CameraPose& cam, GaussianGrad& out) {
    Vec3 t = cam.rotation * g.position + cam.translation;
    double tz = t.z(), tz2 = tz * tz, tz3 = tz2 * tz;

    Eigen::Matrix<double, 2, 3> jac;
    jac << cam.fx / tz, 0.0, -cam.fx * t.x() / tz2,
           0.0, cam.fy / tz, -cam.fy * t.y() / tz2;
    Eigen::Matrix<double, 2, 3> a = jac * cam.rotation;

    double w = g.rotation.w(), x = g.rotation.x(), y = g.rotation.y(), z = g.rotation.z();
    Mat3 rq = quat_to_matrix_raw(w, x, y, z);
    Mat3 m = rq * g.scale.asDiagonal();
    Mat3 sigma = m * m.transpose();

    const Mat2& gc = g2.cov;
    Mat3 d_sigma = a.transpose() * gc * a;
    Eigen::Matrix<double, 2, 3> d_a = (gc + gc.transpose()) * a * sigma;
    Eigen::Matrix<double, 2, 3> d_jac = d_a * cam.rotation.transpose();

    Vec3 d_t = Vec3::Zero();
    d_t.x() += d_jac(0, 2) * (-cam.fx / tz2);
    d_t.y() += d_jac(1, 2) * (-cam.fy / tz2);
    d_t.z() += d_jac(0, 0) * (-cam.fx / tz2) + d_jac(1, 1) * (-cam.fy / tz2) +
               d_jac(0, 2) * (2.0 * cam.fx * t.x() / tz3) + d_jac(1, 2) * (2.0 * cam.fy * t.y() / tz3);
    d_t += jac.transpose() * g2.mean;
    out.position += cam.rotation.transpose() * d_t;

    Mat3 d_m = (d_sigma + d_sigma.transpose()) * m;
    Mat3 rq_t_dm = rq.transpose() * d_m;
    for (int k = 0; k < 3; ++k) out.scale[k] += rq_t_dm(k, k);

    Mat3 d_rq = d_m * g.scale.asDiagonal();
    Mat3 dr[4];
    quat_to_matrix_jacobian(w, x, y, z, dr);
    for (int j = 0; j < 4; ++j) out.rotation[j] += d_rq.cwiseProduct(dr[j]).sum();

    out.opacity += g2.opacity;
    out.color += g2.color;
}

} // namespace detail

// Mean over views of per-view image MSE against the targets, with analytic
// gradients for every gaussian parameter. The forward pass mirrors render()
// exactly (same footprint test, same compositing order, same early stop).
inline double splat_loss_and_gradients(const SplatModel& model, const std::vector<View>& views,
                                       std::vector<GaussianGrad>* grads,
                                       const Vec3& background = Vec3::Zero(),
                                       const RenderOptions& opt = {}) {
    if (views.empty()) throw ConfigError("fit requires at least one view");
    if (grads) {
        grads->assign(model.size(), GaussianGrad{});
    }

    double total_loss = 0.0;
    const double view_count = static_cast<double>(views.size());

    std::vector<detail::PixelContribution> contribs;
    for (const auto& view : views) {
        const CameraPose& cam = view.camera;
        validate(cam);
        if (view.image.height != cam.height || view.image.width != cam.width)
            throw ConfigError("view image size does not match its camera");

        auto prepared = detail::prepare_splats(model, cam);
        std::vector<detail::Grad2D> grad2d(prepared.size());

        const double pixel_values = static_cast<double>(cam.height) * cam.width * 3.0;
        double view_loss = 0.0;

        for (int yy = 0; yy < cam.height; ++yy) {
            for (int xx = 0; xx < cam.width; ++xx) {
                Vec2 pix(xx + 0.5, yy + 0.5);
                contribs.clear();
                Vec3 color = Vec3::Zero();
                double transmittance = 1.0;
                for (size_t si = 0; si < prepared.size(); ++si) {
                    const auto& p = prepared[si];
                    if (xx < p.x0 || xx > p.x1 || yy < p.y0 || yy > p.y1) continue;
                    Vec2 md;
                    double weight = detail::gaussian_weight(p, pix, &md);
                    double alpha = std::min(p.splat.opacity * weight, kAlphaMax);
                    contribs.push_back({&p, alpha, weight, md, transmittance});
                    color += p.splat.color * (alpha * transmittance);
                    transmittance *= 1.0 - alpha;
                    if (transmittance < opt.transmittance_floor) break;
                }
                color += background * transmittance;
                Vec3 residual = color - view.image.pixel(yy, xx);
                view_loss += residual.squaredNorm();
                if (!grads) continue;

                Vec3 dldc = residual * (2.0 / (pixel_values * view_count));
                Vec3 rest = background * transmittance; // color behind the current splat
                for (size_t ci = contribs.size(); ci-- > 0;) {
                    const auto& ct = contribs[ci];
                    detail::Grad2D& gg = grad2d[static_cast<size_t>(ct.splat - prepared.data())];
                    Vec3 dc_dalpha = ct.splat->splat.color * ct.transmittance - rest / (1.0 - ct.alpha);
                    double g_alpha = dc_dalpha.dot(dldc);
                    gg.color += dldc * (ct.alpha * ct.transmittance);
                    rest += ct.splat->splat.color * (ct.alpha * ct.transmittance);

                    double raw = ct.splat->splat.opacity * ct.weight;
                    if (raw > 0.0 && raw < kAlphaMax) {
                        double g_weight = g_alpha * ct.splat->splat.opacity;
                        gg.opacity += g_alpha * ct.weight;
                        gg.mean += (g_weight * ct.weight) * ct.md;
                        gg.cov += (g_weight * 0.5 * ct.weight) * (ct.md * ct.md.transpose());
                    }
                }
            }
        }
        total_loss += view_loss / pixel_values;

        if (grads) {
            for (size_t si = 0; si < prepared.size(); ++si)
                detail::chain_to_params(prepared[si], grad2d[si], model.gaussians[prepared[si].index],
                                        cam, (*grads)[prepared[si].index]);
        }
    }
    return total_loss / view_count;
}

struct FitOptions {
    // Per-parameter-group step scaling; a single global step size times these.
    double position_scale = 1.0;
    double scale_scale = 0.2;
    double rotation_scale = 0.1;
    double opacity_scale = 1.0;
    double color_scale = 1.0;
    Vec3 background = Vec3::Zero();
};

struct FitResult {
    SplatModel model;
    std::vector<double> loss_trace; // steps + 1 entries, initial loss first
};

// Plain gradient descent on the rendering MSE. Parameters are projected back
// to their invariants (unit quaternion, positive scale, clamped opacity and
// color) after every step.
inline FitResult fit_model(const SplatModel& init, const std::vector<View>& views, int steps,
                           double step_size, const FitOptions& opt = {}) {
    if (steps < 0) throw ConfigError("fit steps must be >= 0");
    FitResult result;
    result.model = init;
    result.loss_trace.reserve(static_cast<size_t>(steps) + 1);

    std::vector<GaussianGrad> grads;
    for (int step = 0; step < steps; ++step) {
        double loss = splat_loss_and_gradients(result.model, views, &grads, opt.background);
        if (!std::isfinite(loss))
            throw NumericError("fit_model: non-finite loss at step " + fmt_int(step));
        result.loss_trace.push_back(loss);
        for (size_t i = 0; i < result.model.gaussians.size(); ++i) {
            Gaussian3D& g = result.model.gaussians[i];
            const GaussianGrad& gr = grads[i];
            g.position -= step_size * opt.position_scale * gr.position;
            g.scale -= step_size * opt.scale_scale * gr.scale;
            g.rotation.w() -= step_size * opt.rotation_scale * gr.rotation[0];
            g.rotation.x() -= step_size * opt.rotation_scale * gr.rotation[1];
            g.rotation.y() -= step_size * opt.rotation_scale * gr.rotation[2];
            g.rotation.z() -= step_size * opt.rotation_scale * gr.rotation[3];
            g.opacity -= step_size * opt.opacity_scale * gr.opacity;
            g.color -= step_size * opt.color_scale * gr.color;
            clamp_to_invariants(g);
        }
    }
    double final_loss = splat_loss_and_gradients(result.model, views, nullptr, opt.background);
    if (!std::isfinite(final_loss))
        throw NumericError("fit_model: non-finite loss at step " + fmt_int(steps));
    result.loss_trace.push_back(final_loss);
    return result;
}

} // namespace rfs
