#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rfs/errors.hpp"
#include "rfs/text.hpp"

namespace rfs {

struct LinkProfile {
    double uplink_bps = 1e6;
    double downlink_bps = 1e6;
    double propagation_s = 0.0;
    // optional piecewise-constant rate over time (time_s, bits/s), times ascending
    std::vector<std::pair<double, double>> rate_trace;

    // Content rate at time t: the trace if present, else the downlink.
    double rate_at(double t) const {
        if (rate_trace.empty()) return downlink_bps;
        double r = rate_trace.front().second;
        for (const auto& [time, rate] : rate_trace) {
            if (time > t) break;
            r = rate;
        }
        return r;
    }
};

inline void validate(const LinkProfile& l) {
    if (l.uplink_bps <= 0.0 || l.downlink_bps <= 0.0)
        throw ConfigError("link rates must be positive");
    for (size_t i = 0; i + 1 < l.rate_trace.size(); ++i)
        if (l.rate_trace[i].first >= l.rate_trace[i + 1].first)
            throw ConfigError("rate trace times must be strictly increasing");
    for (const auto& [t, r] : l.rate_trace)
        if (r <= 0.0) throw ConfigError("rate trace rates must be positive");
}

struct RenderWorkload {
    double model_bits = 0.0;
    double viewinfo_bits = 0.0;
    double image_bits = 0.0;
    double intermediate_bits = 0.0; // co-rendering features
    double device_compute_rate = 1.0; // work-units/s
    double server_compute_rate = 1.0;
    double render_work_device = 0.0;  // work-units
    double render_work_server = 0.0;
};

enum class RenderArch { local, edge, co };

inline const char* arch_name(RenderArch a) {
    switch (a) {
        case RenderArch::local: return "local";
        case RenderArch::edge: return "edge";
        default: return "co";
    }
}

struct LatencyBreakdown {
    double deploy_s = 0.0;
    double uplink_s = 0.0;
    double compute_s = 0.0;
    double downlink_s = 0.0;
    double total_s = 0.0;
};

namespace detail {

inline double compute_time(double work, double rate, const char* who) {
    if (work == 0.0) return 0.0;
    if (rate <= 0.0)
        throw ConfigError(std::string("zero compute rate with nonzero work at ") + who);
    return work / rate;
}

} // namespace detail

// End-to-end latency of one rendered view under the three deployments.
// local: (model download unless already deployed) + on-device render.
// edge: view info up, server render, image down, round-trip propagation.
// co: device partial render, intermediate features up, server render,
// image down, round-trip propagation.
inline LatencyBreakdown latency(RenderArch arch, const RenderWorkload& w, const LinkProfile& link,
                                bool model_deployed) {
    validate(link);
    if (w.model_bits < 0 || w.viewinfo_bits < 0 || w.image_bits < 0 || w.intermediate_bits < 0 ||
        w.render_work_device < 0 || w.render_work_server < 0)
        throw ConfigError("render workload values must be non-negative");

    LatencyBreakdown out;
    switch (arch) {
        case RenderArch::local:
            out.deploy_s = model_deployed ? 0.0 : w.model_bits / link.downlink_bps;
            out.compute_s = detail::compute_time(w.render_work_device, w.device_compute_rate, "device");
            break;
        case RenderArch::edge:
            out.uplink_s = w.viewinfo_bits / link.uplink_bps + link.propagation_s;
            out.compute_s = detail::compute_time(w.render_work_server, w.server_compute_rate, "server");
            out.downlink_s = w.image_bits / link.downlink_bps + link.propagation_s;
            break;
        case RenderArch::co:
            out.uplink_s = w.intermediate_bits / link.uplink_bps + link.propagation_s;
            out.compute_s = detail::compute_time(w.render_work_device, w.device_compute_rate, "device") +
                            detail::compute_time(w.render_work_server, w.server_compute_rate, "server");
            out.downlink_s = w.image_bits / link.downlink_bps + link.propagation_s;
            break;
    }
    out.total_s = out.deploy_s + out.uplink_s + out.compute_s + out.downlink_s;
    return out;
}

} // namespace rfs
