#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "rfs/align.hpp"
#include "rfs/fit.hpp"
#include "rfs/splat_io.hpp"

namespace rfs {

struct DeviceNode {
    int id = 0;
    std::vector<View> dataset;
    SplatModel model;
    RigidTransform to_edge; // device frame -> edge frame
    double compute_rate = 1e6; // work-units/s
    double uplink_bps = 1e6;
};

struct EdgeNode {
    int id = 0;
    std::vector<int> device_ids;
    SplatModel model;
    RigidTransform to_cloud; // edge frame -> cloud frame
    double uplink_bps = 1e7;
};

struct FedTopology {
    std::vector<DeviceNode> devices;
    std::vector<EdgeNode> edges;
};

struct FedSchedule {
    int sgd_steps_per_inner = 1;
    int inner_iters_per_outer = 1;
    int outer_iters = 1;
};

inline void validate(const FedSchedule& s) {
    if (s.sgd_steps_per_inner < 1 || s.inner_iters_per_outer < 1 || s.outer_iters < 1)
        throw ConfigError("federated schedule values must all be >= 1");
}

inline void validate(FedTopology& t) {
    if (t.devices.empty() || t.edges.empty())
        throw ConfigError("federated topology needs at least one device and one edge");
    // merges run in device-id order
    for (auto& e : t.edges) std::sort(e.device_ids.begin(), e.device_ids.end());
    std::map<int, int> device_owner;
    for (const auto& e : t.edges)
        for (int k : e.device_ids) {
            if (device_owner.count(k))
                throw ConfigError("device " + fmt_int(k) + " assigned to edges " + fmt_int(device_owner[k]) +
                                  " and " + fmt_int(e.id));
            device_owner[k] = e.id;
        }
    for (const auto& d : t.devices) {
        if (!device_owner.count(d.id))
            throw ConfigError("device " + fmt_int(d.id) + " is not associated with any edge");
        if (d.dataset.empty())
            throw ConfigError("participating device " + fmt_int(d.id) + " has an empty dataset");
    }
}

struct LocalTrainResult {
    SplatModel model;
    std::vector<double> loss_trace;
    double work_units = 0.0;
};

// Local SGD on the device dataset. Work-units use the cost proxy
// steps * gaussians * total pixels.
inline LocalTrainResult local_train(const DeviceNode& node, int steps, double step_size,
                                    const FitOptions& opt = {}) {
    double pixels = 0.0;
    for (const auto& v : node.dataset) pixels += static_cast<double>(v.image.height) * v.image.width;
    FitResult fit = fit_model(node.model, node.dataset, steps, step_size, opt);
    LocalTrainResult out;
    out.model = std::move(fit.model);
    out.loss_trace = std::move(fit.loss_trace);
    out.work_units = static_cast<double>(steps) * static_cast<double>(node.model.size()) * pixels;
    return out;
}

// Rigidly moves every gaussian into the target frame: positions by R*p + t,
// orientations by quaternion left-multiplication, scales untouched.
inline SplatModel transform_model(const SplatModel& m, const RigidTransform& t) {
    SplatModel out = m;
    Quat qr(t.rotation);
    qr.normalize();
    for (auto& g : out.gaussians) {
        g.position = t.apply(g.position);
        g.rotation = (qr * g.rotation).normalized();
    }
    return out;
}

// Set-union aggregation: transform each model into the common frame, then
// concatenate in the given order. No deduplication.
inline SplatModel merge_models(const std::vector<std::pair<SplatModel, RigidTransform>>& parts) {
    SplatModel out;
    size_t total = 0;
    for (const auto& [m, t] : parts) total += m.size();
    out.gaussians.reserve(total);
    for (const auto& [m, t] : parts) {
        SplatModel moved = transform_model(m, t);
        out.gaussians.insert(out.gaussians.end(), moved.gaussians.begin(), moved.gaussians.end());
    }
    return out;
}

inline SplatModel edge_aggregate(const std::vector<std::pair<SplatModel, RigidTransform>>& locals) {
    return merge_models(locals);
}

inline SplatModel cloud_aggregate(const std::vector<std::pair<SplatModel, RigidTransform>>& edges) {
    return merge_models(edges);
}

// Re-targets a camera whose extrinsic maps frame-local world coordinates so
// that it views points given in the destination frame instead.
inline CameraPose transform_camera(const CameraPose& cam, const RigidTransform& local_to_dst) {
    CameraPose out = cam;
    out.rotation = cam.rotation * local_to_dst.rotation.transpose();
    out.translation = cam.translation - out.rotation * local_to_dst.translation;
    return out;
}

struct NodeUsage {
    double uplink_bits = 0.0;
    double downlink_bits = 0.0;
    double compute_units = 0.0;
};

struct FedRound {
    int outer_round = 0;
    double global_loss = 0.0;
    double total_uplink_bits = 0.0;
    double total_compute_units = 0.0;
    double round_latency_s = 0.0;
    double edge_uplink_bits = 0.0;   // edge->cloud share of the uplink total
    double cloud_received_bits = 0.0;
};

struct ResourceLedger {
    std::map<int, NodeUsage> devices;
    std::map<int, NodeUsage> edges;
    std::vector<double> round_latency_s;
};

struct FedConfig {
    double step_size = 0.5;
    FitOptions fit;
    double prune_threshold = -1.0; // < 0 disables the post-merge prune
};

struct FedHistory {
    std::vector<FedRound> rounds; // round 0 is the pre-training state
    ResourceLedger ledger;
    SplatModel global_model;
};

namespace detail {

inline double global_loss_over_devices(const SplatModel& global, const FedTopology& topo,
                                       const Vec3& background) {
    std::vector<View> all_views;
    for (const auto& e : topo.edges) {
        for (int k : e.device_ids) {
            const DeviceNode* dev = nullptr;
            for (const auto& d : topo.devices)
                if (d.id == k) dev = &d;
            if (!dev) throw ConfigError("edge references unknown device " + fmt_int(k));
            RigidTransform to_cloud = e.to_cloud.compose(dev->to_edge);
            for (const auto& v : dev->dataset)
                all_views.push_back({v.image, transform_camera(v.camera, to_cloud)});
        }
    }
    return splat_loss_and_gradients(global, all_views, nullptr, background);
}

} // namespace detail

// Hierarchical schedule: outer rounds of (inner rounds of local SGD +
// device->edge upload + edge union) followed by edge->cloud upload and the
// cloud union. Devices within a round are logically parallel, so per-round
// latency takes the slowest node at each stage.
inline FedHistory run_hier_fed(FedTopology topology, const FedSchedule& schedule, const FedConfig& cfg = {}) {
    validate(schedule);
    validate(topology);

    FedHistory hist;
    auto device_by_id = [&](int id) -> DeviceNode& {
        for (auto& d : topology.devices)
            if (d.id == id) return d;
        throw ConfigError("edge references unknown device " + fmt_int(id));
    };

    auto aggregate_all = [&]() {
        for (auto& e : topology.edges) {
            std::vector<std::pair<SplatModel, RigidTransform>> parts;
            for (int k : e.device_ids) {
                DeviceNode& d = device_by_id(k);
                parts.emplace_back(d.model, d.to_edge);
            }
            e.model = edge_aggregate(parts);
        }
        std::vector<std::pair<SplatModel, RigidTransform>> parts;
        for (auto& e : topology.edges) parts.emplace_back(e.model, e.to_cloud);
        SplatModel global = cloud_aggregate(parts);
        if (cfg.prune_threshold >= 0.0) global = prune_by_opacity(global, cfg.prune_threshold);
        return global;
    };

    hist.global_model = aggregate_all();
    FedRound initial;
    initial.outer_round = 0;
    initial.global_loss = detail::global_loss_over_devices(hist.global_model, topology, cfg.fit.background);
    hist.rounds.push_back(initial);

    for (int outer = 1; outer <= schedule.outer_iters; ++outer) {
        FedRound round;
        round.outer_round = outer;
        double latency = 0.0;

        for (int inner = 0; inner < schedule.inner_iters_per_outer; ++inner) {
            double inner_latency = 0.0;
            for (auto& e : topology.edges) {
                for (int k : e.device_ids) {
                    DeviceNode& dev = device_by_id(k);
                    LocalTrainResult r = local_train(dev, schedule.sgd_steps_per_inner, cfg.step_size, cfg.fit);
                    dev.model = std::move(r.model);
                    double bits = static_cast<double>(serialized_model_bytes(dev.model)) * 8.0;
                    hist.ledger.devices[dev.id].compute_units += r.work_units;
                    hist.ledger.devices[dev.id].uplink_bits += bits;
                    round.total_compute_units += r.work_units;
                    round.total_uplink_bits += bits;
                    inner_latency = std::max(inner_latency, r.work_units / dev.compute_rate + bits / dev.uplink_bps);
                }
            }
            for (auto& e : topology.edges) {
                std::vector<std::pair<SplatModel, RigidTransform>> parts;
                for (int k : e.device_ids) parts.emplace_back(device_by_id(k).model, device_by_id(k).to_edge);
                e.model = edge_aggregate(parts);
            }
            latency += inner_latency;
        }

        double edge_latency = 0.0;
        for (auto& e : topology.edges) {
            double bits = static_cast<double>(serialized_model_bytes(e.model)) * 8.0;
            hist.ledger.edges[e.id].uplink_bits += bits;
            round.total_uplink_bits += bits;
            round.edge_uplink_bits += bits;
            edge_latency = std::max(edge_latency, bits / e.uplink_bps);
        }
        round.cloud_received_bits = round.edge_uplink_bits;
        latency += edge_latency;

        std::vector<std::pair<SplatModel, RigidTransform>> parts;
        for (auto& e : topology.edges) parts.emplace_back(e.model, e.to_cloud);
        hist.global_model = cloud_aggregate(parts);
        if (cfg.prune_threshold >= 0.0) hist.global_model = prune_by_opacity(hist.global_model, cfg.prune_threshold);

        round.round_latency_s = latency;
        round.global_loss = detail::global_loss_over_devices(hist.global_model, topology, cfg.fit.background);
        hist.ledger.round_latency_s.push_back(latency);
        hist.rounds.push_back(round);
    }
    return hist;
}

} // namespace rfs
