#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mapmatch/rng.hpp"
#include "mapmatch/road_network.hpp"
#include "mapmatch/single_track.hpp"
#include "mapmatch/text.hpp"

namespace mapmatch {

enum class SamplingDistribution { uniform, exponential };

inline const char* distribution_name(SamplingDistribution d) {
    return d == SamplingDistribution::uniform ? "uniform" : "exponential";
}

inline SamplingDistribution parse_distribution(const std::string& s) {
    if (s == "uniform") return SamplingDistribution::uniform;
    if (s == "exponential") return SamplingDistribution::exponential;
    throw std::invalid_argument("unknown sampling distribution: " + s);
}

struct SamplingConfig {
    double sigma = 0;    // noise scale, meters (per axis)
    double tau = 1;      // sampling interval, seconds
    SamplingDistribution distribution = SamplingDistribution::uniform;
    std::uint64_t seed = 0;  // drivers seed their stream from this

    void validate() const {
        if (sigma < 0) throw std::invalid_argument("sampling: sigma must be >= 0");
        if (!(tau > 0)) throw std::invalid_argument("sampling: tau must be > 0");
    }
};

struct TruthSample {
    double t = 0;    // seconds from route start
    double arc = 0;  // meters along the route
    Point loc;
};

struct GroundTruth {
    RoutePath route;
    std::vector<std::pair<std::uint32_t, double>> speeds;  // first-traversal order
    std::vector<TruthSample> samples;
};

struct SimulatedTrack {
    Track track;
    GroundTruth truth;
};

/// A road point sitting on the given node (via its first outgoing edge).
inline RoadPoint node_road_point(const RoadNetwork& net, std::uint32_t node) {
    const auto& out = net.out_edges(node);
    if (out.empty()) throw std::runtime_error("node has no outgoing edges");
    const Edge& e = net.edge(out.front().edge);
    return net.road_point(e.id, out.front().forward ? 0.0 : e.length);
}

/// Shortest path between two random distinct nodes, redrawn until its
/// length lands in [min_len, max_len]. Throws after 10 000 rejections.
inline RoutePath generate_route(const RoadNetwork& net, Rng& rng, double min_len,
                                double max_len) {
    if (!(min_len >= 0) || !(max_len >= min_len))
        throw std::invalid_argument("route bounds: need 0 <= min <= max");
    const std::uint64_t n = net.node_count();
    for (int attempt = 0; attempt < 10000; ++attempt) {
        const std::uint32_t u = static_cast<std::uint32_t>(rng.below(n));
        const std::uint32_t v = static_cast<std::uint32_t>(rng.below(n));
        if (u == v) continue;
        const RoadPoint a = node_road_point(net, u);
        const RoadPoint b = node_road_point(net, v);
        const double d = net.driving_distance(a, b);
        if (is_reachable(d) && d >= min_len && d <= max_len) return net.shortest_route(a, b);
    }
    throw std::runtime_error("generate_route: no route within bounds after 10000 draws");
}

/// Sampling times within (0, duration]: the uniform mode ticks at
/// tau, 2*tau, ...; the exponential mode accumulates inter-arrival draws
/// with mean tau.
inline std::vector<double> generate_timestamps(double duration, const SamplingConfig& cfg,
                                               Rng& rng) {
    cfg.validate();
    if (!(duration > 0)) throw std::invalid_argument("timestamps: duration must be > 0");
    std::vector<double> ts;
    if (cfg.distribution == SamplingDistribution::uniform) {
        if (duration < cfg.tau)
            throw std::runtime_error("timestamps: duration shorter than sampling interval");
        for (std::size_t k = 1; k * cfg.tau <= duration + 1e-9; ++k)
            ts.push_back(static_cast<double>(k) * cfg.tau);
    } else {
        double t = 0;
        while (true) {
            t += rng.exponential(cfg.tau);
            if (t > duration) break;
            ts.push_back(t);
        }
        if (ts.empty()) throw std::runtime_error("timestamps: no arrivals within duration");
    }
    return ts;
}

/// Drives the route with per-edge speeds drawn uniformly from
/// [0.8, 1.2] times the speed limit, samples true positions at the
/// generated timestamps, and perturbs each with independent Gaussian
/// noise per axis. Draw order is fixed: speeds, then timestamps, then
/// noise, so a seeded stream reproduces the track byte for byte.
inline SimulatedTrack generate_track(const RoadNetwork& net, const RoutePath& route,
                                     const SamplingConfig& cfg, Rng& rng) {
    cfg.validate();
    if (route.entries.empty() || route.total_length <= 0)
        throw std::invalid_argument("generate_track: route has no length");

    GroundTruth truth;
    truth.route = route;
    std::unordered_map<std::uint32_t, double> speed_of;
    for (const PathEntry& e : route.entries) {
        if (speed_of.count(e.edge)) continue;
        const double limit = net.edge(e.edge).speed_limit;
        const double v = rng.uniform(0.8 * limit, 1.2 * limit);
        speed_of.emplace(e.edge, v);
        truth.speeds.emplace_back(e.edge, v);
    }

    // Per-entry cumulative travel time and arc length.
    struct Leg {
        const PathEntry* entry;
        double speed;
        double t0, t1;    // seconds
        double arc0;      // meters along route at entry start
    };
    std::vector<Leg> legs;
    double t = 0, arc = 0;
    for (const PathEntry& e : route.entries) {
        const double len = e.hi - e.lo;
        if (len <= 0) continue;
        const double v = speed_of.at(e.edge);
        legs.push_back(Leg{&e, v, t, t + len / v, arc});
        t += len / v;
        arc += len;
    }
    const double duration = t;

    const std::vector<double> times = generate_timestamps(duration, cfg, rng);

    std::vector<Sample> samples;
    samples.reserve(times.size());
    std::size_t leg = 0;
    for (const double tj : times) {
        while (leg + 1 < legs.size() && tj > legs[leg].t1) ++leg;
        const Leg& L = legs[leg];
        const PathEntry& e = *L.entry;
        const double s = std::clamp((tj - L.t0) * L.speed, 0.0, e.hi - e.lo);
        const double offset = e.forward ? e.lo + s : e.hi - s;
        const Point loc = net.edge(e.edge).geometry.point_at(offset);
        truth.samples.push_back(TruthSample{tj, L.arc0 + s, loc});

        const double gx = rng.normal();
        const double gy = rng.normal();
        samples.push_back(Sample{tj, Point{loc.x + cfg.sigma * gx, loc.y + cfg.sigma * gy}});
    }

    SimulatedTrack out;
    out.track = Track::from_samples(std::move(samples));
    out.truth = std::move(truth);
    return out;
}

/// Ground-truth file: the route's traversed intervals, the sampled edge
/// speeds, and the true positions behind each emitted sample.
inline std::string serialize_ground_truth(const GroundTruth& truth) {
    std::string out;
    out += "route\n";
    for (const PathEntry& e : truth.route.entries) {
        out += std::to_string(e.edge);
        out += ' ';
        out += format_double(e.lo);
        out += ' ';
        out += format_double(e.hi);
        out += ' ';
        out += e.forward ? '1' : '0';
        out += '\n';
    }
    out += "speeds\n";
    for (const auto& [edge, v] : truth.speeds) {
        out += std::to_string(edge);
        out += ' ';
        out += format_double(v);
        out += '\n';
    }
    out += "samples\n";
    for (const TruthSample& s : truth.samples) {
        out += format_double(s.t);
        out += ' ';
        out += format_double(s.arc);
        out += ' ';
        out += format_double(s.loc.x);
        out += ' ';
        out += format_double(s.loc.y);
        out += '\n';
    }
    return out;
}

inline GroundTruth parse_ground_truth(const std::string& text) {
    const auto lines = content_lines(text);
    GroundTruth truth;
    std::size_t i = 0;
    if (i >= lines.size() || lines[i] != "route")
        throw std::runtime_error("ground truth: expected route section");
    ++i;
    while (i < lines.size() && lines[i] != "speeds") {
        const auto f = split_ws(lines[i]);
        if (f.size() != 4) throw std::runtime_error("ground truth: bad route line");
        truth.route.entries.push_back(PathEntry{
            static_cast<std::uint32_t>(parse_int(f[0])), parse_double(f[1]),
            parse_double(f[2]), parse_int(f[3]) == 1});
        truth.route.total_length +=
            truth.route.entries.back().hi - truth.route.entries.back().lo;
        ++i;
    }
    if (i >= lines.size() || lines[i] != "speeds")
        throw std::runtime_error("ground truth: expected speeds section");
    ++i;
    while (i < lines.size() && lines[i] != "samples") {
        const auto f = split_ws(lines[i]);
        if (f.size() != 2) throw std::runtime_error("ground truth: bad speed line");
        truth.speeds.emplace_back(static_cast<std::uint32_t>(parse_int(f[0])),
                                  parse_double(f[1]));
        ++i;
    }
    if (i >= lines.size() || lines[i] != "samples")
        throw std::runtime_error("ground truth: expected samples section");
    ++i;
    while (i < lines.size()) {
        const auto f = split_ws(lines[i]);
        if (f.size() != 4) throw std::runtime_error("ground truth: bad sample line");
        truth.samples.push_back(TruthSample{parse_double(f[0]), parse_double(f[1]),
                                            Point{parse_double(f[2]), parse_double(f[3])}});
        ++i;
    }
    return truth;
}

inline void save_ground_truth(const GroundTruth& truth, const std::string& path) {
    write_text_file(path, serialize_ground_truth(truth));
}

inline GroundTruth load_ground_truth(const std::string& path) {
    return parse_ground_truth(read_text_file(path));
}

}  // namespace mapmatch
