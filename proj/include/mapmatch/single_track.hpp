#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mapmatch/geometry.hpp"
#include "mapmatch/road_network.hpp"
#include "mapmatch/text.hpp"

namespace mapmatch {

struct Sample {
    double t = 0;  // seconds
    Point loc;
};

/// Time-ordered noisy location samples.
struct Track {
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }

    static Track from_samples(std::vector<Sample> samples) {
        if (samples.empty()) throw std::invalid_argument("Track: needs at least one sample");
        for (std::size_t i = 1; i < samples.size(); ++i) {
            if (!(samples[i].t > samples[i - 1].t))
                throw std::invalid_argument("Track: timestamps must strictly increase");
        }
        Track tr;
        tr.samples = std::move(samples);
        return tr;
    }
};

/// Track file: one `t,x,y` row per sample; an optional header row and
/// #-comments are skipped.
inline Track parse_track(const std::string& text) {
    std::vector<Sample> samples;
    bool first = true;
    for (const std::string& line : content_lines(text)) {
        const auto fields = split(line, ',');
        if (fields.size() != 3) throw std::runtime_error("track: bad row: " + line);
        if (first) {
            first = false;
            double probe;
            if (!try_parse_double(trim(fields[0]), probe)) continue;  // header row
        }
        samples.push_back(Sample{parse_double(trim(fields[0])),
                                 Point{parse_double(trim(fields[1])),
                                       parse_double(trim(fields[2]))}});
    }
    if (samples.empty()) throw std::runtime_error("track: no samples");
    return Track::from_samples(std::move(samples));
}

inline std::string serialize_track(const Track& track) {
    std::string out = "t,x,y\n";
    for (const Sample& s : track.samples) {
        out += format_double(s.t);
        out += ',';
        out += format_double(s.loc.x);
        out += ',';
        out += format_double(s.loc.y);
        out += '\n';
    }
    return out;
}

inline Track load_track(const std::string& path) { return parse_track(read_text_file(path)); }

inline void save_track(const Track& track, const std::string& path) {
    write_text_file(path, serialize_track(track));
}

struct MatchConfig {
    double lambda = 1.0;
    double radius = 200.0;          // candidate search radius, meters
    int extra_candidates = 3;       // evenly spaced points per edge beyond the nearest
    int max_candidates_per_sample = 40;
    int radius_growth_cap = 3;      // doublings tried when a sample finds no edges

    void validate() const {
        if (lambda < 0) throw std::invalid_argument("match: lambda must be >= 0");
        if (!(radius > 0)) throw std::invalid_argument("match: radius must be > 0");
        if (extra_candidates < 0) throw std::invalid_argument("match: extra candidates < 0");
        if (max_candidates_per_sample < 1)
            throw std::invalid_argument("match: candidate cap must be >= 1");
        if (radius_growth_cap < 0) throw std::invalid_argument("match: growth cap < 0");
    }
};

struct Candidate {
    RoadPoint point;
    Point location;
    double data_cost = 0;  // squared distance sample -> candidate
};

/// Candidates for one sample: per edge within the radius, the nearest
/// point plus extra_candidates evenly spaced ones (midpoints of equal
/// subdivisions), deduplicated within 1 m and capped by ascending data
/// cost. An empty radius is doubled up to radius_growth_cap times.
inline std::vector<Candidate> generate_candidates(const RoadNetwork& net, const Point& sample,
                                                  const MatchConfig& cfg) {
    cfg.validate();
    std::vector<std::uint32_t> edges;
    double radius = cfg.radius;
    for (int attempt = 0; attempt <= cfg.radius_growth_cap; ++attempt) {
        edges = net.edges_within_radius(sample, radius);
        if (!edges.empty()) break;
        radius *= 2;
    }
    if (edges.empty())
        throw std::runtime_error("match: no candidates near sample after radius growth");

    std::vector<Candidate> all;
    for (std::uint32_t eid : edges) {
        const Edge& e = net.edge(eid);
        const auto proj = e.geometry.project(sample);
        std::vector<double> offsets{proj.arc_offset};
        const int n = cfg.extra_candidates;
        for (int i = 0; i < n; ++i) offsets.push_back((i + 0.5) * e.length / n);
        for (double off : offsets) {
            Candidate c;
            c.point = net.road_point(eid, off);
            c.location = net.point_of(c.point);
            c.data_cost = squared_distance(sample, c.location);
            all.push_back(c);
        }
    }

    std::stable_sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
        return a.data_cost < b.data_cost;
    });
    std::vector<Candidate> kept;
    for (const Candidate& c : all) {
        bool dup = false;
        for (const Candidate& k : kept) {
            if (distance(c.location, k.location) < 1.0) {
                dup = true;
                break;
            }
        }
        if (!dup) {
            kept.push_back(c);
            if (static_cast<int>(kept.size()) >= cfg.max_candidates_per_sample) break;
        }
    }
    return kept;
}

struct MatchResult {
    std::vector<RoadPoint> chosen;
    RoutePath path;
    double total_cost = 0;
    double data_cost = 0;
    double model_cost = 0;
};

/// Path through the chosen points as concatenated shortest routes.
inline RoutePath stitch_path(const RoadNetwork& net, const std::vector<RoadPoint>& chosen) {
    if (chosen.empty()) throw std::invalid_argument("stitch_path: no points");
    RoutePath path;
    if (chosen.size() == 1) {
        const RoadPoint p = net.road_point(chosen[0].edge, chosen[0].offset);
        path.append(p.edge, p.offset, p.offset, true);
        return path;
    }
    for (std::size_t i = 0; i + 1 < chosen.size(); ++i)
        path.append_path(net.shortest_route(chosen[i], chosen[i + 1]));
    if (path.entries.empty()) {
        const RoadPoint p = net.road_point(chosen[0].edge, chosen[0].offset);
        path.append(p.edge, p.offset, p.offset, true);
    }
    return path;
}

/// Minimizes sum of squared sample-to-point distances plus lambda times
/// the sum of squared driving distances between consecutive points, by
/// dynamic programming over per-sample candidate sets. Transitions with
/// no drivable path are forbidden.
inline MatchResult match_track(const RoadNetwork& net, const Track& track,
                               const MatchConfig& cfg) {
    cfg.validate();
    if (track.samples.empty()) throw std::invalid_argument("match: empty track");

    const std::size_t n = track.samples.size();
    std::vector<std::vector<Candidate>> layers(n);
    for (std::size_t j = 0; j < n; ++j)
        layers[j] = generate_candidates(net, track.samples[j].loc, cfg);

    // best[c] = minimal accumulated cost of a chain ending at candidate c.
    std::vector<double> best;
    std::vector<std::vector<std::int32_t>> back(n);
    best.reserve(layers[0].size());
    for (const Candidate& c : layers[0]) best.push_back(c.data_cost);
    back[0].assign(layers[0].size(), -1);

    std::vector<double> trans_min;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const auto& cur = layers[j];
        const auto& nxt = layers[j + 1];
        trans_min.assign(nxt.size(), kUnreachable);
        back[j + 1].assign(nxt.size(), -1);

        std::vector<RoadPoint> targets;
        targets.reserve(nxt.size());
        for (const Candidate& c : nxt) targets.push_back(c.point);

        for (std::size_t p = 0; p < cur.size(); ++p) {
            if (!is_reachable(best[p])) continue;
            const auto dists = net.one_to_many_distances(cur[p].point, targets);
            for (std::size_t c = 0; c < nxt.size(); ++c) {
                const double d = dists[c];
                if (!is_reachable(d)) continue;
                const double cand = best[p] + cfg.lambda * (d * d);
                if (cand < trans_min[c]) {
                    trans_min[c] = cand;
                    back[j + 1][c] = static_cast<std::int32_t>(p);
                }
            }
        }

        best.assign(nxt.size(), kUnreachable);
        bool any = false;
        for (std::size_t c = 0; c < nxt.size(); ++c) {
            if (!is_reachable(trans_min[c])) continue;
            best[c] = trans_min[c] + nxt[c].data_cost;
            any = true;
        }
        if (!any)
            throw std::runtime_error("match: no feasible chain (samples " +
                                     std::to_string(j) + " -> " + std::to_string(j + 1) + ")");
    }

    std::size_t tail = 0;
    for (std::size_t c = 1; c < best.size(); ++c)
        if (best[c] < best[tail]) tail = c;
    if (!is_reachable(best[tail])) throw std::runtime_error("match: no feasible chain");

    MatchResult result;
    result.total_cost = best[tail];
    std::vector<std::size_t> picks(n);
    picks[n - 1] = tail;
    for (std::size_t j = n - 1; j > 0; --j)
        picks[j - 1] = static_cast<std::size_t>(back[j][picks[j]]);
    result.chosen.reserve(n);
    for (std::size_t j = 0; j < n; ++j) result.chosen.push_back(layers[j][picks[j]].point);

    for (std::size_t j = 0; j < n; ++j) result.data_cost += layers[j][picks[j]].data_cost;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double d = net.driving_distance(result.chosen[j], result.chosen[j + 1]);
        result.model_cost += d * d;
    }
    result.path = stitch_path(net, result.chosen);
    return result;
}

/// Regularization weight that balances noise against sampling density:
/// calibration * (n * sigma / L)^(4/3).
inline double optimal_lambda(std::size_t n, double sigma, double path_length,
                             double calibration = 1.0) {
    if (n < 2) throw std::invalid_argument("optimal_lambda: need n >= 2");
    if (sigma < 0) throw std::invalid_argument("optimal_lambda: sigma must be >= 0");
    if (!(path_length > 0)) throw std::invalid_argument("optimal_lambda: length must be > 0");
    return calibration * std::pow(static_cast<double>(n) * sigma / path_length, 4.0 / 3.0);
}

/// Interleaved cross-validation folds: fold i of m takes samples
/// i, i+m, i+2m, ...
inline std::vector<std::vector<std::size_t>> cross_validation_folds(std::size_t n,
                                                                    std::size_t m) {
    if (m == 0 || m > n) throw std::invalid_argument("folds: need 1 <= m <= n");
    std::vector<std::vector<std::size_t>> folds(m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < n; j += m) folds[i].push_back(j);
    return folds;
}

/// Noise estimate by cross validation: match each fold's complement,
/// project the held-out samples onto the matched path, and average
/// sqrt(mean squared residual / 2) over folds. The factor 2 converts a
/// squared distance to a path (error in the across-path direction only)
/// into the per-axis noise scale.
inline double estimate_sigma(const RoadNetwork& net, const Track& track,
                             const MatchConfig& cfg) {
    const std::size_t n = track.samples.size();
    if (n < 4) throw std::invalid_argument("estimate_sigma: need at least 4 samples");
    const std::size_t m = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));

    MatchConfig inner = cfg;
    inner.lambda = 1.0;

    double sum = 0;
    std::size_t used = 0;
    for (const auto& fold : cross_validation_folds(n, m)) {
        std::vector<char> held(n, 0);
        for (std::size_t idx : fold) held[idx] = 1;
        std::vector<Sample> rest;
        rest.reserve(n - fold.size());
        for (std::size_t j = 0; j < n; ++j)
            if (!held[j]) rest.push_back(track.samples[j]);
        if (rest.empty()) continue;

        MatchResult matched;
        try {
            matched = match_track(net, Track::from_samples(std::move(rest)), inner);
        } catch (const std::exception&) {
            continue;  // fold skipped; complement had no feasible chain
        }
        const PathGeometry geom(net, matched.path);
        double sq = 0;
        for (std::size_t idx : fold) {
            const double d = geom.project(track.samples[idx].loc).distance;
            sq += d * d;
        }
        sum += std::sqrt(sq / static_cast<double>(fold.size()) / 2.0);
        ++used;
    }
    if (used == 0) throw std::runtime_error("estimate_sigma: every fold failed to match");
    return sum / static_cast<double>(used);
}

/// Match result file: costs, chosen road points, traversed intervals.
inline std::string serialize_match_result(const MatchResult& r) {
    std::string out;
    out += "costs ";
    out += format_double(r.total_cost);
    out += ' ';
    out += format_double(r.data_cost);
    out += ' ';
    out += format_double(r.model_cost);
    out += '\n';
    out += "points\n";
    for (const RoadPoint& p : r.chosen) {
        out += std::to_string(p.edge);
        out += ' ';
        out += format_double(p.offset);
        out += '\n';
    }
    out += "path\n";
    for (const PathEntry& e : r.path.entries) {
        out += std::to_string(e.edge);
        out += ' ';
        out += format_double(e.lo);
        out += ' ';
        out += format_double(e.hi);
        out += ' ';
        out += e.forward ? '1' : '0';
        out += '\n';
    }
    return out;
}

inline MatchResult parse_match_result(const std::string& text) {
    const auto lines = content_lines(text);
    MatchResult r;
    std::size_t i = 0;
    if (i >= lines.size() || lines[i].rfind("costs ", 0) != 0)
        throw std::runtime_error("match result: expected costs line");
    {
        const auto fields = split_ws(lines[i]);
        if (fields.size() != 4) throw std::runtime_error("match result: bad costs line");
        r.total_cost = parse_double(fields[1]);
        r.data_cost = parse_double(fields[2]);
        r.model_cost = parse_double(fields[3]);
        ++i;
    }
    if (i >= lines.size() || lines[i] != "points")
        throw std::runtime_error("match result: expected points section");
    ++i;
    while (i < lines.size() && lines[i] != "path") {
        const auto fields = split_ws(lines[i]);
        if (fields.size() != 2) throw std::runtime_error("match result: bad point line");
        r.chosen.push_back(RoadPoint{static_cast<std::uint32_t>(parse_int(fields[0])),
                                     parse_double(fields[1])});
        ++i;
    }
    if (i >= lines.size() || lines[i] != "path")
        throw std::runtime_error("match result: expected path section");
    ++i;
    while (i < lines.size()) {
        const auto fields = split_ws(lines[i]);
        if (fields.size() != 4) throw std::runtime_error("match result: bad path line");
        PathEntry e;
        e.edge = static_cast<std::uint32_t>(parse_int(fields[0]));
        e.lo = parse_double(fields[1]);
        e.hi = parse_double(fields[2]);
        e.forward = parse_int(fields[3]) == 1;
        r.path.entries.push_back(e);
        r.path.total_length += e.hi - e.lo;
        ++i;
    }
    return r;
}

}  // namespace mapmatch
