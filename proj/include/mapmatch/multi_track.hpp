#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mapmatch/jacobi.hpp"
#include "mapmatch/rng.hpp"
#include "mapmatch/road_network.hpp"
#include "mapmatch/single_track.hpp"

namespace mapmatch {

/// A pooled sample: which track it came from, its rank within that
/// track's time order, and its location. Global sample ids are positions
/// in TrackSet::pooled.
struct PooledSample {
    std::int32_t track = 0;
    std::int32_t rank = 0;
    Point loc;
};

struct TrackSet {
    std::vector<Track> tracks;
    std::vector<PooledSample> pooled;

    static TrackSet from_tracks(std::vector<Track> tracks) {
        if (tracks.empty()) throw std::invalid_argument("TrackSet: needs at least one track");
        TrackSet ts;
        ts.tracks = std::move(tracks);
        for (std::size_t k = 0; k < ts.tracks.size(); ++k) {
            const auto& samples = ts.tracks[k].samples;
            for (std::size_t r = 0; r < samples.size(); ++r)
                ts.pooled.push_back(PooledSample{static_cast<std::int32_t>(k),
                                                 static_cast<std::int32_t>(r),
                                                 samples[r].loc});
        }
        return ts;
    }

    std::size_t sample_count() const { return pooled.size(); }
};

/// A permutation over a subset of pooled sample ids.
using Ordering = std::vector<std::int32_t>;

using DistanceMatrix = std::vector<std::vector<double>>;

/// Restriction of a track set to a subset of pooled samples, with the
/// map from new global ids back to the originals. Tracks left empty by
/// the restriction disappear.
struct TrackSubset {
    TrackSet set;
    std::vector<std::int32_t> original;
};

inline TrackSubset subset_trackset(const TrackSet& ts, const std::vector<std::int32_t>& keep) {
    std::vector<char> included(ts.pooled.size(), 0);
    for (std::int32_t id : keep) {
        if (id < 0 || static_cast<std::size_t>(id) >= ts.pooled.size())
            throw std::invalid_argument("subset: sample id out of range");
        included[id] = 1;
    }
    std::vector<Track> tracks;
    std::vector<std::int32_t> original;
    std::int32_t global = 0;
    for (const Track& tr : ts.tracks) {
        std::vector<Sample> samples;
        for (std::size_t r = 0; r < tr.samples.size(); ++r, ++global) {
            if (!included[global]) continue;
            samples.push_back(tr.samples[r]);
            original.push_back(global);
        }
        if (!samples.empty()) tracks.push_back(Track::from_samples(std::move(samples)));
    }
    if (tracks.empty()) throw std::invalid_argument("subset: no samples kept");
    TrackSubset out;
    out.set = TrackSet::from_tracks(std::move(tracks));
    out.original = std::move(original);
    return out;
}

/// Pooled samples arranged by the given ordering as a single track with
/// ordinal timestamps (the matcher never reads absolute times).
inline Track track_from_ordering(const TrackSet& ts, const Ordering& order) {
    if (order.empty()) throw std::invalid_argument("ordering: empty");
    std::vector<Sample> samples;
    samples.reserve(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::int32_t id = order[i];
        if (id < 0 || static_cast<std::size_t>(id) >= ts.pooled.size())
            throw std::invalid_argument("ordering: sample id out of range");
        samples.push_back(Sample{static_cast<double>(i), ts.pooled[id].loc});
    }
    return Track::from_samples(std::move(samples));
}

inline Ordering time_ordering(const TrackSet& ts) {
    Ordering order(ts.pooled.size());
    std::iota(order.begin(), order.end(), 0);
    return order;
}

/// Track whose sample chain best explains everyone else's samples:
/// minimizes the sum over other tracks' samples of the distance to this
/// track's chain. Ties go to the lower index.
inline std::size_t select_initial_track(const TrackSet& ts) {
    const std::size_t m = ts.tracks.size();
    if (m == 0) throw std::invalid_argument("select_initial_track: no tracks");
    if (m == 1) return 0;

    std::vector<PathGeometry> chains;
    chains.reserve(m);
    for (const Track& tr : ts.tracks) {
        std::vector<Point> pts;
        pts.reserve(tr.samples.size());
        for (const Sample& s : tr.samples) pts.push_back(s.loc);
        chains.emplace_back(std::move(pts));
    }

    std::size_t best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
        double score = 0;
        for (const PooledSample& ps : ts.pooled) {
            if (ps.track == static_cast<std::int32_t>(k)) continue;
            score += chains[k].project(ps.loc).distance;
        }
        if (score < best_score) {
            best_score = score;
            best = k;
        }
    }
    return best;
}

/// Orders all pooled samples by arc position along a matched path,
/// re-matching the reordered pool until the ordering stops changing (or
/// max_rounds is hit). Starts from the best-covering track's match.
inline Ordering iterative_projection_order(const RoadNetwork& net, const TrackSet& ts,
                                           const MatchConfig& cfg, int max_rounds = 20) {
    if (ts.tracks.size() == 1) return time_ordering(ts);

    const std::size_t start = select_initial_track(ts);
    MatchResult current = match_track(net, ts.tracks[start], cfg);

    Ordering prev;
    for (int round = 0; round < max_rounds; ++round) {
        const PathGeometry geom(net, current.path);
        std::vector<std::pair<double, std::int32_t>> keyed;
        keyed.reserve(ts.pooled.size());
        for (std::size_t i = 0; i < ts.pooled.size(); ++i)
            keyed.emplace_back(geom.project(ts.pooled[i].loc).arc_offset,
                               static_cast<std::int32_t>(i));
        std::sort(keyed.begin(), keyed.end());
        Ordering order;
        order.reserve(keyed.size());
        for (const auto& [arc, id] : keyed) order.push_back(id);

        if (order == prev) return order;
        prev = std::move(order);
        current = match_track(net, track_from_ordering(ts, prev), cfg);
    }
    return prev;
}

/// Pairwise sample distances estimated through the two samples' own
/// matched track paths: residual of each sample to the path plus the
/// along-path distance between their feet, averaged over both paths.
inline DistanceMatrix build_distance_matrix(const RoadNetwork& net, const TrackSet& ts,
                                            const MatchConfig& cfg) {
    const std::size_t m = ts.tracks.size();
    const std::size_t n = ts.pooled.size();

    std::vector<PathGeometry> paths;
    paths.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
        try {
            paths.emplace_back(net, match_track(net, ts.tracks[k], cfg).path);
        } catch (const std::exception& e) {
            throw std::runtime_error("distance matrix: track " + std::to_string(k) +
                                     " failed to match: " + e.what());
        }
    }

    // proj[k][i]: sample i seen from track k's path.
    std::vector<std::vector<PolylineProjection>> proj(m);
    for (std::size_t k = 0; k < m; ++k) {
        proj[k].reserve(n);
        for (const PooledSample& ps : ts.pooled) proj[k].push_back(paths[k].project(ps.loc));
    }

    DistanceMatrix d(n, std::vector<double>(n, 0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const std::size_t k = static_cast<std::size_t>(ts.pooled[i].track);
            const std::size_t l = static_cast<std::size_t>(ts.pooled[j].track);
            const double via_k = proj[k][i].distance + proj[k][j].distance +
                                 std::abs(proj[k][i].arc_offset - proj[k][j].arc_offset);
            const double via_l = proj[l][i].distance + proj[l][j].distance +
                                 std::abs(proj[l][i].arc_offset - proj[l][j].arc_offset);
            d[i][j] = d[j][i] = (via_k + via_l) / 2;
        }
    }
    return d;
}

/// Decay constant for the exponential edge weights: halves the weight at
/// the median positive distance, making the ordering scale-free.
inline double laplacian_scale(const DistanceMatrix& d) {
    std::vector<double> positive;
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = i + 1; j < d.size(); ++j)
            if (d[i][j] > 0) positive.push_back(d[i][j]);
    if (positive.empty()) return 1.0;
    std::sort(positive.begin(), positive.end());
    const std::size_t k = positive.size();
    const double median = (positive[(k - 1) / 2] + positive[k / 2]) / 2;
    return std::log(2.0) / median;
}

/// Graph Laplacian with weights exp(-c * D_ij): off-diagonal -w_ij,
/// diagonal the row's weight sum, so row sums vanish and the matrix is
/// positive semi-definite.
inline std::vector<std::vector<double>> laplacian_from_distances(const DistanceMatrix& d) {
    const std::size_t n = d.size();
    const double c = laplacian_scale(d);
    std::vector<std::vector<double>> lap(n, std::vector<double>(n, 0));
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double w = std::exp(-c * d[i][j]);
            lap[i][j] = -w;
            row += w;
        }
        lap[i][i] = row;
    }
    return lap;
}

/// Unit eigenvector of the second-smallest eigenvalue, sign-fixed so its
/// first component of noticeable magnitude is positive.
inline std::vector<double> fiedler_vector(const std::vector<std::vector<double>>& lap) {
    if (lap.size() < 2) throw std::invalid_argument("fiedler_vector: need n >= 2");
    const SymmetricEigen eig = jacobi_eigen(lap);
    std::vector<double> v = eig.vectors[1];
    for (double x : v) {
        if (std::abs(x) > 1e-9) {
            if (x < 0)
                for (double& y : v) y = -y;
            break;
        }
    }
    return v;
}

/// Seriation by the spectral relaxation of the weighted ordering
/// objective: samples sorted by descending Fiedler-vector component
/// (ties by id).
inline Ordering laplacian_order(const DistanceMatrix& d) {
    const std::size_t n = d.size();
    if (n == 0) throw std::invalid_argument("laplacian_order: empty matrix");
    if (n == 1) return Ordering{0};
    const std::vector<double> v = fiedler_vector(laplacian_from_distances(d));
    Ordering order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
        if (v[a] != v[b]) return v[a] > v[b];
        return a < b;
    });
    return order;
}

/// Number of element pairs common to both orderings that the two agree
/// on, minus the pairs they disagree on.
inline std::int64_t consistency_score(const Ordering& a, const Ordering& b) {
    std::unordered_map<std::int32_t, std::int32_t> pos_b;
    pos_b.reserve(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) pos_b[b[i]] = static_cast<std::int32_t>(i);
    std::vector<std::int32_t> common;
    for (std::int32_t id : a)
        if (pos_b.count(id)) common.push_back(id);
    std::int64_t score = 0;
    for (std::size_t u = 0; u < common.size(); ++u) {
        for (std::size_t v = u + 1; v < common.size(); ++v) {
            // common is in a's order, so a places common[u] first.
            score += pos_b[common[u]] < pos_b[common[v]] ? 1 : -1;
        }
    }
    return score;
}

struct AggregateConfig {
    int restarts = 100;
    std::uint64_t seed = 0;
};

/// Pairwise vote tallies over the union of all order elements:
/// m[i][j] counts how many more orders place universe[i] before
/// universe[j] than the reverse, so m is antisymmetric by construction.
struct MajorityMatrix {
    std::vector<std::int32_t> universe;  // sorted distinct element ids
    std::vector<std::vector<std::int32_t>> m;
};

inline MajorityMatrix majority_matrix(const std::vector<Ordering>& orders) {
    MajorityMatrix out;
    for (const Ordering& o : orders) out.universe.insert(out.universe.end(), o.begin(), o.end());
    std::sort(out.universe.begin(), out.universe.end());
    out.universe.erase(std::unique(out.universe.begin(), out.universe.end()), out.universe.end());
    const std::size_t n = out.universe.size();
    std::unordered_map<std::int32_t, std::int32_t> compress;
    compress.reserve(n);
    for (std::size_t i = 0; i < n; ++i) compress[out.universe[i]] = static_cast<std::int32_t>(i);

    out.m.assign(n, std::vector<std::int32_t>(n, 0));
    for (const Ordering& o : orders) {
        std::vector<std::int32_t> ids;
        ids.reserve(o.size());
        for (std::int32_t id : o) ids.push_back(compress[id]);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            for (std::size_t j = i + 1; j < ids.size(); ++j) {
                ++out.m[ids[i]][ids[j]];
                --out.m[ids[j]][ids[i]];
            }
        }
    }
    return out;
}

namespace detail {

/// Total pairwise majority score of a full permutation under M.
inline std::int64_t pairwise_score(const std::vector<std::int32_t>& perm,
                                   const std::vector<std::vector<std::int32_t>>& m) {
    std::int64_t s = 0;
    for (std::size_t i = 0; i < perm.size(); ++i)
        for (std::size_t j = i + 1; j < perm.size(); ++j) s += m[perm[i]][perm[j]];
    return s;
}

/// First-improvement swap local search, scanning position pairs in index
/// order until a full scan finds nothing to improve.
inline std::int64_t swap_local_search(std::vector<std::int32_t>& perm,
                                      const std::vector<std::vector<std::int32_t>>& m) {
    std::int64_t score = pairwise_score(perm, m);
    const std::size_t n = perm.size();
    bool improved = true;
    while (improved) {
        improved = false;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const std::int32_t u = perm[i], v = perm[j];
                std::int64_t delta = m[u][v];
                for (std::size_t k = i + 1; k < j; ++k)
                    delta += m[u][perm[k]] + m[perm[k]][v];
                delta *= -2;
                if (delta > 0) {
                    std::swap(perm[i], perm[j]);
                    score += delta;
                    improved = true;
                }
            }
        }
    }
    return score;
}

}  // namespace detail

/// Consensus ordering per the majority matrix M_ij (= how many more
/// inputs place i before j than j before i): restarted swap local search
/// for the best full permutation, then the maximum-weight path in the
/// DAG of majority-respected pairs. Elements off that path drop out as
/// outliers.
inline Ordering aggregate_orders(const std::vector<Ordering>& orders,
                                 const AggregateConfig& cfg = {}) {
    if (orders.empty()) throw std::invalid_argument("aggregate: no orders");
    if (cfg.restarts < 1) throw std::invalid_argument("aggregate: restarts must be >= 1");

    MajorityMatrix votes = majority_matrix(orders);
    const std::vector<std::int32_t>& universe = votes.universe;
    const std::vector<std::vector<std::int32_t>>& m = votes.m;
    const std::size_t n = universe.size();
    if (n == 0) return {};
    std::unordered_map<std::int32_t, std::int32_t> compress;
    compress.reserve(n);
    for (std::size_t i = 0; i < n; ++i) compress[universe[i]] = static_cast<std::int32_t>(i);

    // Restart seeds: every input order extended to the full universe,
    // then random permutations up to the restart budget.
    std::vector<std::vector<std::int32_t>> starts;
    for (const Ordering& o : orders) {
        std::vector<char> seen(n, 0);
        std::vector<std::int32_t> perm;
        perm.reserve(n);
        for (std::int32_t id : o) {
            const std::int32_t c = compress[id];
            if (!seen[c]) {
                seen[c] = 1;
                perm.push_back(c);
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!seen[i]) perm.push_back(static_cast<std::int32_t>(i));
        starts.push_back(std::move(perm));
    }
    Rng rng(cfg.seed);
    while (starts.size() < static_cast<std::size_t>(cfg.restarts)) {
        std::vector<std::int32_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n; i > 1; --i)
            std::swap(perm[i - 1], perm[rng.below(i)]);
        starts.push_back(std::move(perm));
    }

    std::vector<std::int32_t> best_perm;
    std::int64_t best_score = std::numeric_limits<std::int64_t>::min();
    for (auto& perm : starts) {
        const std::int64_t score = detail::swap_local_search(perm, m);
        if (score > best_score) {
            best_score = score;
            best_perm = perm;
        }
    }

    // Maximum-weight path over pairs the majority supports in best_perm
    // order. dp in permutation order; ties keep the earliest.
    std::vector<std::int64_t> dp(n, 0);
    std::vector<std::int64_t> par(n, -1);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            const std::int32_t u = best_perm[i], v = best_perm[j];
            if (m[u][v] <= 0) continue;
            const std::int64_t cand = dp[i] + m[u][v];
            if (cand > dp[j]) {
                dp[j] = cand;
                par[j] = static_cast<std::int64_t>(i);
            }
        }
    }
    std::size_t end = 0;
    for (std::size_t j = 1; j < n; ++j)
        if (dp[j] > dp[end]) end = j;
    std::vector<std::int32_t> chain;
    for (std::int64_t at = static_cast<std::int64_t>(end); at >= 0; at = par[at])
        chain.push_back(best_perm[at]);
    std::reverse(chain.begin(), chain.end());

    Ordering out;
    out.reserve(chain.size());
    for (std::int32_t c : chain) out.push_back(universe[c]);
    return out;
}

enum class OrderMethod { iterative, laplacian };

struct BoostConfig {
    int subsamples = 10;       // independent Bernoulli subsets
    double inclusion_prob = 0.5;
    int restarts = 100;        // local-search restarts in aggregation
    std::uint64_t seed = 0;

    void validate() const {
        if (subsamples < 1) throw std::invalid_argument("boost: subsamples must be >= 1");
        if (!(inclusion_prob > 0) || inclusion_prob > 1)
            throw std::invalid_argument("boost: inclusion probability must be in (0, 1]");
        if (restarts < 1) throw std::invalid_argument("boost: restarts must be >= 1");
    }
};

/// Orders random sample subsets with the base method and aggregates the
/// results; subsets that come up empty or singleton are redrawn, subsets
/// whose ordering fails are skipped.
inline Ordering boost_order(const RoadNetwork& net, const TrackSet& ts, OrderMethod base,
                            const BoostConfig& bcfg, const MatchConfig& mcfg) {
    bcfg.validate();
    const std::size_t n = ts.pooled.size();
    Rng rng(bcfg.seed);

    std::vector<Ordering> orders;
    for (int k = 0; k < bcfg.subsamples; ++k) {
        std::vector<std::int32_t> keep;
        for (int attempt = 0; attempt < 10000 && keep.size() < 2; ++attempt) {
            keep.clear();
            for (std::size_t i = 0; i < n; ++i)
                if (rng.uniform() < bcfg.inclusion_prob)
                    keep.push_back(static_cast<std::int32_t>(i));
        }
        if (keep.size() < 2) throw std::runtime_error("boost: subsampling kept nothing");

        try {
            const TrackSubset sub = subset_trackset(ts, keep);
            Ordering local = base == OrderMethod::iterative
                                 ? iterative_projection_order(net, sub.set, mcfg)
                                 : laplacian_order(build_distance_matrix(net, sub.set, mcfg));
            Ordering global;
            global.reserve(local.size());
            for (std::int32_t id : local) global.push_back(sub.original[id]);
            orders.push_back(std::move(global));
        } catch (const std::exception&) {
            continue;  // this subsample failed; the rest still vote
        }
    }
    if (orders.empty()) throw std::runtime_error("boost: every subsample failed");

    // A seriation is only defined up to reversal, so subsample orderings
    // can come back pointing either way; flip each to agree with the
    // first so their votes reinforce instead of cancelling.
    for (std::size_t k = 1; k < orders.size(); ++k)
        if (consistency_score(orders[k], orders[0]) < 0)
            std::reverse(orders[k].begin(), orders[k].end());

    AggregateConfig acfg;
    acfg.restarts = bcfg.restarts;
    acfg.seed = mix_seed(bcfg.seed, 0x0a66);
    return aggregate_orders(orders, acfg);
}

enum class MultiMethod { iterative, laplacian, iterative_boost, laplacian_boost };

inline const char* multi_method_name(MultiMethod m) {
    switch (m) {
        case MultiMethod::iterative: return "iterative";
        case MultiMethod::laplacian: return "laplacian";
        case MultiMethod::iterative_boost: return "iterative_boost";
        case MultiMethod::laplacian_boost: return "laplacian_boost";
    }
    return "?";
}

struct MultiMatchResult {
    Ordering ordering;
    MatchResult match;
};

/// Orders the pooled samples with the requested method, then matches
/// them as one track (ordinal timestamps; samples the ordering dropped
/// stay out). A single-track set short-circuits to its own time order.
inline MultiMatchResult match_multi(const RoadNetwork& net, const TrackSet& ts,
                                    MultiMethod method, const MatchConfig& mcfg,
                                    const BoostConfig& bcfg = {}) {
    Ordering order;
    if (ts.tracks.size() == 1) {
        order = time_ordering(ts);
    } else {
        switch (method) {
            case MultiMethod::iterative:
                order = iterative_projection_order(net, ts, mcfg);
                break;
            case MultiMethod::laplacian:
                order = laplacian_order(build_distance_matrix(net, ts, mcfg));
                break;
            case MultiMethod::iterative_boost:
                order = boost_order(net, ts, OrderMethod::iterative, bcfg, mcfg);
                break;
            case MultiMethod::laplacian_boost:
                order = boost_order(net, ts, OrderMethod::laplacian, bcfg, mcfg);
                break;
        }
    }
    MultiMatchResult out;
    out.match = match_track(net, track_from_ordering(ts, order), mcfg);
    out.ordering = std::move(order);
    return out;
}

}  // namespace mapmatch
