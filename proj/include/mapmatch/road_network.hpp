#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mapmatch/geometry.hpp"
#include "mapmatch/rng.hpp"
#include "mapmatch/text.hpp"

namespace mapmatch {

/// Distances use +infinity as the "no drivable path" signal so it never
/// collides with a real path length.
constexpr double kUnreachable = std::numeric_limits<double>::infinity();

inline bool is_reachable(double d) { return d < kUnreachable; }

struct Node {
    std::uint32_t id = 0;
    Point location;
};

struct Edge {
    std::uint32_t id = 0;
    std::uint32_t from = 0;
    std::uint32_t to = 0;
    Polyline geometry;
    double length = 0;
    double speed_limit = 0;  // meters/second
    bool oneway = false;
};

/// A position on the network: a point of an edge at a given arc offset.
struct RoadPoint {
    std::uint32_t edge = 0;
    double offset = 0;

    friend bool operator==(const RoadPoint& a, const RoadPoint& b) {
        return a.edge == b.edge && a.offset == b.offset;
    }
};

/// One traversed stretch of an edge: the interval [lo, hi] of the edge,
/// walked from lo to hi when forward, from hi to lo otherwise.
struct PathEntry {
    std::uint32_t edge = 0;
    double lo = 0;
    double hi = 0;
    bool forward = true;
};

/// A connected drivable path as a sequence of traversed edge intervals.
/// Zero-length entries are dropped on append; a path for a single point
/// is represented by one degenerate entry.
struct RoutePath {
    std::vector<PathEntry> entries;
    double total_length = 0;

    bool empty() const { return entries.empty(); }

    RoadPoint start() const {
        if (entries.empty()) throw std::logic_error("RoutePath::start: empty path");
        const PathEntry& e = entries.front();
        return RoadPoint{e.edge, e.forward ? e.lo : e.hi};
    }

    RoadPoint end() const {
        if (entries.empty()) throw std::logic_error("RoutePath::end: empty path");
        const PathEntry& e = entries.back();
        return RoadPoint{e.edge, e.forward ? e.hi : e.lo};
    }

    /// Appends an interval, merging with the previous entry when both
    /// traverse the same edge in the same direction and join end-to-start.
    void append(std::uint32_t edge, double lo, double hi, bool forward) {
        if (hi < lo) throw std::invalid_argument("RoutePath::append: hi < lo");
        const double len = hi - lo;
        if (len == 0 && !entries.empty()) return;
        if (!entries.empty()) {
            PathEntry& prev = entries.back();
            if (prev.edge == edge && prev.forward == forward) {
                if (forward && prev.hi == lo) {
                    prev.hi = hi;
                    total_length += len;
                    return;
                }
                if (!forward && prev.lo == hi) {
                    prev.lo = lo;
                    total_length += len;
                    return;
                }
            }
            // A degenerate head entry is a placeholder for a point; replace it.
            if (entries.size() == 1 && prev.lo == prev.hi) entries.clear();
        }
        entries.push_back(PathEntry{edge, lo, hi, forward});
        total_length += len;
    }

    void append_path(const RoutePath& other) {
        for (const PathEntry& e : other.entries) append(e.edge, e.lo, e.hi, e.forward);
    }
};

/// Union of traversed intervals per edge, merged and disjoint. Direction
/// is deliberately dropped: a path covers an edge stretch regardless of
/// which way it drove it, and out-and-back stretches count once.
using TraversalMeasure = std::map<std::uint32_t, std::vector<std::pair<double, double>>>;

inline TraversalMeasure traversal_measure(const RoutePath& path) {
    std::map<std::uint32_t, std::vector<std::pair<double, double>>> raw;
    for (const PathEntry& e : path.entries) {
        if (e.hi > e.lo) raw[e.edge].emplace_back(e.lo, e.hi);
    }
    TraversalMeasure out;
    for (auto& [edge, intervals] : raw) {
        std::sort(intervals.begin(), intervals.end());
        std::vector<std::pair<double, double>> merged;
        for (const auto& iv : intervals) {
            if (!merged.empty() && iv.first <= merged.back().second) {
                merged.back().second = std::max(merged.back().second, iv.second);
            } else {
                merged.push_back(iv);
            }
        }
        out[edge] = std::move(merged);
    }
    return out;
}

inline double measure_length(const TraversalMeasure& m) {
    double total = 0;
    for (const auto& [edge, intervals] : m)
        for (const auto& iv : intervals) total += iv.second - iv.first;
    return total;
}

/// Node/edge descriptions prior to validation; ids may be arbitrary.
struct NodeSpec {
    std::int64_t id = 0;
    Point location;
};

struct EdgeSpec {
    std::int64_t from = 0;
    std::int64_t to = 0;
    double speed_limit = 0;
    bool oneway = false;
    std::vector<Point> geometry;  // empty = straight segment
};

/// Immutable directed road graph with geometry and a spatial index.
/// Construction keeps only the largest connected component (undirected
/// sense) and renumbers nodes and edges densely.
class RoadNetwork {
public:
    struct HalfEdge {
        std::uint32_t edge = 0;
        std::uint32_t neighbor = 0;
        bool forward = true;  // traversal direction relative to the edge
    };

    static RoadNetwork build(const std::vector<NodeSpec>& node_specs,
                             const std::vector<EdgeSpec>& edge_specs,
                             std::vector<std::string>* warnings = nullptr) {
        std::unordered_map<std::int64_t, std::uint32_t> index;
        index.reserve(node_specs.size());
        for (std::uint32_t i = 0; i < node_specs.size(); ++i) {
            if (!index.emplace(node_specs[i].id, i).second)
                throw std::runtime_error("network: duplicate node id " +
                                         std::to_string(node_specs[i].id));
        }

        struct RawEdge {
            std::uint32_t from, to;
            const EdgeSpec* spec;
        };
        std::vector<RawEdge> raw;
        raw.reserve(edge_specs.size());
        for (const EdgeSpec& es : edge_specs) {
            const auto fit = index.find(es.from);
            const auto tit = index.find(es.to);
            if (fit == index.end() || tit == index.end())
                throw std::runtime_error("network: edge references unknown node");
            if (fit->second == tit->second)
                throw std::runtime_error("network: self-loop edge at node " +
                                         std::to_string(es.from));
            if (!(es.speed_limit > 0))
                throw std::runtime_error("network: speed limit must be positive");
            raw.push_back(RawEdge{fit->second, tit->second, &es});
        }

        // Largest component on the undirected node graph.
        const std::size_t n = node_specs.size();
        std::vector<std::vector<std::uint32_t>> undirected(n);
        for (const RawEdge& e : raw) {
            undirected[e.from].push_back(e.to);
            undirected[e.to].push_back(e.from);
        }
        std::vector<std::int32_t> comp(n, -1);
        std::int32_t comp_count = 0;
        std::vector<std::size_t> comp_size;
        for (std::uint32_t s = 0; s < n; ++s) {
            if (comp[s] >= 0) continue;
            std::vector<std::uint32_t> stack{s};
            comp[s] = comp_count;
            std::size_t size = 0;
            while (!stack.empty()) {
                const std::uint32_t u = stack.back();
                stack.pop_back();
                ++size;
                for (std::uint32_t v : undirected[u]) {
                    if (comp[v] < 0) {
                        comp[v] = comp_count;
                        stack.push_back(v);
                    }
                }
            }
            comp_size.push_back(size);
            ++comp_count;
        }
        if (n == 0) throw std::runtime_error("network: empty graph");
        std::int32_t keep = 0;
        for (std::int32_t c = 1; c < comp_count; ++c)
            if (comp_size[c] > comp_size[keep]) keep = c;

        RoadNetwork net;
        std::vector<std::uint32_t> remap(n, std::numeric_limits<std::uint32_t>::max());
        for (std::uint32_t i = 0; i < n; ++i) {
            if (comp[i] != keep) continue;
            remap[i] = static_cast<std::uint32_t>(net.nodes_.size());
            net.nodes_.push_back(Node{remap[i], node_specs[i].location});
        }
        const std::size_t dropped_nodes = n - net.nodes_.size();
        if (net.nodes_.empty()) throw std::runtime_error("network: empty graph");

        std::size_t dropped_edges = 0;
        for (const RawEdge& e : raw) {
            if (comp[e.from] != keep) {
                ++dropped_edges;
                continue;
            }
            Edge edge{static_cast<std::uint32_t>(net.edges_.size()),
                      remap[e.from],
                      remap[e.to],
                      edge_geometry(*e.spec, net.nodes_[remap[e.from]].location,
                                    net.nodes_[remap[e.to]].location),
                      0,
                      e.spec->speed_limit,
                      e.spec->oneway};
            edge.length = edge.geometry.length();
            net.edges_.push_back(std::move(edge));
        }
        if (warnings && (dropped_nodes || dropped_edges)) {
            std::ostringstream os;
            os << "kept largest component: dropped " << dropped_nodes << " node(s), "
               << dropped_edges << " edge(s)";
            warnings->push_back(os.str());
        }

        net.out_.resize(net.nodes_.size());
        net.in_.resize(net.nodes_.size());
        for (const Edge& e : net.edges_) {
            net.out_[e.from].push_back(HalfEdge{e.id, e.to, true});
            net.in_[e.to].push_back(HalfEdge{e.id, e.from, true});
            if (!e.oneway) {
                net.out_[e.to].push_back(HalfEdge{e.id, e.from, false});
                net.in_[e.from].push_back(HalfEdge{e.id, e.to, false});
            }
        }

        BoundingBox box{net.nodes_[0].location.x, net.nodes_[0].location.y,
                        net.nodes_[0].location.x, net.nodes_[0].location.y};
        for (const Edge& e : net.edges_) {
            for (const Point& p : e.geometry.vertices()) {
                box.min_x = std::min(box.min_x, p.x);
                box.min_y = std::min(box.min_y, p.y);
                box.max_x = std::max(box.max_x, p.x);
                box.max_y = std::max(box.max_y, p.y);
            }
        }
        net.tree_.emplace(box);
        for (const Edge& e : net.edges_) {
            const auto& pts = e.geometry.vertices();
            for (std::uint32_t s = 0; s + 1 < pts.size(); ++s)
                net.tree_->insert(pts[s], pts[s + 1], QuadTree::SegmentRef{e.id, s});
        }
        return net;
    }

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    const Node& node(std::uint32_t id) const { return nodes_.at(id); }
    const Edge& edge(std::uint32_t id) const { return edges_.at(id); }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<HalfEdge>& out_edges(std::uint32_t node) const { return out_.at(node); }
    const std::vector<HalfEdge>& in_edges(std::uint32_t node) const { return in_.at(node); }
    const QuadTree& spatial_index() const { return *tree_; }

    /// Validates and snaps a road point: offsets within 1e-6 m of an edge
    /// end collapse onto the node so distances compose across edges.
    RoadPoint road_point(std::uint32_t edge_id, double offset) const {
        const Edge& e = edge(edge_id);
        if (offset < -kSnap || offset > e.length + kSnap)
            throw std::invalid_argument("road_point: offset outside edge");
        if (offset <= kSnap) offset = 0;
        else if (offset >= e.length - kSnap) offset = e.length;
        return RoadPoint{edge_id, offset};
    }

    Point point_of(const RoadPoint& p) const { return edge(p.edge).geometry.point_at(p.offset); }

    /// Nearest road point to an arbitrary location.
    RoadPoint nearest_road_point(const Point& p) const {
        const auto hit = tree_->nearest(p);
        if (!hit) throw std::runtime_error("nearest_road_point: empty network");
        const Edge& e = edge(hit->ref.owner);
        return road_point(e.id, e.geometry.cumulative_lengths()[hit->ref.segment] + hit->offset);
    }

    /// Ids of all edges whose geometry comes within r of p, ascending.
    std::vector<std::uint32_t> edges_within_radius(const Point& p, double r) const {
        if (!(r > 0)) throw std::invalid_argument("edges_within_radius: radius must be > 0");
        auto refs = tree_->within_radius(p, r);
        std::vector<std::uint32_t> ids;
        ids.reserve(refs.size());
        for (const auto& ref : refs) ids.push_back(ref.owner);
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        return ids;
    }

    double driving_distance(const RoadPoint& a, const RoadPoint& b) const {
        return route_query(a, b, nullptr);
    }

    /// Shortest drivable path a -> b. Throws when unreachable.
    RoutePath shortest_route(const RoadPoint& a, const RoadPoint& b) const {
        RoutePath path;
        const double d = route_query(a, b, &path);
        if (!is_reachable(d)) throw std::runtime_error("shortest_route: unreachable pair");
        return path;
    }

    /// Distances from a to each target via one forward search
    /// (kUnreachable per entry when no path exists).
    std::vector<double> one_to_many_distances(const RoadPoint& a,
                                              const std::vector<RoadPoint>& targets) const {
        std::vector<double> result(targets.size(), kUnreachable);
        const RoadPoint sa = road_point(a.edge, a.offset);
        for (std::size_t i = 0; i < targets.size(); ++i)
            result[i] = direct_same_edge(sa, road_point(targets[i].edge, targets[i].offset));
        if (targets.empty()) return result;

        // Entry node -> cost from that node to each target needing it.
        struct Entry {
            std::size_t target;
            double cost;
        };
        std::unordered_map<std::uint32_t, std::vector<Entry>> wanted;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const RoadPoint t = road_point(targets[i].edge, targets[i].offset);
            for (const auto& [node, cost, interval] : entry_seeds(t))
                wanted[node].push_back(Entry{i, cost});
        }

        std::vector<double> dist(nodes_.size(), kUnreachable);
        std::vector<char> settled(nodes_.size(), 0);
        MinQueue queue;
        for (const auto& [node, cost, iv] : exit_seeds(sa)) {
            if (cost < dist[node]) {
                dist[node] = cost;
                queue.emplace(cost, node);
            }
        }
        std::size_t open = wanted.size();
        while (!queue.empty() && open > 0) {
            const auto [d, u] = queue.top();
            queue.pop();
            if (settled[u]) continue;
            settled[u] = 1;
            if (wanted.count(u)) --open;
            for (const HalfEdge& h : out_[u]) {
                const double nd = d + edges_[h.edge].length;
                if (nd < dist[h.neighbor]) {
                    dist[h.neighbor] = nd;
                    queue.emplace(nd, h.neighbor);
                }
            }
        }
        for (const auto& [node, entries] : wanted) {
            if (!is_reachable(dist[node])) continue;
            for (const Entry& en : entries)
                result[en.target] = std::min(result[en.target], dist[node] + en.cost);
        }
        return result;
    }

private:
    static constexpr double kSnap = 1e-6;

    using QueueItem = std::pair<double, std::uint32_t>;
    using MinQueue = std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>>;

    static Polyline edge_geometry(const EdgeSpec& spec, const Point& from, const Point& to) {
        std::vector<Point> pts = spec.geometry;
        if (pts.empty()) pts = {from, to};
        if (distance(pts.front(), from) > kSnap || distance(pts.back(), to) > kSnap)
            throw std::runtime_error("network: edge geometry does not join its nodes");
        return Polyline(std::move(pts));
    }

    struct Seed {
        std::uint32_t node;
        double cost;
        PathEntry interval;  // partial-edge stretch between the point and the node
    };

    /// Ways to leave road point a and reach a node: drive forward to the
    /// edge's head; drive backward to its tail when the edge is two-way
    /// (or the point already sits on the tail node).
    std::vector<Seed> exit_seeds(const RoadPoint& a) const {
        const Edge& e = edges_[a.edge];
        std::vector<Seed> seeds;
        seeds.push_back(Seed{e.to, e.length - a.offset,
                             PathEntry{a.edge, a.offset, e.length, true}});
        if (!e.oneway || a.offset == 0)
            seeds.push_back(Seed{e.from, a.offset, PathEntry{a.edge, 0, a.offset, false}});
        return seeds;
    }

    /// Ways to reach road point b from a node: arrive from the edge's
    /// tail; arrive from its head when two-way (or b sits on the head).
    std::vector<Seed> entry_seeds(const RoadPoint& b) const {
        const Edge& f = edges_[b.edge];
        std::vector<Seed> seeds;
        seeds.push_back(Seed{f.from, b.offset, PathEntry{b.edge, 0, b.offset, true}});
        if (!f.oneway || b.offset == f.length)
            seeds.push_back(Seed{f.to, f.length - b.offset,
                                 PathEntry{b.edge, b.offset, f.length, false}});
        return seeds;
    }

    /// Shortest traversal staying on the shared edge, if a and b share one.
    double direct_same_edge(const RoadPoint& a, const RoadPoint& b) const {
        if (a.edge != b.edge) return kUnreachable;
        if (b.offset >= a.offset) return b.offset - a.offset;
        return edges_[a.edge].oneway ? kUnreachable : a.offset - b.offset;
    }

    /// Bidirectional uniform-cost search. Returns the distance and, when
    /// out is non-null and the pair is reachable, fills the route.
    double route_query(const RoadPoint& ra, const RoadPoint& rb, RoutePath* out) const {
        const RoadPoint a = road_point(ra.edge, ra.offset);
        const RoadPoint b = road_point(rb.edge, rb.offset);

        if (a == b) {
            if (out) out->append(a.edge, a.offset, a.offset, true);
            return 0;
        }

        const double direct = direct_same_edge(a, b);

        const std::size_t n = nodes_.size();
        std::vector<double> df(n, kUnreachable), db(n, kUnreachable);
        std::vector<std::pair<std::int64_t, std::int64_t>> pf(n, {-1, -1}), pb(n, {-1, -1});
        MinQueue fq, bq;

        const auto fseeds = exit_seeds(a);
        const auto bseeds = entry_seeds(b);
        for (const Seed& s : fseeds) {
            if (s.cost < df[s.node]) {
                df[s.node] = s.cost;
                pf[s.node] = {-1, -1};
                fq.emplace(s.cost, s.node);
            }
        }
        for (const Seed& s : bseeds) {
            if (s.cost < db[s.node]) {
                db[s.node] = s.cost;
                pb[s.node] = {-1, -1};
                bq.emplace(s.cost, s.node);
            }
        }

        double best = direct;
        std::int64_t meet = -1;
        for (const Seed& s : fseeds) {
            if (is_reachable(db[s.node]) && df[s.node] + db[s.node] < best) {
                best = df[s.node] + db[s.node];
                meet = s.node;
            }
        }

        std::vector<char> sf(n, 0), sb(n, 0);
        const auto relax_forward = [&](std::uint32_t u, double d) {
            for (const HalfEdge& h : out_[u]) {
                const double nd = d + edges_[h.edge].length;
                if (nd < df[h.neighbor]) {
                    df[h.neighbor] = nd;
                    pf[h.neighbor] = {u, h.edge};
                    fq.emplace(nd, h.neighbor);
                    if (is_reachable(db[h.neighbor]) && nd + db[h.neighbor] < best) {
                        best = nd + db[h.neighbor];
                        meet = h.neighbor;
                    }
                }
            }
        };
        const auto relax_backward = [&](std::uint32_t u, double d) {
            for (const HalfEdge& h : in_[u]) {
                const double nd = d + edges_[h.edge].length;
                if (nd < db[h.neighbor]) {
                    db[h.neighbor] = nd;
                    pb[h.neighbor] = {u, h.edge};
                    bq.emplace(nd, h.neighbor);
                    if (is_reachable(df[h.neighbor]) && df[h.neighbor] + nd < best) {
                        best = df[h.neighbor] + nd;
                        meet = h.neighbor;
                    }
                }
            }
        };

        while (!fq.empty() || !bq.empty()) {
            const double ftop = fq.empty() ? kUnreachable : fq.top().first;
            const double btop = bq.empty() ? kUnreachable : bq.top().first;
            if (fq.empty() || bq.empty()) {
                if (std::min(ftop, btop) >= best) break;
            } else if (ftop + btop >= best) {
                break;
            }
            if (ftop <= btop) {
                const auto [d, u] = fq.top();
                fq.pop();
                if (sf[u]) continue;
                sf[u] = 1;
                relax_forward(u, d);
            } else {
                const auto [d, u] = bq.top();
                bq.pop();
                if (sb[u]) continue;
                sb[u] = 1;
                relax_backward(u, d);
            }
        }

        if (!is_reachable(best)) return kUnreachable;
        if (out) {
            if (meet < 0 || direct <= best) {
                // Stay on the shared edge.
                if (b.offset >= a.offset) out->append(a.edge, a.offset, b.offset, true);
                else out->append(a.edge, b.offset, a.offset, false);
                return direct;
            }
            // Node chain a-side ... meet ... b-side, then edge intervals.
            std::vector<std::pair<std::uint32_t, std::uint32_t>> fw;  // (edge, tail node)
            for (std::int64_t u = meet; pf[u].first >= 0; u = pf[u].first)
                fw.emplace_back(static_cast<std::uint32_t>(pf[u].second),
                                static_cast<std::uint32_t>(pf[u].first));
            std::reverse(fw.begin(), fw.end());

            const std::uint32_t head = fw.empty() ? static_cast<std::uint32_t>(meet)
                                                  : fw.front().second;
            for (const Seed& s : fseeds) {
                if (s.node == head && df[s.node] == s.cost) {
                    out->append(s.interval.edge, s.interval.lo, s.interval.hi,
                                s.interval.forward);
                    break;
                }
            }
            std::uint32_t at = head;
            for (const auto& [eid, tail] : fw) {
                const Edge& e = edges_[eid];
                (void)tail;
                if (e.from == at) {
                    out->append(eid, 0, e.length, true);
                    at = e.to;
                } else {
                    out->append(eid, 0, e.length, false);
                    at = e.from;
                }
            }
            for (std::int64_t u = meet; pb[u].first >= 0;) {
                const std::uint32_t eid = static_cast<std::uint32_t>(pb[u].second);
                const Edge& e = edges_[eid];
                if (e.from == at) {
                    out->append(eid, 0, e.length, true);
                    at = e.to;
                } else {
                    out->append(eid, 0, e.length, false);
                    at = e.from;
                }
                u = pb[u].first;
            }
            for (const Seed& s : bseeds) {
                if (s.node == at && db[s.node] == s.cost) {
                    out->append(s.interval.edge, s.interval.lo, s.interval.hi,
                                s.interval.forward);
                    break;
                }
            }
        }
        return best;
    }

    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
    std::vector<std::vector<HalfEdge>> out_;
    std::vector<std::vector<HalfEdge>> in_;
    std::optional<QuadTree> tree_;
};

/// Concatenated vertex chain of a path (a single point for a degenerate
/// path).
inline std::vector<Point> route_vertices(const RoadNetwork& net, const RoutePath& path) {
    std::vector<Point> out;
    for (const PathEntry& e : path.entries) {
        auto piece = net.edge(e.edge).geometry.sub_vertices(e.lo, e.hi);
        if (!e.forward) std::reverse(piece.begin(), piece.end());
        for (const Point& p : piece) {
            if (!out.empty() && out.back() == p) continue;
            out.push_back(p);
        }
    }
    return out;
}

/// Arc-parameterized view of a path with a spatial index for projection
/// queries. Handles length-zero paths (a single point) explicitly.
class PathGeometry {
public:
    PathGeometry(const RoadNetwork& net, const RoutePath& path)
        : PathGeometry(route_vertices(net, path)) {}

    /// Chain through arbitrary points (e.g. a track's samples joined in
    /// time order). Collapses to a point when all inputs coincide.
    explicit PathGeometry(std::vector<Point> pts) {
        if (pts.empty()) throw std::invalid_argument("PathGeometry: empty chain");
        const bool all_same =
            std::all_of(pts.begin(), pts.end(), [&](const Point& p) { return p == pts[0]; });
        if (all_same) {
            point_ = pts[0];
            return;
        }
        line_.emplace(std::move(pts));
        index_.emplace(index_polyline(*line_));
    }

    bool degenerate() const { return !line_.has_value(); }
    double length() const { return line_ ? line_->length() : 0; }
    const Polyline& polyline() const {
        if (!line_) throw std::logic_error("PathGeometry: degenerate path has no polyline");
        return *line_;
    }

    /// Nearest point of the path; arc_offset is 0 for a degenerate path.
    PolylineProjection project(const Point& p) const {
        if (!line_) {
            PolylineProjection out;
            out.foot = point_;
            out.arc_offset = 0;
            out.distance = distance(p, point_);
            out.segment = 0;
            return out;
        }
        return nearest_on_polyline(p, *line_, *index_);
    }

private:
    std::optional<Polyline> line_;
    std::optional<QuadTree> index_;
    Point point_;
};

/// Perturbed grid road network: rows x cols nodes joined by two-way
/// edges, a removal pass that keeps the graph connected, and per-edge
/// speed limits drawn from [min_speed, max_speed].
inline RoadNetwork generate_grid_network(int rows, int cols, double spacing,
                                         double perturbation, double removal_prob,
                                         double min_speed, double max_speed,
                                         std::uint64_t seed,
                                         std::vector<std::string>* warnings = nullptr) {
    if (rows < 2 || cols < 2) throw std::invalid_argument("grid: rows and cols must be >= 2");
    if (!(spacing > 0)) throw std::invalid_argument("grid: spacing must be positive");
    if (perturbation < 0 || perturbation >= spacing / 2)
        throw std::invalid_argument("grid: perturbation must be in [0, spacing/2)");
    if (removal_prob < 0 || removal_prob >= 1)
        throw std::invalid_argument("grid: removal probability must be in [0, 1)");
    if (!(min_speed > 0) || max_speed < min_speed)
        throw std::invalid_argument("grid: speed range invalid");

    Rng rng(seed);
    std::vector<NodeSpec> nodes;
    nodes.reserve(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const double dx = rng.uniform(-perturbation, perturbation);
            const double dy = rng.uniform(-perturbation, perturbation);
            nodes.push_back(NodeSpec{static_cast<std::int64_t>(nodes.size()),
                                     Point{c * spacing + dx, r * spacing + dy}});
        }
    }

    struct GridEdge {
        std::int64_t from, to;
        double speed;
        bool kept = true;
    };
    std::vector<GridEdge> grid_edges;
    const auto nid = [cols](int r, int c) { return static_cast<std::int64_t>(r) * cols + c; };
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (c + 1 < cols)
                grid_edges.push_back(
                    GridEdge{nid(r, c), nid(r, c + 1), rng.uniform(min_speed, max_speed)});
            if (r + 1 < rows)
                grid_edges.push_back(
                    GridEdge{nid(r, c), nid(r + 1, c), rng.uniform(min_speed, max_speed)});
        }
    }

    // Removal pass: drop each edge with the given probability unless the
    // drop would disconnect the grid.
    const std::size_t node_count = nodes.size();
    const auto connected_without = [&](std::size_t skip) {
        std::vector<std::vector<std::uint32_t>> adj(node_count);
        for (std::size_t i = 0; i < grid_edges.size(); ++i) {
            if (!grid_edges[i].kept || i == skip) continue;
            adj[grid_edges[i].from].push_back(static_cast<std::uint32_t>(grid_edges[i].to));
            adj[grid_edges[i].to].push_back(static_cast<std::uint32_t>(grid_edges[i].from));
        }
        std::vector<char> seen(node_count, 0);
        std::vector<std::uint32_t> stack{0};
        seen[0] = 1;
        std::size_t visited = 0;
        while (!stack.empty()) {
            const std::uint32_t u = stack.back();
            stack.pop_back();
            ++visited;
            for (std::uint32_t v : adj[u]) {
                if (!seen[v]) {
                    seen[v] = 1;
                    stack.push_back(v);
                }
            }
        }
        return visited == node_count;
    };
    for (std::size_t i = 0; i < grid_edges.size(); ++i) {
        if (rng.uniform() < removal_prob && connected_without(i)) grid_edges[i].kept = false;
    }

    std::vector<EdgeSpec> edges;
    for (const GridEdge& ge : grid_edges) {
        if (!ge.kept) continue;
        EdgeSpec es;
        es.from = ge.from;
        es.to = ge.to;
        es.speed_limit = ge.speed;
        es.oneway = false;
        edges.push_back(std::move(es));
    }
    return RoadNetwork::build(nodes, edges, warnings);
}

namespace detail {

inline constexpr double kEarthRadius = 6371000.0;
inline constexpr double kDegToRad = 3.141592653589793238462643383279502884 / 180.0;

}  // namespace detail

/// Parses the structured network text format:
///
///   crs: meters            (optional; "wgs84" converts lon/lat degrees)
///   nodes
///   <id> <x> <y>
///   edges
///   <id> <from> <to> <speed_limit> <oneway 0|1> [<x> <y> ...]
///
/// Comments (#) and blank lines are ignored. wgs84 coordinates are
/// converted once via an equirectangular projection about the node
/// centroid; all downstream computation is planar meters.
inline RoadNetwork parse_network(const std::string& text,
                                 std::vector<std::string>* warnings = nullptr) {
    const auto lines = content_lines(text);
    std::size_t i = 0;
    bool wgs84 = false;
    if (i < lines.size() && lines[i].rfind("crs:", 0) == 0) {
        const std::string crs{trim(std::string_view(lines[i]).substr(4))};
        if (crs == "wgs84") wgs84 = true;
        else if (crs != "meters") throw std::runtime_error("network: unknown crs '" + crs + "'");
        ++i;
    }
    if (i >= lines.size() || lines[i] != "nodes")
        throw std::runtime_error("network: expected 'nodes' section");
    ++i;

    std::vector<NodeSpec> nodes;
    while (i < lines.size() && lines[i] != "edges") {
        const auto fields = split_ws(lines[i]);
        if (fields.size() != 3) throw std::runtime_error("network: bad node line: " + lines[i]);
        NodeSpec ns;
        ns.id = parse_int(fields[0]);
        ns.location = Point{parse_double(fields[1]), parse_double(fields[2])};
        nodes.push_back(ns);
        ++i;
    }
    if (i >= lines.size() || lines[i] != "edges")
        throw std::runtime_error("network: expected 'edges' section");
    ++i;

    struct RawEdgeLine {
        std::int64_t id;
        EdgeSpec spec;
    };
    std::vector<RawEdgeLine> raws;
    while (i < lines.size()) {
        const auto fields = split_ws(lines[i]);
        if (fields.size() < 5 || (fields.size() - 5) % 2 != 0)
            throw std::runtime_error("network: bad edge line: " + lines[i]);
        RawEdgeLine raw;
        raw.id = parse_int(fields[0]);
        raw.spec.from = parse_int(fields[1]);
        raw.spec.to = parse_int(fields[2]);
        raw.spec.speed_limit = parse_double(fields[3]);
        const std::int64_t ow = parse_int(fields[4]);
        if (ow != 0 && ow != 1)
            throw std::runtime_error("network: oneway flag must be 0 or 1: " + lines[i]);
        raw.spec.oneway = ow == 1;
        for (std::size_t k = 5; k < fields.size(); k += 2)
            raw.spec.geometry.push_back(
                Point{parse_double(fields[k]), parse_double(fields[k + 1])});
        raws.push_back(std::move(raw));
        ++i;
    }
    if (nodes.empty()) throw std::runtime_error("network: empty graph");

    if (wgs84) {
        double lon0 = 0, lat0 = 0;
        for (const NodeSpec& ns : nodes) {
            lon0 += ns.location.x;
            lat0 += ns.location.y;
        }
        lon0 /= static_cast<double>(nodes.size());
        lat0 /= static_cast<double>(nodes.size());
        const double kx = detail::kEarthRadius * detail::kDegToRad * std::cos(lat0 * detail::kDegToRad);
        const double ky = detail::kEarthRadius * detail::kDegToRad;
        const auto convert = [&](const Point& p) {
            return Point{(p.x - lon0) * kx, (p.y - lat0) * ky};
        };
        for (NodeSpec& ns : nodes) ns.location = convert(ns.location);
        for (RawEdgeLine& raw : raws)
            for (Point& p : raw.spec.geometry) p = convert(p);
    }

    std::vector<EdgeSpec> edges;
    edges.reserve(raws.size());
    for (RawEdgeLine& raw : raws) edges.push_back(std::move(raw.spec));
    return RoadNetwork::build(nodes, edges, warnings);
}

inline RoadNetwork load_network(const std::string& path,
                                std::vector<std::string>* warnings = nullptr) {
    return parse_network(read_text_file(path), warnings);
}

/// Serializes in the meters format; node/edge ids are the dense internal
/// ids, straight edges omit geometry.
inline std::string serialize_network(const RoadNetwork& net) {
    std::string out;
    out += "crs: meters\n";
    out += "nodes\n";
    for (const Node& n : net.nodes()) {
        out += std::to_string(n.id);
        out += ' ';
        out += format_double(n.location.x);
        out += ' ';
        out += format_double(n.location.y);
        out += '\n';
    }
    out += "edges\n";
    for (const Edge& e : net.edges()) {
        out += std::to_string(e.id);
        out += ' ';
        out += std::to_string(e.from);
        out += ' ';
        out += std::to_string(e.to);
        out += ' ';
        out += format_double(e.speed_limit);
        out += ' ';
        out += e.oneway ? '1' : '0';
        const auto& pts = e.geometry.vertices();
        const bool straight = pts.size() == 2 &&
                              pts.front() == net.node(e.from).location &&
                              pts.back() == net.node(e.to).location;
        if (!straight) {
            for (const Point& p : pts) {
                out += ' ';
                out += format_double(p.x);
                out += ' ';
                out += format_double(p.y);
            }
        }
        out += '\n';
    }
    return out;
}

inline void save_network(const RoadNetwork& net, const std::string& path) {
    write_text_file(path, serialize_network(net));
}

}  // namespace mapmatch
