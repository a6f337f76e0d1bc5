#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <stdexcept>
#include <vector>

namespace mapmatch {

/// Planar position in meters (east, north).
struct Point {
    double x = 0;
    double y = 0;

    friend bool operator==(const Point& a, const Point& b) {
        return a.x == b.x && a.y == b.y;
    }
};

inline double distance(const Point& p, const Point& q) {
    return std::hypot(p.x - q.x, p.y - q.y);
}

inline double squared_distance(const Point& p, const Point& q) {
    const double dx = p.x - q.x;
    const double dy = p.y - q.y;
    return dx * dx + dy * dy;
}

struct SegmentProjection {
    Point foot;
    double offset = 0;  // meters along the segment from its first endpoint
    double distance = 0;
};

/// Closest point of segment ab to p. A degenerate segment (a == b) is
/// treated as the point a with offset 0.
inline SegmentProjection project_to_segment(const Point& p, const Point& a, const Point& b) {
    const double abx = b.x - a.x;
    const double aby = b.y - a.y;
    const double len2 = abx * abx + aby * aby;
    SegmentProjection out;
    if (len2 == 0) {
        out.foot = a;
        out.offset = 0;
        out.distance = distance(p, a);
        return out;
    }
    double t = ((p.x - a.x) * abx + (p.y - a.y) * aby) / len2;
    t = std::clamp(t, 0.0, 1.0);
    out.foot = Point{a.x + t * abx, a.y + t * aby};
    out.offset = t * std::sqrt(len2);
    out.distance = distance(p, out.foot);
    return out;
}

struct PolylineProjection {
    Point foot;
    double arc_offset = 0;  // meters along the polyline
    double distance = 0;
    std::uint32_t segment = 0;
};

/// Arc-length parameterized chain of >= 2 points with positive total
/// length. Exact consecutive duplicate vertices are dropped on
/// construction so every stored segment has positive length.
class Polyline {
public:
    explicit Polyline(std::vector<Point> vertices) {
        for (const Point& v : vertices) {
            if (!std::isfinite(v.x) || !std::isfinite(v.y))
                throw std::invalid_argument("Polyline: non-finite vertex");
            if (!points_.empty() && points_.back() == v) continue;
            points_.push_back(v);
        }
        if (points_.size() < 2)
            throw std::invalid_argument("Polyline: needs at least two distinct vertices");
        cum_.resize(points_.size());
        cum_[0] = 0;
        for (std::size_t i = 1; i < points_.size(); ++i)
            cum_[i] = cum_[i - 1] + distance(points_[i - 1], points_[i]);
    }

    const std::vector<Point>& vertices() const { return points_; }
    const std::vector<double>& cumulative_lengths() const { return cum_; }
    double length() const { return cum_.back(); }
    std::size_t segment_count() const { return points_.size() - 1; }

    /// Point at arc offset s, clamped into [0, length].
    Point point_at(double s) const {
        if (s <= 0) return points_.front();
        if (s >= cum_.back()) return points_.back();
        const auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
        const std::size_t i = static_cast<std::size_t>(it - cum_.begin()) - 1;
        const double seg_len = cum_[i + 1] - cum_[i];
        const double t = (s - cum_[i]) / seg_len;
        const Point& a = points_[i];
        const Point& b = points_[i + 1];
        return Point{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
    }

    /// Nearest point by linear scan over segments; ties resolved toward
    /// the lower segment index.
    PolylineProjection project(const Point& p) const {
        PolylineProjection best;
        best.distance = std::numeric_limits<double>::infinity();
        for (std::uint32_t i = 0; i < segment_count(); ++i) {
            const auto proj = project_to_segment(p, points_[i], points_[i + 1]);
            if (proj.distance < best.distance) {
                best.foot = proj.foot;
                best.arc_offset = cum_[i] + proj.offset;
                best.distance = proj.distance;
                best.segment = i;
            }
        }
        return best;
    }

    /// Sub-chain between arc offsets lo <= hi as a vertex list
    /// (point_at(lo), interior vertices, point_at(hi)).
    std::vector<Point> sub_vertices(double lo, double hi) const {
        std::vector<Point> out;
        out.push_back(point_at(lo));
        for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
            if (cum_[i] > lo && cum_[i] < hi) out.push_back(points_[i]);
        }
        if (cum_.back() > lo && cum_.back() < hi) out.push_back(points_.back());
        out.push_back(point_at(hi));
        return out;
    }

private:
    std::vector<Point> points_;
    std::vector<double> cum_;
};

/// Distance along pl between two arc offsets.
inline double arc_length_between(const Polyline& pl, double s, double t) {
    if (s < 0 || t < 0 || s > pl.length() || t > pl.length())
        throw std::invalid_argument("arc_length_between: offset out of range");
    return std::abs(t - s);
}

struct BoundingBox {
    double min_x = 0, min_y = 0, max_x = 0, max_y = 0;

    bool contains(const BoundingBox& other) const {
        return other.min_x >= min_x && other.max_x <= max_x &&
               other.min_y >= min_y && other.max_y <= max_y;
    }

    double distance_to(const Point& p) const {
        const double dx = std::max({min_x - p.x, 0.0, p.x - max_x});
        const double dy = std::max({min_y - p.y, 0.0, p.y - max_y});
        return std::hypot(dx, dy);
    }
};

inline BoundingBox segment_bounds(const Point& a, const Point& b) {
    return BoundingBox{std::min(a.x, b.x), std::min(a.y, b.y),
                       std::max(a.x, b.x), std::max(a.y, b.y)};
}

/// Quad-tree over line segments tagged with (owner, segment) ids.
/// Segments are stored in the deepest node whose box contains them;
/// straddlers stay at interior nodes. Nearest-neighbor runs best-first
/// on node box distance, so the reported hit is exactly the global
/// minimum with ties resolved toward the smaller (owner, segment) id.
class QuadTree {
public:
    struct SegmentRef {
        std::uint32_t owner = 0;
        std::uint32_t segment = 0;

        friend bool operator<(const SegmentRef& a, const SegmentRef& b) {
            return a.owner != b.owner ? a.owner < b.owner : a.segment < b.segment;
        }
    };

    struct NearestHit {
        SegmentRef ref;
        Point foot;
        double offset = 0;  // along the stored segment
        double distance = 0;
    };

    explicit QuadTree(BoundingBox bounds, int node_capacity = 16, int max_depth = 20)
        : capacity_(node_capacity), max_depth_(max_depth) {
        nodes_.push_back(TreeNode{bounds, {-1, -1, -1, -1}, {}, 0});
    }

    void insert(const Point& a, const Point& b, SegmentRef ref) {
        items_.push_back(Item{a, b, ref, segment_bounds(a, b)});
        place(0, static_cast<int>(items_.size()) - 1);
        ++size_;
    }

    std::size_t size() const { return size_; }

    std::optional<NearestHit> nearest(const Point& query) const {
        if (size_ == 0) return std::nullopt;
        NearestHit best;
        best.distance = std::numeric_limits<double>::infinity();
        best.ref = SegmentRef{std::numeric_limits<std::uint32_t>::max(),
                              std::numeric_limits<std::uint32_t>::max()};
        using Entry = std::pair<double, int>;
        std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
        queue.emplace(nodes_[0].box.distance_to(query), 0);
        while (!queue.empty()) {
            const auto [box_dist, ni] = queue.top();
            queue.pop();
            if (box_dist > best.distance) break;
            const TreeNode& node = nodes_[ni];
            for (int item_idx : node.items) {
                const Item& item = items_[item_idx];
                const auto proj = project_to_segment(query, item.a, item.b);
                if (proj.distance < best.distance ||
                    (proj.distance == best.distance && item.ref < best.ref)) {
                    best.ref = item.ref;
                    best.foot = proj.foot;
                    best.offset = proj.offset;
                    best.distance = proj.distance;
                }
            }
            for (int child : node.children) {
                if (child < 0) continue;
                const double d = nodes_[child].box.distance_to(query);
                if (d <= best.distance) queue.emplace(d, child);
            }
        }
        return best;
    }

    /// All segment refs whose distance to the query point is <= radius.
    std::vector<SegmentRef> within_radius(const Point& query, double radius) const {
        std::vector<SegmentRef> out;
        if (size_ == 0) return out;
        std::vector<int> stack{0};
        while (!stack.empty()) {
            const int ni = stack.back();
            stack.pop_back();
            const TreeNode& node = nodes_[ni];
            if (node.box.distance_to(query) > radius) continue;
            for (int item_idx : node.items) {
                const Item& item = items_[item_idx];
                if (project_to_segment(query, item.a, item.b).distance <= radius)
                    out.push_back(item.ref);
            }
            for (int child : node.children)
                if (child >= 0) stack.push_back(child);
        }
        return out;
    }

private:
    struct Item {
        Point a, b;
        SegmentRef ref;
        BoundingBox box;
    };

    struct TreeNode {
        BoundingBox box;
        std::array<int, 4> children;
        std::vector<int> items;
        int depth = 0;
        bool is_leaf() const { return children[0] < 0; }
    };

    void place(int node_idx, int item_idx) {
        int ni = node_idx;
        while (true) {
            TreeNode& node = nodes_[ni];
            if (node.is_leaf()) {
                node.items.push_back(item_idx);
                if (static_cast<int>(node.items.size()) > capacity_ && node.depth < max_depth_)
                    subdivide(ni);
                return;
            }
            const int child = containing_child(node, items_[item_idx].box);
            if (child < 0) {
                node.items.push_back(item_idx);
                return;
            }
            ni = child;
        }
    }

    int containing_child(const TreeNode& node, const BoundingBox& box) const {
        for (int child : node.children) {
            if (child >= 0 && nodes_[child].box.contains(box)) return child;
        }
        return -1;
    }

    void subdivide(int node_idx) {
        const BoundingBox box = nodes_[node_idx].box;
        const int depth = nodes_[node_idx].depth;
        const double mx = 0.5 * (box.min_x + box.max_x);
        const double my = 0.5 * (box.min_y + box.max_y);
        const BoundingBox quads[4] = {
            {box.min_x, box.min_y, mx, my},
            {mx, box.min_y, box.max_x, my},
            {box.min_x, my, mx, box.max_y},
            {mx, my, box.max_x, box.max_y},
        };
        std::array<int, 4> children{};
        for (int q = 0; q < 4; ++q) {
            children[q] = static_cast<int>(nodes_.size());
            nodes_.push_back(TreeNode{quads[q], {-1, -1, -1, -1}, {}, depth + 1});
        }
        // place() below can grow nodes_ and invalidate references, so take the
        // item list by value and go through nodes_[node_idx] fresh every time.
        nodes_[node_idx].children = children;
        std::vector<int> pending = std::move(nodes_[node_idx].items);
        nodes_[node_idx].items.clear();
        std::vector<int> keep;
        for (int item_idx : pending) {
            const int child = containing_child(nodes_[node_idx], items_[item_idx].box);
            if (child < 0) {
                keep.push_back(item_idx);
            } else {
                place(child, item_idx);
            }
        }
        nodes_[node_idx].items = std::move(keep);
    }

    int capacity_;
    int max_depth_;
    std::vector<TreeNode> nodes_;
    std::vector<Item> items_;
    std::size_t size_ = 0;
};

/// Builds a quad-tree over the polyline's segments (owner = segment index).
inline QuadTree index_polyline(const Polyline& pl, int node_capacity = 16, int max_depth = 20) {
    const auto& pts = pl.vertices();
    BoundingBox box{pts[0].x, pts[0].y, pts[0].x, pts[0].y};
    for (const Point& p : pts) {
        box.min_x = std::min(box.min_x, p.x);
        box.min_y = std::min(box.min_y, p.y);
        box.max_x = std::max(box.max_x, p.x);
        box.max_y = std::max(box.max_y, p.y);
    }
    QuadTree tree(box, node_capacity, max_depth);
    for (std::uint32_t i = 0; i < pl.segment_count(); ++i)
        tree.insert(pts[i], pts[i + 1], QuadTree::SegmentRef{i, i});
    return tree;
}

/// Nearest point on an indexed polyline. idx must index pl's segments
/// with owner = segment index; the result matches Polyline::project.
inline PolylineProjection nearest_on_polyline(const Point& p, const Polyline& pl,
                                              const QuadTree& idx) {
    const auto hit = idx.nearest(p);
    if (!hit) throw std::invalid_argument("nearest_on_polyline: empty index");
    PolylineProjection out;
    out.foot = hit->foot;
    out.segment = hit->ref.segment;
    out.arc_offset = pl.cumulative_lengths()[hit->ref.segment] + hit->offset;
    out.distance = hit->distance;
    return out;
}

}  // namespace mapmatch
