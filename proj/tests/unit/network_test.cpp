#include "mapmatch/road_network.hpp"
#include "mapmatch/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

using namespace mapmatch;

namespace {

RoadNetwork two_node_net(bool oneway = false) {
    std::vector<NodeSpec> nodes{{0, {0, 0}}, {1, {100, 0}}};
    std::vector<EdgeSpec> edges{{0, 1, 10, oneway, {}}};
    return RoadNetwork::build(nodes, edges);
}

/// Exhaustive branch-and-bound reference for driving distance: all
/// node-hop sequences up to a depth cap, tried from every legal way of
/// leaving a and entering b. Independent of the engine's Dijkstra.
struct BruteRouter {
    const RoadNetwork& net;
    int max_depth;

    double min_step(std::uint32_t u, std::uint32_t v) const {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& h : net.out_edges(u))
            if (h.neighbor == v) best = std::min(best, net.edge(h.edge).length);
        return best;
    }

    void dfs(std::uint32_t at, double acc, int depth, std::vector<char>& used,
             const std::vector<std::pair<std::uint32_t, double>>& entries, double& best) const {
        if (acc >= best) return;
        for (const auto& [node, tail] : entries)
            if (node == at) best = std::min(best, acc + tail);
        if (depth == max_depth) return;
        for (const auto& h : net.out_edges(at)) {
            if (used[h.neighbor]) continue;
            used[h.neighbor] = 1;
            dfs(h.neighbor, acc + net.edge(h.edge).length, depth + 1, used, entries, best);
            used[h.neighbor] = 0;
        }
    }

    double operator()(const RoadPoint& a, const RoadPoint& b) const {
        const Edge& ea = net.edge(a.edge);
        const Edge& eb = net.edge(b.edge);
        double best = std::numeric_limits<double>::infinity();
        if (a.edge == b.edge) {
            const double delta = b.offset - a.offset;
            if (delta >= 0 || !ea.oneway) best = std::abs(delta);
        }
        // ways of leaving a: ride forward to its end node, or backward when allowed
        std::vector<std::pair<std::uint32_t, double>> exits{{ea.to, ea.length - a.offset}};
        if (!ea.oneway || a.offset == 0) exits.push_back({ea.from, a.offset});
        // ways of entering b
        std::vector<std::pair<std::uint32_t, double>> entries{{eb.from, b.offset}};
        if (!eb.oneway || b.offset == eb.length) entries.push_back({eb.to, eb.length - b.offset});

        for (const auto& [start, head] : exits) {
            std::vector<char> used(net.node_count(), 0);
            used[start] = 1;
            dfs(start, head, 0, used, entries, best);
        }
        return best;
    }
};

double brute_point_edge_distance(const RoadNetwork& net, const Point& p, std::uint32_t e) {
    return net.edge(e).geometry.project(p).distance;
}

void check_path_connected(const RoadNetwork& net, const RoutePath& path) {
    double sum = 0;
    for (std::size_t i = 0; i < path.entries.size(); ++i) {
        const PathEntry& en = path.entries[i];
        REQUIRE(en.lo <= en.hi);
        REQUIRE(en.lo >= 0);
        REQUIRE(en.hi <= net.edge(en.edge).length);
        sum += en.hi - en.lo;
        if (i + 1 < path.entries.size()) {
            const PathEntry& nx = path.entries[i + 1];
            const Point tail = net.point_of({en.edge, en.forward ? en.hi : en.lo});
            const Point head = net.point_of({nx.edge, nx.forward ? nx.lo : nx.hi});
            REQUIRE(distance(tail, head) < 1e-6);
        }
    }
    REQUIRE(path.total_length == Catch::Approx(sum).margin(1e-9));
}

}  // namespace

TEST_CASE("two-node network wires adjacency both ways", "[network]") {
    const RoadNetwork net = two_node_net(false);
    CHECK(net.node_count() == 2);
    CHECK(net.edge_count() == 1);
    REQUIRE(net.out_edges(0).size() == 1);
    REQUIRE(net.out_edges(1).size() == 1);
    CHECK(net.out_edges(0)[0].forward);
    CHECK_FALSE(net.out_edges(1)[0].forward);

    const RoadNetwork one = two_node_net(true);
    CHECK(one.out_edges(0).size() == 1);
    CHECK(one.out_edges(1).empty());
}

TEST_CASE("network file parsing and component pruning", "[network]") {
    const std::string text =
        "nodes\n"
        "0 0 0\n"
        "1 100 0\n"
        "2 9999 9999\n"
        "edges\n"
        "0 0 1 10 0\n";
    std::vector<std::string> warnings;
    const RoadNetwork net = parse_network(text, &warnings);
    CHECK(net.node_count() == 2);  // isolated node dropped
    CHECK_FALSE(warnings.empty());

    CHECK_THROWS(parse_network("nodes\n0 0 0\nedges\n0 0 5 10 0\n"));   // unknown node
    CHECK_THROWS(parse_network("nodes\n0 0 0\nedges\n0 0 0 10 0\n"));   // self loop
    CHECK_THROWS(parse_network(
        "nodes\n0 0 0\n1 1 0\nedges\n0 0 1 0 0\n"));                    // bad speed
    CHECK_THROWS(parse_network("nodes\n0 0 0\n0 1 0\nedges\n"));        // duplicate id
}

TEST_CASE("wgs84 header converts about the centroid", "[network]") {
    const std::string text =
        "crs: wgs84\n"
        "nodes\n"
        "0 -122.30 47.60\n"
        "1 -122.29 47.62\n"
        "edges\n"
        "0 0 1 10 0\n";
    const RoadNetwork net = parse_network(text);
    // reference conversion: equirectangular about the node centroid
    const double rad = std::acos(-1.0) / 180.0;
    const double lat0 = 47.61, lon0 = -122.295, R = 6371000;
    const double x0 = (-122.30 - lon0) * rad * R * std::cos(lat0 * rad);
    const double y0 = (47.60 - lat0) * rad * R;
    CHECK(net.node(0).location.x == Catch::Approx(x0).margin(1e-6));
    CHECK(net.node(0).location.y == Catch::Approx(y0).margin(1e-6));
    // a degree of longitude at 47.6N is ~75km; sanity that scale applied
    CHECK(distance(net.node(0).location, net.node(1).location) > 2000);
}

TEST_CASE("grid generator hits the advertised shapes", "[network]") {
    const RoadNetwork square = generate_grid_network(2, 2, 100, 0, 0, 5, 5, 1);
    CHECK(square.node_count() == 4);
    CHECK(square.edge_count() == 4);

    const RoadNetwork ten = generate_grid_network(10, 10, 500, 0, 0, 8, 14, 2);
    CHECK(ten.node_count() == 100);
    CHECK(ten.edge_count() == 180);  // 2*10*9 grid edges

    const RoadNetwork big = generate_grid_network(20, 20, 500, 40, 0.1, 8, 14, 3);
    CHECK(big.node_count() == 400);  // removal never disconnects
    CHECK(std::abs(static_cast<double>(big.edge_count()) - 0.9 * 760) < 45);

    CHECK(serialize_network(generate_grid_network(6, 5, 200, 30, 0.2, 4, 9, 77)) ==
          serialize_network(generate_grid_network(6, 5, 200, 30, 0.2, 4, 9, 77)));
    CHECK(serialize_network(generate_grid_network(6, 5, 200, 30, 0.2, 4, 9, 77)) !=
          serialize_network(generate_grid_network(6, 5, 200, 30, 0.2, 4, 9, 78)));

    CHECK_THROWS(generate_grid_network(1, 5, 100, 0, 0, 5, 5, 1));
    CHECK_THROWS(generate_grid_network(3, 3, 100, 60, 0, 5, 5, 1));   // jitter >= spacing/2
    CHECK_THROWS(generate_grid_network(3, 3, 100, 0, 1.0, 5, 5, 1));  // removal = 1
}

TEST_CASE("network serialization round-trips byte for byte", "[network]") {
    const RoadNetwork net = generate_grid_network(4, 4, 150, 25, 0.15, 6, 12, 9);
    const std::string once = serialize_network(net);
    const RoadNetwork back = parse_network(once);
    CHECK(back.node_count() == net.node_count());
    CHECK(back.edge_count() == net.edge_count());
    CHECK(serialize_network(back) == once);
}

TEST_CASE("road points snap to edge ends and validate range", "[network]") {
    const RoadNetwork net = two_node_net();
    const double len = net.edge(0).length;
    CHECK(net.road_point(0, 1e-9).offset == 0.0);
    CHECK(net.road_point(0, len - 1e-9).offset == len);
    CHECK(net.road_point(0, 40).offset == 40.0);
    CHECK_THROWS(net.road_point(0, -1));
    CHECK_THROWS(net.road_point(0, len + 1));
    CHECK_THROWS(net.road_point(7, 0));
}

TEST_CASE("driving distance basics", "[network]") {
    const RoadNetwork net = two_node_net(false);
    const RoadPoint a = net.road_point(0, 10), b = net.road_point(0, 40);
    CHECK(net.driving_distance(a, a) == 0.0);
    CHECK(net.driving_distance(a, b) == Catch::Approx(30).margin(1e-9));
    CHECK(net.driving_distance(b, a) == Catch::Approx(30).margin(1e-9));

    const RoadNetwork one = two_node_net(true);
    CHECK(one.driving_distance(one.road_point(0, 10), one.road_point(0, 40)) ==
          Catch::Approx(30).margin(1e-9));
    CHECK_FALSE(is_reachable(one.driving_distance(one.road_point(0, 40), one.road_point(0, 10))));
    CHECK_THROWS(one.shortest_route(one.road_point(0, 40), one.road_point(0, 10)));
}

TEST_CASE("shortest paths agree with exhaustive enumeration", "[network]") {
    const RoadNetwork net = generate_grid_network(5, 5, 100, 20, 0.15, 5, 10, 21);
    const BruteRouter brute{net, 12};
    Rng rng(22);
    for (int trial = 0; trial < 100; ++trial) {
        const std::uint32_t ea = static_cast<std::uint32_t>(rng.below(net.edge_count()));
        const std::uint32_t eb = static_cast<std::uint32_t>(rng.below(net.edge_count()));
        const RoadPoint a = net.road_point(ea, rng.uniform(0, net.edge(ea).length));
        const RoadPoint b = net.road_point(eb, rng.uniform(0, net.edge(eb).length));
        const double expect = brute(a, b);
        const double got = net.driving_distance(a, b);
        CAPTURE(trial, ea, eb, a.offset, b.offset);
        REQUIRE(is_reachable(got));
        REQUIRE(got == Catch::Approx(expect).margin(1e-6));

        const RoutePath path = net.shortest_route(a, b);
        REQUIRE(path.total_length == Catch::Approx(got).margin(1e-6));
        check_path_connected(net, path);
        REQUIRE(distance(net.point_of(path.start()), net.point_of(a)) < 1e-6);
        REQUIRE(distance(net.point_of(path.end()), net.point_of(b)) < 1e-6);
    }
}

TEST_CASE("route length matches driving distance at scale", "[network]") {
    const RoadNetwork net = generate_grid_network(8, 8, 120, 25, 0.1, 5, 10, 31);
    Rng rng(32);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::uint32_t ea = static_cast<std::uint32_t>(rng.below(net.edge_count()));
        const std::uint32_t eb = static_cast<std::uint32_t>(rng.below(net.edge_count()));
        const RoadPoint a = net.road_point(ea, rng.uniform(0, net.edge(ea).length));
        const RoadPoint b = net.road_point(eb, rng.uniform(0, net.edge(eb).length));
        const double d = net.driving_distance(a, b);
        REQUIRE(is_reachable(d));
        REQUIRE(net.shortest_route(a, b).total_length ==
                Catch::Approx(d).margin(1e-6 + 1e-9 * d));
    }
}

TEST_CASE("driving distance triangle inequality on two-way grids", "[network]") {
    const RoadNetwork net = generate_grid_network(6, 6, 100, 15, 0.1, 5, 10, 41);
    Rng rng(42);
    for (int trial = 0; trial < 300; ++trial) {
        RoadPoint pts[3];
        for (RoadPoint& p : pts) {
            const std::uint32_t e = static_cast<std::uint32_t>(rng.below(net.edge_count()));
            p = net.road_point(e, rng.uniform(0, net.edge(e).length));
        }
        const double ab = net.driving_distance(pts[0], pts[1]);
        const double ac = net.driving_distance(pts[0], pts[2]);
        const double cb = net.driving_distance(pts[2], pts[1]);
        REQUIRE(ab <= ac + cb + 1e-6);
    }
}

TEST_CASE("one-to-many distances equal the pairwise queries", "[network]") {
    const RoadNetwork net = generate_grid_network(5, 5, 100, 20, 0.15, 5, 10, 51);
    Rng rng(52);
    const std::uint32_t ea = static_cast<std::uint32_t>(rng.below(net.edge_count()));
    const RoadPoint a = net.road_point(ea, rng.uniform(0, net.edge(ea).length));

    CHECK(net.one_to_many_distances(a, {}).empty());
    const auto self = net.one_to_many_distances(a, {a});
    REQUIRE(self.size() == 1);
    CHECK(self[0] == 0.0);

    std::vector<RoadPoint> targets;
    for (int i = 0; i < 60; ++i) {
        const std::uint32_t e = static_cast<std::uint32_t>(rng.below(net.edge_count()));
        targets.push_back(net.road_point(e, rng.uniform(0, net.edge(e).length)));
    }
    const auto many = net.one_to_many_distances(a, targets);
    REQUIRE(many.size() == targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        CAPTURE(i);
        REQUIRE(many[i] ==
                Catch::Approx(net.driving_distance(a, targets[i])).margin(1e-6));
    }
}

TEST_CASE("edge radius query equals the linear scan", "[network]") {
    const RoadNetwork net = generate_grid_network(6, 6, 100, 20, 0.1, 5, 10, 61);
    Rng rng(62);
    CHECK_THROWS(net.edges_within_radius({0, 0}, 0));
    for (int trial = 0; trial < 200; ++trial) {
        const Point p{rng.uniform(-50, 550), rng.uniform(-50, 550)};
        const double r = rng.uniform(5, 250);
        std::vector<std::uint32_t> expect;
        for (std::uint32_t e = 0; e < net.edge_count(); ++e)
            if (brute_point_edge_distance(net, p, e) <= r) expect.push_back(e);
        const auto got = net.edges_within_radius(p, r);
        CAPTURE(trial, p.x, p.y, r);
        REQUIRE(got == expect);
    }

    // p on an edge with a tiny radius finds that edge
    const Point on = net.point_of(net.road_point(0, net.edge(0).length / 2));
    const auto tiny = net.edges_within_radius(on, 0.01);
    CHECK(std::find(tiny.begin(), tiny.end(), 0u) != tiny.end());
}

TEST_CASE("traversal measure merges intervals per undirected edge", "[network]") {
    const RoadNetwork net = two_node_net();
    const double len = net.edge(0).length;

    RoutePath full;
    full.entries.push_back({0, 0, len, true});
    full.total_length = len;
    const TraversalMeasure m1 = traversal_measure(full);
    REQUIRE(m1.size() == 1);
    REQUIRE(m1.at(0).size() == 1);
    CHECK(m1.at(0)[0].first == 0.0);
    CHECK(m1.at(0)[0].second == len);
    CHECK(measure_length(m1) == len);

    RoutePath half;
    half.entries.push_back({0, 0, len / 2, true});
    half.total_length = len / 2;
    CHECK(measure_length(traversal_measure(half)) == len / 2);

    // out and back over the same stretch counts once (set union)
    RoutePath outback;
    outback.entries.push_back({0, 0, 80, true});
    outback.entries.push_back({0, 30, 80, false});
    outback.total_length = 130;
    const TraversalMeasure m2 = traversal_measure(outback);
    REQUIRE(m2.at(0).size() == 1);
    CHECK(m2.at(0)[0].first == 0.0);
    CHECK(m2.at(0)[0].second == 80.0);
    CHECK(measure_length(m2) == 80.0);
}

TEST_CASE("path geometry projects onto the whole route", "[network]") {
    const RoadNetwork net = generate_grid_network(4, 4, 100, 10, 0, 5, 10, 71);
    const RoadPoint a = net.road_point(0, 5);
    const RoadPoint b = net.road_point(net.edge_count() - 1, 5);
    const RoutePath path = net.shortest_route(a, b);
    const PathGeometry geom(net, path);
    CHECK(geom.length() == Catch::Approx(path.total_length).margin(1e-6));

    // every on-path point projects at distance ~0 with a consistent arc
    double last_arc = -1;
    for (double f : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const Point p = geom.polyline().point_at(f * geom.length());
        const auto proj = geom.project(p);
        CHECK(proj.distance < 1e-6);
        CHECK(proj.arc_offset >= last_arc);
        last_arc = proj.arc_offset;
    }

    // degenerate single-point path
    RoutePath dot;
    dot.entries.push_back({0, 5, 5, true});
    dot.total_length = 0;
    const PathGeometry dg(net, dot);
    CHECK(dg.degenerate());
    CHECK(dg.length() == 0.0);
    const auto proj = dg.project({0, 0});
    CHECK(proj.arc_offset == 0.0);
}
