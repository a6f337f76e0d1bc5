#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mapmatch/multi_track.hpp"
#include "mapmatch/rng.hpp"
#include "mapmatch/road_network.hpp"
#include "mapmatch/simulation.hpp"
#include "mapmatch/single_track.hpp"
#include "mapmatch/text.hpp"

namespace mapmatch {

/// Jaccard similarity of two paths' traversal measures: length of the
/// common traversed stretches over the length of everything either path
/// traversed. Directions are ignored; repeated traversals count once.
inline double similarity(const RoutePath& p1, const RoutePath& p2) {
    const TraversalMeasure m1 = traversal_measure(p1);
    const TraversalMeasure m2 = traversal_measure(p2);
    const double len1 = measure_length(m1);
    const double len2 = measure_length(m2);
    if (len1 == 0 && len2 == 0)
        throw std::invalid_argument("similarity: both paths have zero length");

    double inter = 0;
    for (const auto& [edge, a] : m1) {
        const auto it = m2.find(edge);
        if (it == m2.end()) continue;
        const auto& b = it->second;
        std::size_t i = 0, j = 0;
        while (i < a.size() && j < b.size()) {
            const double lo = std::max(a[i].first, b[j].first);
            const double hi = std::min(a[i].second, b[j].second);
            if (hi > lo) inter += hi - lo;
            if (a[i].second < b[j].second) ++i;
            else ++j;
        }
    }
    return inter / (len1 + len2 - inter);
}

/// Mean after dropping floor(fraction * n) values from each end.
inline double trimmed_mean(std::vector<double> values, double fraction) {
    if (fraction < 0 || fraction >= 0.5)
        throw std::invalid_argument("trimmed_mean: fraction must be in [0, 0.5)");
    const std::size_t n = values.size();
    const std::size_t k = static_cast<std::size_t>(fraction * static_cast<double>(n));
    if (n == 0 || n - 2 * k == 0) throw std::invalid_argument("trimmed_mean: nothing left");
    std::sort(values.begin(), values.end());
    double sum = 0;
    for (std::size_t i = k; i < n - k; ++i) sum += values[i];
    return sum / static_cast<double>(n - 2 * k);
}

struct SweepSpec {
    std::vector<double> sigmas{10};
    std::vector<double> taus{60};
    std::vector<double> lambdas{1};
    std::vector<std::string> methods{"single"};  // single|iterative|laplacian|
                                                 // iterative_boost|laplacian_boost
    std::vector<int> track_counts{1};
    int routes = 1;
    int instances = 1;
    std::uint64_t base_seed = 0;
    double trim_fraction = 0.1;
    double route_min = 3000;
    double route_max = 15000;
    SamplingDistribution distribution = SamplingDistribution::uniform;
    MatchConfig match;  // lambda is overridden per cell
    BoostConfig boost;  // seed is overridden per row

    void validate() const {
        if (sigmas.empty() || taus.empty() || lambdas.empty() || methods.empty() ||
            track_counts.empty())
            throw std::invalid_argument("sweep: empty grid");
        if (routes < 1 || instances < 1)
            throw std::invalid_argument("sweep: routes and instances must be >= 1");
        if (trim_fraction < 0 || trim_fraction >= 0.5)
            throw std::invalid_argument("sweep: trim fraction must be in [0, 0.5)");
        for (double s : sigmas)
            if (s < 0) throw std::invalid_argument("sweep: sigma must be >= 0");
        for (double t : taus)
            if (!(t > 0)) throw std::invalid_argument("sweep: tau must be > 0");
        for (double l : lambdas)
            if (l < 0) throw std::invalid_argument("sweep: lambda must be >= 0");
        for (int s : track_counts)
            if (s < 1) throw std::invalid_argument("sweep: track count must be >= 1");
        for (const std::string& m : methods)
            if (m != "single" && m != "iterative" && m != "laplacian" &&
                m != "iterative_boost" && m != "laplacian_boost")
                throw std::invalid_argument("sweep: unknown method " + m);
    }
};

struct ResultRow {
    double sigma = 0;
    double tau = 0;
    double lambda = 0;
    std::string method;
    int track_count = 1;
    int route = 0;
    int instance = 0;
    double similarity = std::numeric_limits<double>::quiet_NaN();
    double runtime_ms = 0;
    std::string error;  // empty on success

    /// Cell identity: everything except the measured columns.
    std::string key() const {
        std::string k;
        k += format_double(sigma);
        k += ',';
        k += format_double(tau);
        k += ',';
        k += format_double(lambda);
        k += ',';
        k += method;
        k += ',';
        k += std::to_string(track_count);
        k += ',';
        k += std::to_string(route);
        k += ',';
        k += std::to_string(instance);
        return k;
    }
};

struct ResultTable {
    std::vector<ResultRow> rows;
};

inline const char* kResultsHeader = "sigma,tau,lambda,method,s,route,instance,similarity,runtime_ms,error";

inline std::string emit_results(const ResultTable& table) {
    std::string out = kResultsHeader;
    out += '\n';
    for (const ResultRow& r : table.rows) {
        out += r.key();
        out += ',';
        out += format_double(r.similarity);
        out += ',';
        out += format_double(r.runtime_ms);
        out += ',';
        out += r.error;
        out += '\n';
    }
    return out;
}

inline ResultTable parse_results(const std::string& text) {
    const auto lines = content_lines(text);
    if (lines.empty() || lines[0] != kResultsHeader)
        throw std::runtime_error("results: missing or unexpected header");
    ResultTable table;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i], ',');
        if (f.size() != 10) throw std::runtime_error("results: bad row: " + lines[i]);
        ResultRow r;
        r.sigma = parse_double(f[0]);
        r.tau = parse_double(f[1]);
        r.lambda = parse_double(f[2]);
        r.method = std::string(f[3]);
        r.track_count = static_cast<int>(parse_int(f[4]));
        r.route = static_cast<int>(parse_int(f[5]));
        r.instance = static_cast<int>(parse_int(f[6]));
        r.similarity = parse_double(f[7]);
        r.runtime_ms = parse_double(f[8]);
        r.error = std::string(f[9]);
        table.rows.push_back(std::move(r));
    }
    return table;
}

namespace detail {

inline std::uint64_t seed_component(double v) { return std::bit_cast<std::uint64_t>(v); }

/// Data seed for one (sigma, tau, route, instance) cell. Lambda, method,
/// and track count are deliberately excluded: every matcher sees the
/// same simulated data for a given cell.
inline std::uint64_t cell_seed(std::uint64_t base, double sigma, double tau, int route,
                               int instance) {
    std::uint64_t s = mix_seed(base, seed_component(sigma));
    s = mix_seed(s, seed_component(tau));
    s = mix_seed(s, static_cast<std::uint64_t>(route) + 1);
    s = mix_seed(s, static_cast<std::uint64_t>(instance) + 1);
    return s;
}

inline std::string sanitize_error(std::string msg) {
    for (char& c : msg)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return msg;
}

inline MultiMethod multi_method_from_name(const std::string& name) {
    if (name == "iterative") return MultiMethod::iterative;
    if (name == "laplacian") return MultiMethod::laplacian;
    if (name == "iterative_boost") return MultiMethod::iterative_boost;
    if (name == "laplacian_boost") return MultiMethod::laplacian_boost;
    throw std::invalid_argument("unknown method: " + name);
}

inline std::uint64_t method_tag(const std::string& name) {
    if (name == "iterative_boost") return 0xb1;
    if (name == "laplacian_boost") return 0xb2;
    return 0xb0;
}

struct SweepTask {
    double sigma, tau, lambda;
    std::string method;
    int track_count, route, instance;

    ResultRow key_row() const {
        ResultRow probe;
        probe.sigma = sigma;
        probe.tau = tau;
        probe.lambda = lambda;
        probe.method = method;
        probe.track_count = track_count;
        probe.route = route;
        probe.instance = instance;
        return probe;
    }
};

/// Canonical row enumeration order of a sweep.
inline std::vector<SweepTask> sweep_tasks(const SweepSpec& spec) {
    std::vector<SweepTask> tasks;
    for (double sigma : spec.sigmas)
        for (double tau : spec.taus)
            for (double lambda : spec.lambdas)
                for (const std::string& method : spec.methods)
                    for (int s : spec.track_counts)
                        for (int r = 0; r < spec.routes; ++r)
                            for (int i = 0; i < spec.instances; ++i)
                                tasks.push_back(
                                    SweepTask{sigma, tau, lambda, method, s, r, i});
    return tasks;
}

}  // namespace detail

/// One experiment: simulate track_count tracks over the route and score
/// the designated matcher against the true route. Pure given (net,
/// route, row key fields, base seed); used by both the sweep harness and
/// any caller wanting a single cell.
inline ResultRow run_sweep_row(const RoadNetwork& net, const RoutePath& route,
                               const SweepSpec& spec, double sigma, double tau, double lambda,
                               const std::string& method, int track_count, int route_id,
                               int instance) {
    ResultRow row;
    row.sigma = sigma;
    row.tau = tau;
    row.lambda = lambda;
    row.method = method;
    row.track_count = track_count;
    row.route = route_id;
    row.instance = instance;

    const std::uint64_t data_seed =
        detail::cell_seed(spec.base_seed, sigma, tau, route_id, instance);

    SamplingConfig scfg;
    scfg.sigma = sigma;
    scfg.tau = tau;
    scfg.distribution = spec.distribution;
    scfg.seed = data_seed;

    MatchConfig mcfg = spec.match;
    mcfg.lambda = lambda;

    const auto start = std::chrono::steady_clock::now();
    try {
        std::vector<Track> tracks;
        tracks.reserve(track_count);
        for (int j = 0; j < track_count; ++j) {
            Rng rng(mix_seed(data_seed, static_cast<std::uint64_t>(j)));
            tracks.push_back(generate_track(net, route, scfg, rng).track);
        }

        if (method == "single") {
            double sum = 0;
            for (const Track& tr : tracks)
                sum += similarity(match_track(net, tr, mcfg).path, route);
            row.similarity = sum / static_cast<double>(tracks.size());
        } else {
            BoostConfig bcfg = spec.boost;
            bcfg.seed = mix_seed(data_seed, detail::method_tag(method));
            const TrackSet ts = TrackSet::from_tracks(std::move(tracks));
            const MultiMatchResult mm =
                match_multi(net, ts, detail::multi_method_from_name(method), mcfg, bcfg);
            row.similarity = similarity(mm.match.path, route);
        }
    } catch (const std::exception& e) {
        row.similarity = std::numeric_limits<double>::quiet_NaN();
        row.error = detail::sanitize_error(e.what());
    }
    row.runtime_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    return row;
}

/// Routes are drawn once per sweep from a stream derived only from the
/// base seed, so every cell sees the same route set.
inline std::vector<RoutePath> sweep_routes(const RoadNetwork& net, const SweepSpec& spec) {
    Rng rng(mix_seed(spec.base_seed, 0x0107));
    std::vector<RoutePath> routes;
    routes.reserve(spec.routes);
    for (int r = 0; r < spec.routes; ++r)
        routes.push_back(generate_route(net, rng, spec.route_min, spec.route_max));
    return routes;
}

/// Full factorial sweep. Row order is the fixed enumeration order of the
/// grids; row contents depend only on the spec, never on worker count or
/// scheduling. A filter can skip rows (the CLI uses it to resume);
/// skipped rows are omitted from the table.
inline ResultTable run_sweep(const RoadNetwork& net, const SweepSpec& spec, int workers = 1,
                             const std::function<bool(const ResultRow&)>* compute_filter = nullptr) {
    spec.validate();
    if (workers < 1) throw std::invalid_argument("sweep: workers must be >= 1");
    const std::vector<detail::SweepTask> tasks = detail::sweep_tasks(spec);

    std::vector<char> wanted(tasks.size(), 1);
    if (compute_filter) {
        for (std::size_t t = 0; t < tasks.size(); ++t)
            wanted[t] = (*compute_filter)(tasks[t].key_row()) ? 1 : 0;
    }
    if (std::none_of(wanted.begin(), wanted.end(), [](char w) { return w == 1; }))
        return ResultTable{};

    const std::vector<RoutePath> routes = sweep_routes(net, spec);
    std::vector<ResultRow> rows(tasks.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
        while (true) {
            const std::size_t t = next.fetch_add(1);
            if (t >= tasks.size()) return;
            if (!wanted[t]) continue;
            const detail::SweepTask& task = tasks[t];
            rows[t] = run_sweep_row(net, routes[task.route], spec, task.sigma, task.tau,
                                    task.lambda, task.method, task.track_count, task.route,
                                    task.instance);
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    ResultTable table;
    table.rows.reserve(tasks.size());
    for (std::size_t t = 0; t < tasks.size(); ++t)
        if (wanted[t]) table.rows.push_back(std::move(rows[t]));
    return table;
}

/// Runs the sweep into a results file, resuming when the file already
/// holds some of the rows: present rows are kept as-is, missing ones are
/// computed, and the merged table is written in canonical order. When
/// nothing is missing the file is left untouched.
inline ResultTable sweep_to_file(const RoadNetwork& net, const SweepSpec& spec,
                                 const std::string& path, int workers = 1,
                                 bool* file_rewritten = nullptr) {
    spec.validate();
    std::unordered_map<std::string, ResultRow> existing;
    bool have_file = false;
    {
        std::string text;
        try {
            text = read_text_file(path);
            have_file = true;
        } catch (const std::exception&) {
            have_file = false;  // no file yet: full run
        }
        if (have_file)
            for (ResultRow& r : parse_results(text).rows) existing.emplace(r.key(), std::move(r));
    }

    const std::function<bool(const ResultRow&)> filter = [&](const ResultRow& probe) {
        return existing.find(probe.key()) == existing.end();
    };
    ResultTable computed = run_sweep(net, spec, workers, &filter);

    // Reassemble in canonical order: fresh rows where computed, cached
    // ones elsewhere.
    ResultTable merged;
    std::unordered_map<std::string, const ResultRow*> fresh;
    for (const ResultRow& r : computed.rows) fresh.emplace(r.key(), &r);
    for (const detail::SweepTask& task : detail::sweep_tasks(spec)) {
        const std::string key = task.key_row().key();
        if (const auto it = fresh.find(key); it != fresh.end())
            merged.rows.push_back(*it->second);
        else
            merged.rows.push_back(existing.at(key));
    }

    const bool rewrite = !have_file || !computed.rows.empty();
    if (rewrite) write_text_file(path, emit_results(merged));
    if (file_rewritten) *file_rewritten = rewrite;
    return merged;
}

}  // namespace mapmatch
