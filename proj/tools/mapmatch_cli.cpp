// Command-line front end: network generation, track simulation, matching,
// noise estimation, similarity scoring, and parameter sweeps.
#include "mapmatch/mapmatch.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace mapmatch;

int g_verbose = 0;

void vlog(const std::string& msg) {
    if (g_verbose) std::cerr << msg << "\n";
}

RoadNetwork load_network_verbose(const std::string& path) {
    std::vector<std::string> warnings;
    RoadNetwork net = load_network(path, &warnings);
    for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
    return net;
}

/// Total length of the straight-line chain through the track samples;
/// the L that goes into the lambda rule when only the track is known.
double track_chain_length(const Track& track) {
    double len = 0;
    for (std::size_t i = 0; i + 1 < track.samples.size(); ++i)
        len += distance(track.samples[i].loc, track.samples[i + 1].loc);
    return len;
}

/// A results path argument may be a match output or a ground-truth file;
/// both carry a road path to score.
RoutePath load_path_file(const std::string& path) {
    const std::string text = read_text_file(path);
    for (const std::string_view line : content_lines(text)) {
        const auto fields = split_ws(line);
        if (fields.empty()) continue;
        if (fields[0] == "costs") return parse_match_result(text).path;
        if (fields[0] == "route") return parse_ground_truth(text).route;
        break;
    }
    throw std::runtime_error(path + ": neither a match result nor a ground-truth file");
}

struct MatchFlags {
    std::string network, track_path, truth_path, out_path;
    std::string lambda_arg = "1";
    MatchConfig cfg;

    void add_to(CLI::App* cmd, bool single_track) {
        cmd->add_option("--network", network, "road network file")->required();
        cmd->add_option("--lambda", lambda_arg,
                        single_track ? "regularization weight, or 'auto' to estimate it"
                                     : "regularization weight")
            ->capture_default_str();
        cmd->add_option("--radius", cfg.radius, "candidate search radius, meters")
            ->capture_default_str();
        cmd->add_option("--n-extra", cfg.extra_candidates,
                        "extra evenly spaced candidates per edge")
            ->capture_default_str();
        cmd->add_option("--max-candidates", cfg.max_candidates_per_sample,
                        "candidate cap per sample")
            ->capture_default_str();
        cmd->add_option("--truth", truth_path, "ground-truth file to score against");
        cmd->add_option("-o,--out", out_path, "write the match result here");
    }

    /// Resolves --lambda, estimating sigma first when asked to.
    double resolve_lambda(const RoadNetwork& net, const Track& track) {
        if (lambda_arg != "auto") {
            const double lambda = parse_double(lambda_arg);
            if (lambda < 0) throw std::runtime_error("--lambda must be >= 0");
            return lambda;
        }
        const double sigma_hat = estimate_sigma(net, track, cfg);
        const double lambda =
            optimal_lambda(track.samples.size(), sigma_hat, track_chain_length(track));
        std::cout << "sigma_hat=" << format_double(sigma_hat)
                  << " lambda=" << format_double(lambda) << "\n";
        return lambda;
    }
};

void report_match(const MatchResult& result, const std::string& truth_path,
                  const std::string& out_path) {
    std::cout << "cost=" << format_double(result.total_cost)
              << " data=" << format_double(result.data_cost)
              << " model=" << format_double(result.model_cost)
              << " path_m=" << format_double(result.path.total_length) << "\n";
    if (!truth_path.empty()) {
        const GroundTruth truth = load_ground_truth(truth_path);
        std::cout << "similarity=" << format_double(similarity(result.path, truth.route))
                  << "\n";
    }
    if (!out_path.empty()) {
        write_text_file(out_path, serialize_match_result(result));
        vlog("wrote " + out_path);
    }
}

int cmd_gen_network(const std::string& out, int rows, int cols, double spacing,
                    double perturbation, double removal, double speed_min, double speed_max,
                    std::uint64_t seed) {
    std::vector<std::string> warnings;
    const RoadNetwork net = generate_grid_network(rows, cols, spacing, perturbation, removal,
                                                  speed_min, speed_max, seed, &warnings);
    for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
    save_network(net, out);
    std::cout << net.node_count() << " nodes, " << net.edge_count() << " edges -> " << out
              << "\n";
    return 0;
}

int cmd_simulate(const std::string& network, const std::string& out_dir, int routes,
                 int tracks_per_route, double sigma, double tau, const std::string& dist,
                 double route_min, double route_max, std::uint64_t seed) {
    if (routes < 1 || tracks_per_route < 1)
        throw std::runtime_error("--routes and --tracks-per-route must be >= 1");
    const RoadNetwork net = load_network_verbose(network);
    SamplingConfig cfg;
    cfg.sigma = sigma;
    cfg.tau = tau;
    cfg.distribution = parse_distribution(dist);
    cfg.validate();

    std::filesystem::create_directories(out_dir);
    Rng route_rng(mix_seed(seed, 0x0107));
    int written = 0;
    for (int r = 0; r < routes; ++r) {
        const RoutePath route = generate_route(net, route_rng, route_min, route_max);
        for (int k = 0; k < tracks_per_route; ++k) {
            Rng rng(mix_seed(mix_seed(seed, r + 1), k + 1));
            const SimulatedTrack sim = generate_track(net, route, cfg, rng);
            const std::string stem =
                out_dir + "/route" + std::to_string(r) + "_track" + std::to_string(k);
            save_track(sim.track, stem + ".trk");
            save_ground_truth(sim.truth, stem + ".truth");
            ++written;
            vlog(stem + ".trk: " + std::to_string(sim.track.samples.size()) + " samples");
        }
    }
    std::cout << written << " tracks (x2 files) -> " << out_dir << "\n";
    return 0;
}

int cmd_match(MatchFlags& flags) {
    const RoadNetwork net = load_network_verbose(flags.network);
    const Track track = load_track(flags.track_path);
    flags.cfg.lambda = flags.resolve_lambda(net, track);
    flags.cfg.validate();
    const MatchResult result = match_track(net, track, flags.cfg);
    report_match(result, flags.truth_path, flags.out_path);
    return 0;
}

int cmd_multimatch(MatchFlags& flags, const std::vector<std::string>& track_paths,
                   const std::string& method_name, bool boost, std::uint64_t seed) {
    const RoadNetwork net = load_network_verbose(flags.network);
    std::vector<Track> tracks;
    tracks.reserve(track_paths.size());
    for (const std::string& p : track_paths) tracks.push_back(load_track(p));
    const TrackSet set = TrackSet::from_tracks(tracks);

    if (flags.lambda_arg == "auto")
        throw std::runtime_error("--lambda auto applies to single-track match only");
    flags.cfg.lambda = parse_double(flags.lambda_arg);
    flags.cfg.validate();

    MultiMethod method = method_name == "iterative" ? MultiMethod::iterative
                                                    : MultiMethod::laplacian;
    if (boost)
        method = method == MultiMethod::iterative ? MultiMethod::iterative_boost
                                                  : MultiMethod::laplacian_boost;
    BoostConfig bcfg;
    bcfg.seed = seed;

    const MultiMatchResult result = match_multi(net, set, method, flags.cfg, bcfg);
    std::cout << "method=" << multi_method_name(method)
              << " ordered=" << result.ordering.size() << "/" << set.sample_count() << "\n";
    report_match(result.match, "", flags.out_path);

    if (!flags.truth_path.empty()) {
        const GroundTruth truth = load_ground_truth(flags.truth_path);
        std::cout << "similarity=" << format_double(similarity(result.match.path, truth.route))
                  << "\n";
        // Baseline for comparison: each track matched on its own.
        double sum = 0;
        for (const Track& tr : tracks)
            sum += similarity(match_track(net, tr, flags.cfg).path, truth.route);
        std::cout << "single_track_mean=" << format_double(sum / tracks.size()) << "\n";
    }
    return 0;
}

int cmd_estimate_sigma(const std::string& network, const std::string& track_path,
                       MatchConfig cfg) {
    const RoadNetwork net = load_network_verbose(network);
    const Track track = load_track(track_path);
    cfg.validate();
    std::cout << "sigma_hat=" << format_double(estimate_sigma(net, track, cfg)) << "\n";
    return 0;
}

int cmd_similarity(const std::string& a, const std::string& b) {
    std::cout << format_double(similarity(load_path_file(a), load_path_file(b))) << "\n";
    return 0;
}

int cmd_sweep(const std::string& network, SweepSpec& spec, const std::string& out,
              const std::string& dist_name, int workers, bool overwrite) {
    const RoadNetwork net = load_network_verbose(network);
    spec.distribution = parse_distribution(dist_name);
    spec.boost.seed = spec.base_seed;
    spec.validate();
    if (overwrite) std::filesystem::remove(out);

    const std::size_t total = spec.sigmas.size() * spec.taus.size() * spec.lambdas.size() *
                              spec.methods.size() * spec.track_counts.size() *
                              static_cast<std::size_t>(spec.routes) *
                              static_cast<std::size_t>(spec.instances);
    vlog("sweep: " + std::to_string(total) + " rows, " + std::to_string(workers) + " worker(s)");

    bool rewritten = false;
    const ResultTable table = sweep_to_file(net, spec, out, workers, &rewritten);
    std::size_t failures = 0;
    for (const ResultRow& r : table.rows)
        if (!r.error.empty()) ++failures;
    std::cout << table.rows.size() << " rows (" << failures << " failed) -> " << out
              << (rewritten ? "" : " (already complete)") << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"map matching toolkit: reconstruct road paths from noisy location tracks"};
    app.require_subcommand(1);
    app.add_flag("-v,--verbose", g_verbose, "chatty progress on stderr");

    // gen-network
    auto* gen = app.add_subcommand("gen-network", "generate a perturbed grid road network");
    std::string gen_out = "network.txt";
    int rows = 20, cols = 20;
    double spacing = 500, perturbation = 40, removal = 0.1;
    double speed_min = 8, speed_max = 14;
    std::uint64_t gen_seed = 0;
    gen->add_option("-o,--out", gen_out, "output file")->capture_default_str();
    gen->add_option("--rows", rows, "grid rows")->capture_default_str();
    gen->add_option("--cols", cols, "grid columns")->capture_default_str();
    gen->add_option("--spacing", spacing, "grid spacing, meters")->capture_default_str();
    gen->add_option("--perturbation", perturbation, "node jitter, meters")
        ->capture_default_str();
    gen->add_option("--removal", removal, "edge removal probability")->capture_default_str();
    gen->add_option("--speed-min", speed_min, "slowest speed limit, m/s")
        ->capture_default_str();
    gen->add_option("--speed-max", speed_max, "fastest speed limit, m/s")
        ->capture_default_str();
    gen->add_option("--seed", gen_seed, "generator seed")->capture_default_str();

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate noisy tracks over random routes");
    std::string sim_network, sim_out = "tracks";
    int sim_routes = 1, sim_tracks = 1;
    double sim_sigma = 10, sim_tau = 60;
    std::string sim_dist = "uniform";
    double sim_route_min = 3000, sim_route_max = 15000;
    std::uint64_t sim_seed = 0;
    sim->add_option("--network", sim_network, "road network file")->required();
    sim->add_option("--out-dir", sim_out, "output directory")->capture_default_str();
    sim->add_option("--routes", sim_routes, "number of routes")->capture_default_str();
    sim->add_option("--tracks-per-route", sim_tracks, "tracks per route")
        ->capture_default_str();
    sim->add_option("--sigma", sim_sigma, "noise scale, meters")->capture_default_str();
    sim->add_option("--tau", sim_tau, "sampling interval, seconds")->capture_default_str();
    sim->add_option("--dist", sim_dist, "sampling distribution: uniform|exponential")
        ->capture_default_str();
    sim->add_option("--route-min", sim_route_min, "route length lower bound, meters")
        ->capture_default_str();
    sim->add_option("--route-max", sim_route_max, "route length upper bound, meters")
        ->capture_default_str();
    sim->add_option("--seed", sim_seed, "simulation seed")->capture_default_str();

    // match
    auto* match = app.add_subcommand("match", "match one track to the network");
    MatchFlags match_flags;
    match->add_option("--track", match_flags.track_path, "track file")->required();
    match_flags.add_to(match, true);

    // multimatch
    auto* multi = app.add_subcommand("multimatch", "order and match several tracks jointly");
    MatchFlags multi_flags;
    std::vector<std::string> multi_tracks;
    std::string multi_method = "iterative";
    bool multi_boost = false;
    std::uint64_t multi_seed = 0;
    multi->add_option("--track", multi_tracks, "track file (repeatable)")
        ->required()
        ->take_all();
    multi_flags.add_to(multi, false);
    multi->add_option("--method", multi_method, "ordering method: iterative|laplacian")
        ->check(CLI::IsMember({"iterative", "laplacian"}))
        ->capture_default_str();
    multi->add_flag("--boost", multi_boost, "aggregate orders over random subsamples");
    multi->add_option("--seed", multi_seed, "boosting seed")->capture_default_str();

    // estimate-sigma
    auto* est = app.add_subcommand("estimate-sigma", "estimate noise scale by cross validation");
    std::string est_network, est_track;
    MatchConfig est_cfg;
    est->add_option("--network", est_network, "road network file")->required();
    est->add_option("--track", est_track, "track file")->required();
    est->add_option("--radius", est_cfg.radius, "candidate search radius, meters")
        ->capture_default_str();

    // similarity
    auto* simi = app.add_subcommand("similarity", "score two path files against each other");
    std::string sim_a, sim_b;
    simi->add_option("a", sim_a, "match result or ground-truth file")->required();
    simi->add_option("b", sim_b, "match result or ground-truth file")->required();

    // sweep
    auto* sweep = app.add_subcommand("sweep", "factorial experiment grid into a results CSV");
    std::string sweep_network, sweep_out = "results.csv";
    SweepSpec spec;
    std::string sweep_dist = "uniform";
    int workers = 1;
    bool overwrite = false;
    sweep->add_option("--network", sweep_network, "road network file")->required();
    sweep->add_option("-o,--out", sweep_out, "results CSV (resumes if present)")
        ->capture_default_str();
    sweep->add_option("--sigmas", spec.sigmas, "noise scales, meters")
        ->delimiter(',')
        ->capture_default_str();
    sweep->add_option("--taus", spec.taus, "sampling intervals, seconds")
        ->delimiter(',')
        ->capture_default_str();
    sweep->add_option("--lambdas", spec.lambdas, "regularization weights")
        ->delimiter(',')
        ->capture_default_str();
    sweep->add_option("--methods", spec.methods,
                      "single|iterative|laplacian|iterative_boost|laplacian_boost")
        ->delimiter(',')
        ->capture_default_str();
    sweep->add_option("--track-counts", spec.track_counts, "tracks per route (s values)")
        ->delimiter(',')
        ->capture_default_str();
    sweep->add_option("--routes", spec.routes, "routes per cell")->capture_default_str();
    sweep->add_option("--instances", spec.instances, "noise draws per route")
        ->capture_default_str();
    sweep->add_option("--route-min", spec.route_min, "route length lower bound, meters")
        ->capture_default_str();
    sweep->add_option("--route-max", spec.route_max, "route length upper bound, meters")
        ->capture_default_str();
    sweep->add_option("--dist", sweep_dist, "sampling distribution: uniform|exponential")
        ->capture_default_str();
    sweep->add_option("--trim", spec.trim_fraction, "trim fraction for summaries")
        ->capture_default_str();
    sweep->add_option("--seed", spec.base_seed, "base seed")->capture_default_str();
    sweep->add_option("--workers", workers, "worker threads")->capture_default_str();
    sweep->add_flag("--overwrite", overwrite, "discard an existing results file first");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_gen_network(gen_out, rows, cols, spacing, perturbation, removal,
                                   speed_min, speed_max, gen_seed);
        if (sim->parsed())
            return cmd_simulate(sim_network, sim_out, sim_routes, sim_tracks, sim_sigma,
                                sim_tau, sim_dist, sim_route_min, sim_route_max, sim_seed);
        if (match->parsed()) return cmd_match(match_flags);
        if (multi->parsed())
            return cmd_multimatch(multi_flags, multi_tracks, multi_method, multi_boost,
                                  multi_seed);
        if (est->parsed()) return cmd_estimate_sigma(est_network, est_track, est_cfg);
        if (simi->parsed()) return cmd_similarity(sim_a, sim_b);
        if (sweep->parsed())
            return cmd_sweep(sweep_network, spec, sweep_out, sweep_dist, workers, overwrite);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
