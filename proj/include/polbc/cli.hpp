#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "polbc/baselines.hpp"
#include "polbc/dangerous_path.hpp"
#include "polbc/dataset.hpp"
#include "polbc/es.hpp"
#include "polbc/evaluation.hpp"
#include "polbc/gather.hpp"
#include "polbc/gridworld.hpp"
#include "polbc/manifest.hpp"
#include "polbc/point_world.hpp"
#include "polbc/supervector.hpp"
#include "polbc/trust_region.hpp"

namespace polbc {

namespace cli {

inline Vec parse_number_list(const std::string& text) {
    Vec out;
    std::stringstream ss(text);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(parse_num(field));
    if (out.empty()) throw std::runtime_error("empty number list");
    return out;
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    for (double v : parse_number_list(text)) out.push_back(static_cast<std::uint64_t>(v));
    return out;
}

// Gridworld policy files hold either the JSON form or the 5x5 grid text.
inline TabularPolicy load_tabular_policy(const std::filesystem::path& path) {
    std::string text = read_file(path);
    if (text.find("tabular_policy") != std::string::npos)
        return TabularPolicy::from_json(text);
    return TabularPolicy::from_text(text);
}

struct GatherOptions {
    std::string env;
    std::string policy_file;
    std::string scenario = "stochastic";
    double epsilon = 0.0;
    std::uint64_t layout_seed = 0;
    std::size_t episodes = 1;
    std::uint64_t seed = 0;
    std::string out;
};

inline void run_gather(const GatherOptions& opt, RunManifest& manifest) {
    manifest.add_input(opt.policy_file);
    Rng rng(opt.seed);
    StateDataset data;
    if (opt.env == "gridworld") {
        GridWorld env = make_grid_scenario(opt.scenario, opt.epsilon).env;
        TabularPolicy policy = load_tabular_policy(opt.policy_file);
        data = gather_data(env, policy, opt.episodes, rng);
    } else if (opt.env == "dangerous-path") {
        DangerousPath env(opt.layout_seed);
        SoftmaxPolicy policy = SoftmaxPolicy::from_json(read_file(opt.policy_file));
        data = gather_data(env, policy, opt.episodes, rng);
    } else { // point
        PointWorld env;
        AnglePolicy policy = AnglePolicy::from_json(read_file(opt.policy_file));
        data = gather_data(env, policy, opt.episodes, rng);
    }
    atomic_write(opt.out, data.to_csv());
}

struct DistanceOptions {
    std::string method;
    std::vector<std::string> files;
    std::size_t components = 64;
    double relevance = 16.0;
    std::uint64_t seed = 0;
    std::string out;
};

inline void run_distance(const DistanceOptions& opt, RunManifest& manifest) {
    std::vector<StateDataset> datasets;
    std::vector<std::string> ids;
    for (const auto& f : opt.files) {
        manifest.add_input(f);
        datasets.push_back(StateDataset::load(f));
        ids.push_back(std::filesystem::path(f).stem().string());
    }
    Rng rng(opt.seed);
    if (opt.method == "supervector") {
        auto res = supervector_distance_matrix(datasets, opt.components, opt.relevance, rng, ids);
        atomic_write(opt.out, res.distances.to_csv());
        atomic_write(opt.out + ".ubm.json", res.ubm.to_json());
        for (std::size_t i = 0; i < res.supervectors.size(); ++i)
            atomic_write(opt.out + ".sv" + std::to_string(i) + ".json",
                         res.supervectors[i].to_json());
    } else if (opt.method == "gaussian") {
        std::vector<GaussianBc> bcs;
        for (const auto& d : datasets) bcs.push_back(fit_gaussian_bc(d));
        DistanceMatrix m = DistanceMatrix::zeros(ids);
        for (std::size_t i = 0; i < bcs.size(); ++i)
            for (std::size_t j = i + 1; j < bcs.size(); ++j)
                m.set_symmetric(i, j, gaussian_symmetric_kl(bcs[i], bcs[j]));
        atomic_write(opt.out, m.to_csv());
    } else if (opt.method == "histogram") {
        BinEdges edges = compute_bin_edges(pool_datasets(datasets));
        std::vector<HistogramBc> bcs;
        for (const auto& d : datasets) bcs.push_back(fit_histogram_bc(d, edges));
        DistanceMatrix m = DistanceMatrix::zeros(ids);
        for (std::size_t i = 0; i < bcs.size(); ++i)
            for (std::size_t j = i + 1; j < bcs.size(); ++j)
                m.set_symmetric(i, j, histogram_distance(bcs[i], bcs[j]));
        atomic_write(opt.out, m.to_csv());
    } else { // discriminator
        DistanceMatrix m = discriminator_distance(datasets, rng, {}, ids);
        atomic_write(opt.out, m.to_csv());
    }
}

struct DemoOptions {
    std::string scenario;
    std::string epsilons = "0,0.25,0.5,0.75,1";
    std::size_t episodes = 10000;
    bool identical = false;
    std::uint64_t seed = 0;
    std::string out;
};

inline void run_demo_gridworld(const DemoOptions& opt, RunManifest&) {
    std::string csv = "epsilon,return_distance,action_distance,state_distance\n";
    Rng root(opt.seed);
    std::size_t row = 0;
    for (double eps : parse_number_list(opt.epsilons)) {
        GridScenario sc = make_grid_scenario(opt.scenario, eps);
        TabularPolicy green = opt.identical ? sc.blue : sc.green;
        Rng rng = root.split(row++);
        Rng r0 = rng.split(0), r1 = rng.split(1), r2 = rng.split(2), r3 = rng.split(3);
        StateDataset blue_data = gather_data(sc.env, sc.blue, opt.episodes, r0);
        StateDataset green_data = gather_data(sc.env, green, opt.episodes, r1);
        Vec blue_occ = grid_occupancy(sc.env, sc.blue, opt.episodes, r2);
        Vec green_occ = grid_occupancy(sc.env, green, opt.episodes, r3);
        csv += format_num(eps) + "," + format_num(return_distance(blue_data, green_data)) + "," +
               format_num(grid_action_distance(sc.blue, green, sc.env.walls())) + "," +
               format_num(grid_state_distance(blue_occ, green_occ)) + "\n";
    }
    atomic_write(opt.out, csv);
}

struct TrustRegionOptions {
    std::string constraint = "none";
    std::string thresholds; // empty -> paper default for the constraint
    std::size_t iterations = 50;
    std::uint64_t layout_seed = 0;
    std::string seeds = "1";
    std::string out;
};

inline double default_threshold(ConstraintKind kind) {
    switch (kind) {
        case ConstraintKind::MaxTv: return 0.4;
        case ConstraintKind::Gaussian: return 10.0;
        case ConstraintKind::Supervector: return 0.05;
        case ConstraintKind::None: break;
    }
    return 0.0;
}

inline void run_trust_region(const TrustRegionOptions& opt, RunManifest&) {
    ConstraintKind kind = constraint_from_string(opt.constraint);
    Vec thresholds;
    if (!opt.thresholds.empty()) thresholds = parse_number_list(opt.thresholds);
    else thresholds.push_back(default_threshold(kind));

    std::string summary = "threshold,mean_auc,mean_stops,seeds\n";
    for (double threshold : thresholds) {
        TrustRegionConfig cfg;
        cfg.constraint = kind;
        cfg.threshold = threshold;
        cfg.iterations = opt.iterations;
        double auc_sum = 0.0, stop_sum = 0.0;
        auto seeds = parse_seed_list(opt.seeds);
        for (std::uint64_t seed : seeds) {
            LearningCurve curve = train_trust_region(opt.layout_seed, cfg, seed);
            auc_sum += curve.auc();
            for (double v : curve.aux) stop_sum += v;
            atomic_write(opt.out + ".thr" + format_num(threshold) + ".seed" +
                             std::to_string(seed) + ".csv",
                         curve.to_csv());
        }
        summary += format_num(threshold) + "," +
                   format_num(auc_sum / static_cast<double>(seeds.size())) + "," +
                   format_num(stop_sum / static_cast<double>(seeds.size())) + "," +
                   std::to_string(seeds.size()) + "\n";
    }
    atomic_write(opt.out, summary);
}

struct NoveltyOptions {
    std::string mode = "es";
    std::string bc = "supervector";
    std::size_t generations = 120;
    std::string seeds = "1";
    std::string out;
};

inline void run_novelty(const NoveltyOptions& opt, RunManifest&) {
    EsConfig cfg;
    cfg.mode = opt.mode == "es" ? EsMode::Es : EsMode::NsrEs;
    cfg.bc = bc_from_string(opt.bc);
    cfg.generations = opt.generations;

    std::string summary = "seed,final_mean,final_best,auc\n";
    for (std::uint64_t seed : parse_seed_list(opt.seeds)) {
        LearningCurve curve = train_es(PointWorld::Geometry(), cfg, seed);
        atomic_write(opt.out + ".seed" + std::to_string(seed) + ".csv", curve.to_csv());
        summary += std::to_string(seed) + "," + format_num(curve.mean_returns.back()) + "," +
                   format_num(curve.aux.back()) + "," + format_num(curve.auc()) + "\n";
    }
    atomic_write(opt.out, summary);
}

struct MetricStudyOptions {
    std::size_t policies = 20;
    std::string trajectories = "10,25,50";
    std::size_t repetitions = 3;
    std::size_t ground_truth_rep = 0;
    std::size_t components = 64;
    double relevance = 16.0;
    std::uint64_t layout_seed = 0;
    std::uint64_t seed = 0;
    std::string out;
};

struct MetricStudyRow {
    std::size_t trajectories = 0;
    MetricReport report;
};

// Graded epsilon-greedy policies on the dangerous path; one supervector
// distance matrix per (budget, repetition) over re-sampled data.
inline std::vector<MetricStudyRow> metric_study(const MetricStudyOptions& opt) {
    if (opt.policies < 3) throw std::runtime_error("metric-study: need at least 3 policies");
    if (opt.repetitions < 2) throw std::runtime_error("metric-study: need at least 2 repetitions");
    DangerousPath env(opt.layout_seed);
    std::vector<double> epsilons;
    for (std::size_t i = 0; i < opt.policies; ++i)
        epsilons.push_back(0.95 * static_cast<double>(i) /
                           static_cast<double>(opt.policies - 1));
    Rng root(opt.seed);

    std::vector<MetricStudyRow> rows;
    std::size_t budget_idx = 0;
    for (double budget_raw : parse_number_list(opt.trajectories)) {
        std::size_t budget = static_cast<std::size_t>(budget_raw);
        std::vector<DistanceMatrix> normalized;
        Vec gt_returns;
        for (std::size_t rep = 0; rep < opt.repetitions; ++rep) {
            std::vector<StateDataset> datasets;
            Vec returns;
            for (std::size_t i = 0; i < opt.policies; ++i) {
                EpsilonGreedyPathPolicy policy(env, epsilons[i]);
                Rng rng = root.split(budget_idx * 1000003 + rep * 1009 + i);
                datasets.push_back(gather_data(env, policy, budget, rng));
                returns.push_back(datasets.back().mean_return());
            }
            Rng em_rng = root.split(500000 + budget_idx * 101 + rep);
            auto res = supervector_distance_matrix(datasets, opt.components, opt.relevance,
                                                   em_rng);
            normalized.push_back(minmax_normalize(res.distances));
            if (rep == opt.ground_truth_rep) gt_returns = returns;
        }

        MetricStudyRow row;
        row.trajectories = budget;
        row.report.trajectory_count = budget;
        row.report.repetition_count = opt.repetitions;
        row.report.correlation =
            return_correlation(normalized[opt.ground_truth_rep], gt_returns);
        double err = 0.0;
        std::size_t err_count = 0;
        for (std::size_t rep = 0; rep < opt.repetitions; ++rep) {
            if (rep == opt.ground_truth_rep) continue;
            err += distance_error(normalized[rep], normalized[opt.ground_truth_rep]);
            err_count += 1;
        }
        row.report.mean_relative_distance_error = err / static_cast<double>(err_count);
        row.report.mean_cv = coefficient_of_variation(normalized);
        rows.push_back(row);
        budget_idx += 1;
    }
    return rows;
}

inline void run_metric_study(const MetricStudyOptions& opt, RunManifest&) {
    std::string summary = "trajectories,correlation,mean_relative_distance_error,mean_cv\n";
    for (const auto& row : metric_study(opt)) {
        summary += std::to_string(row.trajectories) + "," +
                   format_num(row.report.correlation) + "," +
                   format_num(row.report.mean_relative_distance_error) + "," +
                   format_num(row.report.mean_cv) + "\n";
        atomic_write(opt.out + ".t" + std::to_string(row.trajectories) + ".json",
                     row.report.to_json());
    }
    atomic_write(opt.out, summary);
}

inline int dispatch(const std::vector<std::string>& args);

struct ReplayOptions {
    std::string manifest_file;
    std::string out; // optional override
};

inline int run_replay(const ReplayOptions& opt) {
    RunManifest manifest = RunManifest::load(opt.manifest_file);
    manifest.verify_inputs();
    std::vector<std::string> args = manifest.argv;
    if (!opt.out.empty()) {
        for (std::size_t i = 0; i + 1 < args.size(); ++i)
            if (args[i] == "--out") args[i + 1] = opt.out;
    }
    return dispatch(args);
}

inline int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"policy behaviour characterization toolkit"};
    app.require_subcommand(1);

    if (const char* threads = std::getenv("POLBC_THREADS")) {
        char* end = nullptr;
        long n = std::strtol(threads, &end, 10);
        if (end == threads || *end != '\0' || n < 1) {
            std::cerr << "POLBC_THREADS must be a positive integer\n";
            return 2;
        }
        // Rollouts currently run serially, which satisfies any cap >= 1.
    }

    GatherOptions gather_opt;
    auto* gather_cmd = app.add_subcommand("gather", "roll out a policy and record states");
    gather_cmd->add_option("--env", gather_opt.env, "environment name")
        ->required()
        ->check(CLI::IsMember({"gridworld", "dangerous-path", "point"}));
    gather_cmd->add_option("--policy", gather_opt.policy_file, "policy file")
        ->required()
        ->check(CLI::ExistingFile);
    gather_cmd->add_option("--episodes", gather_opt.episodes, "episodes to gather")
        ->required()
        ->check(CLI::PositiveNumber);
    gather_cmd->add_option("--seed", gather_opt.seed, "rollout seed");
    gather_cmd->add_option("--scenario", gather_opt.scenario, "gridworld scenario")
        ->check(CLI::IsMember({"stochastic", "doorway", "unreachable"}));
    gather_cmd->add_option("--epsilon", gather_opt.epsilon, "gridworld slip probability")
        ->check(CLI::Range(0.0, 1.0));
    gather_cmd->add_option("--layout-seed", gather_opt.layout_seed, "dangerous path layout");
    gather_cmd->add_option("--out", gather_opt.out, "output trajectory CSV")->required();

    DistanceOptions dist_opt;
    auto* dist_cmd = app.add_subcommand("distance", "pairwise distances between datasets");
    dist_cmd->add_option("--method", dist_opt.method, "characterization method")
        ->required()
        ->check(CLI::IsMember({"supervector", "gaussian", "histogram", "discriminator"}));
    dist_cmd->add_option("files", dist_opt.files, "trajectory CSV files")
        ->required()
        ->expected(2, 1000000)
        ->check(CLI::ExistingFile);
    dist_cmd->add_option("--components", dist_opt.components, "UBM components")
        ->check(CLI::PositiveNumber);
    dist_cmd->add_option("--relevance", dist_opt.relevance, "MAP relevance factor")
        ->check(CLI::NonNegativeNumber);
    dist_cmd->add_option("--seed", dist_opt.seed, "fitting seed");
    dist_cmd->add_option("--out", dist_opt.out, "output distance CSV")->required();

    DemoOptions demo_opt;
    auto* demo_cmd = app.add_subcommand("demo-gridworld", "action/state/return distance sweep");
    demo_cmd->add_option("--scenario", demo_opt.scenario, "gridworld scenario")
        ->required()
        ->check(CLI::IsMember({"stochastic", "doorway", "unreachable"}));
    demo_cmd->add_option("--epsilons", demo_opt.epsilons, "comma-separated slip grid");
    demo_cmd->add_option("--episodes", demo_opt.episodes, "episodes per estimate")
        ->check(CLI::PositiveNumber);
    demo_cmd->add_flag("--identical", demo_opt.identical, "compare the blue policy to itself");
    demo_cmd->add_option("--seed", demo_opt.seed, "rollout seed");
    demo_cmd->add_option("--out", demo_opt.out, "output CSV")->required();

    TrustRegionOptions tr_opt;
    NoveltyOptions nov_opt;
    MetricStudyOptions ms_opt;
    auto* exp_cmd = app.add_subcommand("experiment", "paper experiments");
    exp_cmd->require_subcommand(1);

    auto* tr_cmd = exp_cmd->add_subcommand("trust-region", "constrained policy training");
    tr_cmd->add_option("--constraint", tr_opt.constraint, "constraint kind")
        ->check(CLI::IsMember({"none", "max_tv", "gaussian", "supervector"}));
    tr_cmd->add_option("--threshold", tr_opt.thresholds,
                       "comma-separated constraint thresholds (default: paper value)");
    tr_cmd->add_option("--iterations", tr_opt.iterations, "training iterations")
        ->check(CLI::PositiveNumber);
    tr_cmd->add_option("--layout-seed", tr_opt.layout_seed, "dangerous path layout");
    tr_cmd->add_option("--seeds", tr_opt.seeds, "comma-separated training seeds");
    tr_cmd->add_option("--out", tr_opt.out, "summary CSV path")->required();

    auto* nov_cmd = exp_cmd->add_subcommand("novelty", "ES / NSR-ES on the point environment");
    nov_cmd->add_option("--mode", nov_opt.mode, "es or nsr-es")
        ->check(CLI::IsMember({"es", "nsr-es"}));
    nov_cmd->add_option("--bc", nov_opt.bc, "behaviour characterization")
        ->check(CLI::IsMember({"terminal", "gaussian", "supervector"}));
    nov_cmd->add_option("--generations", nov_opt.generations, "ES generations")
        ->check(CLI::PositiveNumber);
    nov_cmd->add_option("--seeds", nov_opt.seeds, "comma-separated training seeds");
    nov_cmd->add_option("--out", nov_opt.out, "summary CSV path")->required();

    auto* ms_cmd = exp_cmd->add_subcommand("metric-study", "correlation / error / CV metrics");
    ms_cmd->add_option("--policies", ms_opt.policies, "graded policy count")
        ->check(CLI::PositiveNumber);
    ms_cmd->add_option("--trajectories", ms_opt.trajectories, "comma-separated budgets");
    ms_cmd->add_option("--repetitions", ms_opt.repetitions, "data re-samplings per budget")
        ->check(CLI::PositiveNumber);
    ms_cmd->add_option("--ground-truth-rep", ms_opt.ground_truth_rep,
                       "repetition index used as ground truth");
    ms_cmd->add_option("--components", ms_opt.components, "UBM components")
        ->check(CLI::PositiveNumber);
    ms_cmd->add_option("--relevance", ms_opt.relevance, "MAP relevance factor")
        ->check(CLI::NonNegativeNumber);
    ms_cmd->add_option("--layout-seed", ms_opt.layout_seed, "dangerous path layout");
    ms_cmd->add_option("--seed", ms_opt.seed, "sampling seed");
    ms_cmd->add_option("--out", ms_opt.out, "summary CSV path")->required();

    ReplayOptions replay_opt;
    auto* replay_cmd = app.add_subcommand("replay", "rerun a command from its manifest");
    replay_cmd->add_option("--manifest", replay_opt.manifest_file, "manifest JSON")
        ->required()
        ->check(CLI::ExistingFile);
    replay_cmd->add_option("--out", replay_opt.out, "override the output path");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (replay_cmd->parsed()) return run_replay(replay_opt);

        RunManifest manifest;
        manifest.argv = args;
        std::string out;
        if (gather_cmd->parsed()) {
            manifest.command = "gather";
            manifest.seed = gather_opt.seed;
            out = gather_opt.out;
            run_gather(gather_opt, manifest);
        } else if (dist_cmd->parsed()) {
            manifest.command = "distance";
            manifest.seed = dist_opt.seed;
            out = dist_opt.out;
            run_distance(dist_opt, manifest);
        } else if (demo_cmd->parsed()) {
            manifest.command = "demo-gridworld";
            manifest.seed = demo_opt.seed;
            out = demo_opt.out;
            run_demo_gridworld(demo_opt, manifest);
        } else if (tr_cmd->parsed()) {
            manifest.command = "experiment trust-region";
            manifest.seed = parse_seed_list(tr_opt.seeds).front();
            out = tr_opt.out;
            run_trust_region(tr_opt, manifest);
        } else if (nov_cmd->parsed()) {
            manifest.command = "experiment novelty";
            manifest.seed = parse_seed_list(nov_opt.seeds).front();
            out = nov_opt.out;
            run_novelty(nov_opt, manifest);
        } else {
            manifest.command = "experiment metric-study";
            manifest.seed = ms_opt.seed;
            out = ms_opt.out;
            run_metric_study(ms_opt, manifest);
        }
        manifest.save(out + ".manifest.json");
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace cli

inline int cli_main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return cli::dispatch(args);
}

} // namespace polbc
