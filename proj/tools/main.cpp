#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ccvl/digest.hpp"
#include "ccvl/eval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ccvl;

namespace {

constexpr const char* kToolVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitShape = 4;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config JSON")->required();
    cmd->add_option("--out", args.out_dir, "output directory")->required();
    cmd->add_option("--seed", args.seed, "override the config's primary seed");
    cmd->add_option("--jobs", args.jobs, "max concurrent jobs")->check(CLI::PositiveNumber);
    cmd->add_option("--format", args.format, "report format")
        ->check(CLI::IsMember({"csv", "json"}));
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Run record: config digest, seeds, produced files and their digests.
/// Timestamps are informational; every other field is reproducible.
void write_manifest(const fs::path& out_dir, const ExperimentConfig& cfg,
                    const std::vector<std::uint64_t>& seeds,
                    const std::vector<fs::path>& outputs, const std::string& started) {
    json m;
    m["config_hash"] = cfg.config_hash();
    m["tool_version"] = kToolVersion;
    m["seeds"] = seeds;
    std::vector<std::string> names;
    json digests = json::object();
    for (const auto& p : outputs) {
        names.push_back(p.filename().string());
        digests[p.filename().string()] = digest_file(p.string());
    }
    m["output_paths"] = names;
    m["output_digests"] = digests;
    m["timestamps"] = {{"started", started}, {"finished", timestamp_utc()}};
    write_text(out_dir / "manifest.json", m.dump(2) + "\n");
}

Policy behavior_policy(const TabularMdp& mdp, double epsilon_opt) {
    auto q = solve_optimal_q(mdp, 1e-10, 200000);
    return mix_policy(greedy_policy(q, mdp.num_states, mdp.num_actions), epsilon_opt);
}

std::string alpha_label(double alpha) {
    std::ostringstream s;
    s << alpha;
    return s.str();
}

int cmd_collect(const CommonArgs& args) {
    const std::string started = timestamp_utc();
    ExperimentConfig cfg = ExperimentConfig::from_json_file(args.config_path);
    if (args.seed) cfg.dataset.seed = *args.seed;

    const TabularMdp mdp = cfg.env_train.build();
    const Policy behavior = behavior_policy(mdp, cfg.dataset.epsilon_opt);
    OfflineDataset data = collect_dataset(mdp, behavior, cfg.dataset.num_samples,
                                          cfg.dataset.horizon, cfg.dataset.seed);

    fs::create_directories(args.out_dir);
    const fs::path dataset_path = fs::path(args.out_dir) / "dataset.jsonl";
    save_jsonl_file(data, dataset_path.string());
    write_manifest(args.out_dir, cfg, {cfg.dataset.seed}, {dataset_path}, started);
    std::cout << "collected " << data.transitions.size() << " transitions -> " << dataset_path
              << "\n";
    return kExitOk;
}

int cmd_train(const CommonArgs& args, const std::string& dataset_path) {
    const std::string started = timestamp_utc();
    ExperimentConfig cfg = ExperimentConfig::from_json_file(args.config_path);
    const std::uint64_t seed = args.seed.value_or(cfg.dataset.seed);

    const TabularMdp mdp = cfg.env_train.build();
    OfflineDataset data = load_jsonl_file(dataset_path, mdp.num_states, mdp.num_actions);
    EmpiricalModel model = build_empirical_model(data);
    const MdpMeta meta{mdp.discount, mdp.r_max};

    TrainedTables trained = train_method(cfg.solver, data, model, meta, seed);

    fs::create_directories(args.out_dir);
    std::vector<fs::path> outputs;
    if (!trained.confidence_tables.empty()) {
        const auto& table = trained.confidence_tables.front();
        const fs::path table_path = fs::path(args.out_dir) / "table.json";
        write_text(table_path, table.to_json() + "\n");
        outputs.push_back(table_path);
        const fs::path csv_path = fs::path(args.out_dir) / "table.csv";
        std::ofstream csv(csv_path, std::ios::binary);
        table.write_csv(csv);
        csv.close();
        outputs.push_back(csv_path);
    } else if (cfg.solver.method == "aevl") {
        json archive;
        archive["method"] = "aevl";
        archive["alpha"] = cfg.solver.alpha;
        json members = json::array();
        for (const auto& member : trained.q_tables) members.push_back(json::parse(member.to_json()));
        archive["members"] = members;
        const fs::path path = fs::path(args.out_dir) / "tables.json";
        write_text(path, archive.dump() + "\n");
        outputs.push_back(path);
    } else {
        const auto& table = trained.q_tables.front();
        const fs::path table_path = fs::path(args.out_dir) / "table.json";
        write_text(table_path, table.to_json() + "\n");
        outputs.push_back(table_path);
        const fs::path csv_path = fs::path(args.out_dir) / "table.csv";
        std::ofstream csv(csv_path, std::ios::binary);
        table.write_csv(csv);
        csv.close();
        outputs.push_back(csv_path);
    }

    json report;
    report["method"] = cfg.solver.method;
    report["iterations"] = trained.report.iterations;
    report["final_residual"] = trained.report.final_residual;
    report["argmax_degeneracy_rate"] = trained.report.argmax_degeneracy_rate;
    if (trained.fixed_delta_index >= 0) report["fixed_delta_index"] = trained.fixed_delta_index;
    const fs::path report_path = fs::path(args.out_dir) / "solve_report.json";
    write_text(report_path, report.dump(2) + "\n");
    outputs.push_back(report_path);

    write_manifest(args.out_dir, cfg, {seed}, outputs, started);
    std::cout << "trained " << cfg.solver.method << " in " << trained.report.iterations
              << " sweeps (residual " << trained.report.final_residual << ")\n";
    return kExitOk;
}

void write_delta_trace(const fs::path& path, const std::vector<DeltaTraceRow>& trace) {
    std::ofstream out(path, std::ios::binary);
    out << "episode,step,delta_index,delta,action,reward\n";
    for (const auto& row : trace)
        out << row.episode << ',' << row.step << ',' << row.delta_index << ',' << row.delta << ','
            << row.action << ',' << fmt_double(row.reward) << '\n';
}

int cmd_eval(const CommonArgs& args, const std::string& tables_path,
             const std::string& upper_path) {
    const std::string started = timestamp_utc();
    ExperimentConfig cfg = ExperimentConfig::from_json_file(args.config_path);

    const TabularMdp eval_mdp = cfg.env_eval.build();
    const double denom = optimal_mean_return(eval_mdp, 10000, cfg.eval.horizon);

    std::ifstream in(tables_path);
    if (!in) throw ConfigError("cannot open " + tables_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    json tables_json = json::parse(buf.str());

    std::optional<ConfidenceQ> lower;
    std::optional<QTable> qtable;
    std::string method = cfg.solver.method;
    double alpha = cfg.solver.alpha;
    if (tables_json.contains("deltas")) {
        lower = ConfidenceQ::from_json(buf.str());
        alpha = lower->alpha;
    } else if (tables_json.contains("members")) {
        // Ensemble archive: members become pseudo-confidence slices so the
        // same belief machinery can pick among them online.
        const auto& members = tables_json.at("members");
        const int count = static_cast<int>(members.size());
        if (count < 1) throw ShapeError("eval: empty ensemble archive");
        QTable first = QTable::from_json(members[0].dump());
        ConfidenceGrid grid;
        for (int i = 0; i < count; ++i) grid.deltas.push_back((i + 1.0) / (count + 1.0));
        auto pseudo = ConfidenceQ::lower_init(first.num_states, first.num_actions, grid, 1.0, 1.0,
                                              MdpMeta{eval_mdp.discount, eval_mdp.r_max});
        for (int i = 0; i < count; ++i) {
            QTable member = QTable::from_json(members[i].dump());
            for (int s = 0; s < first.num_states; ++s)
                for (int a = 0; a < first.num_actions; ++a)
                    pseudo.at(s, a, i) = member.at(s, a);
        }
        lower = std::move(pseudo);
        method = "aevl";
    } else {
        qtable = QTable::from_json(buf.str());
        method = qtable->method_tag;
    }

    std::unique_ptr<ConfidenceQ> upper;
    if (!upper_path.empty()) {
        std::ifstream up(upper_path);
        if (!up) throw ConfigError("cannot open " + upper_path);
        std::ostringstream ubuf;
        ubuf << up.rdbuf();
        upper = std::make_unique<ConfidenceQ>(ConfidenceQ::from_json(ubuf.str()));
    }

    if (lower && (lower->num_states != eval_mdp.num_states ||
                  lower->num_actions != eval_mdp.num_actions))
        throw ShapeError("eval: table shape does not match the environment");
    if (qtable && (qtable->num_states != eval_mdp.num_states ||
                   qtable->num_actions != eval_mdp.num_actions))
        throw ShapeError("eval: table shape does not match the environment");

    fs::create_directories(args.out_dir);
    std::vector<fs::path> outputs;
    json summary;
    summary["method"] = method;
    summary["alpha"] = alpha;
    summary["optimal_mean_return"] = denom;
    json per_seed = json::array();

    for (std::uint64_t seed : cfg.eval.seeds) {
        EvalReport report;
        if (lower) {
            AdaptivePolicyConfig pol = cfg.policy;
            pol.seed = seed;
            if (pol.mode == PolicyKind::FixedDelta && pol.fixed_delta_index < 0)
                throw ConfigError("policy.fixed_delta_index: negative index");
            std::unique_ptr<ConfidenceQ> upper_copy;
            if (upper) upper_copy = std::make_unique<ConfidenceQ>(*upper);
            AdaptiveActionSource source(*lower, std::move(upper_copy), pol);
            report = rollout(eval_mdp, source, cfg.eval.episodes, cfg.eval.horizon, seed);
        } else {
            StaticActionSource source(
                greedy_policy(qtable->values, qtable->num_states, qtable->num_actions), seed);
            report = rollout(eval_mdp, source, cfg.eval.episodes, cfg.eval.horizon, seed);
        }
        report.normalized_return = denom != 0.0 ? report.mean_return / denom : 0.0;

        const std::string stem = method + "_" + alpha_label(alpha) + "_" + std::to_string(seed);
        const fs::path episodes_path = fs::path(args.out_dir) / (stem + ".csv");
        {
            std::ofstream out(episodes_path, std::ios::binary);
            out << "episode,return\n";
            for (std::size_t i = 0; i < report.per_episode_returns.size(); ++i)
                out << i << ',' << fmt_double(report.per_episode_returns[i]) << '\n';
        }
        outputs.push_back(episodes_path);
        if (!report.delta_trace.empty()) {
            const fs::path trace_path = fs::path(args.out_dir) / ("delta_trace_" + stem + ".csv");
            write_delta_trace(trace_path, report.delta_trace);
            outputs.push_back(trace_path);
        }

        json row;
        row["seed"] = seed;
        row["mean_return"] = report.mean_return;
        row["normalized_return"] = report.normalized_return;
        row["episode_end_modes"] = report.episode_end_modes;
        per_seed.push_back(row);
    }
    summary["per_seed"] = per_seed;
    double mean_norm = 0.0;
    for (const auto& row : per_seed) mean_norm += row.at("normalized_return").get<double>();
    summary["normalized_return"] = mean_norm / per_seed.size();

    const fs::path summary_path = fs::path(args.out_dir) / "summary.json";
    write_text(summary_path, summary.dump(2) + "\n");
    outputs.push_back(summary_path);
    write_manifest(args.out_dir, cfg, cfg.eval.seeds, outputs, started);
    std::cout << "evaluated " << method << ": normalized return "
              << summary["normalized_return"].get<double>() << "\n";
    return kExitOk;
}

int cmd_coverage(const CommonArgs& args) {
    const std::string started = timestamp_utc();
    ExperimentConfig cfg = ExperimentConfig::from_json_file(args.config_path);
    if (args.seed) cfg.dataset.seed = *args.seed;

    auto rows = coverage_experiment(cfg, args.jobs);

    fs::create_directories(args.out_dir);
    std::vector<fs::path> outputs;
    if (args.format == "json") {
        json j = json::array();
        for (const auto& row : rows)
            j.push_back({{"delta", row.delta},
                         {"coverage", row.coverage},
                         {"resamples", row.resamples},
                         {"failures", row.failures}});
        const fs::path path = fs::path(args.out_dir) / "coverage.json";
        write_text(path, j.dump(2) + "\n");
        outputs.push_back(path);
    } else {
        const fs::path path = fs::path(args.out_dir) / "coverage.csv";
        std::ofstream out(path, std::ios::binary);
        out << "delta,coverage,resamples,failures\n";
        for (const auto& row : rows)
            out << row.delta << ',' << fmt_double(row.coverage) << ',' << row.resamples << ','
                << row.failures << '\n';
        out.close();
        outputs.push_back(path);
    }
    write_manifest(args.out_dir, cfg, {cfg.dataset.seed}, outputs, started);
    for (const auto& row : rows)
        std::cout << "delta " << row.delta << ": coverage " << row.coverage << " ("
                  << row.resamples << " resamples, " << row.failures << " failures)\n";
    return kExitOk;
}

int cmd_sweep(const CommonArgs& args) {
    const std::string started = timestamp_utc();
    ExperimentConfig cfg = ExperimentConfig::from_json_file(args.config_path);

    auto cells = alpha_sweep(cfg, cfg.sweep.alphas, args.jobs);

    fs::create_directories(args.out_dir);
    std::vector<fs::path> outputs;
    if (args.format == "json") {
        json j = json::array();
        for (const auto& cell : cells)
            j.push_back({{"method", cell.method},
                         {"alpha", cell.alpha},
                         {"seed", cell.seed},
                         {"mean_return", cell.mean_return},
                         {"normalized_return", cell.normalized_return}});
        const fs::path path = fs::path(args.out_dir) / "sweep.json";
        write_text(path, j.dump(2) + "\n");
        outputs.push_back(path);
    } else {
        const fs::path path = fs::path(args.out_dir) / "sweep.csv";
        std::ofstream out(path, std::ios::binary);
        out << "method,alpha,seed,mean_return,normalized_return\n";
        for (const auto& cell : cells)
            out << cell.method << ',' << cell.alpha << ',' << cell.seed << ','
                << fmt_double(cell.mean_return) << ',' << fmt_double(cell.normalized_return)
                << '\n';
        out.close();
        outputs.push_back(path);
    }
    write_manifest(args.out_dir, cfg, cfg.sweep.seeds, outputs, started);
    std::cout << "sweep wrote " << cells.size() << " cells\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"confidence-conditioned value learning experiments"};
    app.require_subcommand(1);

    CommonArgs collect_args, train_args, eval_args, coverage_args, sweep_args;
    std::string dataset_path, tables_path, upper_path;

    auto* collect = app.add_subcommand("collect", "sample an offline dataset");
    add_common(collect, collect_args);

    auto* train = app.add_subcommand("train", "train a solver on a dataset");
    add_common(train, train_args);
    train->add_option("--dataset", dataset_path, "dataset JSONL path")->required();

    auto* eval = app.add_subcommand("eval", "evaluate trained tables");
    add_common(eval, eval_args);
    eval->add_option("--tables", tables_path, "trained table JSON")->required();
    eval->add_option("--upper", upper_path, "upper-bound table JSON (safe-set mode)");

    auto* coverage = app.add_subcommand("coverage", "bound coverage over dataset resamples");
    add_common(coverage, coverage_args);

    auto* sweep = app.add_subcommand("sweep", "alpha sweep across methods");
    add_common(sweep, sweep_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (collect->parsed()) return cmd_collect(collect_args);
        if (train->parsed()) return cmd_train(train_args, dataset_path);
        if (eval->parsed()) return cmd_eval(eval_args, tables_path, upper_path);
        if (coverage->parsed()) return cmd_coverage(coverage_args);
        if (sweep->parsed()) return cmd_sweep(sweep_args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ConvergenceError& e) {
        std::cerr << "convergence failure: " << e.what() << "\n";
        return kExitConvergence;
    } catch (const ShapeError& e) {
        std::cerr << "shape mismatch: " << e.what() << "\n";
        return kExitShape;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitConfig;
}
