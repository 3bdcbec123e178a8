#include "ccvl/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

namespace ccvl {

namespace {

/// Runs jobs [0, count) across up to `jobs` threads; each job writes only its
/// own output slot, so results are independent of scheduling.
void run_jobs(int count, int jobs, const std::function<void(int)>& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int workers = std::min(jobs, count);
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace

StaticActionSource::StaticActionSource(Policy policy, std::uint64_t seed)
    : policy_(std::move(policy)), rng_(seed) {}

int StaticActionSource::select(int state) {
    return sample_categorical(policy_.row(state), rng_);
}

AdaptiveActionSource::AdaptiveActionSource(ConfidenceQ lower, std::unique_ptr<ConfidenceQ> upper,
                                           AdaptivePolicyConfig cfg)
    : lower_(std::move(lower)),
      upper_(std::move(upper)),
      cfg_(cfg),
      belief_(belief_init(lower_.grid, cfg.temperature)),
      rng_(cfg.seed) {
    cfg_.validate();
    if (cfg_.mode == PolicyKind::SafeSet && !upper_)
        throw ConfigError("AdaptiveActionSource: SafeSet mode requires an upper table");
}

void AdaptiveActionSource::begin_episode(int episode) {
    episode_ = episode;
    step_ = 0;
    if (!cfg_.carry_belief) belief_ = belief_init(lower_.grid, cfg_.temperature);
    delta_index_ = sample_delta_index(belief_, cfg_, rng_);
}

void AdaptiveActionSource::end_episode() { episode_end_modes_.push_back(belief_.mode_index()); }

int AdaptiveActionSource::select(int state) {
    if (cfg_.resample_each_step) delta_index_ = sample_delta_index(belief_, cfg_, rng_);
    return select_action(lower_, upper_.get(), state, belief_, cfg_, rng_, delta_index_);
}

void AdaptiveActionSource::observe(const Transition& t) {
    if (cfg_.mode != PolicyKind::FixedDelta) belief_ = belief_update(belief_, t, lower_);
    trace_.push_back(DeltaTraceRow{episode_, step_, delta_index_,
                                   lower_.grid.at(delta_index_), t.a, t.r});
    ++step_;
}

EvalReport rollout(const TabularMdp& mdp, ActionSource& source, int episodes, int horizon,
                   std::uint64_t seed) {
    if (episodes <= 0 || horizon <= 0)
        throw ConfigError("rollout: episodes and horizon must be positive");
    const auto start = std::chrono::steady_clock::now();
    Rng rng(seed);
    EvalReport report;
    report.per_episode_returns.reserve(episodes);
    for (int ep = 0; ep < episodes; ++ep) {
        source.begin_episode(ep);
        int s = sample_categorical(mdp.initial_dist, rng);
        double ret = 0.0;
        for (int step = 0; step < horizon && !mdp.is_terminal(s); ++step) {
            const int a = source.select(s);
            const int s_next = sample_categorical(mdp.row(s, a), rng);
            const Transition t{s, a, mdp.r(s, a), s_next, mdp.is_terminal(s_next)};
            ret += t.r;
            source.observe(t);
            s = s_next;
        }
        report.per_episode_returns.push_back(ret);
        source.end_episode();
    }

    double total = 0.0;
    for (double r : report.per_episode_returns) total += r;
    report.mean_return = total / episodes;
    if (auto* adaptive = dynamic_cast<AdaptiveActionSource*>(&source)) {
        report.delta_trace = adaptive->trace();
        report.episode_end_modes = adaptive->episode_end_modes();
    }
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

double optimal_mean_return(const TabularMdp& mdp, int episodes, int horizon, std::uint64_t seed) {
    auto q = solve_optimal_q(mdp, 1e-10, 200000);
    StaticActionSource source(greedy_policy(q, mdp.num_states, mdp.num_actions), seed);
    return rollout(mdp, source, episodes, horizon, seed).mean_return;
}

TrainedTables train_method(const SolverSpec& solver, const OfflineDataset& data,
                           const EmpiricalModel& model, const MdpMeta& meta, std::uint64_t seed) {
    TrainedTables out;
    out.method = solver.method;
    const ConfidenceGrid grid = solver.grid();

    auto run_confidence = [&](BackupFn backup, ConfidenceQ init) {
        auto [table, report] = solve(backup, std::move(init), solver.tol, solver.max_iters);
        out.report = report;
        out.fixed_delta_index = fixed_ccvl_select(table, data);
        out.confidence_tables.push_back(std::move(table));
    };

    if (solver.method == "ccvl-bonus") {
        run_confidence(
            [&](const ConfidenceQ& q) { return ccvl_bonus_backup(q, data, model); },
            ConfidenceQ::lower_init(data.num_states, data.num_actions, grid, solver.alpha,
                                    solver.iota, meta));
    } else if (solver.method == "ccvl-reg") {
        RegOptions opts{solver.policy_mode, solver.temperature, solver.state_action_weighting};
        run_confidence(
            [&, opts](const ConfidenceQ& q) { return ccvl_reg_backup(q, data, model, opts); },
            ConfidenceQ::lower_init(data.num_states, data.num_actions, grid, solver.alpha,
                                    solver.iota, meta));
    } else if (solver.method == "ccvl-upper") {
        run_confidence(
            [&](const ConfidenceQ& q) { return ccvl_upper_backup(q, data, model); },
            ConfidenceQ::upper_init(data.num_states, data.num_actions, grid, solver.alpha,
                                    solver.iota, meta));
    } else if (solver.method == "cql" || solver.method == "anti-explore" ||
               solver.method == "plain") {
        QBackupFn backup;
        if (solver.method == "cql")
            backup = [&](const QTable& q) {
                return cql_backup(q, data, model, solver.alpha, meta, true, solver.temperature);
            };
        else if (solver.method == "anti-explore")
            backup = [&](const QTable& q) {
                return anti_exploration_backup(q, data, model, solver.alpha, meta);
            };
        else
            backup = [&](const QTable& q) { return plain_backup(q, model, meta); };
        QTable init = QTable::constant(data.num_states, data.num_actions, -meta.value_bound(),
                                       solver.method);
        auto [table, report] = solve_qtable(backup, std::move(init), solver.tol, solver.max_iters);
        out.report = report;
        out.q_tables.push_back(std::move(table));
    } else if (solver.method == "aevl") {
        std::vector<std::uint64_t> seeds(solver.ensemble_size);
        for (int i = 0; i < solver.ensemble_size; ++i) seeds[i] = seed + static_cast<std::uint64_t>(i);
        EnsembleQ ensemble =
            train_aevl_ensemble(data, model, solver.ensemble_size, solver.alpha, seeds, meta,
                                solver.tol, solver.max_iters, solver.temperature);
        out.q_tables = std::move(ensemble.members);
    } else {
        throw ConfigError("train_method: unknown method '" + solver.method + "'");
    }
    return out;
}

std::vector<CoverageRow> coverage_experiment(const ExperimentConfig& config, int jobs) {
    if (config.coverage.num_resamples < 100)
        throw ConfigError("coverage_experiment: num_resamples must be at least 100");
    if (config.solver.method != "ccvl-bonus" && config.solver.method != "ccvl-reg" &&
        config.solver.method != "ccvl-upper")
        throw ConfigError("coverage_experiment: method must be a ccvl solver");

    const TabularMdp mdp = config.env_train.build();
    const MdpMeta meta{mdp.discount, mdp.r_max};
    const ConfidenceGrid grid = config.solver.grid();
    std::vector<int> check_idx;
    for (double d : config.coverage.deltas) check_idx.push_back(grid.index_of(d, 1e-9));

    const auto q_star = solve_optimal_q(mdp, 1e-10, 200000);
    std::vector<double> v_star(mdp.num_states, 0.0);
    for (int s = 0; s < mdp.num_states; ++s) {
        double best = q_star[static_cast<std::size_t>(s) * mdp.num_actions];
        for (int a = 1; a < mdp.num_actions; ++a)
            best = std::max(best, q_star[static_cast<std::size_t>(s) * mdp.num_actions + a]);
        v_star[s] = best;
    }
    const Policy behavior =
        mix_policy(greedy_policy(q_star, mdp.num_states, mdp.num_actions), config.dataset.epsilon_opt);

    const int M = config.coverage.num_resamples;
    const int D = static_cast<int>(check_idx.size());
    std::vector<std::vector<char>> holds(M, std::vector<char>(D, 0));
    std::vector<char> converged(M, 0);

    run_jobs(M, jobs, [&](int i) {
        OfflineDataset data =
            collect_dataset(mdp, behavior, config.dataset.num_samples, config.dataset.horizon,
                            config.dataset.seed + static_cast<std::uint64_t>(i));
        EmpiricalModel model = build_empirical_model(data);
        TrainedTables trained;
        try {
            trained = train_method(config.solver, data, model, meta);
        } catch (const ConvergenceError&) {
            return;  // recorded as a failure, not fatal
        }
        converged[i] = 1;
        const ConfidenceQ& table = trained.confidence_tables.front();
        for (int d = 0; d < D; ++d) {
            const int k = check_idx[d];
            bool ok = true;
            if (config.solver.method == "ccvl-reg") {
                // Value-level coverage: max_a Q(s,a,delta) <= V*(s) for all s.
                for (int s = 0; s < mdp.num_states && ok; ++s) {
                    double v = table.at(s, 0, k);
                    for (int a = 1; a < mdp.num_actions; ++a) v = std::max(v, table.at(s, a, k));
                    ok = v <= v_star[s] + 1e-9;
                }
            } else {
                const bool upper = config.solver.method == "ccvl-upper";
                for (int s = 0; s < mdp.num_states && ok; ++s)
                    for (int a = 0; a < mdp.num_actions && ok; ++a) {
                        const double q = table.at(s, a, k);
                        const double ref = q_star[static_cast<std::size_t>(s) * mdp.num_actions + a];
                        ok = upper ? q >= ref - 1e-9 : q <= ref + 1e-9;
                    }
            }
            holds[i][d] = ok;
        }
    });

    std::vector<CoverageRow> rows;
    for (int d = 0; d < D; ++d) {
        CoverageRow row;
        row.delta = config.coverage.deltas[d];
        for (int i = 0; i < M; ++i) {
            if (!converged[i]) continue;
            ++row.resamples;
            row.coverage += holds[i][d];
        }
        row.failures = M - row.resamples;
        row.coverage = row.resamples > 0 ? row.coverage / row.resamples : 0.0;
        rows.push_back(row);
    }
    return rows;
}

std::vector<SweepCell> alpha_sweep(const ExperimentConfig& config, std::span<const double> alphas,
                                   int jobs) {
    if (alphas.empty()) throw ConfigError("alpha_sweep: alphas must be nonempty");
    const TabularMdp train_mdp = config.env_train.build();
    const TabularMdp eval_mdp = config.env_eval.build();
    if (train_mdp.num_states != eval_mdp.num_states ||
        train_mdp.num_actions != eval_mdp.num_actions)
        throw ShapeError("alpha_sweep: train/eval environments differ in shape");
    const MdpMeta meta{train_mdp.discount, train_mdp.r_max};

    const auto q_star_train = solve_optimal_q(train_mdp, 1e-10, 200000);
    const Policy behavior_base =
        greedy_policy(q_star_train, train_mdp.num_states, train_mdp.num_actions);
    const double denom =
        optimal_mean_return(eval_mdp, 10000, config.eval.horizon);

    struct Job {
        std::string method;
        double alpha;
        std::uint64_t seed;
    };
    std::vector<Job> grid_jobs;
    for (const std::string& method : config.sweep.methods)
        for (double alpha : alphas)
            for (std::uint64_t seed : config.sweep.seeds) grid_jobs.push_back({method, alpha, seed});

    std::vector<SweepCell> cells(grid_jobs.size());
    run_jobs(static_cast<int>(grid_jobs.size()), jobs, [&](int i) {
        const Job& job = grid_jobs[i];
        const Policy behavior = mix_policy(behavior_base, config.dataset.epsilon_opt);
        OfflineDataset data = collect_dataset(train_mdp, behavior, config.dataset.num_samples,
                                              config.dataset.horizon, job.seed);
        EmpiricalModel model = build_empirical_model(data);
        SolverSpec solver = config.solver;
        solver.method = job.method;
        solver.alpha = job.alpha;
        TrainedTables trained = train_method(solver, data, model, meta, job.seed);

        EvalReport report;
        if (!trained.confidence_tables.empty()) {
            AdaptivePolicyConfig pol = config.policy;
            pol.seed = job.seed;
            std::unique_ptr<ConfidenceQ> upper;
            AdaptiveActionSource source(trained.confidence_tables.front(), std::move(upper), pol);
            report = rollout(eval_mdp, source, config.eval.episodes, config.eval.horizon, job.seed);
        } else {
            const QTable& table = trained.q_tables.front();
            StaticActionSource source(
                greedy_policy(table.values, table.num_states, table.num_actions), job.seed);
            report = rollout(eval_mdp, source, config.eval.episodes, config.eval.horizon, job.seed);
        }
        cells[i] = SweepCell{job.method, job.alpha, job.seed, report.mean_return,
                             denom != 0.0 ? report.mean_return / denom : 0.0};
    });
    return cells;
}

}  // namespace ccvl
