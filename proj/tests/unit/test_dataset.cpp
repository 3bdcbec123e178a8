#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ccvl/dataset.hpp"
#include "ccvl/mdp.hpp"
#include "ccvl/rng.hpp"
#include "ccvl/solver.hpp"

using namespace ccvl;

namespace {

TabularMdp gridworld_8x8() {
    std::vector<std::string> rows = {"........", "........", "..WW....", "..WW....",
                                     "........", "........", "........", "SLLLLLLG"};
    return build_gridworld(GridworldSpec::from_rows(rows, 0.30, 1.0));
}

Policy behavior_for(const TabularMdp& mdp, double epsilon_opt) {
    auto q = solve_optimal_q(mdp, 1e-10, 200000);
    return mix_policy(greedy_policy(q, mdp.num_states, mdp.num_actions), epsilon_opt);
}

}  // namespace

TEST_CASE("collect_dataset: 2500 samples from the half-optimal behavior policy") {
    auto mdp = gridworld_8x8();
    auto data = collect_dataset(mdp, behavior_for(mdp, 0.5), 2500, 100, 0);
    CHECK(data.transitions.size() == 2500);
    std::int64_t total = 0;
    for (std::int64_t c : data.count_s) total += c;
    CHECK(total == 2500);
}

TEST_CASE("collect_dataset: a single sample starts at the start state") {
    auto mdp = gridworld_8x8();
    auto data = collect_dataset(mdp, Policy::uniform(64, 4), 1, 100, 42);
    REQUIRE(data.transitions.size() == 1);
    CHECK(mdp.initial_dist[data.transitions[0].s] == doctest::Approx(1.0));
}

TEST_CASE("collect_dataset: identical seeds give byte-identical datasets") {
    auto mdp = gridworld_8x8();
    auto a = collect_dataset(mdp, Policy::uniform(64, 4), 500, 100, 7);
    auto b = collect_dataset(mdp, Policy::uniform(64, 4), 500, 100, 7);
    std::ostringstream sa, sb;
    save_jsonl(a, sa);
    save_jsonl(b, sb);
    CHECK(sa.str() == sb.str());

    auto c = collect_dataset(mdp, Policy::uniform(64, 4), 500, 100, 8);
    std::ostringstream sc;
    save_jsonl(c, sc);
    CHECK(sa.str() != sc.str());
}

TEST_CASE("count consistency: rebuilding counts from the list reproduces them") {
    auto mdp = gridworld_8x8();
    auto data = collect_dataset(mdp, behavior_for(mdp, 0.5), 1000, 100, 3);
    auto rebuilt = OfflineDataset::from_transitions(64, 4, data.transitions);
    CHECK(rebuilt.count_sa == data.count_sa);
    CHECK(rebuilt.count_s == data.count_s);
    for (int s = 0; s < 64; ++s) {
        std::int64_t row = 0;
        for (int a = 0; a < 4; ++a) row += data.n_sa(s, a);
        CHECK(row == data.n_s(s));
    }
}

TEST_CASE("behavior_hat approaches the behavior policy on well-visited states") {
    RandomMdpSpec spec;
    spec.num_states = 5;
    spec.num_actions = 2;
    spec.seed = 21;
    auto mdp = make_random_mdp(spec);
    auto behavior = behavior_for(mdp, 0.5);
    auto data = collect_dataset(mdp, behavior, 100000, 50, 1);
    for (int s = 0; s < 5; ++s) {
        if (data.n_s(s) < 1000) continue;
        for (int a = 0; a < 2; ++a)
            CHECK(std::abs(data.behavior_hat.at(s, a) - behavior.at(s, a)) <= 0.02);
    }
}

TEST_CASE("build_empirical_model: frequencies, one-hot rows, empty dataset") {
    std::vector<Transition> ts = {{0, 0, 0.5, 1, false}, {0, 0, 0.5, 1, false}, {0, 0, 0.5, 0, false}};
    auto data = OfflineDataset::from_transitions(2, 1, ts);
    auto model = build_empirical_model(data);
    CHECK(model.row(0, 0)[0] == doctest::Approx(1.0 / 3.0));
    CHECK(model.row(0, 0)[1] == doctest::Approx(2.0 / 3.0));
    CHECK(model.r(0, 0) == doctest::Approx(0.5));
    CHECK(model.is_visited(0, 0));
    CHECK(!model.is_visited(1, 0));

    auto empty = build_empirical_model(OfflineDataset::from_transitions(2, 1, {}));
    for (int s = 0; s < 2; ++s) CHECK(!empty.is_visited(s, 0));

    std::vector<std::string> rows = {"S.G"};
    auto det = build_gridworld(GridworldSpec::from_rows(rows, 0.0, 1.0));
    auto det_data = collect_dataset(det, Policy::uniform(3, 4), 200, 50, 9);
    auto det_model = build_empirical_model(det_data);
    for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 4; ++a) {
            if (!det_model.is_visited(s, a)) continue;
            int ones = 0;
            for (int s2 = 0; s2 < 3; ++s2) ones += det_model.row(s, a)[s2] == 1.0;
            CHECK(ones == 1);
        }
}

TEST_CASE("empirical_bellman: zero target returns r_hat on visited pairs") {
    std::vector<Transition> ts = {{0, 0, 0.7, 1, false}, {1, 0, -0.2, 0, false}};
    auto data = OfflineDataset::from_transitions(2, 1, ts);
    auto model = build_empirical_model(data);
    MdpMeta meta{0.9, 1.0};
    std::vector<double> q(2, 0.0);
    auto out = empirical_bellman(q, model, meta);
    CHECK(out[0] == doctest::Approx(0.7));
    CHECK(out[1] == doctest::Approx(-0.2));
}

TEST_CASE("empirical_bellman: self-loop fixed point and pessimistic fallback") {
    std::vector<Transition> ts = {{0, 0, 1.0, 0, false}};
    auto data = OfflineDataset::from_transitions(2, 1, ts);
    auto model = build_empirical_model(data);
    MdpMeta meta{0.9, 1.0};
    std::vector<double> q = {10.0, 0.0};
    auto out = empirical_bellman(q, model, meta);
    CHECK(out[0] == doctest::Approx(10.0));   // 1 + 0.9 * 10
    CHECK(out[1] == doctest::Approx(-10.0));  // unvisited -> -r_max/(1-gamma)
}

TEST_CASE("empirical_bellman: done transitions do not bootstrap") {
    // (0,a)->1 with done=true; the unvisited terminal row must not leak value.
    std::vector<Transition> ts = {{0, 0, 1.0, 1, true}};
    auto data = OfflineDataset::from_transitions(2, 1, ts);
    auto model = build_empirical_model(data);
    MdpMeta meta{0.9, 1.0};
    std::vector<double> q = {-10.0, -10.0};
    auto out = empirical_bellman(q, model, meta);
    CHECK(out[0] == doctest::Approx(1.0));
}

TEST_CASE("empirical operator tracks the exact operator at 1e5 samples") {
    RandomMdpSpec spec;
    spec.num_states = 5;
    spec.num_actions = 2;
    spec.seed = 33;
    spec.discount = 0.9;
    auto mdp = make_random_mdp(spec);
    auto data = collect_dataset(mdp, Policy::uniform(5, 2), 100000, 50, 2);
    auto model = build_empirical_model(data);
    MdpMeta meta{mdp.discount, mdp.r_max};

    Rng rng(4);
    std::vector<double> q(5 * 2);
    for (auto& v : q) v = 2.0 * uniform01(rng);
    auto emp = empirical_bellman(q, model, meta);
    auto exact = bellman_optimality_backup(mdp, q);
    double gap = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) gap = std::max(gap, std::abs(emp[i] - exact[i]));
    CHECK(gap <= 0.05);
}

TEST_CASE("concentration check: estimation error within the Hoeffding radius") {
    RandomMdpSpec spec;
    spec.num_states = 5;
    spec.num_actions = 2;
    spec.seed = 55;
    spec.discount = 0.9;
    auto mdp = make_random_mdp(spec);
    MdpMeta meta{mdp.discount, mdp.r_max};

    Rng rng(6);
    std::vector<double> q(5 * 2);
    for (auto& v : q) v = uniform01(rng);
    auto exact = bellman_optimality_backup(mdp, q);

    const int resamples = 500;
    const double iota = 1.0;
    for (double delta : {0.1, 0.3}) {
        std::vector<int> ok(5 * 2, 0), seen(5 * 2, 0);
        for (int i = 0; i < resamples; ++i) {
            auto data = collect_dataset(mdp, Policy::uniform(5, 2), 2000, 50,
                                        1000 + static_cast<std::uint64_t>(i));
            auto model = build_empirical_model(data);
            auto emp = empirical_bellman(q, model, meta);
            for (int s = 0; s < 5; ++s)
                for (int a = 0; a < 2; ++a) {
                    auto n = data.n_sa(s, a);
                    if (n < 1) continue;
                    const std::size_t idx = static_cast<std::size_t>(s) * 2 + a;
                    ++seen[idx];
                    const double radius = std::sqrt(iota * std::log(1.0 / delta) /
                                                    static_cast<double>(n));
                    ok[idx] += std::abs(emp[idx] - exact[idx]) <= radius;
                }
        }
        for (std::size_t idx = 0; idx < ok.size(); ++idx) {
            REQUIRE(seen[idx] > 0);
            CHECK(static_cast<double>(ok[idx]) / seen[idx] >= 1.0 - delta);
        }
    }
}

TEST_CASE("JSONL round trip is lossless") {
    auto mdp = gridworld_8x8();
    auto data = collect_dataset(mdp, behavior_for(mdp, 0.5), 300, 100, 12);
    std::ostringstream out;
    save_jsonl(data, out);
    std::istringstream in(out.str());
    auto back = load_jsonl(in, 64, 4);
    REQUIRE(back.transitions.size() == data.transitions.size());
    for (std::size_t i = 0; i < data.transitions.size(); ++i) {
        CHECK(back.transitions[i].s == data.transitions[i].s);
        CHECK(back.transitions[i].a == data.transitions[i].a);
        CHECK(back.transitions[i].r == data.transitions[i].r);
        CHECK(back.transitions[i].s_next == data.transitions[i].s_next);
        CHECK(back.transitions[i].done == data.transitions[i].done);
    }
    CHECK(back.count_sa == data.count_sa);
    std::ostringstream again;
    save_jsonl(back, again);
    CHECK(again.str() == out.str());
}
