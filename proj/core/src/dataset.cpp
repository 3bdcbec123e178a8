#include "ccvl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ccvl/rng.hpp"

namespace ccvl {

OfflineDataset OfflineDataset::from_transitions(int num_states, int num_actions,
                                                std::vector<Transition> transitions) {
    OfflineDataset data;
    data.num_states = num_states;
    data.num_actions = num_actions;
    data.transitions = std::move(transitions);
    data.count_sa.assign(static_cast<std::size_t>(num_states) * num_actions, 0);
    data.count_s.assign(num_states, 0);
    for (const Transition& t : data.transitions) {
        if (t.s < 0 || t.s >= num_states || t.s_next < 0 || t.s_next >= num_states || t.a < 0 ||
            t.a >= num_actions)
            throw ShapeError("OfflineDataset: transition ids out of range");
        ++data.count_sa[static_cast<std::size_t>(t.s) * num_actions + t.a];
        ++data.count_s[t.s];
    }
    data.behavior_hat = Policy::uniform(num_states, num_actions);
    for (int s = 0; s < num_states; ++s) {
        if (data.count_s[s] == 0) continue;
        for (int a = 0; a < num_actions; ++a)
            data.behavior_hat.at(s, a) =
                static_cast<double>(data.n_sa(s, a)) / static_cast<double>(data.count_s[s]);
    }
    return data;
}

OfflineDataset collect_dataset(const TabularMdp& mdp, const Policy& behavior, int num_samples,
                               int horizon, std::uint64_t seed) {
    if (num_samples <= 0) throw ConfigError("collect_dataset: num_samples must be positive");
    if (horizon <= 0) throw ConfigError("collect_dataset: horizon must be positive");
    if (behavior.num_states != mdp.num_states || behavior.num_actions != mdp.num_actions)
        throw ShapeError("collect_dataset: behavior policy shape mismatch");

    Rng rng(seed);
    std::vector<Transition> transitions;
    transitions.reserve(num_samples);
    while (static_cast<int>(transitions.size()) < num_samples) {
        int s = sample_categorical(mdp.initial_dist, rng);
        if (mdp.is_terminal(s)) {
            // A terminal start yields no transitions; with an all-terminal
            // initial distribution collection could never finish.
            bool any_live = false;
            for (int i = 0; i < mdp.num_states; ++i)
                any_live = any_live || (mdp.initial_dist[i] > 0.0 && !mdp.is_terminal(i));
            if (!any_live) throw ConfigError("collect_dataset: initial distribution is all-terminal");
            continue;
        }
        for (int step = 0; step < horizon && static_cast<int>(transitions.size()) < num_samples;
             ++step) {
            int a = sample_categorical(behavior.row(s), rng);
            int s_next = sample_categorical(mdp.row(s, a), rng);
            Transition t{s, a, mdp.r(s, a), s_next, mdp.is_terminal(s_next)};
            transitions.push_back(t);
            if (t.done) break;
            s = s_next;
        }
    }
    return OfflineDataset::from_transitions(mdp.num_states, mdp.num_actions, std::move(transitions));
}

EmpiricalModel build_empirical_model(const OfflineDataset& data) {
    EmpiricalModel model;
    const int S = data.num_states, A = data.num_actions;
    model.num_states = S;
    model.num_actions = A;
    model.p_hat.assign(static_cast<std::size_t>(S) * A * S, 0.0);
    model.r_hat.assign(static_cast<std::size_t>(S) * A, 0.0);
    model.visited.assign(static_cast<std::size_t>(S) * A, 0);
    model.terminal.assign(S, 0);

    for (const Transition& t : data.transitions) {
        const std::size_t sa = static_cast<std::size_t>(t.s) * A + t.a;
        model.p_hat[sa * S + t.s_next] += 1.0;
        model.r_hat[sa] += t.r;
        if (t.done) model.terminal[t.s_next] = 1;
    }
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const std::size_t sa = static_cast<std::size_t>(s) * A + a;
            const std::int64_t n = data.n_sa(s, a);
            if (n == 0) continue;
            model.visited[sa] = 1;
            model.r_hat[sa] /= static_cast<double>(n);
            for (int s2 = 0; s2 < S; ++s2) model.p_hat[sa * S + s2] /= static_cast<double>(n);
        }
    return model;
}

std::vector<double> empirical_bellman(std::span<const double> q, const EmpiricalModel& model,
                                      const MdpMeta& meta) {
    const int S = model.num_states, A = model.num_actions;
    if (q.size() != static_cast<std::size_t>(S) * A)
        throw ShapeError("empirical_bellman: q size mismatch");
    const double bound = meta.value_bound();

    std::vector<double> vmax(S, 0.0);
    for (int s = 0; s < S; ++s) {
        if (model.terminal[s]) continue;  // episodes end here; no bootstrap
        double best = q[static_cast<std::size_t>(s) * A];
        for (int a = 1; a < A; ++a) best = std::max(best, q[static_cast<std::size_t>(s) * A + a]);
        vmax[s] = best;
    }

    std::vector<double> out(static_cast<std::size_t>(S) * A, -bound);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            if (!model.is_visited(s, a)) continue;  // pessimistic fallback stays
            double exp_next = 0.0;
            auto row = model.row(s, a);
            for (int s2 = 0; s2 < S; ++s2) exp_next += row[s2] * vmax[s2];
            double v = model.r(s, a) + meta.discount * exp_next;
            out[static_cast<std::size_t>(s) * A + a] = std::clamp(v, -bound, bound);
        }
    return out;
}

void save_jsonl(const OfflineDataset& data, std::ostream& out) {
    for (const Transition& t : data.transitions) {
        nlohmann::json j;
        j["s"] = t.s;
        j["a"] = t.a;
        j["r"] = t.r;
        j["s_next"] = t.s_next;
        j["done"] = t.done;
        out << j.dump() << '\n';
    }
}

void save_jsonl_file(const OfflineDataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_jsonl_file: cannot open " + path);
    save_jsonl(data, out);
}

OfflineDataset load_jsonl(std::istream& in, int num_states, int num_actions) {
    std::vector<Transition> transitions;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        Transition t;
        t.s = j.at("s").get<int>();
        t.a = j.at("a").get<int>();
        t.r = j.at("r").get<double>();
        t.s_next = j.at("s_next").get<int>();
        t.done = j.at("done").get<bool>();
        transitions.push_back(t);
    }
    return OfflineDataset::from_transitions(num_states, num_actions, std::move(transitions));
}

OfflineDataset load_jsonl_file(const std::string& path, int num_states, int num_actions) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_jsonl_file: cannot open " + path);
    return load_jsonl(in, num_states, num_actions);
}

}  // namespace ccvl
