#pragma once

#include <cmath>
#include <vector>

#include "svsl/environment.hpp"
#include "svsl/value_metrics.hpp"

namespace testutil {

using namespace svsl;

/// Random deterministic MOMDP with S states, A actions, m values; state S-1 is terminal.
inline TabularMomdp random_momdp(int S, int A, int m, int horizon, Rng& rng, double gamma = 1.0) {
    MomdpConfig cfg;
    cfg.num_values = m;
    cfg.discount = gamma;
    cfg.horizon = horizon;
    cfg.num_states = S;
    cfg.num_actions = A;
    std::vector<int> next(static_cast<std::size_t>(S * A));
    RewardTable r(S * A, m);
    for (int sa = 0; sa < S * A; ++sa) {
        next[static_cast<std::size_t>(sa)] = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(S)));
        for (int i = 0; i < m; ++i) r.at(sa, i) = std::round(standard_normal(rng) * 4.0) / 4.0;
    }
    std::vector<bool> terminal(static_cast<std::size_t>(S), false);
    terminal[static_cast<std::size_t>(S - 1)] = true;
    return TabularMomdp(cfg, std::move(next), std::move(r), std::move(terminal), 0);
}

inline RewardTable random_table(int num_sa, int m, Rng& rng, double scale = 1.0) {
    RewardTable t(num_sa, m);
    for (auto& v : t.values) v = standard_normal(rng) * scale;
    return t;
}

/// Short random state-action sequence (not necessarily a feasible rollout).
inline Trajectory random_steps(int S, int A, int len, Rng& rng) {
    Trajectory t;
    for (int k = 0; k < len; ++k)
        t.steps.push_back({static_cast<int>(uniform_index(rng, static_cast<std::size_t>(S))),
                           static_cast<int>(uniform_index(rng, static_cast<std::size_t>(A)))});
    return t;
}

/// Return computed by stepping through the trajectory, independent of the feature cache.
inline std::vector<double> naive_return(const Trajectory& t, const RewardTable& r, int A, double gamma) {
    std::vector<double> g(static_cast<std::size_t>(r.num_values), 0.0);
    double disc = 1.0;
    for (const auto& st : t.steps) {
        for (int i = 0; i < r.num_values; ++i) g[static_cast<std::size_t>(i)] += disc * r.at(st.state * A + st.action, i);
        disc *= gamma;
    }
    return g;
}

inline Preference naive_label(double a, double b) {
    if (a - b > 1e-6) return Preference::First;
    if (b - a > 1e-6) return Preference::Second;
    return Preference::Indifferent;
}

inline Preference random_label(Rng& rng) {
    return static_cast<Preference>(uniform_index(rng, 3));
}

/// Dataset over random trajectories with random labels; `tie_prone` keeps
/// trajectories short and rewards coarse so indifference shows up.
inline Dataset random_dataset(int agents, int records_per_agent, int S, int A, int m, Rng& rng,
                              std::vector<TrajectoryRef>* pool_out = nullptr) {
    MomdpConfig cfg;
    cfg.num_values = m;
    cfg.num_states = S;
    cfg.num_actions = A;
    cfg.horizon = 8;
    std::vector<TrajectoryRef> pool;
    for (int k = 0; k < 12; ++k)
        pool.push_back(make_trajectory_ref(static_cast<std::uint64_t>(k + 1),
                                           random_steps(S, A, 1 + static_cast<int>(uniform_index(rng, 4)), rng), cfg));
    Dataset d(agents, m);
    for (int j = 0; j < agents; ++j) {
        for (int k = 0; k < records_per_agent; ++k) {
            PreferenceRecord r;
            r.agent = j;
            r.first = pool[uniform_index(rng, pool.size())];
            r.second = pool[uniform_index(rng, pool.size())];
            r.value_system = random_label(rng);
            for (int i = 0; i < m; ++i) r.values.push_back(random_label(rng));
            d.add(std::move(r));
        }
    }
    if (pool_out) *pool_out = pool;
    return d;
}

}  // namespace testutil
