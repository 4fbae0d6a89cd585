#include "svsl/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace svsl {

std::vector<Weights> SocialValueSystem::live_weights() const {
    std::vector<Weights> out;
    for (int l : live_clusters(beta)) out.push_back(weights.at(static_cast<std::size_t>(l)));
    return out;
}

SocialValueSystem to_social_value_system(const Solution& sol) {
    return {sol.beta, sol.bank.all_weights(), sol.model.table()};
}

std::vector<double> weight_discordances(const std::vector<Weights>& weights, const RewardTable& grounding,
                                        const std::vector<const PreferenceRecord*>& rows) {
    std::vector<double> out(weights.size(), 0.0);
    if (rows.empty()) return out;
    const auto m = static_cast<std::size_t>(grounding.num_values);
    std::vector<double> ga(m), gb(m);
    std::vector<int> miss(weights.size(), 0);
    for (const PreferenceRecord* r : rows) {
        discounted_alignment(*r->first, grounding, ga);
        discounted_alignment(*r->second, grounding, gb);
        for (std::size_t l = 0; l < weights.size(); ++l)
            if (qualitative_label(dot(weights[l], ga), dot(weights[l], gb)) != r->value_system) ++miss[l];
    }
    for (std::size_t l = 0; l < weights.size(); ++l)
        out[l] = static_cast<double>(miss[l]) / static_cast<double>(rows.size());
    return out;
}

// ---------------------------------------------------------------------------

PreferenceBuffer::PreferenceBuffer(int num_agents, int num_values, std::size_t capacity)
    : num_values_(num_values), capacity_(capacity), per_agent_(static_cast<std::size_t>(num_agents)) {
    if (capacity == 0) throw Error("PreferenceBuffer: zero capacity");
}

void PreferenceBuffer::add(PreferenceRecord r) {
    if (r.agent < 0 || r.agent >= static_cast<int>(per_agent_.size())) throw Error("preference from unknown agent");
    if (static_cast<int>(r.values.size()) != num_values_) throw Error("preference has wrong number of value labels");
    per_agent_[static_cast<std::size_t>(r.agent)].push_back(std::move(r));
    ++size_;
    while (size_ > capacity_) {
        std::size_t fullest = 0;
        for (std::size_t j = 1; j < per_agent_.size(); ++j)
            if (per_agent_[j].size() > per_agent_[fullest].size()) fullest = j;
        per_agent_[fullest].pop_front();
        --size_;
    }
}

Dataset PreferenceBuffer::to_dataset() const {
    Dataset d(static_cast<int>(per_agent_.size()), num_values_);
    for (const auto& recs : per_agent_)
        for (const auto& r : recs) d.add(r);
    return d;
}

std::size_t QuerySet::count(QueryStatus s) const {
    return static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [s](const QueryItem& q) { return q.status == s; }));
}

OracleAnswerSource::OracleAnswerSource(std::vector<Weights> agent_weights, RewardTable ground_truth)
    : weights_(std::move(agent_weights)), ground_truth_(std::move(ground_truth)) {}

PreferenceRecord OracleAnswerSource::answer(const QueryItem& q) const {
    return oracle_answer(q.agent, weights_.at(static_cast<std::size_t>(q.agent)), q.first, q.second, ground_truth_);
}

std::vector<PreferenceRecord> OracleAnswerSource::collect(QuerySet& queries) {
    std::vector<PreferenceRecord> out;
    for (auto& q : queries.items) {
        out.push_back(answer(q));
        q.status = QueryStatus::Answered;
    }
    return out;
}

QuerySelection select_query_pairs(const std::vector<EpisodeInfo>& episodes, std::size_t N_s,
                                  const std::vector<Weights>& scoring_weights, const RewardTable& grounding,
                                  std::size_t candidates_per_query, Rng& rng) {
    QuerySelection sel;
    if (N_s == 0) return sel;
    // Distinct trajectories only; a repeated episode adds nothing to ask about.
    std::vector<const EpisodeInfo*> uniq;
    for (const auto& e : episodes) {
        const bool seen = std::any_of(uniq.begin(), uniq.end(), [&](const EpisodeInfo* u) {
            return u->trajectory->trajectory == e.trajectory->trajectory;
        });
        if (!seen) uniq.push_back(&e);
    }
    if (uniq.size() < 2) {
        sel.degenerate = true;
        if (episodes.size() >= 2)
            for (std::size_t k = 0; k < N_s; ++k) sel.pairs.emplace_back(episodes[0].trajectory, episodes[1].trajectory);
        log::warn("query selection: fewer than two distinct episodes available");
        return sel;
    }
    const std::size_t n = uniq.size();
    const std::size_t max_pairs = n * (n - 1) / 2;
    const std::size_t want = std::min(max_pairs, std::max(N_s, N_s * candidates_per_query));

    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::vector<std::pair<std::size_t, std::size_t>> cand;
    auto try_add = [&](std::size_t i, std::size_t j) {
        const auto key = std::minmax(i, j);
        if (seen.insert(key).second) cand.emplace_back(i, j);
    };
    if (want == max_pairs) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) try_add(i, j);
    } else {
        const std::size_t cross_target = want / 2;
        std::size_t attempts = 0;
        while (cand.size() < cross_target && attempts < 20 * want) {
            ++attempts;
            const std::size_t i = uniform_index(rng, n);
            const std::size_t j = uniform_index(rng, n);
            if (i != j && uniq[i]->cluster != uniq[j]->cluster) try_add(i, j);
        }
        attempts = 0;
        while (cand.size() < want && attempts < 20 * want) {
            ++attempts;
            const std::size_t i = uniform_index(rng, n);
            const std::size_t j = uniform_index(rng, n);
            if (i != j) try_add(i, j);
        }
    }

    const auto m = static_cast<std::size_t>(grounding.num_values);
    std::vector<std::vector<double>> G(n, std::vector<double>(m));
    for (std::size_t i = 0; i < n; ++i) discounted_alignment(*uniq[i]->trajectory, grounding, G[i]);
    std::vector<double> score(cand.size(), 0.5);
    for (std::size_t k = 0; k < cand.size(); ++k) {
        for (const auto& w : scoring_weights) {
            const double p = bt_probability(dot(w, G[cand[k].first]), dot(w, G[cand[k].second]));
            score[k] = std::min(score[k], std::abs(p - 0.5));
        }
    }
    std::vector<std::size_t> order(cand.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
    for (std::size_t k = 0; k < std::min(N_s, order.size()); ++k) {
        const auto& [i, j] = cand[order[k]];
        sel.pairs.emplace_back(uniq[i]->trajectory, uniq[j]->trajectory);
    }
    if (sel.pairs.size() < N_s) sel.degenerate = true;
    return sel;
}

// ---------------------------------------------------------------------------

SvslpConfig ff_svslp_defaults() {
    SvslpConfig c;
    c.svsl.L_max = 10;
    c.svsl.mrt = 0.25;
    c.svsl.lambda = 1.0;
    c.svsl.alpha_lambda = 0.05;
    c.svsl.gamma_lambda = 5e-5;
    c.svsl.alpha_theta = 3e-4;
    c.svsl.alpha_omega = 5e-3;
    c.svsl.A_ref = 0.85;
    c.svsl.N = 5;
    c.svsl.E_r = 2;
    c.svsl.m_r = 3;
    c.svsl.p_m = 0.1;
    c.svsl.s_m = 0.1;
    c.svsl.b_ep = 50;
    c.svsl.b_mp = 50;
    c.K = 500;
    c.N_s = 300;
    c.N_a = 11;
    c.S_p = 10000;
    c.eql.q.lr = 7e-4;
    c.eql.T = 200000;
    c.eql.h0 = 0.05;
    c.eql.hinf = 0.9;
    c.eql.eps0 = 0.5;
    c.eql.epsinf = 0.05;
    c.eql.T_pi = 2;
    c.eql.polyak = true;
    c.eql.tau = 1e-4;
    c.eql.b_pi = 256;
    c.eql.S_e = 500000;
    c.eql.replay = ReplayMode::Hybrid;
    c.eql.per = true;
    c.eql.alpha_per = 0.6;
    c.eql.eps_per = 0.01;
    c.eql.U_w = true;
    c.eql.N_w = 10;
    c.eql.recent_window = 500;
    return c;
}

namespace {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

nlohmann::json svslp_config_to_json(const SvslpConfig& c) {
    nlohmann::json j = svsl_config_to_json(c.svsl);
    j.update(eql_config_to_json(c.eql));
    j["K"] = c.K;
    j["N_s"] = c.N_s;
    j["N_a"] = c.N_a;
    j["S_p"] = c.S_p;
    j["recent_episodes"] = c.recent_episodes;
    j["qpa_candidates"] = c.qpa_candidates;
    j["max_nonfinite_events"] = c.max_nonfinite_events;
    return j;
}

SvslpConfig svslp_config_from_json(const nlohmann::json& j, SvslpConfig c) {
    c.svsl = svsl_config_from_json(j, c.svsl);
    c.eql = eql_config_from_json(j, c.eql);
    read_key(j, "K", c.K);
    read_key(j, "N_s", c.N_s);
    read_key(j, "N_a", c.N_a);
    read_key(j, "S_p", c.S_p);
    read_key(j, "recent_episodes", c.recent_episodes);
    read_key(j, "qpa_candidates", c.qpa_candidates);
    read_key(j, "max_nonfinite_events", c.max_nonfinite_events);
    return c;
}

Solution initialize_from_static(const TabularMomdp& env, const Dataset& data, const SvslConfig& cfg, Rng& rng) {
    try {
        return run_svsl(env, data, cfg, rng).best;
    } catch (const SvslNotConverged& e) {
        log::warn(std::string("warm start: ") + e.what() + "; continuing from the best solution found");
        return e.best;
    }
}

void vs_update(Solution& sol, const PreferenceBuffer& buffer, const Dataset& data, const SvslConfig& cfg, Rng& rng) {
    const Dataset rp = buffer.to_dataset();
    em_cycle(sol, data, &rp, cfg, rng);
}

void relabel_experience(ExperienceBuffer& buffer, const RewardTable& grounding, int num_actions) {
    buffer.relabel(grounding, num_actions);
}

namespace {

nlohmann::json weights_json(const std::vector<Weights>& ws) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& w : ws) arr.push_back(w);
    return arr;
}

nlohmann::json scores_snapshot(const SocietyScores& s) {
    return {{"representativeness", s.representativeness},
            {"coherence", s.coherence},
            {"conciseness", s.conciseness},
            {"gamma", s.gamma},
            {"num_clusters", s.num_clusters}};
}

// Episode bookkeeping shared by the two online loops.
struct EpisodeTracker {
    std::uint64_t id = 0;
    int state = 0;
    int steps = 0;
    int cluster = -1;
    Weights weight;
    Trajectory trajectory;
    std::deque<EpisodeInfo> recent;
    std::uint64_t next_traj_id = 1u << 30;

    void finish(const TabularMomdp& env, std::size_t keep) {
        recent.push_back({make_trajectory_ref(next_traj_id++, std::move(trajectory), env.config()), cluster});
        while (recent.size() > keep) recent.pop_front();
        trajectory = {};
        steps = 0;
        ++id;
        state = env.initial_state();
    }
};

}  // namespace

SvslpResult run_svslp(const TabularMomdp& env, const Dataset& data, AnswerSource& answers, const SvslpConfig& cfg,
                      Rng& rng, const RunCallbacks& callbacks) {
    Solution warm;
    if (data.empty()) {
        warm = random_solution(env, data.num_agents(), cfg.svsl, rng);
    } else {
        warm = initialize_from_static(env, data, cfg.svsl, rng);
    }
    return run_svslp_from(env, data, answers, cfg, std::move(warm), rng, callbacks);
}

SvslpResult run_svslp_from(const TabularMomdp& env, const Dataset& data, AnswerSource& answers,
                           const SvslpConfig& cfg, Solution warm, Rng& rng, const RunCallbacks& callbacks) {
    SvslpResult res;
    res.solution = std::move(warm);
    res.learner = EqlLearner(env, cfg.eql, rng);
    Solution& sol = res.solution;
    EqlLearner& learner = res.learner;
    const int n_agents = static_cast<int>(sol.beta.size());
    PreferenceBuffer prefs(n_agents, env.num_values(), cfg.S_p);
    RewardTable table = sol.model.table();
    const int H = env.config().horizon;

    EpisodeTracker ep;
    ep.state = env.initial_state();
    std::uint64_t next_query = 0;
    int nonfinite = 0;
    RunStatus status;
    status.T = cfg.eql.T;

    auto publish = [&](long t, const nlohmann::json& metrics) {
        if (!callbacks.on_status) return;
        status.t = t;
        status.live_weights = sol.live_weights();
        status.num_clusters = static_cast<int>(status.live_weights.size());
        status.buffer_records = prefs.size();
        status.queries_asked = res.queries_asked;
        status.answers_received = res.answers_received;
        if (!metrics.is_null()) status.metrics = metrics;
        callbacks.on_status(status);
    };
    publish(0, nullptr);

    for (long t = 0; t < cfg.eql.T; ++t) {
        if (t > 0 && cfg.K > 0 && t % cfg.K == 0) {
            QuerySet queries;
            const auto agents = sample_without_replacement(rng, static_cast<std::size_t>(n_agents),
                                                           static_cast<std::size_t>(std::max(cfg.N_a, 0)));
            std::vector<Weights> scoring;
            for (std::size_t j : agents) {
                const Weights w = sol.bank.weights(sol.beta[j]);
                if (std::find(scoring.begin(), scoring.end(), w) == scoring.end()) scoring.push_back(w);
            }
            const std::vector<EpisodeInfo> episodes(ep.recent.begin(), ep.recent.end());
            const auto selection = select_query_pairs(episodes, static_cast<std::size_t>(cfg.N_s), scoring, table,
                                                      cfg.qpa_candidates, rng);
            for (std::size_t j : agents)
                for (const auto& [a, b] : selection.pairs)
                    queries.items.push_back({next_query++, static_cast<int>(j), a, b, QueryStatus::Pending});
            res.queries_asked += queries.items.size();
            auto records = answers.collect(queries);
            res.answers_received += records.size();
            for (auto& r : records) prefs.add(std::move(r));

            nlohmann::json snapshot;
            if (!prefs.empty()) {
                Solution backup = sol;
                try {
                    vs_update(sol, prefs, data, cfg.svsl, rng);
                    nonfinite = 0;
                } catch (const NonFiniteGradient& e) {
                    sol = std::move(backup);
                    log::warn(std::string("EM event skipped: ") + e.what());
                    if (++nonfinite >= cfg.max_nonfinite_events)
                        throw SvslpAborted("persistent non-finite losses at t=" + std::to_string(t), sol);
                }
                table = sol.model.table();
                relabel_experience(learner.buffer(), table, env.num_actions());
                ++res.events;
                if (!data.empty()) {
                    score_solution(sol, data);
                    snapshot = scores_snapshot(sol.scores);
                } else {
                    snapshot = {{"num_clusters", static_cast<int>(live_clusters(sol.beta).size())}};
                }
                snapshot["t"] = t;
                snapshot["weights"] = weights_json(sol.live_weights());
                snapshot["lambda"] = sol.lagrange.multipliers;
                snapshot["buffer_records"] = prefs.size();
                snapshot["degenerate_queries"] = selection.degenerate;
                res.timeline.push_back(snapshot);
            }
            publish(t, snapshot);
        }

        if (ep.steps == 0) {
            const auto live = live_clusters(sol.beta);
            ep.cluster = live[uniform_index(rng, live.size())];
            ep.weight = sol.bank.weights(ep.cluster);
        }
        const int s = ep.state;
        const int a = learner.act(s, ep.weight, rng);
        const int ns = env.next_state(s, a);
        const bool done = env.terminal(ns);
        learner.observe(s, a, table.row(env.sa_index(s, a)), ns, done, ep.weight, ep.id);
        ep.trajectory.steps.push_back({s, a});
        learner.step(rng);
        ep.state = ns;
        ++ep.steps;
        if (done || ep.steps >= H) ep.finish(env, cfg.recent_episodes);
    }
    if (!data.empty()) score_solution(sol, data);
    publish(cfg.eql.T, nullptr);
    return res;
}

// ---------------------------------------------------------------------------
// PbMORL
// ---------------------------------------------------------------------------

PbmorlConfig ff_pbmorl_defaults() {
    PbmorlConfig c;
    c.alpha_theta = 3e-4;
    c.m_r = 3;
    c.T_i = 10000;
    c.b = 256;
    c.K = 500;
    c.N_s = 300;
    c.N_a = 11;
    c.S_p = 100000;
    c.eql.q.lr = 7e-4;
    c.eql.T = 250000;
    c.eql.h0 = 0.05;
    c.eql.hinf = 0.9;
    c.eql.eps0 = 0.5;
    c.eql.epsinf = 0.05;
    c.eql.T_pi = 2;
    c.eql.polyak = true;
    c.eql.tau = 1e-4;
    c.eql.b_pi = 256;
    c.eql.S_e = 256000;
    c.eql.replay = ReplayMode::Hybrid;
    c.eql.per = true;
    c.eql.alpha_per = 0.6;
    c.eql.eps_per = 0.01;
    c.eql.U_w = true;
    c.eql.N_w = 10;
    c.eql.recent_window = 500;
    return c;
}

nlohmann::json pbmorl_config_to_json(const PbmorlConfig& c) {
    nlohmann::json j = eql_config_to_json(c.eql);
    j["alpha_theta"] = c.alpha_theta;
    j["weight_decay"] = c.weight_decay;
    j["m_r"] = c.m_r;
    j["T_i"] = c.T_i;
    j["b"] = c.b;
    j["K"] = c.K;
    j["N_s"] = c.N_s;
    j["N_a"] = c.N_a;
    j["S_p"] = c.S_p;
    j["recent_episodes"] = c.recent_episodes;
    j["qpa_candidates"] = c.qpa_candidates;
    j["reward_mode"] = to_string(c.model.mode);
    j["onehot"] = to_string(c.model.onehot);
    return j;
}

PbmorlConfig pbmorl_config_from_json(const nlohmann::json& j, PbmorlConfig c) {
    c.eql = eql_config_from_json(j, c.eql);
    read_key(j, "alpha_theta", c.alpha_theta);
    read_key(j, "weight_decay", c.weight_decay);
    read_key(j, "m_r", c.m_r);
    read_key(j, "T_i", c.T_i);
    read_key(j, "b", c.b);
    read_key(j, "K", c.K);
    read_key(j, "N_s", c.N_s);
    read_key(j, "N_a", c.N_a);
    read_key(j, "S_p", c.S_p);
    read_key(j, "recent_episodes", c.recent_episodes);
    read_key(j, "qpa_candidates", c.qpa_candidates);
    if (j.contains("reward_mode")) c.model.mode = reward_mode_from_string(j.at("reward_mode").get<std::string>());
    if (j.contains("onehot")) c.model.onehot = onehot_from_string(j.at("onehot").get<std::string>());
    return c;
}

PbmorlResult run_pbmorl_baseline(const TabularMomdp& env, const Dataset& data, AnswerSource& answers,
                                 const PbmorlConfig& cfg, Rng& rng) {
    const int m = env.num_values();
    const int n_agents = data.num_agents();
    PbmorlResult res;
    res.model = RewardVectorModel(env, cfg.model);
    res.model.initialize(rng);
    Adam adam(res.model.params().size(), AdamConfig{cfg.alpha_theta, 0.9, 0.999, 1e-8, cfg.weight_decay});
    res.learner = EqlLearner(env, cfg.eql, rng);
    PreferenceBuffer prefs(n_agents, m, cfg.S_p);
    RewardTable table = res.model.table();
    const ValueSystemBank no_clusters(1, m);
    std::vector<Weights> basis;
    for (int i = 0; i < m; ++i) {
        Weights e(static_cast<std::size_t>(m), 0.0);
        e[static_cast<std::size_t>(i)] = 1.0;
        basis.push_back(e);
    }
    const int H = env.config().horizon;
    EpisodeTracker ep;
    ep.state = env.initial_state();
    std::uint64_t next_query = 0;

    for (long t = 0; t < cfg.eql.T; ++t) {
        if (t > 0 && cfg.K > 0 && t % cfg.K == 0) {
            QuerySet queries;
            const auto agents = sample_without_replacement(rng, static_cast<std::size_t>(n_agents),
                                                           static_cast<std::size_t>(std::max(cfg.N_a, 0)));
            const std::vector<EpisodeInfo> episodes(ep.recent.begin(), ep.recent.end());
            const auto selection = select_query_pairs(episodes, static_cast<std::size_t>(cfg.N_s), basis, table,
                                                      cfg.qpa_candidates, rng);
            for (std::size_t j : agents)
                for (const auto& [a, b] : selection.pairs)
                    queries.items.push_back({next_query++, static_cast<int>(j), a, b, QueryStatus::Pending});
            res.queries_asked += queries.items.size();
            for (auto& r : answers.collect(queries)) prefs.add(std::move(r));
            if (!prefs.empty()) {
                std::vector<const PreferenceRecord*> pool;
                for (int j = 0; j < n_agents; ++j)
                    for (const auto& r : prefs.agent_records(j)) pool.push_back(&r);
                for (int step = 0; step < cfg.m_r; ++step) {
                    std::vector<const PreferenceRecord*> rows;
                    for (std::size_t k = 0; k < static_cast<std::size_t>(cfg.b); ++k)
                        rows.push_back(pool[uniform_index(rng, pool.size())]);
                    ModelGradients g;
                    loss_gradients(LossBatch::pooled(std::move(rows)), res.model, no_clusters, {},
                                   LossSelector::grounding(m), g);
                    adam.step(res.model.params(), g.theta);
                }
                table = res.model.table();
                relabel_experience(res.learner.buffer(), table, env.num_actions());
            }
        }
        if (ep.steps == 0) ep.weight = random_simplex_weight(rng, m);
        const int s = ep.state;
        const int a = t < cfg.T_i ? static_cast<int>(uniform_index(rng, static_cast<std::size_t>(env.num_actions())))
                                  : res.learner.act(s, ep.weight, rng);
        const int ns = env.next_state(s, a);
        const bool done = env.terminal(ns);
        res.learner.observe(s, a, table.row(env.sa_index(s, a)), ns, done, ep.weight, ep.id);
        ep.trajectory.steps.push_back({s, a});
        res.learner.step(rng);
        ep.state = ns;
        ++ep.steps;
        if (done || ep.steps >= H) ep.finish(env, cfg.recent_episodes);
    }

    // One candidate per agent, assigned by the closest relation on the static data.
    res.candidates = equally_spaced_weights(m, n_agents);
    Assignment beta(static_cast<std::size_t>(n_agents), 0);
    for (int j = 0; j < n_agents; ++j) {
        std::vector<const PreferenceRecord*> rows;
        for (const auto& r : data.agent_records(j)) rows.push_back(&r);
        beta[static_cast<std::size_t>(j)] = static_cast<int>(argmin(weight_discordances(res.candidates, table, rows)));
    }
    std::map<int, int> remap;
    for (int b : live_clusters(beta)) {
        const int idx = static_cast<int>(remap.size());
        remap[b] = idx;
        res.svs.weights.push_back(res.candidates[static_cast<std::size_t>(b)]);
    }
    for (int& b : beta) b = remap[b];
    res.svs.beta = std::move(beta);
    res.svs.grounding = table;
    return res;
}

}  // namespace svsl
