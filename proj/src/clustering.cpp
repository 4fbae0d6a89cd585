#include "svsl/clustering.hpp"

#include "svsl/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace svsl {

nlohmann::json svsl_config_to_json(const SvslConfig& c) {
    return {{"L_max", c.L_max},
            {"merge_threshold", c.merge_threshold},
            {"lambda", c.lambda},
            {"alpha_lambda", c.alpha_lambda},
            {"gamma_lambda", c.gamma_lambda},
            {"r_lambda", c.r_lambda},
            {"alpha_theta", c.alpha_theta},
            {"alpha_omega", c.alpha_omega},
            {"weight_decay", c.weight_decay},
            {"E_r", c.E_r},
            {"m_r", c.m_r},
            {"b_ep", c.b_ep},
            {"b_mp", c.b_mp},
            {"N", c.N},
            {"I", c.I},
            {"mrt", c.mrt},
            {"p_m", c.p_m},
            {"s_m", c.s_m},
            {"A_ref", c.A_ref},
            {"max_iterations", c.max_iterations},
            {"reward_mode", to_string(c.model.mode)},
            {"onehot", to_string(c.model.onehot)},
            {"reward_hidden", c.model.hidden},
            {"reward_clamp", c.model.clamp}};
}

SvslConfig svsl_config_from_json(const nlohmann::json& j, SvslConfig c) {
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("L_max", c.L_max);
    get("merge_threshold", c.merge_threshold);
    get("lambda", c.lambda);
    get("alpha_lambda", c.alpha_lambda);
    get("gamma_lambda", c.gamma_lambda);
    get("r_lambda", c.r_lambda);
    get("alpha_theta", c.alpha_theta);
    get("alpha_omega", c.alpha_omega);
    get("weight_decay", c.weight_decay);
    get("E_r", c.E_r);
    get("m_r", c.m_r);
    get("b_ep", c.b_ep);
    get("b_mp", c.b_mp);
    get("N", c.N);
    get("I", c.I);
    get("mrt", c.mrt);
    get("p_m", c.p_m);
    get("s_m", c.s_m);
    get("A_ref", c.A_ref);
    get("max_iterations", c.max_iterations);
    if (j.contains("reward_mode")) c.model.mode = reward_mode_from_string(j.at("reward_mode").get<std::string>());
    if (j.contains("onehot")) c.model.onehot = onehot_from_string(j.at("onehot").get<std::string>());
    get("reward_hidden", c.model.hidden);
    get("reward_clamp", c.model.clamp);
    return c;
}

// ---------------------------------------------------------------------------

std::vector<Weights> Solution::live_weights() const {
    std::vector<Weights> out;
    for (int l : live_clusters(beta)) out.push_back(bank.weights(l));
    return out;
}

namespace {

nlohmann::json scores_json(const SocietyScores& s) {
    return {{"coherence", s.coherence},
            {"grounding_coherence", s.grounding_coherence},
            {"representativeness", s.representativeness},
            {"conciseness", s.conciseness},
            {"single_cluster", s.single_cluster},
            {"gamma", s.gamma},
            {"num_clusters", s.num_clusters}};
}

SocietyScores scores_from_json(const nlohmann::json& j) {
    SocietyScores s;
    s.coherence = j.at("coherence").get<std::vector<double>>();
    s.grounding_coherence = j.at("grounding_coherence").get<double>();
    s.representativeness = j.at("representativeness").get<double>();
    s.conciseness = j.at("conciseness").get<double>();
    s.single_cluster = j.at("single_cluster").get<bool>();
    s.gamma = j.at("gamma").get<double>();
    s.num_clusters = j.at("num_clusters").get<int>();
    return s;
}

}  // namespace

nlohmann::json Solution::to_json() const {
    const auto& mc = model.config();
    return {{"version", 1},
            {"beta", beta},
            {"reward_model",
             {{"mode", to_string(mc.mode)},
              {"onehot", to_string(mc.onehot)},
              {"hidden", mc.hidden},
              {"clamp", mc.clamp},
              {"num_state_actions", model.num_state_actions()},
              {"num_values", model.num_values()},
              {"theta", model.params()}}},
            {"value_systems", {{"L_max", bank.max_clusters()}, {"omega", bank.omega()}}},
            {"lagrange", {{"lambda", lagrange.multipliers}, {"chr_max", lagrange.max_coherence}}},
            {"adam_theta", adam_theta.to_json()},
            {"adam_omega", adam_omega.to_json()},
            {"keep_assignment", keep_assignment},
            {"scores", scores_json(scores)}};
}

Solution Solution::from_json(const TabularMomdp& env, const nlohmann::json& j) {
    if (j.at("version").get<int>() != 1) throw Error("unsupported solution checkpoint version");
    Solution s;
    s.beta = j.at("beta").get<Assignment>();
    const auto& rm = j.at("reward_model");
    RewardModelConfig mc;
    mc.mode = reward_mode_from_string(rm.at("mode").get<std::string>());
    mc.onehot = onehot_from_string(rm.at("onehot").get<std::string>());
    mc.hidden = rm.at("hidden").get<std::vector<int>>();
    mc.clamp = rm.at("clamp").get<double>();
    s.model = RewardVectorModel(env, mc);
    auto theta = rm.at("theta").get<std::vector<double>>();
    if (theta.size() != s.model.params().size()) throw Error("checkpoint theta has the wrong shape");
    s.model.params() = std::move(theta);
    const auto& vs = j.at("value_systems");
    s.bank = ValueSystemBank(vs.at("L_max").get<int>(), env.num_values());
    s.bank.omega() = vs.at("omega").get<std::vector<double>>();
    s.lagrange.multipliers = j.at("lagrange").at("lambda").get<std::vector<double>>();
    s.lagrange.max_coherence = j.at("lagrange").at("chr_max").get<std::vector<double>>();
    s.adam_theta = Adam::from_json(j.at("adam_theta"));
    s.adam_omega = Adam::from_json(j.at("adam_omega"));
    s.keep_assignment = j.at("keep_assignment").get<bool>();
    s.scores = scores_from_json(j.at("scores"));
    return s;
}

Solution random_solution(const TabularMomdp& env, int num_agents, const SvslConfig& cfg, Rng& rng) {
    Solution s;
    s.beta.resize(static_cast<std::size_t>(num_agents));
    for (int& b : s.beta) b = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(cfg.L_max)));
    s.model = RewardVectorModel(env, cfg.model);
    s.model.initialize(rng);
    s.bank = ValueSystemBank(cfg.L_max, env.num_values());
    s.bank.initialize(rng);
    s.lagrange = LagrangeState::initial(env.num_values(), cfg.lambda);
    s.adam_theta = Adam(s.model.params().size(), AdamConfig{cfg.alpha_theta, 0.9, 0.999, 1e-8, cfg.weight_decay});
    s.adam_omega = Adam(s.bank.omega().size(), AdamConfig{cfg.alpha_omega, 0.9, 0.999, 1e-8, cfg.weight_decay});
    s.keep_assignment = true;
    return s;
}

void score_solution(Solution& sol, const Dataset& data) {
    sol.scores = score_society(sol.beta, sol.bank.all_weights(), sol.model.table(), data);
}

// ---------------------------------------------------------------------------
// EM
// ---------------------------------------------------------------------------

std::vector<double> cluster_discordances(const ValueSystemBank& bank, const RewardTable& grounding,
                                         const std::vector<const PreferenceRecord*>& rows) {
    const int L = bank.max_clusters();
    std::vector<double> out(static_cast<std::size_t>(L), 0.0);
    if (rows.empty()) return out;
    const auto W = bank.all_weights();
    const auto m = static_cast<std::size_t>(grounding.num_values);
    std::vector<double> ga(m), gb(m);
    std::vector<int> miss(static_cast<std::size_t>(L), 0);
    for (const PreferenceRecord* r : rows) {
        discounted_alignment(*r->first, grounding, ga);
        discounted_alignment(*r->second, grounding, gb);
        for (int l = 0; l < L; ++l)
            if (qualitative_label(dot(W[l], ga), dot(W[l], gb)) != r->value_system) ++miss[l];
    }
    for (int l = 0; l < L; ++l) out[l] = static_cast<double>(miss[l]) / static_cast<double>(rows.size());
    return out;
}

Assignment e_step(const ValueSystemBank& bank, const RewardTable& grounding, const AgentRows& rows) {
    Assignment beta(rows.rows.size(), 0);
    for (std::size_t j = 0; j < rows.rows.size(); ++j)
        beta[j] = static_cast<int>(argmin(cluster_discordances(bank, grounding, rows.rows[j])));
    return beta;
}

int merge_clusters(Assignment& beta, ValueSystemBank& bank, double threshold, Rng& rng) {
    int merges = 0;
    bool changed = true;
    while (changed) {
        changed = false;
        const auto live = live_clusters(beta);
        for (std::size_t c = 0; c < live.size() && !changed; ++c) {
            for (std::size_t d = c + 1; d < live.size() && !changed; ++d) {
                const Weights wc = bank.weights(live[c]);
                const Weights wd = bank.weights(live[d]);
                double diff = 0.0;
                for (std::size_t i = 0; i < wc.size(); ++i) diff = std::max(diff, std::abs(wc[i] - wd[i]));
                if (diff >= threshold) continue;
                const auto nc = std::count(beta.begin(), beta.end(), live[c]);
                const auto nd = std::count(beta.begin(), beta.end(), live[d]);
                const int keep = nc >= nd ? live[c] : live[d];
                const int gone = keep == live[c] ? live[d] : live[c];
                for (int& b : beta)
                    if (b == gone) b = keep;
                bank.randomize_row(gone, rng);
                ++merges;
                changed = true;
            }
        }
    }
    return merges;
}

void update_multipliers(LagrangeState& state, std::span<const double> value_losses,
                        std::span<const double> batch_coherence, double gamma_lambda, double alpha_lambda) {
    const std::size_t m = state.multipliers.size();
    std::vector<double> gap(m);
    for (std::size_t i = 0; i < m; ++i) gap[i] = state.max_coherence[i] - batch_coherence[i];
    const std::size_t star = argmax(gap);
    for (std::size_t i = 0; i < m; ++i) {
        double lam = (1.0 - gamma_lambda) * state.multipliers[i];
        if (i == star && gap[i] > 0.0) lam += alpha_lambda * value_losses[i];
        state.multipliers[i] = std::max(0.0, lam);
    }
}

double update_max_coherence(double chr_max, double chr_batch, double r_lambda) {
    return (1.0 - r_lambda) * std::max(chr_batch, chr_max) + r_lambda * chr_max;
}

namespace {

std::vector<double> batch_coherences(const LossBatch& batch, const RewardTable& grounding) {
    const int m = grounding.num_values;
    std::vector<double> chr(static_cast<std::size_t>(m), 0.0);
    int groups = 0;
    for (const auto& g : batch.groups) {
        if (g.rows.empty()) continue;
        ++groups;
        for (int i = 0; i < m; ++i) {
            int miss = 0;
            for (const PreferenceRecord* r : g.rows)
                if (grounding_label(*r, grounding, i) != r->values[static_cast<std::size_t>(i)]) ++miss;
            chr[i] += static_cast<double>(miss) / static_cast<double>(g.rows.size());
        }
    }
    for (double& c : chr) c = groups ? 1.0 - c / groups : 0.0;
    return chr;
}

}  // namespace

LossTerms m_step(Solution& sol, const MStepSource& source, const SvslConfig& cfg, Rng& rng) {
    LossTerms last;
    for (int step = 0; step < cfg.m_r; ++step) {
        LossBatch batch;
        for (std::size_t j = 0; j < source.rows.rows.size(); ++j) {
            const auto& cand = source.rows.rows[j];
            LossBatch::Group g;
            g.agent = static_cast<int>(j);
            if (cfg.b_mp <= 0 || static_cast<std::size_t>(cfg.b_mp) >= cand.size()) {
                g.rows = cand;
            } else {
                for (std::size_t k : sample_without_replacement(rng, cand.size(), static_cast<std::size_t>(cfg.b_mp)))
                    g.rows.push_back(cand[k]);
            }
            batch.groups.push_back(std::move(g));
        }
        if (batch.num_rows() == 0) return last;
        ModelGradients grads;
        const auto selector = LossSelector::lagrangian(sol.lagrange.multipliers);
        last = loss_gradients(batch, sol.model, sol.bank, sol.beta, selector, grads);
        const auto chr = batch_coherences(batch, sol.model.table());
        sol.adam_theta.step(sol.model.params(), grads.theta);
        sol.adam_omega.step(sol.bank.omega(), grads.omega);
        update_multipliers(sol.lagrange, last.value, chr, cfg.gamma_lambda, cfg.alpha_lambda);
        for (std::size_t i = 0; i < chr.size(); ++i)
            sol.lagrange.max_coherence[i] = update_max_coherence(sol.lagrange.max_coherence[i], chr[i], cfg.r_lambda);
    }
    return last;
}

void em_cycle(Solution& sol, const Dataset& data, const Dataset* buffer, const SvslConfig& cfg, Rng& rng) {
    const int n = data.num_agents();
    auto all_rows = [&](int j) {
        std::vector<const PreferenceRecord*> rows;
        for (const auto& r : data.agent_records(j)) rows.push_back(&r);
        return rows;
    };
    for (int epoch = 0; epoch < cfg.E_r; ++epoch) {
        if (!sol.keep_assignment) {
            AgentRows rows;
            for (int j = 0; j < n; ++j) {
                auto r = all_rows(j);
                if (buffer) {
                    const auto extra = buffer->agent_records(j);
                    for (std::size_t k :
                         sample_without_replacement(rng, extra.size(), static_cast<std::size_t>(std::max(cfg.b_ep, 0))))
                        r.push_back(&extra[k]);
                }
                rows.rows.push_back(std::move(r));
            }
            const Assignment fresh = e_step(sol.bank, sol.model.table(), rows);
            // Agents without any rows keep their cluster.
            for (int j = 0; j < n; ++j)
                if (!rows.rows[static_cast<std::size_t>(j)].empty()) sol.beta[static_cast<std::size_t>(j)] = fresh[static_cast<std::size_t>(j)];
        }
        sol.keep_assignment = false;
        merge_clusters(sol.beta, sol.bank, cfg.merge_threshold, rng);
        MStepSource src;
        for (int j = 0; j < n; ++j) {
            auto r = all_rows(j);
            if (buffer)
                for (const auto& rec : buffer->agent_records(j)) r.push_back(&rec);
            src.rows.rows.push_back(std::move(r));
        }
        m_step(sol, src, cfg, rng);
    }
}

// ---------------------------------------------------------------------------
// Evolutionary loop
// ---------------------------------------------------------------------------

bool solution_dominates(const SocietyScores& a, const SocietyScores& b) {
    const double av[4] = {a.grounding_coherence, a.representativeness, a.conciseness, -static_cast<double>(a.num_clusters)};
    const double bv[4] = {b.grounding_coherence, b.representativeness, b.conciseness, -static_cast<double>(b.num_clusters)};
    return dominates(av, bv);
}

std::vector<std::size_t> rank_order(const std::vector<Solution>& memory) {
    std::vector<std::size_t> idx(memory.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto& sa = memory[a].scores;
        const auto& sb = memory[b].scores;
        if (sa.gamma != sb.gamma) return sa.gamma < sb.gamma;
        return sa.grounding_coherence > sb.grounding_coherence;
    });
    return idx;
}

std::vector<double> selection_probabilities(const std::vector<Solution>& memory) {
    const auto order = rank_order(memory);
    const double n = static_cast<double>(memory.size());
    const double total = n * (n + 1.0) / 2.0;
    std::vector<double> p(memory.size());
    for (std::size_t k = 0; k < order.size(); ++k) p[order[k]] = (n - static_cast<double>(k)) / total;
    return p;
}

std::size_t select_solution(const std::vector<Solution>& memory, Rng& rng) {
    if (memory.empty()) throw Error("select_solution: empty memory");
    const auto p = selection_probabilities(memory);
    double u = uniform01(rng);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (u < p[i]) return i;
        u -= p[i];
    }
    return rank_order(memory).front();
}

void mutate_solution(Solution& sol, int L_max, double p_m, double s_m, Rng& rng) {
    const auto live = live_clusters(sol.beta);
    const bool add = uniform01(rng) < 0.5;
    if (add) {
        if (static_cast<int>(live.size()) < L_max) {
            int fresh = 0;
            while (std::find(live.begin(), live.end(), fresh) != live.end()) ++fresh;
            sol.bank.randomize_row(fresh, rng);
            for (int& b : sol.beta)
                if (uniform01(rng) < p_m) b = fresh;
        }
    } else if (live.size() > 1) {
        const int victim = live[uniform_index(rng, live.size())];
        std::vector<int> rest;
        for (int l : live)
            if (l != victim) rest.push_back(l);
        for (int& b : sol.beta)
            if (b == victim) b = rest[uniform_index(rng, rest.size())];
    }
    const double s_theta = s_m * (1.0 - sol.scores.grounding_coherence);
    const double s_omega = s_m * (1.0 - sol.scores.representativeness);
    if (s_theta > 0.0)
        for (double& x : sol.model.params()) x += s_theta * standard_normal(rng);
    if (s_omega > 0.0)
        for (double& x : sol.bank.omega()) x += s_omega * standard_normal(rng);
    sol.keep_assignment = true;
}

std::size_t best_member(const std::vector<Solution>& memory) {
    if (memory.empty()) throw Error("best_member: empty memory");
    return rank_order(memory).front();
}

namespace {

std::size_t best_coherence_member(const std::vector<Solution>& memory) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < memory.size(); ++i)
        if (memory[i].scores.grounding_coherence > memory[best].scores.grounding_coherence) best = i;
    return best;
}

std::size_t best_gamma_member(const std::vector<Solution>& memory) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < memory.size(); ++i)
        if (memory[i].scores.gamma < memory[best].scores.gamma) best = i;
    return best;
}

}  // namespace

std::size_t worst_member(const std::vector<Solution>& memory) {
    if (memory.size() < 2) throw Error("eliminate_worst: nothing to evict");
    // With two members both may be protected; the best-Gamma one wins then.
    const std::size_t keep_gamma = best_gamma_member(memory);
    const std::size_t keep_coh = memory.size() == 2 ? keep_gamma : best_coherence_member(memory);
    using Key = std::tuple<int, int, int, double, double>;
    std::size_t worst = memory.size();
    Key worst_key{};
    for (std::size_t i = 0; i < memory.size(); ++i) {
        if (i == keep_coh || i == keep_gamma) continue;
        int identical = 0;
        int dominators = 0;
        for (std::size_t k = 0; k < memory.size(); ++k) {
            if (k == i) continue;
            if (memory[k].beta == memory[i].beta) ++identical;
            if (solution_dominates(memory[k].scores, memory[i].scores)) ++dominators;
        }
        const auto& s = memory[i].scores;
        const Key key{s.num_clusters, identical, dominators, -s.grounding_coherence, s.gamma};
        if (worst == memory.size() || key > worst_key) {
            worst = i;
            worst_key = key;
        }
    }
    if (worst == memory.size()) throw Error("eliminate_worst: every member is protected");
    return worst;
}

void eliminate_worst(std::vector<Solution>& memory) {
    memory.erase(memory.begin() + static_cast<std::ptrdiff_t>(worst_member(memory)));
}

void insert_in_memory(std::vector<Solution>& memory, Solution candidate, std::size_t capacity) {
    for (auto& member : memory) {
        if (solution_dominates(candidate.scores, member.scores)) {
            member = std::move(candidate);
            return;
        }
    }
    memory.push_back(std::move(candidate));
    while (memory.size() > capacity && memory.size() > 1) eliminate_worst(memory);
}

SvslResult run_svsl(const TabularMomdp& env, const Dataset& data, const SvslConfig& cfg, Rng& rng) {
    if (data.empty()) throw Error("run_svsl: empty dataset");
    const bool target_mode = cfg.A_ref >= 0.0;
    auto reached = [&](const Solution& s) {
        return s.scores.min_coherence() >= cfg.A_ref && s.scores.representativeness >= cfg.A_ref;
    };
    std::vector<Solution> memory;
    for (int k = 0; k < std::max(cfg.N, 1); ++k) {
        Solution s = random_solution(env, data.num_agents(), cfg, rng);
        score_solution(s, data);
        if (target_mode && reached(s)) return {std::move(s), 0};
        memory.push_back(std::move(s));
    }
    const int iterations = target_mode ? cfg.max_iterations : cfg.I;
    for (int it = 0; it < iterations; ++it) {
        Solution cand = memory[select_solution(memory, rng)];
        const double rate = cfg.mrt * (1.0 - static_cast<double>(it) / static_cast<double>(iterations));
        if (uniform01(rng) < rate) mutate_solution(cand, cfg.L_max, cfg.p_m, cfg.s_m, rng);
        em_cycle(cand, data, nullptr, cfg, rng);
        score_solution(cand, data);
        log::info("svsl it " + std::to_string(it) + " gamma " + std::to_string(cand.scores.gamma) + " min_chr " +
                  std::to_string(cand.scores.min_coherence()) + " repr " +
                  std::to_string(cand.scores.representativeness) + " L " + std::to_string(cand.scores.num_clusters));
        if (target_mode && reached(cand)) return {std::move(cand), it + 1};
        insert_in_memory(memory, std::move(cand), static_cast<std::size_t>(std::max(cfg.N, 1)));
    }
    Solution best = memory[best_member(memory)];
    if (target_mode)
        throw SvslNotConverged("SVSL did not reach A_ref within " + std::to_string(iterations) + " iterations",
                               std::move(best));
    return {std::move(best), iterations};
}

}  // namespace svsl
