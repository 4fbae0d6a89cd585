#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "svsl/reward_models.hpp"
#include "svsl/value_metrics.hpp"

namespace svsl {

struct SvslConfig {
    int L_max = 10;
    double merge_threshold = 0.05;
    double lambda = 1.0;
    double alpha_lambda = 0.05;
    double gamma_lambda = 5e-5;
    double r_lambda = 0.99;
    double alpha_theta = 3e-4;
    double alpha_omega = 5e-3;
    double weight_decay = 1e-4;
    int E_r = 2;
    int m_r = 3;
    /// Extra buffer pairs per agent in each E-step.
    int b_ep = 50;
    /// Rows per agent in each M-step batch; 0 uses every row.
    int b_mp = 50;
    int N = 5;
    int I = 100;
    double mrt = 0.25;
    double p_m = 0.1;
    double s_m = 0.1;
    /// Stop once min coherence and representativeness reach A_ref (disabled when < 0).
    double A_ref = -1.0;
    /// Iteration cap in A_ref mode.
    int max_iterations = 2000;
    RewardModelConfig model;
};

nlohmann::json svsl_config_to_json(const SvslConfig& c);
SvslConfig svsl_config_from_json(const nlohmann::json& j, SvslConfig base = {});

/// (beta, theta, omega, lambda) plus optimizer state and cached scores.
struct Solution {
    Assignment beta;
    RewardVectorModel model;
    ValueSystemBank bank;
    LagrangeState lagrange;
    Adam adam_theta;
    Adam adam_omega;
    SocietyScores scores;
    /// Set on fresh or mutated solutions: the next EM cycle keeps beta for its first epoch.
    bool keep_assignment = true;

    std::vector<Weights> live_weights() const;
    nlohmann::json to_json() const;
    static Solution from_json(const TabularMomdp& env, const nlohmann::json& j);
};

Solution random_solution(const TabularMomdp& env, int num_agents, const SvslConfig& cfg, Rng& rng);

void score_solution(Solution& sol, const Dataset& data);

/// Per-agent record views: D_j plus optional extra records O_j.
struct AgentRows {
    std::vector<std::vector<const PreferenceRecord*>> rows;
};

/// beta(j) = argmin_l d(cluster l, agent j) over all L_max clusters, lowest index on ties.
Assignment e_step(const ValueSystemBank& bank, const RewardTable& grounding, const AgentRows& rows);

/// Per-cluster discordances of one agent (helper exposed for tests).
std::vector<double> cluster_discordances(const ValueSystemBank& bank, const RewardTable& grounding,
                                         const std::vector<const PreferenceRecord*>& rows);

/// Merges live clusters whose weights differ by less than `threshold` in every
/// component into the more populated one (lower index on ties) and
/// re-randomizes the vacated rows. Returns the number of merges.
int merge_clusters(Assignment& beta, ValueSystemBank& bank, double threshold, Rng& rng);

/// lambda_i* grows by alpha (L_V)_i* when i* = argmax(chr* - chr_batch) has a
/// positive gap; every other multiplier only decays.
void update_multipliers(LagrangeState& state, std::span<const double> value_losses,
                        std::span<const double> batch_coherence, double gamma_lambda, double alpha_lambda);

double update_max_coherence(double chr_max, double chr_batch, double r_lambda);

/// One M-step: m_r descent steps of the Lagrangian on per-agent batches, with
/// multiplier and running-maximum updates after each.
struct MStepSource {
    /// Candidate rows per agent; each step samples b_mp of them (all when b_mp == 0).
    AgentRows rows;
};

LossTerms m_step(Solution& sol, const MStepSource& source, const SvslConfig& cfg, Rng& rng);

/// E_r epochs of (E-step, merge, M-step). `buffer` adds b_ep sampled records per
/// agent to each E-step and joins the M-step candidate rows.
void em_cycle(Solution& sol, const Dataset& data, const Dataset* buffer, const SvslConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Evolutionary loop
// ---------------------------------------------------------------------------

/// (grounding coherence up, representativeness up, conciseness up, clusters down).
bool solution_dominates(const SocietyScores& a, const SocietyScores& b);

/// Indices ordered best first: Gamma ascending, then grounding coherence descending.
std::vector<std::size_t> rank_order(const std::vector<Solution>& memory);
/// Rank-proportional probabilities, aligned with `memory`.
std::vector<double> selection_probabilities(const std::vector<Solution>& memory);
std::size_t select_solution(const std::vector<Solution>& memory, Rng& rng);

void mutate_solution(Solution& sol, int L_max, double p_m, double s_m, Rng& rng);

/// Replaces the first member the candidate dominates, else appends; evicts once above capacity.
void insert_in_memory(std::vector<Solution>& memory, Solution candidate, std::size_t capacity);
/// Index eliminate_worst would remove.
std::size_t worst_member(const std::vector<Solution>& memory);
void eliminate_worst(std::vector<Solution>& memory);

std::size_t best_member(const std::vector<Solution>& memory);

class SvslNotConverged : public Error {
public:
    SvslNotConverged(const std::string& what, Solution best_so_far)
        : Error(what), best(std::move(best_so_far)) {}
    Solution best;
};

struct SvslResult {
    Solution best;
    int iterations = 0;
};

/// Evolutionary search over EM solutions. With A_ref >= 0 it stops at the first
/// candidate whose min coherence and representativeness reach A_ref, and throws
/// SvslNotConverged after max_iterations.
SvslResult run_svsl(const TabularMomdp& env, const Dataset& data, const SvslConfig& cfg, Rng& rng);

}  // namespace svsl
