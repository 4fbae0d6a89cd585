#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <vector>

#include <json.hpp>

#include "svsl/clustering.hpp"
#include "svsl/eql.hpp"
#include "svsl/society.hpp"

namespace svsl {

/// Agent assignment plus one weight vector per cluster index, over a shared grounding.
struct SocialValueSystem {
    Assignment beta;
    std::vector<Weights> weights;
    RewardTable grounding;

    std::vector<Weights> live_weights() const;
};

SocialValueSystem to_social_value_system(const Solution& sol);

/// Per-agent discordance of each weight vector on `rows`.
std::vector<double> weight_discordances(const std::vector<Weights>& weights, const RewardTable& grounding,
                                        const std::vector<const PreferenceRecord*>& rows);

// ---------------------------------------------------------------------------
// Preference buffer and queries
// ---------------------------------------------------------------------------

/// Bounded per-agent record store. Over capacity, the oldest record of the
/// agent holding the most records goes first (lowest agent index on ties).
class PreferenceBuffer {
public:
    PreferenceBuffer() = default;
    PreferenceBuffer(int num_agents, int num_values, std::size_t capacity);

    void add(PreferenceRecord r);
    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return size_ == 0; }
    std::size_t agent_size(int agent) const { return per_agent_.at(static_cast<std::size_t>(agent)).size(); }
    const std::deque<PreferenceRecord>& agent_records(int agent) const {
        return per_agent_.at(static_cast<std::size_t>(agent));
    }

    Dataset to_dataset() const;

private:
    int num_values_ = 0;
    std::size_t capacity_ = 0;
    std::size_t size_ = 0;
    std::vector<std::deque<PreferenceRecord>> per_agent_;
};

enum class QueryStatus { Pending, Answered, Dropped };

struct QueryItem {
    std::uint64_t id = 0;
    int agent = 0;
    TrajectoryRef first;
    TrajectoryRef second;
    QueryStatus status = QueryStatus::Pending;
};

/// Queries of one collection round; ids are unique within a run.
struct QuerySet {
    std::vector<QueryItem> items;
    std::size_t count(QueryStatus s) const;
};

/// Answers a round of queries. Sources may omit queries they could not answer.
class AnswerSource {
public:
    virtual ~AnswerSource() = default;
    virtual std::vector<PreferenceRecord> collect(QuerySet& queries) = 0;
};

/// Ground-truth labels from each agent's true weight.
class OracleAnswerSource : public AnswerSource {
public:
    OracleAnswerSource(std::vector<Weights> agent_weights, RewardTable ground_truth);
    std::vector<PreferenceRecord> collect(QuerySet& queries) override;
    PreferenceRecord answer(const QueryItem& q) const;

private:
    std::vector<Weights> weights_;
    RewardTable ground_truth_;
};

/// A finished episode kept for query selection.
struct EpisodeInfo {
    TrajectoryRef trajectory;
    int cluster = -1;
};

struct QuerySelection {
    std::vector<std::pair<TrajectoryRef, TrajectoryRef>> pairs;
    /// Fewer than N_s pairs, or only identical trajectories were available.
    bool degenerate = false;
};

/// Candidate pairs come from distinct recent episodes, half across episodes of
/// different clusters and half uniform. The N_s candidates whose BT probability
/// under some scoring weight is nearest 0.5 are kept.
QuerySelection select_query_pairs(const std::vector<EpisodeInfo>& episodes, std::size_t N_s,
                                  const std::vector<Weights>& scoring_weights, const RewardTable& grounding,
                                  std::size_t candidates_per_query, Rng& rng);

// ---------------------------------------------------------------------------
// SVSL-P
// ---------------------------------------------------------------------------

struct SvslpConfig {
    SvslConfig svsl;
    EqlConfig eql;
    long K = 500;
    int N_s = 300;
    int N_a = 11;
    std::size_t S_p = 10000;
    std::size_t recent_episodes = 100;
    std::size_t qpa_candidates = 4;
    /// Consecutive non-finite EM events tolerated before the run aborts.
    int max_nonfinite_events = 3;
};

/// Firefighters defaults.
SvslpConfig ff_svslp_defaults();

nlohmann::json svslp_config_to_json(const SvslpConfig& c);
SvslpConfig svslp_config_from_json(const nlohmann::json& j, SvslpConfig base = ff_svslp_defaults());

struct RunStatus {
    long t = 0;
    long T = 0;
    int num_clusters = 0;
    std::vector<Weights> live_weights;
    std::size_t buffer_records = 0;
    std::size_t queries_asked = 0;
    std::size_t answers_received = 0;
    nlohmann::json metrics;  // latest snapshot, null before the first event
};

struct RunCallbacks {
    std::function<void(const RunStatus&)> on_status;
};

struct SvslpResult {
    Solution solution;
    EqlLearner learner;
    nlohmann::json timeline = nlohmann::json::array();
    std::size_t events = 0;
    std::size_t queries_asked = 0;
    std::size_t answers_received = 0;
};

class SvslpAborted : public Error {
public:
    SvslpAborted(const std::string& what, Solution last_good) : Error(what), solution(std::move(last_good)) {}
    Solution solution;
};

/// Warm start: SVSL in A_ref mode on the static dataset.
Solution initialize_from_static(const TabularMomdp& env, const Dataset& data, const SvslConfig& cfg, Rng& rng);

/// EM on DS merged with the preference buffer.
void vs_update(Solution& sol, const PreferenceBuffer& buffer, const Dataset& data, const SvslConfig& cfg, Rng& rng);

/// Replaces every stored reward by the current model's.
void relabel_experience(ExperienceBuffer& buffer, const RewardTable& grounding, int num_actions);

SvslpResult run_svslp(const TabularMomdp& env, const Dataset& data, AnswerSource& answers, const SvslpConfig& cfg,
                      Rng& rng, const RunCallbacks& callbacks = {});
/// Same, continuing from a given warm-start solution.
SvslpResult run_svslp_from(const TabularMomdp& env, const Dataset& data, AnswerSource& answers,
                           const SvslpConfig& cfg, Solution warm, Rng& rng, const RunCallbacks& callbacks = {});

// ---------------------------------------------------------------------------
// PbMORL baseline
// ---------------------------------------------------------------------------

struct PbmorlConfig {
    EqlConfig eql;
    RewardModelConfig model;
    double alpha_theta = 3e-4;
    double weight_decay = 1e-4;
    int m_r = 3;
    long T_i = 10000;
    int b = 256;
    long K = 500;
    int N_s = 300;
    int N_a = 11;
    std::size_t S_p = 100000;
    std::size_t recent_episodes = 100;
    std::size_t qpa_candidates = 4;
};

PbmorlConfig ff_pbmorl_defaults();
nlohmann::json pbmorl_config_to_json(const PbmorlConfig& c);
PbmorlConfig pbmorl_config_from_json(const nlohmann::json& j, PbmorlConfig base = ff_pbmorl_defaults());

struct PbmorlResult {
    SocialValueSystem svs;
    RewardVectorModel model;
    EqlLearner learner;
    std::vector<Weights> candidates;
    std::size_t queries_asked = 0;
};

/// Reward learning from pooled per-value labels only; afterwards one candidate
/// weight per agent (equally spaced), agents assigned by an E-step on `data`,
/// empty candidates dropped.
PbmorlResult run_pbmorl_baseline(const TabularMomdp& env, const Dataset& data, AnswerSource& answers,
                                 const PbmorlConfig& cfg, Rng& rng);

}  // namespace svsl
