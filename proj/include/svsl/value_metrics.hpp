#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "svsl/environment.hpp"

namespace svsl {

/// Qualitative pairwise preference: 1 (first preferred), 0 (second preferred), 0.5 (indifferent).
enum class Preference : std::uint8_t { Second = 0, Indifferent = 1, First = 2 };

double to_value(Preference p);
/// Accepts exactly 0, 0.5 or 1.
Preference preference_from_value(double y);
Preference flip(Preference p);

inline constexpr double kIndifferenceTolerance = 1e-6;

/// exp(ga) / (exp(ga) + exp(gb)) in overflow-safe form.
double bt_probability(double ga, double gb);

Preference qualitative_label(double a, double b, double tol = kIndifferenceTolerance);

/// Fraction of positions where the two label sequences differ. Throws on empty input.
double discordance(std::span<const Preference> a, std::span<const Preference> b);

struct PreferenceRecord {
    TrajectoryRef first;
    TrajectoryRef second;
    Preference value_system = Preference::Indifferent;
    std::vector<Preference> values;
    int agent = 0;
};

/// Per-agent preference records DS_j; agents are 0..num_agents-1.
class Dataset {
public:
    Dataset() = default;
    Dataset(int num_agents, int num_values);

    void add(PreferenceRecord record);
    void append(const Dataset& other);

    int num_agents() const { return static_cast<int>(per_agent_.size()); }
    int num_values() const { return num_values_; }
    std::size_t size() const;
    bool empty() const { return size() == 0; }
    std::span<const PreferenceRecord> agent_records(int agent) const;

    /// D: the distinct ordered trajectory pairs over all agents (first occurrence order).
    std::vector<std::pair<TrajectoryRef, TrajectoryRef>> pairs() const;

private:
    int num_values_ = 0;
    std::vector<std::vector<PreferenceRecord>> per_agent_;
};

/// Agent -> cluster index in [0, L_max).
using Assignment = std::vector<int>;

/// Sorted distinct cluster indices in use.
std::vector<int> live_clusters(const Assignment& beta);

/// Model-side label for value i on a record.
Preference grounding_label(const PreferenceRecord& r, const RewardTable& grounding, int value);
/// Model-side label under a linear scalarization of the grounding.
Preference value_system_label(const PreferenceRecord& r, const RewardTable& grounding, std::span<const double> weights);

/// d over a list of records: value-i labels (value >= 0) or value-system labels.
double grounding_discordance(std::span<const PreferenceRecord> records, const RewardTable& grounding, int value);
double value_system_discordance(std::span<const PreferenceRecord> records, const RewardTable& grounding,
                                std::span<const double> weights);

/// 1 - mean_j d_{D_j}(model relation for v_i, agent j labels for v_i).
double coherence(const RewardTable& grounding, const Dataset& data, int value);
std::vector<double> coherences(const RewardTable& grounding, const Dataset& data);
/// Mean over values of `coherences`.
double grounding_coherence(const RewardTable& grounding, const Dataset& data);

/// 1 - mean_j d_{D_j}(cluster beta(j) relation, agent j value-system labels).
double representativeness(const Assignment& beta, const std::vector<Weights>& cluster_weights,
                          const RewardTable& grounding, const Dataset& data);

struct ConcisenessResult {
    double value = 0.0;
    /// Set when fewer than two clusters are live (value is 0 by convention).
    bool single_cluster = false;
};

/// min over distinct live cluster pairs of the discordance between their relations on `pairs`.
ConcisenessResult conciseness(const std::vector<int>& live, const std::vector<Weights>& cluster_weights,
                              const RewardTable& grounding,
                              std::span<const std::pair<TrajectoryRef, TrajectoryRef>> pairs);

/// (1 - repr) / (1 + conc); lower is better.
double gamma_index(double repr, double conc);

struct SocietyScores {
    std::vector<double> coherence;
    double grounding_coherence = 0.0;
    double representativeness = 0.0;
    double conciseness = 0.0;
    bool single_cluster = false;
    double gamma = 0.0;
    int num_clusters = 0;

    double min_coherence() const;
};

SocietyScores score_society(const Assignment& beta, const std::vector<Weights>& cluster_weights,
                            const RewardTable& grounding, const Dataset& data);

}  // namespace svsl
