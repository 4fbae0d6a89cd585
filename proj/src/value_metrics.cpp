#include "svsl/value_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace svsl {

double to_value(Preference p) {
    switch (p) {
        case Preference::Second: return 0.0;
        case Preference::Indifferent: return 0.5;
        case Preference::First: return 1.0;
    }
    return 0.5;
}

Preference preference_from_value(double y) {
    if (y == 0.0) return Preference::Second;
    if (y == 0.5) return Preference::Indifferent;
    if (y == 1.0) return Preference::First;
    throw Error("preference label must be 0, 0.5 or 1");
}

Preference flip(Preference p) {
    if (p == Preference::First) return Preference::Second;
    if (p == Preference::Second) return Preference::First;
    return p;
}

double bt_probability(double ga, double gb) {
    const double mx = std::max(ga, gb);
    const double ea = std::exp(ga - mx);
    const double eb = std::exp(gb - mx);
    return ea / (ea + eb);
}

Preference qualitative_label(double a, double b, double tol) {
    if (a > b + tol) return Preference::First;
    if (b > a + tol) return Preference::Second;
    return Preference::Indifferent;
}

double discordance(std::span<const Preference> a, std::span<const Preference> b) {
    if (a.empty()) throw Error("empty pair set");
    if (a.size() != b.size()) throw Error("discordance: label sequences differ in length");
    std::size_t diff = 0;
    for (std::size_t k = 0; k < a.size(); ++k)
        if (a[k] != b[k]) ++diff;
    return static_cast<double>(diff) / static_cast<double>(a.size());
}

Dataset::Dataset(int num_agents, int num_values)
    : num_values_(num_values), per_agent_(static_cast<std::size_t>(num_agents)) {}

void Dataset::add(PreferenceRecord record) {
    if (record.agent < 0 || record.agent >= num_agents()) throw Error("record agent outside the society");
    if (static_cast<int>(record.values.size()) != num_values_) throw Error("record has wrong number of value labels");
    if (!record.first || !record.second) throw Error("record trajectory reference is null");
    per_agent_[static_cast<std::size_t>(record.agent)].push_back(std::move(record));
}

void Dataset::append(const Dataset& other) {
    for (int j = 0; j < other.num_agents(); ++j)
        for (const auto& r : other.agent_records(j)) add(r);
}

std::size_t Dataset::size() const {
    std::size_t n = 0;
    for (const auto& v : per_agent_) n += v.size();
    return n;
}

std::span<const PreferenceRecord> Dataset::agent_records(int agent) const {
    return per_agent_.at(static_cast<std::size_t>(agent));
}

std::vector<std::pair<TrajectoryRef, TrajectoryRef>> Dataset::pairs() const {
    // Keyed on content, not identity: a reloaded dataset shares equal trajectories.
    std::set<std::vector<int>> seen;
    std::vector<std::pair<TrajectoryRef, TrajectoryRef>> out;
    std::vector<int> key;
    for (const auto& recs : per_agent_)
        for (const auto& r : recs) {
            key.clear();
            key.push_back(static_cast<int>(r.first->trajectory.size()));
            for (const auto* t : {&r.first->trajectory, &r.second->trajectory})
                for (const auto& st : t->steps) {
                    key.push_back(st.state);
                    key.push_back(st.action);
                }
            if (seen.insert(key).second) out.emplace_back(r.first, r.second);
        }
    return out;
}

std::vector<int> live_clusters(const Assignment& beta) {
    std::set<int> s(beta.begin(), beta.end());
    return {s.begin(), s.end()};
}

namespace {

constexpr int kMaxInlineValues = 16;

struct PairAlignments {
    double a[kMaxInlineValues];
    double b[kMaxInlineValues];
};

void alignments(const PreferenceRecord& r, const RewardTable& g, PairAlignments& out) {
    if (g.num_values > kMaxInlineValues) throw Error("too many values");
    discounted_alignment(*r.first, g, std::span<double>(out.a, static_cast<std::size_t>(g.num_values)));
    discounted_alignment(*r.second, g, std::span<double>(out.b, static_cast<std::size_t>(g.num_values)));
}

double scalarize(const double* x, std::span<const double> w) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
    return s;
}

Preference pair_label(const TrajectoryData& first, const TrajectoryData& second, const RewardTable& g,
                      std::span<const double> w) {
    double a[kMaxInlineValues];
    double b[kMaxInlineValues];
    const auto m = static_cast<std::size_t>(g.num_values);
    discounted_alignment(first, g, std::span<double>(a, m));
    discounted_alignment(second, g, std::span<double>(b, m));
    return qualitative_label(scalarize(a, w), scalarize(b, w));
}

}  // namespace

Preference grounding_label(const PreferenceRecord& r, const RewardTable& grounding, int value) {
    PairAlignments al;
    alignments(r, grounding, al);
    return qualitative_label(al.a[value], al.b[value]);
}

Preference value_system_label(const PreferenceRecord& r, const RewardTable& grounding, std::span<const double> weights) {
    PairAlignments al;
    alignments(r, grounding, al);
    return qualitative_label(scalarize(al.a, weights), scalarize(al.b, weights));
}

double grounding_discordance(std::span<const PreferenceRecord> records, const RewardTable& grounding, int value) {
    if (records.empty()) throw Error("empty pair set");
    std::size_t diff = 0;
    for (const auto& r : records)
        if (grounding_label(r, grounding, value) != r.values[static_cast<std::size_t>(value)]) ++diff;
    return static_cast<double>(diff) / static_cast<double>(records.size());
}

double value_system_discordance(std::span<const PreferenceRecord> records, const RewardTable& grounding,
                                std::span<const double> weights) {
    if (records.empty()) throw Error("empty pair set");
    std::size_t diff = 0;
    for (const auto& r : records)
        if (value_system_label(r, grounding, weights) != r.value_system) ++diff;
    return static_cast<double>(diff) / static_cast<double>(records.size());
}

double coherence(const RewardTable& grounding, const Dataset& data, int value) {
    if (data.num_agents() == 0) throw Error("coherence: empty society");
    double total = 0.0;
    for (int j = 0; j < data.num_agents(); ++j) {
        const auto recs = data.agent_records(j);
        if (recs.empty()) throw Error("coherence: agent " + std::to_string(j) + " has no records");
        total += grounding_discordance(recs, grounding, value);
    }
    return 1.0 - total / data.num_agents();
}

std::vector<double> coherences(const RewardTable& grounding, const Dataset& data) {
    std::vector<double> out;
    for (int i = 0; i < data.num_values(); ++i) out.push_back(coherence(grounding, data, i));
    return out;
}

double grounding_coherence(const RewardTable& grounding, const Dataset& data) {
    const auto c = coherences(grounding, data);
    double s = 0.0;
    for (double x : c) s += x;
    return s / static_cast<double>(c.size());
}

double representativeness(const Assignment& beta, const std::vector<Weights>& cluster_weights,
                          const RewardTable& grounding, const Dataset& data) {
    if (data.num_agents() == 0) throw Error("representativeness: empty society");
    if (static_cast<int>(beta.size()) != data.num_agents()) throw Error("unassigned agent");
    double total = 0.0;
    for (int j = 0; j < data.num_agents(); ++j) {
        const int l = beta[static_cast<std::size_t>(j)];
        if (l < 0 || l >= static_cast<int>(cluster_weights.size())) throw Error("unassigned agent");
        const auto recs = data.agent_records(j);
        if (recs.empty()) throw Error("representativeness: agent " + std::to_string(j) + " has no records");
        total += value_system_discordance(recs, grounding, cluster_weights[static_cast<std::size_t>(l)]);
    }
    return 1.0 - total / data.num_agents();
}

ConcisenessResult conciseness(const std::vector<int>& live, const std::vector<Weights>& cluster_weights,
                              const RewardTable& grounding,
                              std::span<const std::pair<TrajectoryRef, TrajectoryRef>> pairs) {
    if (live.size() < 2) return {0.0, true};
    if (pairs.empty()) throw Error("empty pair set");
    // Labels for every live cluster on every pair, then pairwise comparisons.
    std::vector<std::vector<Preference>> labels(live.size(), std::vector<Preference>(pairs.size()));
    for (std::size_t k = 0; k < pairs.size(); ++k)
        for (std::size_t c = 0; c < live.size(); ++c)
            labels[c][k] = pair_label(*pairs[k].first, *pairs[k].second, grounding,
                                      cluster_weights.at(static_cast<std::size_t>(live[c])));
    double best = 1.0;
    for (std::size_t c = 0; c < live.size(); ++c)
        for (std::size_t d = c + 1; d < live.size(); ++d) best = std::min(best, discordance(labels[c], labels[d]));
    return {best, false};
}

double gamma_index(double repr, double conc) {
    return (1.0 - repr) / (1.0 + conc);
}

double SocietyScores::min_coherence() const {
    return coherence.empty() ? 0.0 : *std::min_element(coherence.begin(), coherence.end());
}

SocietyScores score_society(const Assignment& beta, const std::vector<Weights>& cluster_weights,
                            const RewardTable& grounding, const Dataset& data) {
    SocietyScores s;
    s.coherence = coherences(grounding, data);
    double sum = 0.0;
    for (double c : s.coherence) sum += c;
    s.grounding_coherence = sum / static_cast<double>(s.coherence.size());
    s.representativeness = representativeness(beta, cluster_weights, grounding, data);
    const auto live = live_clusters(beta);
    const auto pairs = data.pairs();
    const auto conc = conciseness(live, cluster_weights, grounding, pairs);
    s.conciseness = conc.value;
    s.single_cluster = conc.single_cluster;
    s.gamma = gamma_index(s.representativeness, s.conciseness);
    s.num_clusters = static_cast<int>(live.size());
    return s;
}

}  // namespace svsl
