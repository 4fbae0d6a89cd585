#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "svsl/environment.hpp"
#include "svsl/mlp.hpp"
#include "svsl/pareto.hpp"
#include "svsl/reward_models.hpp"

namespace svsl {

/// Linear ramp from `start` (t = 0) to `end` (t = horizon), clamped outside.
struct Schedule {
    double start = 0.0;
    double end = 0.0;
    long horizon = 1;

    double operator()(long t) const;
};

// ---------------------------------------------------------------------------
// Q(s, a | w) in R^m
// ---------------------------------------------------------------------------

enum class QMode { Tabular, Mlp };

struct QModelConfig {
    QMode mode = QMode::Tabular;
    /// Tabular: number of weight grid points (per simplex edge for m = 2).
    int grid_points = 51;
    /// Tabular: per-sample step size on the table entries.
    double q_step = 0.1;
    /// Mlp: Adam learning rate and hidden sizes.
    double lr = 5e-4;
    std::vector<int> hidden{256, 256};
};

class QModel {
public:
    QModel() = default;
    QModel(const TabularMomdp& env, QModelConfig cfg, Rng& rng);

    const QModelConfig& config() const { return cfg_; }
    int num_actions() const { return num_actions_; }
    int num_values() const { return num_values_; }
    const std::vector<Weights>& grid() const { return grid_; }

    /// Nearest grid weight (tabular mode; lowest index on ties).
    int grid_index(std::span<const double> w) const;

    /// Writes Q(s, a | w) for every action, row-major A x m.
    void evaluate(int s, std::span<const double> w, std::span<double> out) const;
    void evaluate_target(int s, std::span<const double> w, std::span<double> out) const;

    /// argmax_a w . Q(s, a | w), lowest index on ties.
    int greedy_action(int s, std::span<const double> w) const;

    struct Sample {
        int s = 0;
        int a = 0;
        const double* w = nullptr;  // m weights
        const double* y = nullptr;  // m targets
    };

    /// One descent step on the homotopy loss
    ///   (1-h) ||y - Q||^2 + h |w . (y - Q)|
    /// averaged over `samples`. Returns the mean loss before the step.
    double train(std::span<const Sample> samples, double h);

    void sync_target();
    void polyak(double tau);

    nlohmann::json to_json() const;
    static QModel from_json(const TabularMomdp& env, const nlohmann::json& j);

private:
    std::size_t entry(int grid, int s, int a) const;
    void refresh_target(std::size_t e) const;
    void mlp_input(int s, std::span<const double> w, double* col) const;

    QModelConfig cfg_;
    int num_states_ = 0;
    int num_actions_ = 0;
    int num_values_ = 0;
    std::vector<Weights> grid_;

    // Tabular storage: entry(g, s, a) * m + i. The target copy is updated lazily:
    // stamp_[e] records how many polyak steps entry e has absorbed, and a pending
    // run of n steps with constant online value collapses to a (1-tau)^n blend.
    std::vector<double> online_;
    mutable std::vector<double> target_;
    mutable std::vector<std::uint64_t> stamp_;
    mutable std::vector<double> decay_;  // decay_[n] = (1 - tau)^n
    std::uint64_t clock_ = 0;
    double tau_ = 0.0;

    // Mlp storage.
    Mlp net_;
    std::vector<int> feature_offsets_;
    std::vector<std::vector<int>> state_features_;
    int input_dim_ = 0;
    std::vector<double> params_;
    std::vector<double> target_params_;
    Adam adam_;
};

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

/// Binary sum tree over a fixed number of leaves.
class SumTree {
public:
    SumTree() = default;
    explicit SumTree(std::size_t leaves);

    void set(std::size_t i, double value);
    double get(std::size_t i) const { return tree_[base_ + i]; }
    double total() const { return tree_[1]; }
    /// Leaf whose prefix-sum interval contains u, for u in [0, total).
    std::size_t find(double u) const;

private:
    std::size_t base_ = 1;
    std::vector<double> tree_;
};

/// Ring buffer of transitions with optional prioritized sampling.
class ExperienceBuffer {
public:
    ExperienceBuffer() = default;
    ExperienceBuffer(std::size_t capacity, int num_values, double alpha_per, double eps_per);

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return size_; }
    std::uint64_t insertions() const { return insertions_; }
    int num_values() const { return m_; }

    std::size_t add(int s, int a, std::span<const double> r, int s_next, bool done, std::span<const double> w,
                    std::uint64_t episode);

    int state(std::size_t i) const { return s_[i]; }
    int action(std::size_t i) const { return a_[i]; }
    int next_state(std::size_t i) const { return s_next_[i]; }
    bool done(std::size_t i) const { return done_[i] != 0; }
    std::uint64_t episode(std::size_t i) const { return episode_[i]; }
    std::span<const double> reward(std::size_t i) const { return {r_.data() + i * m_, static_cast<std::size_t>(m_)}; }
    std::span<const double> weight(std::size_t i) const { return {w_.data() + i * m_, static_cast<std::size_t>(m_)}; }
    /// Slot of the k-th most recent insertion (k = 0 is the newest).
    std::size_t recent_slot(std::size_t k) const;

    void set_reward(std::size_t i, std::span<const double> r);
    /// Raw priority |td| + eps_per; sampling mass is priority^alpha.
    void update_priority(std::size_t i, double td_error);
    double priority(std::size_t i) const { return priority_[i]; }
    double sampling_mass(std::size_t i) const { return tree_.get(i); }

    std::vector<std::size_t> sample_uniform(std::size_t n, Rng& rng) const;
    std::vector<std::size_t> sample_recent(std::size_t n, std::size_t segment, Rng& rng) const;
    std::vector<std::size_t> sample_prioritized(std::size_t n, Rng& rng) const;

    /// Replaces every stored reward by the table row of its (s, a).
    void relabel(const RewardTable& rewards, int num_actions);

private:
    std::size_t capacity_ = 0;
    int m_ = 0;
    double alpha_ = 0.6;
    double eps_ = 0.01;
    std::size_t size_ = 0;
    std::size_t head_ = 0;
    std::uint64_t insertions_ = 0;
    double max_priority_ = 1.0;
    std::vector<int> s_, a_, s_next_;
    std::vector<std::uint8_t> done_;
    std::vector<double> r_, w_;
    std::vector<std::uint64_t> episode_;
    std::vector<double> priority_;
    SumTree tree_;
};

/// b/2 uniform among the max(b, recent_window) newest transitions plus b - b/2
/// drawn by priority (or uniformly when `prioritized` is false).
std::vector<std::size_t> sample_hybrid_batch(const ExperienceBuffer& buffer, std::size_t b, std::size_t recent_window,
                                             bool prioritized, Rng& rng);

// ---------------------------------------------------------------------------
// Envelope Q-learning
// ---------------------------------------------------------------------------

/// y = r if done, else r + gamma Q'(s', a*, w*) with (a*, w*) maximizing w . Q'(s', a', w')
/// over actions x candidates (lowest (action, candidate) index on ties).
std::vector<double> envelope_target(std::span<const double> r, int s_next, bool done, std::span<const double> w,
                                    const std::vector<Weights>& candidates, double gamma, const QModel& target);

int act_epsilon_greedy(const QModel& q, int s, std::span<const double> w, double epsilon, Rng& rng);

enum class ReplayMode { Uniform, Hybrid };

struct EqlConfig {
    long T = 120000;
    double h0 = 0.0;
    double hinf = 1.0;
    double eps0 = 0.5;
    double epsinf = 0.0;
    int T_pi = 1;
    int b_pi = 32;
    std::size_t S_e = 100000;
    ReplayMode replay = ReplayMode::Uniform;
    bool per = false;
    double alpha_per = 0.6;
    double eps_per = 0.01;
    std::size_t recent_window = 500;
    /// true: train on stored weights, envelope over batch weights.
    /// false: train every transition on N_w freshly sampled weights.
    bool U_w = false;
    int N_w = 5;
    bool polyak = false;
    double tau = 1e-4;
    long t_u = 1500;
    QModelConfig q;
};

struct UpdateStats {
    double loss = 0.0;
    std::size_t samples = 0;
};

class EqlLearner {
public:
    EqlLearner() = default;
    EqlLearner(const TabularMomdp& env, EqlConfig cfg, Rng& rng);

    const EqlConfig& config() const { return cfg_; }
    const QModel& q() const { return q_; }
    QModel& q() { return q_; }
    ExperienceBuffer& buffer() { return buffer_; }
    const ExperienceBuffer& buffer() const { return buffer_; }
    long timestep() const { return t_; }

    double epsilon() const { return Schedule{cfg_.eps0, cfg_.epsinf, cfg_.T}(t_); }
    double homotopy() const { return Schedule{cfg_.h0, cfg_.hinf, cfg_.T}(t_); }

    int act(int s, std::span<const double> w, Rng& rng) const;
    void observe(int s, int a, std::span<const double> r, int s_next, bool done, std::span<const double> w,
                 std::uint64_t episode);
    /// T_pi updates (once the buffer holds a batch), target sync, then t <- t + 1.
    UpdateStats step(Rng& rng);

    nlohmann::json to_json() const;
    static EqlLearner from_json(const TabularMomdp& env, const nlohmann::json& j);

private:
    UpdateStats update(Rng& rng);

    const TabularMomdp* env_ = nullptr;
    EqlConfig cfg_;
    QModel q_;
    ExperienceBuffer buffer_;
    long t_ = 0;
};

/// One gradient step of envelope Q-learning on the given buffer slots.
UpdateStats eql_update(QModel& q, ExperienceBuffer& buffer, std::span<const std::size_t> batch, double h,
                       double gamma, const EqlConfig& cfg, Rng& rng);

/// Standalone training with per-episode weights drawn uniformly from `episode_weights`.
EqlLearner train_eql(const TabularMomdp& env, const RewardTable& rewards, const EqlConfig& cfg,
                     const std::vector<Weights>& episode_weights, Rng& rng);

/// Greedy rollout under Q for weight w; returns the trajectory.
Trajectory greedy_rollout(const TabularMomdp& env, const QModel& q, std::span<const double> w);

/// Greedy policies for every weight, scored with `rewards`, then Pareto filtered.
Front policy_front(const TabularMomdp& env, const QModel& q, const std::vector<Weights>& weights,
                   const RewardTable& rewards, const std::string& provenance);

EqlConfig eql_config_from_json(const nlohmann::json& j, EqlConfig base = {});
nlohmann::json eql_config_to_json(const EqlConfig& c);

}  // namespace svsl
