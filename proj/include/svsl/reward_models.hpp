#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "svsl/environment.hpp"
#include "svsl/mlp.hpp"
#include "svsl/value_metrics.hpp"

namespace svsl {

// ---------------------------------------------------------------------------
// Grounding model R^theta : S x A -> R^m
// ---------------------------------------------------------------------------

enum class RewardModelMode { TabularTanh, Mlp };
enum class OneHotEncoding { Factored, Joint };

struct RewardModelConfig {
    RewardModelMode mode = RewardModelMode::TabularTanh;
    OneHotEncoding onehot = OneHotEncoding::Factored;
    std::vector<int> hidden{128, 128, 128};
    /// Learned rewards are clamped to [-clamp, clamp] in mlp mode.
    double clamp = 100.0;
};

std::string to_string(RewardModelMode mode);
RewardModelMode reward_mode_from_string(const std::string& s);
std::string to_string(OneHotEncoding enc);
OneHotEncoding onehot_from_string(const std::string& s);

/// Result of a forward pass: the full reward table plus what backward needs.
struct RewardEvaluation {
    RewardTable table;
    std::vector<Mlp::Workspace> workspaces;  // mlp mode, one per value
    std::vector<Eigen::MatrixXd> raw;        // mlp mode, unclamped outputs per value
};

class RewardVectorModel {
public:
    RewardVectorModel() = default;
    RewardVectorModel(const TabularMomdp& env, RewardModelConfig cfg);

    /// Tabular: theta = 0 (every reward 0). Mlp: small-variance normal weights.
    void initialize(Rng& rng);

    const RewardModelConfig& config() const { return cfg_; }
    RewardModelMode mode() const { return cfg_.mode; }
    int num_values() const { return num_values_; }
    int num_state_actions() const { return num_sa_; }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    RewardEvaluation evaluate() const;
    RewardTable table() const { return evaluate().table; }

    /// Adds d(loss)/d(theta) for upstream d(loss)/d(table) into `grad`.
    void backward(const RewardEvaluation& eval, const RewardTable& upstream, std::span<double> grad) const;

private:
    RewardModelConfig cfg_;
    int num_sa_ = 0;
    int num_values_ = 0;
    std::vector<double> params_;
    Mlp net_;
    std::shared_ptr<const Eigen::MatrixXd> inputs_;  // null for joint one-hot
};

// ---------------------------------------------------------------------------
// Value system weights W^omega_l = softmax(omega_l)
// ---------------------------------------------------------------------------

class ValueSystemBank {
public:
    ValueSystemBank() = default;
    ValueSystemBank(int max_clusters, int num_values);

    void initialize(Rng& rng);
    void randomize_row(int l, Rng& rng);

    int max_clusters() const { return max_clusters_; }
    int num_values() const { return num_values_; }
    std::vector<double>& omega() { return omega_; }
    const std::vector<double>& omega() const { return omega_; }
    std::span<const double> logits(int l) const;

    Weights weights(int l) const;
    std::vector<Weights> all_weights() const;

private:
    int max_clusters_ = 0;
    int num_values_ = 0;
    std::vector<double> omega_;
};

Weights softmax_weights(std::span<const double> omega_row);

/// R_l(s,a) = W . R^theta(s,a), discounted over the trajectory.
double scalarized_return(const TrajectoryData& traj, std::span<const double> weights, const RewardTable& grounding);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

inline constexpr double kLabelSmoothing = 0.1;
inline constexpr double kProbabilityClamp = 1e-12;

/// {0 -> 0.1, 0.5 -> 0.5, 1 -> 0.9}. Rejects anything that is not a raw label,
/// so already-smoothed values cannot be smoothed twice.
double smoothed_label(double y);
double smoothed_label(Preference y);

/// -y ln p - (1-y) ln(1-p); p is clamped to [1e-12, 1-1e-12] and `clamped` set when that happens.
double ce_loss(double p, double y, bool* clamped = nullptr);

/// Jensen-Shannon divergence (natural log) between Bernoulli(p) and Bernoulli(q).
double jsd_bernoulli(double p, double q, bool* clamped = nullptr);

/// Rows grouped per agent; losses average within each group, then across groups.
struct LossBatch {
    struct Group {
        int agent = -1;
        std::vector<const PreferenceRecord*> rows;
    };
    std::vector<Group> groups;

    static LossBatch from_dataset(const Dataset& data);
    /// One group holding every row (bulk batches without per-agent averaging).
    static LossBatch pooled(std::vector<const PreferenceRecord*> rows);
    std::size_t num_rows() const;
};

/// Coefficients of the composite objective
///   repr * L_repr - conc * L_conc + sum_i value[i] * L_V[i].
struct LossSelector {
    double repr = 1.0;
    double conc = 1.0;
    std::vector<double> value;

    static LossSelector lagrangian(std::span<const double> lambda);
    static LossSelector value_system(int num_values);
    static LossSelector grounding(int num_values);
    static LossSelector single_value(int value, int num_values);
};

struct LossTerms {
    std::vector<double> value;  // L_V per value
    double repr = 0.0;
    double conc = 0.0;
    double total = 0.0;
    bool clamped = false;

    double value_system() const { return repr - conc; }
};

struct TableGradient {
    RewardTable d_table;
    std::vector<double> d_omega;
};

/// Evaluates every loss term on `batch`; fills `grad` for the selected objective when given.
LossTerms evaluate_losses(const LossBatch& batch, const RewardTable& grounding, const ValueSystemBank& bank,
                          const Assignment& beta, const LossSelector& selector, TableGradient* grad);

struct ModelGradients {
    std::vector<double> theta;
    std::vector<double> omega;
};

class NonFiniteGradient : public Error {
public:
    NonFiniteGradient(const std::string& block, std::size_t index);
    std::string block;
    std::size_t index;
};

/// Exact reverse-mode gradients of the selected objective with respect to theta and omega.
LossTerms loss_gradients(const LossBatch& batch, const RewardVectorModel& model, const ValueSystemBank& bank,
                         const Assignment& beta, const LossSelector& selector, ModelGradients& out);

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// L2 penalty added to the gradient.
    double weight_decay = 1e-4;
};

class Adam {
public:
    Adam() = default;
    Adam(std::size_t n, AdamConfig cfg);

    void step(std::span<double> params, std::span<const double> grad);
    void reset();

    const AdamConfig& config() const { return cfg_; }
    std::size_t steps() const { return t_; }

    nlohmann::json to_json() const;
    static Adam from_json(const nlohmann::json& j);

private:
    AdamConfig cfg_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Lagrangian state
// ---------------------------------------------------------------------------

struct LagrangeState {
    std::vector<double> multipliers;
    std::vector<double> max_coherence;

    static LagrangeState initial(int num_values, double lambda0);
};

}  // namespace svsl
