#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "svsl/orchestrator.hpp"

namespace svsl {

enum class Method { Eql, Svsl, Pbmorl, Svslp };

std::string to_string(Method m);
Method method_from_string(const std::string& s);
const std::vector<Method>& all_methods();

/// One config per method, plus the society protocol and the front grid.
struct ExperimentConfig {
    SocietyConfig society;
    EqlConfig eql;
    SvslConfig svsl;
    /// EQL trained on the rewards SVSL learned, for the front columns.
    EqlConfig svsl_eql;
    PbmorlConfig pbmorl;
    SvslpConfig svslp;
    /// Candidate weights for the "all" fronts and the DP oracle.
    int front_grid = 50;
};

ExperimentConfig ff_experiment_defaults();
nlohmann::json experiment_config_to_json(const ExperimentConfig& c);
/// Accepts either per-method sections ("eql", "svsl", ...) or, for `method`,
/// a flat object with the hyperparameter keys.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, std::optional<Method> flat_method = {},
                                             ExperimentConfig base = ff_experiment_defaults());

/// Everything a method needs from one seed: the society's agents, its data and
/// the oracle front.
struct SeedContext {
    std::uint64_t seed = 0;
    std::vector<Weights> agent_weights;
    std::vector<Weights> front_weights;
    SplitDataset data;
    Front oracle;
    std::string env_hash;
};

SeedContext make_seed_context(const TabularMomdp& env, const ExperimentConfig& cfg, std::uint64_t seed);

/// Header line of a dataset file: protocol parameters, seed, env hash, agent weights.
nlohmann::json dataset_header(const SeedContext& ctx, const ExperimentConfig& cfg);
void save_seed_context(const std::filesystem::path& file, const SeedContext& ctx, const ExperimentConfig& cfg);
/// Rejects files produced for a different environment.
SeedContext load_seed_context(const std::filesystem::path& file, const TabularMomdp& env, const ExperimentConfig& cfg);

/// Independent stream per (seed, method) so methods do not perturb each other.
Rng method_rng(std::uint64_t seed, Method m);

/// One row of the results table. Society metrics are absent for EQL.
struct MetricRow {
    std::uint64_t seed = 0;
    Method method = Method::Eql;
    std::optional<SocietyScores> scores;
    std::size_t pf_all = 0;
    std::size_t pf_cls = 0;
    double hv_all = 0.0;
    double hv_cls = 0.0;
    double mul_all = 0.0;
    double mul_cls = 0.0;
    std::string error;
};

struct MethodRun {
    MetricRow row;
    Front front_all;
    Front front_cls;
    nlohmann::json timeline = nlohmann::json::array();
    /// Checkpoints: "solution" (SVSL, SVSL-P), "svs" and "reward_model" (PbMORL), "q" (all).
    nlohmann::json checkpoints = nlohmann::json::object();
    std::size_t queries_asked = 0;
};

/// Scores a learned society and its Q model against the seed's test split and oracle.
MethodRun evaluate_learned(const TabularMomdp& env, const SeedContext& ctx, const ExperimentConfig& cfg,
                           const std::optional<SocialValueSystem>& svs, const QModel& q);

/// Runs one method. `answers` overrides the oracle answer source for the online methods.
MethodRun run_method(const TabularMomdp& env, const SeedContext& ctx, const ExperimentConfig& cfg, Method method,
                     AnswerSource* answers = nullptr, const RunCallbacks& callbacks = {});

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

std::string metrics_csv_header(int num_values);
std::string metrics_csv_row(const MetricRow& row, int num_values);

nlohmann::json front_to_json(const Front& f);
Front front_from_json(const nlohmann::json& j);

/// Per-method {L: count} over successful rows.
nlohmann::json cluster_histogram(const std::vector<MetricRow>& rows);

/// Mean and population std per method and column, in CSV.
std::string aggregate_csv(const std::vector<MetricRow>& rows, int num_values);

/// Run-directory manifest: config echo, seed, env hash, timeline and metrics. No timestamps.
nlohmann::json run_manifest(const MethodRun& run, const SeedContext& ctx, const ExperimentConfig& cfg);

/// Writes manifest.json, metrics.csv, front_*.json, clusters.json and checkpoint_*.json into `dir`.
void write_run_directory(const std::filesystem::path& dir, const MethodRun& run, const SeedContext& ctx,
                         const ExperimentConfig& cfg);

/// Reloads checkpoints from a run directory and recomputes the row.
MethodRun reevaluate_run_directory(const std::filesystem::path& dir, const TabularMomdp& env);

struct ExperimentReport {
    std::vector<MetricRow> rows;
};

/// Every (seed, method) pair; a failing pair is recorded and the rest continue.
/// When `out` is set, each pair gets a run directory under it plus the
/// aggregate files at the top level.
ExperimentReport run_experiment(const TabularMomdp& env, const ExperimentConfig& cfg,
                                const std::vector<std::uint64_t>& seeds, const std::vector<Method>& methods,
                                const std::optional<std::filesystem::path>& out = {});

}  // namespace svsl
