#include "svsl/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace svsl {

namespace fs = std::filesystem;

std::string to_string(Method m) {
    switch (m) {
        case Method::Eql: return "eql";
        case Method::Svsl: return "svsl";
        case Method::Pbmorl: return "pbmorl";
        case Method::Svslp: return "svslp";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    for (Method m : all_methods())
        if (to_string(m) == s) return m;
    throw Error("unknown method '" + s + "' (expected eql, svsl, pbmorl or svslp)");
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> methods{Method::Eql, Method::Svsl, Method::Pbmorl, Method::Svslp};
    return methods;
}

ExperimentConfig ff_experiment_defaults() {
    ExperimentConfig c;

    c.eql.T = 120000;
    c.eql.q.lr = 5e-4;
    c.eql.h0 = 0.0;
    c.eql.hinf = 1.0;
    c.eql.eps0 = 0.5;
    c.eql.epsinf = 0.0;
    c.eql.T_pi = 1;
    c.eql.polyak = false;
    c.eql.t_u = 1500;
    c.eql.b_pi = 32;
    c.eql.S_e = 100000;
    c.eql.replay = ReplayMode::Uniform;
    c.eql.per = false;
    c.eql.U_w = false;
    c.eql.N_w = 5;

    c.svsl.L_max = 15;
    c.svsl.mrt = 0.25;
    c.svsl.lambda = 1.0;
    c.svsl.alpha_lambda = 0.05;
    c.svsl.gamma_lambda = 5e-5;
    c.svsl.alpha_theta = 3e-4;
    c.svsl.alpha_omega = 5e-3;
    c.svsl.I = 100;
    c.svsl.A_ref = -1.0;
    c.svsl.N = 5;
    c.svsl.E_r = 2;
    c.svsl.m_r = 3;
    c.svsl.p_m = 0.1;
    c.svsl.s_m = 0.1;
    c.svsl.b_mp = 0;

    c.svsl_eql.T = 200000;
    c.svsl_eql.q.lr = 7e-4;
    c.svsl_eql.h0 = 0.05;
    c.svsl_eql.hinf = 0.5;
    c.svsl_eql.eps0 = 0.5;
    c.svsl_eql.epsinf = 0.05;
    c.svsl_eql.T_pi = 2;
    c.svsl_eql.polyak = true;
    c.svsl_eql.tau = 1e-4;
    c.svsl_eql.b_pi = 256;
    c.svsl_eql.S_e = 500000;
    c.svsl_eql.replay = ReplayMode::Hybrid;
    c.svsl_eql.per = true;
    c.svsl_eql.alpha_per = 0.6;
    c.svsl_eql.eps_per = 0.01;
    c.svsl_eql.U_w = false;
    c.svsl_eql.N_w = 5;

    c.pbmorl = ff_pbmorl_defaults();
    c.svslp = ff_svslp_defaults();
    return c;
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
    nlohmann::json svsl = svsl_config_to_json(c.svsl);
    svsl["eql"] = eql_config_to_json(c.svsl_eql);
    return {{"society", society_config_to_json(c.society)},
            {"front_grid", c.front_grid},
            {"gamma", 1.0},
            {"eql", eql_config_to_json(c.eql)},
            {"svsl", svsl},
            {"pbmorl", pbmorl_config_to_json(c.pbmorl)},
            {"svslp", svslp_config_to_json(c.svslp)}};
}

namespace {

void apply_method_section(ExperimentConfig& c, Method m, const nlohmann::json& j) {
    switch (m) {
        case Method::Eql: c.eql = eql_config_from_json(j, c.eql); break;
        case Method::Svsl:
            c.svsl = svsl_config_from_json(j, c.svsl);
            if (j.contains("eql")) c.svsl_eql = eql_config_from_json(j.at("eql"), c.svsl_eql);
            break;
        case Method::Pbmorl: c.pbmorl = pbmorl_config_from_json(j, c.pbmorl); break;
        case Method::Svslp: c.svslp = svslp_config_from_json(j, c.svslp); break;
    }
}

void check_gamma(const nlohmann::json& j) {
    // FF is undiscounted; any other value would silently change the problem.
    if (j.contains("gamma") && j.at("gamma").get<double>() != 1.0)
        throw Error("gamma must be 1.0 for the Firefighters environment");
}

}  // namespace

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, std::optional<Method> flat_method,
                                             ExperimentConfig c) {
    if (!j.is_object()) throw Error("config must be a JSON object");
    check_gamma(j);
    if (j.contains("society")) c.society = society_config_from_json(j.at("society"), c.society);
    if (j.contains("front_grid")) c.front_grid = j.at("front_grid").get<int>();
    bool sectioned = false;
    for (Method m : all_methods()) {
        const auto key = to_string(m);
        if (!j.contains(key)) continue;
        sectioned = true;
        check_gamma(j.at(key));
        apply_method_section(c, m, j.at(key));
    }
    if (!sectioned && flat_method) apply_method_section(c, *flat_method, j);
    if (c.front_grid < 2) throw Error("front_grid must be at least 2");
    return c;
}

// ---------------------------------------------------------------------------

SeedContext make_seed_context(const TabularMomdp& env, const ExperimentConfig& cfg, std::uint64_t seed) {
    SeedContext ctx;
    ctx.seed = seed;
    Rng rng(seed);
    const Society society = generate_society(env, cfg.society, rng);
    ctx.data = build_dataset(society, cfg.society, rng);
    ctx.agent_weights = society.agent_weights();
    for (const auto& f : society.front) ctx.front_weights.push_back(f.weight);
    ctx.oracle = dp_oracle_front(env, equally_spaced_weights(env.num_values(), cfg.front_grid));
    ctx.env_hash = env_hash(env);
    return ctx;
}

nlohmann::json dataset_header(const SeedContext& ctx, const ExperimentConfig& cfg) {
    return {{"format", "svsl-dataset"},
            {"version", 1},
            {"env", "ff"},
            {"env_hash", ctx.env_hash},
            {"seed", ctx.seed},
            {"society", society_config_to_json(cfg.society)},
            {"agent_weights", ctx.agent_weights},
            {"front_weights", ctx.front_weights}};
}

void save_seed_context(const fs::path& file, const SeedContext& ctx, const ExperimentConfig& cfg) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream os(file);
    if (!os) throw Error("cannot write " + file.string());
    write_dataset_jsonl(os, ctx.data, dataset_header(ctx, cfg));
}

SeedContext load_seed_context(const fs::path& file, const TabularMomdp& env, const ExperimentConfig& cfg) {
    std::ifstream is(file);
    if (!is) throw Error("cannot read " + file.string());
    auto loaded = read_dataset_jsonl(is, env);
    const auto& h = loaded.header;
    SeedContext ctx;
    ctx.env_hash = env_hash(env);
    if (h.at("env_hash").get<std::string>() != ctx.env_hash)
        throw Error("dataset " + file.string() + " was generated for a different environment");
    ctx.seed = h.at("seed").get<std::uint64_t>();
    ctx.agent_weights = h.at("agent_weights").get<std::vector<Weights>>();
    ctx.front_weights = h.at("front_weights").get<std::vector<Weights>>();
    ctx.data = std::move(loaded.data);
    if (static_cast<int>(ctx.agent_weights.size()) != ctx.data.train.num_agents())
        throw Error("dataset header and records disagree on the number of agents");
    ctx.oracle = dp_oracle_front(env, equally_spaced_weights(env.num_values(), cfg.front_grid));
    return ctx;
}

Rng method_rng(std::uint64_t seed, Method m) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(static_cast<int>(m) + 1)};
    return Rng(seq);
}

// ---------------------------------------------------------------------------

MethodRun evaluate_learned(const TabularMomdp& env, const SeedContext& ctx, const ExperimentConfig& cfg,
                           const std::optional<SocialValueSystem>& svs, const QModel& q) {
    MethodRun run;
    run.row.seed = ctx.seed;
    const RewardTable& truth = env.reward_table();
    const auto grid = equally_spaced_weights(env.num_values(), cfg.front_grid);
    run.front_all = policy_front(env, q, grid, truth, "all");
    if (svs) {
        run.row.scores = score_society(svs->beta, svs->weights, svs->grounding, ctx.data.test);
        run.front_cls = policy_front(env, q, svs->live_weights(), truth, "clusters");
    } else {
        run.front_cls = run.front_all;
        run.front_cls.provenance = "clusters";
    }
    const std::vector<double> ref(static_cast<std::size_t>(env.num_values()), 0.0);
    run.row.pf_all = run.front_all.size();
    run.row.pf_cls = run.front_cls.size();
    run.row.hv_all = hypervolume(run.front_all, ref);
    run.row.hv_cls = hypervolume(run.front_cls, ref);
    run.row.mul_all = mul(run.front_all, ctx.oracle);
    run.row.mul_cls = mul(run.front_cls, ctx.oracle);
    return run;
}

namespace {

nlohmann::json reward_model_json(const RewardVectorModel& model) {
    const auto& mc = model.config();
    return {{"mode", to_string(mc.mode)},
            {"onehot", to_string(mc.onehot)},
            {"hidden", mc.hidden},
            {"clamp", mc.clamp},
            {"theta", model.params()}};
}

RewardVectorModel reward_model_from_json(const TabularMomdp& env, const nlohmann::json& j) {
    RewardModelConfig mc;
    mc.mode = reward_mode_from_string(j.at("mode").get<std::string>());
    mc.onehot = onehot_from_string(j.at("onehot").get<std::string>());
    mc.hidden = j.at("hidden").get<std::vector<int>>();
    mc.clamp = j.at("clamp").get<double>();
    RewardVectorModel model(env, mc);
    auto theta = j.at("theta").get<std::vector<double>>();
    if (theta.size() != model.params().size()) throw Error("reward checkpoint has the wrong shape");
    model.params() = std::move(theta);
    return model;
}

}  // namespace

MethodRun run_method(const TabularMomdp& env, const SeedContext& ctx, const ExperimentConfig& cfg, Method method,
                     AnswerSource* answers, const RunCallbacks& callbacks) {
    Rng rng = method_rng(ctx.seed, method);
    const auto grid = equally_spaced_weights(env.num_values(), cfg.front_grid);
    OracleAnswerSource oracle(ctx.agent_weights, env.reward_table());
    AnswerSource& source = answers ? *answers : oracle;
    MethodRun run;
    switch (method) {
        case Method::Eql: {
            const EqlLearner learner = train_eql(env, env.reward_table(), cfg.eql, grid, rng);
            run = evaluate_learned(env, ctx, cfg, std::nullopt, learner.q());
            run.checkpoints["q"] = learner.to_json();
            break;
        }
        case Method::Svsl: {
            const SvslResult res = run_svsl(env, ctx.data.train, cfg.svsl, rng);
            const SocialValueSystem svs = to_social_value_system(res.best);
            const EqlLearner learner = train_eql(env, svs.grounding, cfg.svsl_eql, grid, rng);
            run = evaluate_learned(env, ctx, cfg, svs, learner.q());
            run.checkpoints["solution"] = res.best.to_json();
            run.checkpoints["q"] = learner.to_json();
            run.timeline.push_back({{"iterations", res.iterations}});
            break;
        }
        case Method::Pbmorl: {
            const PbmorlResult res = run_pbmorl_baseline(env, ctx.data.train, source, cfg.pbmorl, rng);
            run = evaluate_learned(env, ctx, cfg, res.svs, res.learner.q());
            run.checkpoints["svs"] = {{"beta", res.svs.beta}, {"weights", res.svs.weights}};
            run.checkpoints["reward_model"] = reward_model_json(res.model);
            run.checkpoints["q"] = res.learner.to_json();
            run.queries_asked = res.queries_asked;
            break;
        }
        case Method::Svslp: {
            SvslpResult res = run_svslp(env, ctx.data.train, source, cfg.svslp, rng, callbacks);
            run = evaluate_learned(env, ctx, cfg, to_social_value_system(res.solution), res.learner.q());
            run.checkpoints["solution"] = res.solution.to_json();
            run.checkpoints["q"] = res.learner.to_json();
            run.timeline = std::move(res.timeline);
            run.queries_asked = res.queries_asked;
            break;
        }
    }
    run.row.seed = ctx.seed;
    run.row.method = method;
    return run;
}

// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::vector<std::string> row_columns(int num_values) {
    std::vector<std::string> cols{"L", "repr"};
    for (int i = 0; i < num_values; ++i) cols.push_back("chr_v" + std::to_string(i + 1));
    for (const char* c : {"conc", "ray_turi", "pf_all", "pf_cls", "hv_all", "hv_cls", "mul_all", "mul_cls"})
        cols.emplace_back(c);
    return cols;
}

/// Numeric columns of a row, NaN where the method has no society metrics.
std::vector<double> row_values(const MetricRow& r, int num_values) {
    std::vector<double> v;
    const double nan = std::nan("");
    if (r.scores) {
        v.push_back(r.scores->num_clusters);
        v.push_back(r.scores->representativeness);
        for (int i = 0; i < num_values; ++i) v.push_back(r.scores->coherence.at(static_cast<std::size_t>(i)));
        v.push_back(r.scores->conciseness);
        v.push_back(r.scores->gamma);
    } else {
        v.assign(static_cast<std::size_t>(4 + num_values), nan);
    }
    for (double x : {static_cast<double>(r.pf_all), static_cast<double>(r.pf_cls), r.hv_all, r.hv_cls, r.mul_all,
                     r.mul_cls})
        v.push_back(x);
    return v;
}

std::string cell(double v, bool integral) {
    if (std::isnan(v)) return "";
    return integral ? std::to_string(static_cast<long long>(v)) : fmt(v);
}

bool integral_column(const std::string& c) { return c == "L" || c == "pf_all" || c == "pf_cls"; }

nlohmann::json scores_json(const SocietyScores& s) {
    return {{"L", s.num_clusters},
            {"representativeness", s.representativeness},
            {"coherence", s.coherence},
            {"grounding_coherence", s.grounding_coherence},
            {"conciseness", s.conciseness},
            {"single_cluster", s.single_cluster},
            {"ray_turi", s.gamma}};
}

nlohmann::json row_json(const MetricRow& r) {
    nlohmann::json j{{"seed", r.seed},
                     {"method", to_string(r.method)},
                     {"pf_all", r.pf_all},
                     {"pf_cls", r.pf_cls},
                     {"hv_all", r.hv_all},
                     {"hv_cls", r.hv_cls},
                     {"mul_all", r.mul_all},
                     {"mul_cls", r.mul_cls}};
    j["society"] = r.scores ? scores_json(*r.scores) : nlohmann::json(nullptr);
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw Error("cannot write " + file.string());
    os << text;
}

void write_json(const fs::path& file, const nlohmann::json& j) { write_text(file, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& file) {
    std::ifstream is(file);
    if (!is) throw Error("cannot read " + file.string());
    return nlohmann::json::parse(is);
}

}  // namespace

std::string metrics_csv_header(int num_values) {
    std::string out = "seed,method";
    for (const auto& c : row_columns(num_values)) out += "," + c;
    return out + ",error";
}

std::string metrics_csv_row(const MetricRow& row, int num_values) {
    std::string out = std::to_string(row.seed) + "," + to_string(row.method);
    const auto cols = row_columns(num_values);
    const auto vals = row_values(row, num_values);
    const bool failed = !row.error.empty();
    for (std::size_t k = 0; k < cols.size(); ++k) out += "," + (failed ? std::string() : cell(vals[k], integral_column(cols[k])));
    std::string err = row.error;
    for (char& ch : err)
        if (ch == ',' || ch == '\n') ch = ';';
    return out + "," + err;
}

nlohmann::json front_to_json(const Front& f) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : f.points) pts.push_back({{"value", p.value}, {"weights", p.weights}});
    return {{"provenance", f.provenance}, {"points", pts}};
}

Front front_from_json(const nlohmann::json& j) {
    Front f;
    f.provenance = j.at("provenance").get<std::string>();
    for (const auto& p : j.at("points"))
        f.points.push_back({p.at("value").get<std::vector<double>>(), p.at("weights").get<std::vector<Weights>>()});
    return f;
}

nlohmann::json cluster_histogram(const std::vector<MetricRow>& rows) {
    std::map<std::string, std::map<int, int>> counts;
    for (const auto& r : rows)
        if (r.error.empty() && r.scores) ++counts[to_string(r.method)][r.scores->num_clusters];
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [method, hist] : counts) {
        nlohmann::json h = nlohmann::json::object();
        for (const auto& [L, n] : hist) h[std::to_string(L)] = n;
        out[method] = h;
    }
    return out;
}

std::string aggregate_csv(const std::vector<MetricRow>& rows, int num_values) {
    const auto cols = row_columns(num_values);
    std::string out = "method,runs,failed";
    for (const auto& c : cols) out += "," + c + "_mean," + c + "_std";
    out += "\n";
    for (Method m : all_methods()) {
        std::vector<std::vector<double>> vals;
        int failed = 0;
        for (const auto& r : rows) {
            if (r.method != m) continue;
            if (!r.error.empty()) {
                ++failed;
                continue;
            }
            vals.push_back(row_values(r, num_values));
        }
        if (vals.empty() && failed == 0) continue;
        out += to_string(m) + "," + std::to_string(vals.size()) + "," + std::to_string(failed);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& v : vals)
                if (!std::isnan(v[k])) {
                    sum += v[k];
                    ++n;
                }
            if (n == 0) {
                out += ",,";
                continue;
            }
            const double mean = sum / static_cast<double>(n);
            double sq = 0.0;
            for (const auto& v : vals)
                if (!std::isnan(v[k])) sq += (v[k] - mean) * (v[k] - mean);
            out += "," + fmt(mean) + "," + fmt(std::sqrt(sq / static_cast<double>(n)));
        }
        out += "\n";
    }
    return out;
}

nlohmann::json run_manifest(const MethodRun& run, const SeedContext& ctx, const ExperimentConfig& cfg) {
    const auto full = experiment_config_to_json(cfg);
    return {{"format", "svsl-run"},
            {"version", 1},
            {"method", to_string(run.row.method)},
            {"seed", ctx.seed},
            {"env", "ff"},
            {"env_hash", ctx.env_hash},
            {"config", {{"society", full.at("society")},
                        {"front_grid", cfg.front_grid},
                        {to_string(run.row.method), full.at(to_string(run.row.method))}}},
            {"dataset", {{"train_records", ctx.data.train.size()}, {"test_records", ctx.data.test.size()}}},
            {"queries_asked", run.queries_asked},
            {"timeline", run.timeline},
            {"metrics", row_json(run.row)}};
}

void write_run_directory(const fs::path& dir, const MethodRun& run, const SeedContext& ctx,
                         const ExperimentConfig& cfg) {
    fs::create_directories(dir);
    const int m = static_cast<int>(ctx.agent_weights.empty() ? 2 : ctx.agent_weights.front().size());
    write_json(dir / "manifest.json", run_manifest(run, ctx, cfg));
    write_text(dir / "metrics.csv", metrics_csv_header(m) + "\n" + metrics_csv_row(run.row, m) + "\n");
    write_json(dir / "front_all.json", front_to_json(run.front_all));
    write_json(dir / "front_cls.json", front_to_json(run.front_cls));
    write_json(dir / "front_oracle.json", front_to_json(ctx.oracle));
    write_json(dir / "clusters.json", cluster_histogram({run.row}));
    for (const auto& [name, body] : run.checkpoints.items()) write_json(dir / ("checkpoint_" + name + ".json"), body);
    save_seed_context(dir / "dataset.jsonl", ctx, cfg);
}

MethodRun reevaluate_run_directory(const fs::path& dir, const TabularMomdp& env) {
    const auto manifest = read_json(dir / "manifest.json");
    if (manifest.at("format").get<std::string>() != "svsl-run") throw Error(dir.string() + " is not a run directory");
    if (manifest.at("env_hash").get<std::string>() != env_hash(env))
        throw Error("run " + dir.string() + " was produced for a different environment");
    const Method method = method_from_string(manifest.at("method").get<std::string>());
    const ExperimentConfig cfg = experiment_config_from_json(manifest.at("config"));
    const SeedContext ctx = load_seed_context(dir / "dataset.jsonl", env, cfg);
    const EqlLearner learner = EqlLearner::from_json(env, read_json(dir / "checkpoint_q.json"));
    std::optional<SocialValueSystem> svs;
    if (method == Method::Svsl || method == Method::Svslp) {
        svs = to_social_value_system(Solution::from_json(env, read_json(dir / "checkpoint_solution.json")));
    } else if (method == Method::Pbmorl) {
        const auto s = read_json(dir / "checkpoint_svs.json");
        const auto model = reward_model_from_json(env, read_json(dir / "checkpoint_reward_model.json"));
        svs = SocialValueSystem{s.at("beta").get<Assignment>(), s.at("weights").get<std::vector<Weights>>(),
                                model.table()};
    }
    MethodRun run = evaluate_learned(env, ctx, cfg, svs, learner.q());
    run.row.method = method;
    run.timeline = manifest.at("timeline");
    return run;
}

ExperimentReport run_experiment(const TabularMomdp& env, const ExperimentConfig& cfg,
                                const std::vector<std::uint64_t>& seeds, const std::vector<Method>& methods,
                                const std::optional<fs::path>& out) {
    ExperimentReport report;
    const int m = env.num_values();
    for (std::uint64_t seed : seeds) {
        std::optional<SeedContext> ctx;
        try {
            ctx = make_seed_context(env, cfg, seed);
        } catch (const std::exception& e) {
            for (Method method : methods) {
                MetricRow row;
                row.seed = seed;
                row.method = method;
                row.error = std::string("society generation failed: ") + e.what();
                report.rows.push_back(row);
            }
            continue;
        }
        for (Method method : methods) {
            log::info("seed " + std::to_string(seed) + ": running " + to_string(method));
            try {
                MethodRun run = run_method(env, *ctx, cfg, method);
                if (out) write_run_directory(*out / (to_string(method) + "-seed" + std::to_string(seed)), run, *ctx, cfg);
                report.rows.push_back(run.row);
            } catch (const std::exception& e) {
                log::warn("seed " + std::to_string(seed) + " " + to_string(method) + " failed: " + e.what());
                MetricRow row;
                row.seed = seed;
                row.method = method;
                row.error = e.what();
                report.rows.push_back(row);
            }
        }
    }
    if (out) {
        fs::create_directories(*out);
        std::string csv = metrics_csv_header(m) + "\n";
        for (const auto& r : report.rows) csv += metrics_csv_row(r, m) + "\n";
        write_text(*out / "metrics.csv", csv);
        write_text(*out / "summary.csv", aggregate_csv(report.rows, m));
        write_json(*out / "clusters.json", cluster_histogram(report.rows));
    }
    return report;
}

}  // namespace svsl
