// svsl-lab: society generation, method runs, re-evaluation, the labeling
// service and the DP oracle front from the command line.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "svsl/experiment.hpp"
#include "svsl/query_service.hpp"

namespace fs = std::filesystem;
using namespace svsl;

namespace {

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot read " + path);
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw Error("invalid JSON in " + path + ": " + e.what());
    }
}

TabularMomdp make_env(const std::string& name, const nlohmann::json& cfg) {
    if (name != "ff") throw Error("unknown environment '" + name + "' (only ff is available)");
    FfOptions opts;
    if (cfg.contains("env")) {
        const auto& e = cfg.at("env");
        if (e.contains("initial")) {
            const auto v = e.at("initial").get<std::vector<int>>();
            if (v.size() != 5) throw Error("env.initial needs 5 fields (FI, OC, EQ, KN, FFC)");
            opts.initial = FfState{v[0], v[1], v[2], v[3], v[4]};
        }
        if (e.contains("fi5_means_severe")) opts.fi5_means_severe = e.at("fi5_means_severe").get<bool>();
        if (e.contains("horizon")) opts.horizon = e.at("horizon").get<int>();
    }
    return make_firefighters(opts);
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto dash = item.find('-');
        if (dash != std::string::npos && dash > 0) {
            const auto a = std::stoull(item.substr(0, dash));
            const auto b = std::stoull(item.substr(dash + 1));
            for (auto s = a; s <= b; ++s) seeds.push_back(s);
        } else if (!item.empty()) {
            seeds.push_back(std::stoull(item));
        }
    }
    if (seeds.empty()) throw Error("no seeds given");
    return seeds;
}

void print_rows(const std::vector<MetricRow>& rows, int m) {
    std::cout << metrics_csv_header(m) << "\n";
    for (const auto& r : rows) std::cout << metrics_csv_row(r, m) << "\n";
}

std::string fmt_point(const std::vector<double>& v) {
    std::string out = "(";
    for (std::size_t i = 0; i < v.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s%.4f", i ? ", " : "", v[i]);
        out += buf;
    }
    return out + ")";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Social value system learning lab"};
    app.require_subcommand(1);

    // gen-society
    auto* gen = app.add_subcommand("gen-society", "Generate a society and its preference dataset");
    std::string gen_env = "ff", gen_out, gen_config;
    std::uint64_t gen_seed = 0;
    gen->add_option("--env", gen_env, "Environment")->default_val("ff");
    gen->add_option("--seed", gen_seed, "Seed")->required();
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--config", gen_config, "Config JSON");

    // run
    auto* run = app.add_subcommand("run", "Run one method (or all) on one or more seeds");
    std::string run_method_name, run_config, run_seeds = "0", run_out, run_data, run_env = "ff";
    run->add_option("--method", run_method_name, "eql, svsl, pbmorl, svslp or all")->required();
    run->add_option("--config", run_config, "Config JSON (sections per method, or flat keys for --method)");
    run->add_option("--seed,--seeds", run_seeds, "Seed, list (0,1,2) or range (0-9)");
    run->add_option("--out", run_out, "Output directory (default runs/<method>-seed<N>)");
    run->add_option("--data", run_data, "Dataset file from gen-society (single seed only)");
    run->add_option("--env", run_env, "Environment")->default_val("ff");

    // eval
    auto* eval = app.add_subcommand("eval", "Recompute metrics from a run directory's checkpoints");
    std::string eval_dir;
    eval->add_option("--run", eval_dir, "Run directory")->required();

    // serve
    auto* serve = app.add_subcommand("serve", "Run SVSL-P with human-backed agents answering over HTTP");
    std::string serve_dir, serve_config, serve_host = "127.0.0.1", serve_human;
    int serve_port = 8080;
    serve->add_option("--run", serve_dir, "Directory holding dataset.jsonl (from gen-society)")->required();
    serve->add_option("--port", serve_port, "Port")->default_val(8080);
    serve->add_option("--host", serve_host, "Bind address")->default_val("127.0.0.1");
    serve->add_option("--config", serve_config, "Config JSON; a \"service\" section sets tokens and timeouts");
    serve->add_option("--human", serve_human, "Comma-separated human-backed agent ids (overrides config)");

    // oracle-front
    auto* oracle = app.add_subcommand("oracle-front", "Print the DP oracle front");
    std::string oracle_env = "ff", oracle_out;
    int oracle_grid = 50;
    oracle->add_option("--env", oracle_env, "Environment")->default_val("ff");
    oracle->add_option("--grid", oracle_grid, "Number of equally spaced weights")->default_val(50);
    oracle->add_option("--out", oracle_out, "Write the front as JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const auto cj = gen_config.empty() ? nlohmann::json::object() : read_json_file(gen_config);
            const auto env = make_env(gen_env, cj);
            const auto cfg = experiment_config_from_json(cj);
            const auto ctx = make_seed_context(env, cfg, gen_seed);
            const fs::path out(gen_out);
            save_seed_context(out / "dataset.jsonl", ctx, cfg);
            std::ofstream(out / "config.json") << experiment_config_to_json(cfg).dump(2) << "\n";
            std::cout << "agents " << ctx.agent_weights.size() << ", train " << ctx.data.train.size() << ", test "
                      << ctx.data.test.size() << ", env " << ctx.env_hash << "\n";
            std::cout << "wrote " << (out / "dataset.jsonl").string() << "\n";
            return 0;
        }

        if (*run) {
            const auto cj = run_config.empty() ? nlohmann::json::object() : read_json_file(run_config);
            const auto env = make_env(run_env, cj);
            const auto seeds = parse_seeds(run_seeds);
            std::vector<Method> methods;
            std::optional<Method> flat;
            if (run_method_name == "all") {
                methods = all_methods();
            } else {
                flat = method_from_string(run_method_name);
                methods = {*flat};
            }
            const auto cfg = experiment_config_from_json(cj, flat);
            const int m = env.num_values();
            if (!run_data.empty()) {
                if (methods.size() != 1) throw Error("--data works with a single method");
                const auto ctx = load_seed_context(run_data, env, cfg);
                const fs::path out = run_out.empty() ? fs::path("runs") / (to_string(methods[0]) + "-seed" + std::to_string(ctx.seed))
                                                     : fs::path(run_out);
                const auto result = run_method(env, ctx, cfg, methods[0]);
                write_run_directory(out, result, ctx, cfg);
                print_rows({result.row}, m);
                std::cout << "wrote " << out.string() << "\n";
                return 0;
            }
            if (seeds.size() == 1 && methods.size() == 1) {
                const fs::path out = run_out.empty()
                                         ? fs::path("runs") / (to_string(methods[0]) + "-seed" + std::to_string(seeds[0]))
                                         : fs::path(run_out);
                const auto ctx = make_seed_context(env, cfg, seeds[0]);
                const auto result = run_method(env, ctx, cfg, methods[0]);
                write_run_directory(out, result, ctx, cfg);
                print_rows({result.row}, m);
                std::cout << "wrote " << out.string() << "\n";
                return 0;
            }
            const fs::path out = run_out.empty() ? fs::path("runs") / "experiment" : fs::path(run_out);
            const auto report = run_experiment(env, cfg, seeds, methods, out);
            print_rows(report.rows, m);
            std::cout << "\n" << aggregate_csv(report.rows, m);
            std::cout << "wrote " << out.string() << "\n";
            bool any_failed = false;
            for (const auto& r : report.rows) any_failed = any_failed || !r.error.empty();
            return any_failed ? 3 : 0;
        }

        if (*eval) {
            const auto env = make_env("ff", nlohmann::json::object());
            const fs::path dir(eval_dir);
            std::vector<fs::path> runs;
            if (fs::exists(dir / "manifest.json")) {
                runs.push_back(dir);
            } else {
                for (const auto& e : fs::directory_iterator(dir))
                    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) runs.push_back(e.path());
                std::sort(runs.begin(), runs.end());
            }
            if (runs.empty()) throw Error("no run directories under " + dir.string());
            std::vector<MetricRow> rows;
            bool mismatch = false;
            for (const auto& r : runs) {
                const auto res = reevaluate_run_directory(r, env);
                rows.push_back(res.row);
                std::ifstream is(r / "metrics.csv");
                std::string header, stored;
                std::getline(is, header);
                std::getline(is, stored);
                if (stored != metrics_csv_row(res.row, env.num_values())) {
                    mismatch = true;
                    std::cerr << "warning: " << r.string() << " differs from its stored metrics\n";
                }
            }
            print_rows(rows, env.num_values());
            if (rows.size() > 1) std::cout << "\n" << aggregate_csv(rows, env.num_values());
            return mismatch ? 4 : 0;
        }

        if (*serve) {
            const auto cj = serve_config.empty() ? nlohmann::json::object() : read_json_file(serve_config);
            const auto env = make_env("ff", cj);
            const auto cfg = experiment_config_from_json(cj, Method::Svslp);
            auto svc = query_service_config_from_json(cj.value("service", nlohmann::json::object()));
            if (!serve_human.empty()) {
                svc.human_agents.clear();
                for (auto s : parse_seeds(serve_human)) svc.human_agents.push_back(static_cast<int>(s));
            }
            const fs::path dir(serve_dir);
            const auto ctx = load_seed_context(dir / "dataset.jsonl", env, cfg);
            for (int a : svc.human_agents)
                if (a < 0 || a >= static_cast<int>(ctx.agent_weights.size()))
                    throw Error("human agent " + std::to_string(a) + " does not exist");

            QueryHub hub(env, static_cast<int>(ctx.agent_weights.size()));
            hub.set_inflight_seconds(svc.inflight_seconds);
            ServiceAnswerSource answers(hub, OracleAnswerSource(ctx.agent_weights, env.reward_table()),
                                        svc.human_agents, svc.round_timeout_seconds);
            QueryServer server(hub, svc);
            const int port = server.start(serve_host, serve_port);
            std::cout << "query service on http://" << serve_host << ":" << port << " (human agents:";
            for (int a : svc.human_agents) std::cout << " " << a;
            std::cout << ")\n" << std::flush;

            RunCallbacks cb;
            cb.on_status = [&](const RunStatus& s) { hub.update_status(s); };
            const auto result = run_method(env, ctx, cfg, Method::Svslp, &answers, cb);
            const fs::path out = dir / "svslp-served";
            write_run_directory(out, result, ctx, cfg);
            print_rows({result.row}, env.num_values());
            std::cout << "answers dropped after timeouts: " << answers.dropped_total() << "\n";
            std::cout << "wrote " << out.string() << "\n";
            server.stop();
            return 0;
        }

        if (*oracle) {
            const auto env = make_env(oracle_env, nlohmann::json::object());
            const auto front = dp_oracle_front(env, equally_spaced_weights(env.num_values(), oracle_grid));
            const std::vector<double> ref(static_cast<std::size_t>(env.num_values()), 0.0);
            std::cout << "points " << front.size() << "\n";
            for (const auto& p : front.points)
                std::cout << "  " << fmt_point(p.value) << "  weights " << p.weights.size() << "\n";
            std::printf("hypervolume %.6f (reference 0)\n", hypervolume(front, ref));
            if (!oracle_out.empty()) std::ofstream(oracle_out) << front_to_json(front).dump(2) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
