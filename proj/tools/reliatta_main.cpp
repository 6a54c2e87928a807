// Command-line front end: run / sweep / gen / report.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "reliatta/harness.hpp"
#include "reliatta/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out;
    std::string method;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

reliatta::RunConfig resolve_config(const CommonOpts& opts) {
    reliatta::RunConfig config = reliatta::load_run_config(opts.config_path);
    reliatta::apply_env_overrides(config);
    for (const std::string& kv : opts.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw reliatta::ConfigError("--set expects key=value, got \"" + kv + "\"");
        }
        reliatta::apply_override(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!opts.method.empty()) reliatta::apply_override(config, "method", opts.method);
    if (!opts.out.empty()) config.out_dir = opts.out;
    if (opts.seed_given) config.seeds = {opts.seed};
    return config;
}

int cmd_run(const CommonOpts& opts) {
    reliatta::RunConfig config = resolve_config(opts);
    for (std::uint64_t seed : config.seeds) {
        const auto start = std::chrono::steady_clock::now();
        reliatta::RunReport report = reliatta::run_experiment(config, seed);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!config.out_dir.empty()) {
            reliatta::write_outputs(report, config.out_dir + "/seed_" + std::to_string(seed),
                                    wall);
        }
        std::printf("%s seed=%llu overall=%.4f batches=%zu (%.2fs)\n", report.method.c_str(),
                    static_cast<unsigned long long>(seed), report.overall_accuracy,
                    report.batches.size(), wall);
        for (const reliatta::PhaseAccuracy& p : report.phases) {
            std::printf("  %-28s %.4f (%d samples)\n", p.phase.c_str(), p.accuracy, p.samples);
        }
    }
    return 0;
}

int cmd_sweep(const CommonOpts& opts) {
    reliatta::RunConfig config = resolve_config(opts);
    if (config.sweep.empty()) {
        throw reliatta::ConfigError("sweep: config declares no sweep axes");
    }
    if (config.out_dir.empty()) {
        throw reliatta::ConfigError("sweep: an output directory is required (--out)");
    }
    const auto written = reliatta::run_sweep(config);
    for (const std::string& dir : written) std::printf("wrote %s\n", dir.c_str());
    std::printf("%zu runs\n", written.size());
    return 0;
}

int cmd_gen(const CommonOpts& opts, int samples) {
    reliatta::RunConfig config = resolve_config(opts);
    if (config.out_dir.empty()) {
        throw reliatta::ConfigError("gen: an output path is required (--out)");
    }
    const std::uint64_t seed = config.seeds.front();
    const ordered_json data_block =
        reliatta::export_archive(config, seed, config.out_dir, samples);
    const std::string companion = config.out_dir + ".json";
    std::ofstream f(companion);
    f << ordered_json{{"data", data_block}}.dump(2) << "\n";
    std::printf("wrote %s and %s\n", config.out_dir.c_str(), companion.c_str());
    return 0;
}

int cmd_report(const std::string& in_dir, const std::string& out_csv) {
    struct Row {
        std::string method;
        double lr = 0.0;
        std::uint64_t seed = 0;
        double overall = 0.0;
        std::string path;
    };
    std::vector<Row> rows;
    for (const auto& entry : fs::recursive_directory_iterator(in_dir)) {
        if (!entry.is_regular_file() || entry.path().filename() != "report.json") continue;
        std::ifstream f(entry.path());
        ordered_json j;
        f >> j;
        const reliatta::RunReport report = reliatta::report_from_json(j);
        Row row;
        row.method = report.method;
        row.lr = report.config.at("hp").at("lr").get<double>();
        row.seed = report.seed;
        row.overall = report.overall_accuracy;
        row.path = entry.path().string();
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        std::fprintf(stderr, "error: {\"message\":\"no report.json found under %s\"}\n",
                     in_dir.c_str());
        return 1;
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return std::tie(a.method, a.lr, a.seed) < std::tie(b.method, b.lr, b.seed);
    });

    std::printf("%-18s %-10s %-8s %s\n", "method", "lr", "seed", "overall");
    std::map<std::pair<std::string, double>, std::pair<double, int>> means;
    for (const Row& r : rows) {
        std::printf("%-18s %-10.3g %-8llu %.4f\n", r.method.c_str(), r.lr,
                    static_cast<unsigned long long>(r.seed), r.overall);
        auto& [sum, count] = means[{r.method, r.lr}];
        sum += r.overall;
        count += 1;
    }
    std::printf("\n%-18s %-10s %s\n", "method", "lr", "mean_overall");
    for (const auto& [key, value] : means) {
        std::printf("%-18s %-10.3g %.4f\n", key.first.c_str(), key.second,
                    value.first / value.second);
    }
    if (!out_csv.empty()) {
        std::ofstream f(out_csv);
        f << "method,lr,seed,overall,path\n";
        for (const Row& r : rows) {
            f << r.method << ',' << r.lr << ',' << r.seed << ',' << r.overall << ','
              << r.path << '\n';
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reliability-aware test-time adaptation toolkit"};
    app.set_version_flag("--version", reliatta::kVersion);
    app.require_subcommand(1);

    CommonOpts opts;
    int gen_samples = -1;
    std::string report_in, report_out;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config) {
            cmd->add_option("--config", opts.config_path, "JSON config path")->required();
        }
        cmd->add_option("--set", opts.sets, "override key=value (repeatable)");
        cmd->add_option("--out", opts.out, "output directory / path");
        cmd->add_option("--method", opts.method, "method override");
        cmd->add_option("--seed", opts.seed, "single-seed override")
            ->each([&](const std::string&) { opts.seed_given = true; });
    };

    CLI::App* run = app.add_subcommand("run", "run one experiment per configured seed");
    add_common(run, true);
    CLI::App* sweep = app.add_subcommand("sweep", "cartesian sweep over declared axes");
    add_common(sweep, true);
    CLI::App* gen = app.add_subcommand("gen", "export a scenario stream as an embedding archive");
    add_common(gen, true);
    gen->add_option("--samples", gen_samples, "cap on exported samples");
    CLI::App* rep = app.add_subcommand("report", "summarize stored reports");
    rep->add_option("--in", report_in, "directory to scan")->required();
    rep->add_option("--out", report_out, "summary CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(opts);
        if (sweep->parsed()) return cmd_sweep(opts);
        if (gen->parsed()) return cmd_gen(opts, gen_samples);
        if (rep->parsed()) return cmd_report(report_in, report_out);
    } catch (const std::exception& e) {
        const ordered_json err{{"message", e.what()}};
        std::fprintf(stderr, "error: %s\n", err.dump().c_str());
        return 1;
    }
    return 2;
}
