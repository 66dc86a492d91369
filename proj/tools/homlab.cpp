// homlab command-line runner.
#include "homlab/runner.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

struct Flags {
    std::string config;
    std::string out;
    std::optional<std::int64_t> seed;
    int jobs = 1;
    bool strict = false;
};

void add_flags(CLI::App* app, Flags& f, bool config_required)
{
    auto* opt = app->add_option("--config", f.config, "configuration file");
    if (config_required) opt->required();
    app->add_option("--out", f.out, "output directory (default: CSV to stdout)");
    app->add_option("--seed", f.seed, "seed override");
    app->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
    app->add_flag("--strict", f.strict, "treat warnings as failures");
}

/// 0 pass, 1 assertion failure or experiment error, 2 usage/config error.
int execute(const std::string& kind, const Flags& f)
{
    using namespace homlab;
    RunConfig cfg;
    try {
        if (!f.config.empty()) cfg = RunConfig::load(f.config);
        if (!kind.empty()) {
            if (cfg.has("experiment", "kind") && cfg.text("experiment", "kind") != kind) {
                std::cerr << "homlab: status=usage reason=\"config kind '" << cfg.text("experiment", "kind")
                          << "' does not match subcommand '" << kind << "'\"\n";
                return 2;
            }
            cfg.set("experiment", "kind", kind);
        }
        if (f.seed) {
            cfg.set("run", "seed", std::to_string(*f.seed));
            cfg.set("run", "probe_seed", std::to_string(*f.seed));
        }
        catalogue_entry(cfg.text("experiment", "kind"));
    } catch (const ConfigError& e) {
        std::cerr << "homlab: status=usage reason=\"" << e.what() << "\"\n";
        return 2;
    }

    RunOutcome res;
    try {
        res = run_experiment(cfg, f.jobs);
    } catch (const ConfigError& e) {
        std::cerr << "homlab: status=usage reason=\"" << e.what() << "\"\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "homlab: status=error kind=" << cfg.text("experiment", "kind") << " reason=\"" << e.what()
                  << "\"\n";
        return 1;
    }

    const std::string digest = cfg.digest();
    if (f.out.empty()) {
        res.table.write(std::cout, digest);
    } else {
        std::error_code ec;
        std::filesystem::create_directories(f.out, ec);
        const std::string name = cfg.text("run", "output", cfg.text("experiment", "kind") + ".csv");
        const auto path = std::filesystem::path(f.out) / name;
        std::ofstream os(path);
        if (!os) {
            std::cerr << "homlab: status=error reason=\"cannot write " << path.string() << "\"\n";
            return 1;
        }
        res.table.write(os, digest);
    }
    for (const auto& w : res.warnings) std::cerr << "homlab: warning: " << w << "\n";
    const bool ok = res.passed && !(f.strict && !res.warnings.empty());
    std::cerr << "homlab: " << res.summary << "\n";
    if (res.passed && !ok) std::cerr << "homlab: status=fail reason=\"warnings under --strict\"\n";
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"homlab: homogenisation and Schur-topology experiments"};
    app.require_subcommand(1);
    std::map<std::string, Flags> flags;
    std::map<std::string, CLI::App*> subs;
    for (const auto& e : homlab::catalogue()) {
        auto* sub = app.add_subcommand(e.name, e.summary);
        add_flags(sub, flags[e.name], false);
        subs[e.name] = sub;
    }
    Flags run_flags;
    auto* run = app.add_subcommand("run", "run the experiment named in the config");
    add_flags(run, run_flags, true);
    auto* list = app.add_subcommand("list", "print the experiment catalogue");
    std::string topic;
    auto* desc = app.add_subcommand("describe", "describe one experiment");
    desc->add_option("kind", topic, "experiment name")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (list->parsed()) {
        for (const auto& e : homlab::catalogue()) std::cout << e.name << "\t" << e.summary << "\n";
        return 0;
    }
    if (desc->parsed()) {
        try {
            std::cout << homlab::describe(topic);
        } catch (const homlab::ConfigError& e) {
            std::cerr << "homlab: status=usage reason=\"" << e.what() << "\"\n";
            return 2;
        }
        return 0;
    }
    if (run->parsed()) return execute("", run_flags);
    for (const auto& [name, sub] : subs)
        if (sub->parsed()) return execute(name, flags[name]);
    return 2;
}
