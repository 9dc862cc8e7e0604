// pars_cli: command-line front end for the experiment pipelines.
//
//   pars_cli <subcommand> [--config FILE] [--out DIR] [--seed N] [--quiet]
//   pars_cli replay MANIFEST [--out DIR] [--quiet]
//   pars_cli print-config [--config FILE]
//
// Exit codes: 0 ok, 1 internal, 2 usage, 3 shape, 4 parse, 5 schema,
// 6 config, 7 invalid argument, 8 divergence, 9 unsupported dimension, 10 io.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pars/runner.hpp"

namespace {

constexpr int kUsageExit = 2;

struct CommonFlags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

void add_common(CLI::App* sub, CommonFlags& f, bool with_config = true) {
    if (with_config) sub->add_option("--config", f.config, "run config file (key = value with [sections])");
    sub->add_option("--out", f.out, "output directory (overrides run.out)");
    if (with_config) sub->add_option("--seed", f.seed, "root seed (overrides run.seed)");
    sub->add_flag("--quiet", f.quiet, "no progress messages");
}

pars::RunConfig load(const CommonFlags& f) {
    pars::RunConfig c = f.config.empty() ? pars::RunConfig{} : pars::parse_config_file(f.config);
    if (f.seed) c.seed = *f.seed;
    if (!f.out.empty()) c.out = f.out;
    pars::validate_config(c);
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reward-scaled, layer-normalized offline RL toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", pars::kToolVersion);

    CommonFlags flags;
    std::string chosen;
    for (const auto& name : pars::subcommands()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " pipeline");
        add_common(sub, flags);
        sub->callback([&chosen, name] { chosen = name; });
    }

    std::string manifest;
    auto* replay = app.add_subcommand("replay", "rerun a previous run from its manifest.json");
    replay->add_option("manifest", manifest, "path to manifest.json")->required();
    add_common(replay, flags, false);
    replay->callback([&chosen] { chosen = "replay"; });

    auto* print = app.add_subcommand("print-config", "print the resolved config with every default filled in");
    print->add_option("--config", flags.config, "run config file");
    print->callback([&chosen] { chosen = "print-config"; });

    if (argc > 1 && argv[1][0] != '-') {
        const std::string first = argv[1];
        if (!app.get_subcommand_no_throw(first)) {
            std::cerr << "unknown subcommand '" << first << "'\nRun with --help for more information.\n";
            return kUsageExit;
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageExit;
    }

    try {
        if (chosen == "print-config") {
            pars::serialize_config(std::cout, load(flags));
            return 0;
        }
        std::string sub = chosen;
        pars::RunConfig cfg;
        if (chosen == "replay") {
            pars::ManifestInfo info = pars::read_manifest(manifest);
            sub = info.subcommand;
            cfg = std::move(info.config);
            if (!flags.out.empty()) cfg.out = flags.out;
        } else {
            cfg = load(flags);
        }
        pars::RunContext ctx(cfg, cfg.out, flags.quiet);
        pars::run_subcommand(sub, ctx);
        if (!flags.quiet) std::cerr << sub << ": wrote " << ctx.artifacts().size() << " artifacts to " << cfg.out << '\n';
        return 0;
    } catch (const pars::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}
