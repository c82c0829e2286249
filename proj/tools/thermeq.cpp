// Command-line front end: validate and execute experiment configs.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.
// Errors go to stderr as a single JSON object so callers can parse them.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "thermeq/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void print_error(const std::string& kind, const std::vector<std::string>& messages) {
    nlohmann::json err;
    err["error"] = {{"kind", kind}, {"messages", messages}};
    std::cerr << err.dump() << '\n';
}

std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::optional<thermeq::runner::RunConfig> load_config(const std::string& path, int& exit_code) {
    const auto text = read_file(path);
    if (!text) {
        print_error("config", {"cannot read config file: " + path});
        exit_code = kExitConfig;
        return std::nullopt;
    }
    auto outcome = thermeq::runner::parse_config(*text);
    if (!outcome.ok()) {
        print_error("config", outcome.errors);
        exit_code = kExitConfig;
        return std::nullopt;
    }
    return std::move(*outcome.config);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"thermeq: stochastic kinetics of a two-component gas"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(thermeq::runner::kToolVersion));

    std::string config_path;
    std::string output_dir;
    std::uint64_t seed = 0;
    unsigned workers = 0;

    auto* run_cmd = app.add_subcommand("run", "execute an experiment config");
    run_cmd->add_option("--config", config_path, "JSON config file")->required();
    auto* out_opt = run_cmd->add_option("--output-dir", output_dir,
                                        "output directory (overrides config)");
    auto* seed_opt = run_cmd->add_option("--seed", seed, "seed override (overrides config)");
    auto* workers_opt =
        run_cmd->add_option("--workers", workers, "worker thread override (0 = all cores)");

    std::string validate_path;
    auto* validate_cmd = app.add_subcommand("validate", "check a config without running it");
    validate_cmd->add_option("--config", validate_path, "JSON config file")->required();

    auto* schema_cmd = app.add_subcommand("schema", "print the config schema");

    CLI11_PARSE(app, argc, argv);

    if (schema_cmd->parsed()) {
        std::cout << thermeq::runner::config_schema_text();
        return kExitOk;
    }

    if (validate_cmd->parsed()) {
        int exit_code = kExitOk;
        const auto cfg = load_config(validate_path, exit_code);
        if (!cfg) return exit_code;
        std::cout << "ok: " << cfg->experiment << '\n';
        return kExitOk;
    }

    // run
    int exit_code = kExitOk;
    auto cfg = load_config(config_path, exit_code);
    if (!cfg) return exit_code;
    if (*workers_opt) cfg->workers = workers;
    std::optional<std::string> out_override;
    if (*out_opt) out_override = output_dir;
    std::optional<std::uint64_t> seed_override;
    if (*seed_opt) seed_override = seed;
    try {
        const auto result = thermeq::runner::run(*cfg, out_override, seed_override);
        std::cout << "wrote " << result.outputs.size() << " output file"
                  << (result.outputs.size() == 1 ? "" : "s") << " + manifest.json to "
                  << result.output_dir.string() << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        print_error("runtime", {e.what()});
        return kExitRuntime;
    }
}
