#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "introplan/errors.hpp"
#include "introplan/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNeedsClarification = 2;
constexpr int kExitValidation = 3;
constexpr int kExitBackend = 4;

struct GlobalArgs {
    std::string config_path = "introplan.json";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> backend;
    bool offline = false;
};

introplan::harness::RunConfig load_config(const GlobalArgs& args) {
    introplan::harness::ConfigOverrides overrides;
    overrides.seed = args.seed;
    overrides.backend_kind = args.backend;
    overrides.offline = args.offline;
    return introplan::harness::RunConfig::load(args.config_path, overrides);
}

introplan::Scenario scenario_from_args(const std::string& file, const std::string& id,
                                       const std::string& scene, const std::string& instruction) {
    if (!file.empty()) {
        auto scenarios = introplan::load_scenarios_jsonl(file);
        if (id.empty()) {
            if (scenarios.size() != 1) {
                throw introplan::PreconditionError(
                    "scenario file has " + std::to_string(scenarios.size()) +
                    " scenarios; pass --id to pick one");
            }
            return scenarios.front();
        }
        for (auto& s : scenarios) {
            if (s.id == id) return s;
        }
        throw introplan::PreconditionError("no scenario with id '" + id + "' in " + file);
    }
    if (scene.empty() || instruction.empty()) {
        throw introplan::PreconditionError(
            "plan needs either --scenario-file or both --scene and --instruction");
    }
    introplan::Scenario s;
    s.id = id.empty() ? "cli" : id;
    s.scene = scene;
    s.observation = scene;
    s.instruction = instruction;
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Introspective planning toolkit: knowledge-base construction, conformal "
                 "calibration, and evaluation for language-model planners"};
    app.require_subcommand(1);

    GlobalArgs global;
    app.add_option("--config", global.config_path, "Run configuration file (JSON)");
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Override the run seed");
    std::string backend_value;
    auto* backend_opt =
        app.add_option("--backend", backend_value, "Override backend kind (synthetic|openai)");
    app.add_flag("--offline", global.offline, "Refuse network access (synthetic or cassette replay)");

    auto* build = app.add_subcommand("build-kb", "Build the introspective knowledge base");
    auto* calibrate = app.add_subcommand("calibrate", "Compute the conformal calibration artifact");
    auto* evaluate = app.add_subcommand("evaluate", "Run the planner over the test set and report metrics");
    auto* sweep = app.add_subcommand("sweep", "Sweep target success rates (or knowledge-base sizes)");

    auto* verify = app.add_subcommand("verify-coverage", "Monte Carlo check of the coverage guarantee");
    int v_n = 400;
    double v_eps = 0.15;
    int v_trials = 500;
    int v_tests = 2000;
    double v_delta = 0.01;
    std::uint64_t v_seed = 1;
    bool v_multilabel = false;
    verify->add_option("--n", v_n, "Calibration size per trial");
    verify->add_option("--epsilon", v_eps, "Calibration level epsilon-hat");
    verify->add_option("--trials", v_trials, "Number of independent trials");
    verify->add_option("--tests-per-trial", v_tests, "Fresh test points per trial");
    verify->add_option("--delta", v_delta, "Quantile level for the conditional bound");
    verify->add_option("--verify-seed", v_seed, "Seed for the Monte Carlo draws");
    verify->add_flag("--multilabel", v_multilabel, "Run the powerset variant over 3 labels");

    auto* plan = app.add_subcommand("plan", "Plan a single scenario and print the outcome");
    std::string plan_file, plan_id, plan_scene, plan_instruction;
    bool plan_interactive = false;
    plan->add_option("--scenario-file", plan_file, "JSONL file holding the scenario");
    plan->add_option("--id", plan_id, "Scenario id (with --scenario-file) or label for inline input");
    plan->add_option("--scene", plan_scene, "Inline scene description");
    plan->add_option("--instruction", plan_instruction, "Inline task instruction");
    plan->add_flag("--interactive", plan_interactive, "Read clarification answers from stdin");

    CLI11_PARSE(app, argc, argv);
    if (*seed_opt) global.seed = seed_value;
    if (*backend_opt) global.backend = backend_value;

    try {
        if (*build) {
            introplan::harness::cmd_build_kb(load_config(global), std::cout);
        } else if (*calibrate) {
            introplan::harness::cmd_calibrate(load_config(global), std::cout);
        } else if (*evaluate) {
            auto result = introplan::harness::cmd_evaluate(load_config(global), std::cout);
            std::cout << result.report.to_table();
        } else if (*sweep) {
            introplan::harness::cmd_sweep(load_config(global), std::cout);
        } else if (*verify) {
            auto report = introplan::harness::verify_coverage(v_n, v_eps, v_trials, v_tests,
                                                              v_delta, v_seed, v_multilabel);
            std::cout << report.to_json().dump(2) << "\n";
            std::cout << (report.mean_ok() ? "PASS" : "FAIL") << " mean coverage "
                      << report.mean_coverage << " vs analytic " << report.analytic_mean << " (+/- "
                      << report.mean_tolerance << ")\n";
            std::cout << (report.quantile_ok() ? "PASS" : "FAIL") << " delta-quantile "
                      << report.empirical_delta_quantile << " vs bound " << report.analytic_bound
                      << " (- " << report.quantile_tolerance << ")\n";
            if (!report.passed()) return 1;
        } else if (*plan) {
            auto scenario = scenario_from_args(plan_file, plan_id, plan_scene, plan_instruction);
            auto result = introplan::harness::cmd_plan(load_config(global), scenario,
                                                       plan_interactive, std::cin, std::cout);
            if (result.needs_clarification) return kExitNeedsClarification;
        }
        return kExitOk;
    } catch (const introplan::CredentialError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const introplan::TransportError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const introplan::ApiError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const introplan::MalformedResponseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const introplan::DegenerateDistributionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const introplan::PreconditionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const introplan::SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const introplan::VersionMismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const introplan::InfeasibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const introplan::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
