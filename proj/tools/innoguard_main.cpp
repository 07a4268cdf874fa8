// innoguard command-line front-end.
//
// Subcommands: simulate, detect, attack, reproduce.
// Exit codes: 0 success, 2 configuration error, 3 infeasible budgets,
// 4 finished without convergence (outputs still written).
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <innoguard/io.hpp>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNotConverged = 4;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Innovation-based detection suite and stealthy-disturbance designer"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::string innovations_path;
    std::optional<std::uint64_t> seed_override;
    double alpha = 0.05;
    int lags = 10;
    std::size_t summary_seeds = 100;

    CLI::App* sim = app.add_subcommand("simulate", "Simulate a run and emit CSVs");
    sim->add_option("--config", config_path, "JSON config or manifest")->required();
    sim->add_option("--out", out_dir, "output directory");
    sim->add_option("--seed", seed_override, "override the config seed");

    CLI::App* det = app.add_subcommand("detect", "Run the SDS on an innovation CSV");
    det->add_option("--input", innovations_path, "innovation CSV")->required();
    det->add_option("--alpha", alpha, "significance level");
    det->add_option("--lags", lags, "portmanteau lags");
    det->add_option("--out", out_dir, "output directory");

    CLI::App* atk = app.add_subcommand("attack", "Synthesize a stealthy FIR plan");
    atk->add_option("--config", config_path, "JSON config or manifest")->required();
    atk->add_option("--out", out_dir, "output directory");
    atk->add_option("--seed", seed_override, "override the config seed");

    CLI::App* rep = app.add_subcommand("reproduce", "Regenerate the case-study figure data");
    rep->add_option("--out", out_dir, "output directory");
    rep->add_option("--seed", seed_override, "representative seed");
    rep->add_option("--summary-seeds", summary_seeds, "seeds for the rate summary");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            innoguard::RunConfig cfg = innoguard::parse_config(config_path);
            if (seed_override) {
                cfg.seed = *seed_override;
                cfg.raw["seed"] = *seed_override;
                cfg.scenario.seeds = {*seed_override};
            }
            const auto outputs = innoguard::cmd_simulate(cfg, out_dir);
            for (const auto& f : outputs) std::cout << out_dir << "/" << f << "\n";
            return kExitOk;
        }
        if (det->parsed()) {
            const std::filesystem::path out =
                std::filesystem::path(out_dir) / "sds_report.json";
            std::filesystem::create_directories(out_dir);
            const innoguard::SdsReport r = innoguard::cmd_detect(innovations_path, alpha, lags, out);
            std::cout << innoguard::report_to_json(r).dump(2) << "\n";
            return kExitOk;
        }
        if (atk->parsed()) {
            innoguard::RunConfig cfg = innoguard::parse_config(config_path);
            if (seed_override) {
                cfg.seed = *seed_override;
                cfg.raw["seed"] = *seed_override;
            }
            const innoguard::AttackPlan plan = innoguard::cmd_attack(cfg, out_dir);
            std::cout << "J_relax=" << plan.J_relax << " J_rec=" << plan.J_rec
                      << " gamma=" << plan.gamma << " certificate=" << plan.certificate << "\n";
            if (!plan.relaxation_converged || !plan.recovery_converged) return kExitNotConverged;
            return kExitOk;
        }
        if (rep->parsed()) {
            innoguard::cmd_reproduce(out_dir, seed_override.value_or(1), summary_seeds);
            std::cout << "wrote " << out_dir << "/DATAattackA.csv, DATAattackB.csv, "
                      << "pvalue_bars.csv, summary.md\n";
            return kExitOk;
        }
    } catch (const innoguard::ConfigParse& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const innoguard::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const innoguard::InfeasibleBudgets& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
