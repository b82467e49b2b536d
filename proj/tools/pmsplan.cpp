#include <string>

#include <CLI11.hpp>

#include "pmsplan/pmsplan.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Post-market surveillance sampling planner"};
    app.require_subcommand(1);

    std::string data_path, config_path, out_path, plans_path, grid_path;
    bool oracle = false;
    int replications = 1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--data", data_path, "test records CSV")->required();
        sub->add_option("--config", config_path, "configuration file")->required();
        sub->add_option("--out", out_path, "output directory")->required();
    };

    CLI::App* infer = app.add_subcommand("infer", "sample the SFP-rate posterior");
    add_common(infer);

    CLI::App* utility = app.add_subcommand("utility", "estimate utility of named plans");
    add_common(utility);
    utility->add_option("--plans", plans_path, "plan weights CSV")->required();
    utility->add_flag("--oracle", oracle, "use the reference estimator (slow)");

    CLI::App* plan = app.add_subcommand("plan", "greedy budget allocation with baselines");
    add_common(plan);
    plan->add_option("--replications", replications, "independent repeats with fresh seeds")
        ->check(CLI::PositiveNumber);

    CLI::App* sens = app.add_subcommand("sensitivity", "greedy allocation per scenario row");
    add_common(sens);
    sens->add_option("--grid", grid_path, "scenario grid CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? pms::exit_ok : pms::exit_input_error;
    }

    if (infer->parsed()) return pms::cmd_infer(data_path, config_path, out_path);
    if (utility->parsed()) {
        return pms::cmd_utility(data_path, config_path, plans_path, out_path, oracle);
    }
    if (plan->parsed()) return pms::cmd_plan(data_path, config_path, out_path, replications);
    if (sens->parsed()) return pms::cmd_sensitivity(data_path, config_path, grid_path, out_path);
    return pms::exit_input_error;
}
