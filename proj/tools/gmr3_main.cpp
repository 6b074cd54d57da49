#include <CLI11.hpp>
#include <iostream>
#include <nlohmann/json.hpp>

#include "gmr3/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generalized mixed reduced rank regression"};
  app.require_subcommand(1);
  gmr3::RunConfig cfg;
  std::string ranks = "1..5";
  std::string step_order = "standard";
  std::uint64_t seed = 0;
  bool no_count_sigma2 = false;

  auto common = [&](CLI::App* sub, bool needs_schema) {
    sub->add_option("--data", cfg.data, "CSV data file")->required();
    auto* s = sub->add_option("--schema", cfg.schema, "variable schema JSON");
    if (needs_schema) s->required();
    sub->add_option("--output,-o", cfg.output_dir, "output directory");
    sub->add_option("--threads", cfg.threads, "worker thread cap");
    sub->add_option("--tolerance", cfg.tolerance, "NLL decrease at convergence");
    sub->add_option("--max-iterations", cfg.max_iterations);
    sub->add_option("--step-order", step_order, "standard | loadings-first");
    sub->add_flag("--no-count-sigma2", no_count_sigma2, "leave sigma^2 out of K");
    sub->add_option("--seed", seed, "master seed");
  };

  auto* fit = app.add_subcommand("fit", "fit a model of rank S (S = 0 fits the null model)");
  common(fit, true);
  fit->add_option("--rank,-S", cfg.rank)->required();

  auto* predict = app.add_subcommand("predict", "predict from a fitted model");
  common(predict, false);
  predict->add_option("--model", cfg.model)->required();
  predict->add_flag("--neutral-impute-unseen", cfg.neutral_impute_unseen, "score unseen categories as 0");

  auto* select = app.add_subcommand("select", "information criteria over a rank range");
  common(select, true);
  select->add_option("--ranks", ranks, "e.g. 1..5 or 1,2,4");

  auto* cv = app.add_subcommand("cv", "repeated V-fold cross-validation");
  common(cv, true);
  cv->add_option("--ranks", ranks);
  cv->add_option("--folds,-V", cfg.folds);
  cv->add_option("--repeats,-L", cfg.repeats);

  auto* boot = app.add_subcommand("bootstrap", "balanced pairs bootstrap");
  common(boot, true);
  boot->add_option("--rank,-S", cfg.rank)->required();
  boot->add_option("--replicates,-B", cfg.replicates);

  auto* sim = app.add_subcommand("simulate", "parameter recovery study");
  sim->add_option("--output,-o", cfg.output_dir);
  sim->add_option("--threads", cfg.threads);
  sim->add_option("--seed", seed, "master seed");
  sim->add_option("--reps", cfg.reps);
  sim->add_option("--n", cfg.sim_n);
  sim->add_option("--scenarios", cfg.scenarios)->delimiter(',');
  sim->add_option("--tolerance", cfg.tolerance);
  sim->add_option("--max-iterations", cfg.max_iterations);

  auto* cmp = app.add_subcommand("compare", "separate dummy-coded models versus the reduced-rank fit");
  common(cmp, true);
  cmp->add_option("--rank,-S", cfg.rank)->required();
  cmp->add_option("--replicates,-B", cfg.replicates);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  CLI::App* chosen = app.get_subcommands().front();
  cfg.command = chosen->get_name();
  if (chosen->count("--seed") > 0) cfg.seed = seed;
  cfg.count_sigma2 = !no_count_sigma2;
  try {
    if (chosen->get_option_no_throw("--ranks")) cfg.ranks = gmr3::parse_rank_list(ranks);
    cfg.step_order = gmr3::parse_step_order(step_order);
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "config"}, {"message", e.what()}, {"exit_code", 2}}.dump() << '\n';
    return 2;
  }
  return gmr3::run(cfg, std::cout, std::cerr);
}
