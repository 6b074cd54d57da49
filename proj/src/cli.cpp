#include "gmr3/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "gmr3/baseline.hpp"
#include "gmr3/csv.hpp"
#include "gmr3/error.hpp"
#include "gmr3/inference.hpp"
#include "gmr3/kernels.hpp"
#include "gmr3/model_io.hpp"
#include "gmr3/model_selection.hpp"
#include "gmr3/rng.hpp"
#include "gmr3/simulation.hpp"

namespace gmr3 {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fnv_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string to_string(StepOrder s) { return s == StepOrder::Standard ? "standard" : "loadings-first"; }

/// Six significant digits for human-facing tables.
std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

class Output {
 public:
  Output(const RunConfig& cfg, fs::path dir) : cfg_(cfg), dir_(std::move(dir)) { fs::create_directories(dir_); }

  const fs::path& dir() const { return dir_; }

  /// Opens a CSV and writes its sidecar.
  std::ofstream csv(const std::string& name) {
    json meta = {{"version", kVersion},
                 {"command", cfg_.command},
                 {"seed", cfg_.seed ? json(*cfg_.seed) : json(nullptr)},
                 {"rng", std::string(kRngName)},
                 {"config_digest", cfg_.digest()}};
    std::ofstream side(dir_ / (name + ".meta.json"));
    side << meta.dump(2) << '\n';
    std::ofstream out(dir_ / name);
    if (!out) throw Error("cannot write " + (dir_ / name).string());
    return out;
  }

  void json_file(const std::string& name, const json& j) {
    std::ofstream out(dir_ / name);
    if (!out) throw Error("cannot write " + (dir_ / name).string());
    out << j.dump(2) << '\n';
  }

 private:
  const RunConfig& cfg_;
  fs::path dir_;
};

FitOptions fit_options(const RunConfig& c) {
  FitOptions f;
  f.tolerance = c.tolerance;
  f.max_iterations = c.max_iterations;
  f.step_order = c.step_order;
  if (c.seed) f.seed = derive_seed(*c.seed, "fit-init");
  return f;
}

std::uint64_t require_seed(const RunConfig& c) {
  if (!c.seed) throw ContractError("command '" + c.command + "' requires --seed");
  return *c.seed;
}

VariableSchema load_schema(const RunConfig& c) {
  if (c.schema.empty()) throw ContractError("--schema is required");
  return VariableSchema::load(c.schema);
}

Dataset load_training(const RunConfig& c) {
  if (c.data.empty()) throw ContractError("--data is required");
  return load_dataset(c.data, load_schema(c));
}

void write_matrix_table(std::ostream& out, const std::string& corner, const std::vector<std::string>& rows,
                        const std::vector<std::string>& cols, const Matrix& m) {
  csv::Row header{corner};
  header.insert(header.end(), cols.begin(), cols.end());
  csv::write_row(out, header);
  for (Index i = 0; i < m.rows(); ++i) {
    csv::Row row{rows[static_cast<std::size_t>(i)]};
    for (Index j = 0; j < m.cols(); ++j) row.push_back(fmt(m(i, j)));
    csv::write_row(out, row);
  }
}

std::vector<std::string> predictor_names(const ModelParams& p) {
  std::vector<std::string> out;
  for (const auto& t : p.transforms) out.push_back(t.name);
  return out;
}

json summary_json(const FitResult& f, const Dataset& d, double null_nll, bool count_sigma2) {
  const int k = count_parameters(d.schema(), f.params.rank, count_sigma2);
  InformationCriteria ic = information_criteria(f.nll(), k, d.n(), null_nll);
  return {{"S", f.params.rank}, {"nll", f.nll()},          {"K", k},
          {"AIC", ic.aic},      {"BIC", ic.bic},           {"R2_adjusted", ic.r2_adjusted},
          {"iterations", f.iterations}, {"converged", f.converged}, {"warnings", f.warnings}};
}

int cmd_fit(const RunConfig& c, Output& o, std::ostream& out) {
  Dataset d = load_training(c);
  NullFit null_fit = fit_null(d, c.count_sigma2);
  if (c.rank == 0) {
    json j = {{"S", 0}, {"nll", null_fit.nll}, {"K", null_fit.n_parameters}, {"sigma2", null_fit.sigma2},
              {"m", std::vector<double>(null_fit.m.data(), null_fit.m.data() + null_fit.m.size())}};
    o.json_file("null_model.json", j);
    out << "null model: NLL " << fmt(null_fit.nll) << ", K " << null_fit.n_parameters << '\n';
    return 0;
  }
  FitResult f = fit(d, c.rank, fit_options(c));
  write_model(o.dir() / "model.json", d.schema(), f);
  json s = summary_json(f, d, null_fit.nll, c.count_sigma2);
  {
    auto csvf = o.csv("fit_summary.csv");
    csv::write_row(csvf, {"S", "L", "K", "AIC", "BIC", "R2_a", "iterations", "converged"});
    csv::write_row(csvf, {std::to_string(c.rank), fmt(f.nll()), std::to_string(s["K"].get<int>()),
                          fmt(s["AIC"].get<double>()), fmt(s["BIC"].get<double>()),
                          fmt(s["R2_adjusted"].get<double>()), std::to_string(f.iterations),
                          f.converged ? "1" : "0"});
  }
  {
    auto trace = o.csv("nll_trace.csv");
    csv::write_row(trace, {"iteration", "nll"});
    for (std::size_t k = 0; k < f.nll_trace.size(); ++k) {
      std::ostringstream v;
      v << std::setprecision(17) << f.nll_trace[k];
      csv::write_row(trace, {std::to_string(k), v.str()});
    }
  }
  {
    auto coef = o.csv("implied_coefficients.csv");
    write_matrix_table(coef, "predictor", predictor_names(f.params), f.params.response_names,
                       implied_coefficients(f.params.b, f.params.v));
  }
  for (const auto& w : f.warnings) out << "warning: " << w << '\n';
  out << "S=" << c.rank << " NLL " << fmt(f.nll()) << " K " << s["K"] << " iterations " << f.iterations
      << (f.converged ? "" : " (not converged)") << '\n';
  return f.converged ? 0 : 3;
}

int cmd_predict(const RunConfig& c, Output& o, std::ostream& out) {
  if (c.model.empty()) throw ContractError("--model is required");
  ModelFile m = read_model(c.model);
  if (!c.schema.empty()) {
    VariableSchema s = load_schema(c);
    if (s.digest() != m.schema.digest()) throw DataError("schema does not match the one the model was fitted with");
  }
  LoadOptions lo;
  lo.require_all_categories = false;
  lo.responses_optional = true;
  lo.unknown_labels = c.neutral_impute_unseen ? UnknownLabels::MarkUnknown : UnknownLabels::Reject;
  if (c.data.empty()) throw ContractError("--data is required");
  Dataset d = load_dataset(c.data, m.schema, lo);
  Prediction p = predict(m.params, d, c.neutral_impute_unseen);
  auto f = o.csv("predictions.csv");
  const auto& P = m.params;
  const auto resp = m.schema.responses();
  csv::Row header{"row"};
  for (const auto& n : P.response_names) header.push_back("theta_" + n);
  for (std::size_t r = 0; r < P.response_names.size(); ++r) {
    const auto& n = P.response_names[r];
    switch (P.families[r]) {
      case Family::Numeric: header.push_back("mean_" + n); break;
      case Family::Binary: header.push_back("p_" + n); break;
      case Family::Ordinal:
        for (const auto& cat : m.schema[resp[r]].categories) header.push_back("p_" + n + "_" + cat);
        header.push_back("class_" + n);
        break;
    }
  }
  csv::write_row(f, header);
  for (Index i = 0; i < d.n(); ++i) {
    csv::Row row{std::to_string(i + 1)};
    for (Index r = 0; r < p.theta.cols(); ++r) {
      std::ostringstream v;
      v << std::setprecision(17) << p.theta(i, r);
      row.push_back(v.str());
    }
    for (std::size_t r = 0; r < P.response_names.size(); ++r) {
      const Index rr = static_cast<Index>(r);
      if (P.families[r] != Family::Ordinal) {
        row.push_back(fmt(p.expected(i, rr)));
        continue;
      }
      for (Index k = 0; k < p.probabilities[r].cols(); ++k) row.push_back(fmt(p.probabilities[r](i, k)));
      row.push_back(m.schema[resp[r]].categories[static_cast<std::size_t>(p.classes[r][i] - 1)]);
    }
    csv::write_row(f, row);
  }
  out << "predicted " << d.n() << " rows\n";
  return 0;
}

int cmd_select(const RunConfig& c, Output& o, std::ostream& out) {
  Dataset d = load_training(c);
  SelectionReport rep = select_rank(d, c.ranks, fit_options(c), c.count_sigma2);
  auto f = o.csv("selection.csv");
  csv::write_row(f, {"S", "L", "K", "AIC", "BIC", "R2_a", "converged"});
  bool all_converged = true;
  for (const auto& r : rep.rows) {
    csv::write_row(f, {std::to_string(r.rank), fmt(r.nll), std::to_string(r.k), fmt(r.aic), fmt(r.bic),
                       fmt(r.r2_adjusted), r.converged ? "1" : "0"});
    all_converged = all_converged && r.converged;
    out << "S=" << r.rank << " L " << fmt(r.nll) << " K " << r.k << " AIC " << fmt(r.aic) << " BIC " << fmt(r.bic)
        << " R2_a " << fmt(r.r2_adjusted) << '\n';
  }
  o.json_file("selection.json", {{"null_nll", rep.null_nll},
                                 {"chosen_aic", rep.chosen_aic},
                                 {"chosen_bic", rep.chosen_bic},
                                 {"chosen_r2_adjusted", rep.chosen_r2}});
  return all_converged ? 0 : 3;
}

int cmd_cv(const RunConfig& c, Output& o, std::ostream& out) {
  Dataset d = load_training(c);
  CvOptions opt;
  opt.folds = c.folds;
  opt.repeats = c.repeats;
  opt.seed = require_seed(c);
  opt.fit = fit_options(c);
  CvReport rep = cross_validate(d, c.ranks, opt);
  {
    auto f = o.csv("cv_curve.csv");
    csv::write_row(f, {"S", "mean", "se"});
    for (const auto& p : rep.curve) csv::write_row(f, {std::to_string(p.rank), fmt(p.mean), fmt(p.se)});
  }
  {
    auto f = o.csv("cv_folds.csv");
    csv::write_row(f, {"S", "repeat", "fold", "loss"});
    for (const auto& p : rep.curve)
      for (std::size_t k = 0; k < p.fold_estimates.size(); ++k)
        csv::write_row(f, {std::to_string(p.rank), std::to_string(k / static_cast<std::size_t>(c.folds) + 1),
                           std::to_string(k % static_cast<std::size_t>(c.folds) + 1), fmt(p.fold_estimates[k])});
  }
  o.json_file("cv_report.json",
              {{"chosen_min", rep.chosen_min}, {"chosen_one_se", rep.chosen_one_se}, {"notes", rep.notes}});
  for (const auto& p : rep.curve) out << "S=" << p.rank << " CV " << fmt(p.mean) << " (se " << fmt(p.se) << ")\n";
  out << "minimum at S=" << rep.chosen_min << ", one-SE rule S=" << rep.chosen_one_se << '\n';
  return 0;
}

int cmd_bootstrap(const RunConfig& c, Output& o, std::ostream& out) {
  Dataset d = load_training(c);
  FitResult ref = fit(d, c.rank, fit_options(c));
  if (!ref.converged) throw ConvergenceError("reference fit did not converge");
  BootstrapOptions bo;
  bo.replicates = c.replicates;
  bo.seed = require_seed(c);
  bo.fit = fit_options(c);
  BootstrapReplicates reps = run_bootstrap(d, ref, bo);
  const auto names = predictor_names(ref.params);
  {
    auto f = o.csv("bootstrap_replicates.csv");
    csv::write_row(f, {"replicate", "parameter", "row", "column", "value"});
    for (std::size_t k = 0; k < reps.params.size(); ++k) {
      const auto& p = reps.params[k];
      const std::string id = std::to_string(reps.replicate_ids[k]);
      for (Index i = 0; i < p.b.rows(); ++i)
        for (Index s = 0; s < p.b.cols(); ++s)
          csv::write_row(f, {id, "B", names[static_cast<std::size_t>(i)], std::to_string(s + 1), fmt(p.b(i, s))});
      for (Index r = 0; r < p.v.rows(); ++r)
        for (Index s = 0; s < p.v.cols(); ++s)
          csv::write_row(f, {id, "V", p.response_names[static_cast<std::size_t>(r)], std::to_string(s + 1),
                             fmt(p.v(r, s))});
      for (Index r = 0; r < p.m.size(); ++r)
        csv::write_row(f, {id, "m", p.response_names[static_cast<std::size_t>(r)], "1", fmt(p.m[r])});
      for (std::size_t r = 0; r < p.thresholds.size(); ++r)
        for (Index t = 0; t < p.thresholds[r].size(); ++t)
          csv::write_row(f, {id, "t", p.response_names[r], std::to_string(t + 1), fmt(p.thresholds[r][t])});
    }
  }
  {
    auto f = o.csv("ellipses.csv");
    csv::Row header{"predictor", "level", "quantile", "distance2", "degenerate", "contains_origin"};
    const Index S = ref.params.rank;
    for (Index s = 0; s < S; ++s) header.push_back("center_" + std::to_string(s + 1));
    for (Index a = 0; a < S; ++a)
      for (Index b = a; b < S; ++b) header.push_back("cov_" + std::to_string(a + 1) + std::to_string(b + 1));
    csv::write_row(f, header);
    for (std::size_t p = 0; p < names.size(); ++p) {
      ConfidenceRegion e = confidence_region(weight_draws(reps, static_cast<Index>(p)), 0.95);
      csv::Row row{names[p], fmt(e.level), fmt(e.quantile), fmt(e.distance2), e.degenerate ? "1" : "0",
                   e.contains_origin ? "1" : "0"};
      for (Index s = 0; s < S; ++s) row.push_back(fmt(e.center[s]));
      for (Index a = 0; a < S; ++a)
        for (Index b = a; b < S; ++b) row.push_back(fmt(e.covariance(a, b)));
      csv::write_row(f, row);
      out << names[p] << (e.contains_origin ? ": region includes the origin\n" : ": region excludes the origin\n");
    }
  }
  std::vector<Matrix> draws;
  for (const auto& p : reps.params) draws.push_back(category_contrasts(p).values);
  ContrastTable point = category_contrasts(ref.params);
  {
    auto f = o.csv("contrasts.csv");
    write_matrix_table(f, "contrast", point.rows, point.columns, point.values);
  }
  {
    auto f = o.csv("bootstrap_se.csv");
    write_matrix_table(f, "contrast", point.rows, point.columns, bootstrap_se(draws));
  }
  o.json_file("bootstrap_report.json", {{"replicates", c.replicates},
                                        {"succeeded", reps.params.size()},
                                        {"failures", reps.failures}});
  out << reps.params.size() << " of " << c.replicates << " replicates used\n";
  return 0;
}

int cmd_simulate(const RunConfig& c, Output& o, std::ostream& out) {
  const std::uint64_t seed = require_seed(c);
  std::vector<SimConfig> configs;
  for (const auto& name : c.scenarios) {
    SimConfig s;
    s.scenario = parse_scenario(name);
    s.n = c.sim_n;
    configs.push_back(s);
  }
  FitOptions fo = fit_options(c);
  auto rows = run_study(configs, c.reps, seed, fo);
  {
    auto f = o.csv("simulation.csv");
    write_study_csv(f, rows);
  }
  auto f = o.csv("simulation_summary.csv");
  csv::write_row(f, {"scenario", "n", "reps", "failed", "q25", "median", "q75"});
  for (const auto& cfg : configs) {
    std::vector<double> v;
    int failed = 0;
    for (const auto& r : rows) {
      if (r.scenario != cfg.scenario || r.n != cfg.n) continue;
      if (r.error.empty()) v.push_back(r.rmse);
      else ++failed;
    }
    std::sort(v.begin(), v.end());
    auto q = [&](double p) {
      if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
      const double pos = p * static_cast<double>(v.size() - 1);
      const std::size_t lo = static_cast<std::size_t>(pos);
      const std::size_t hi = std::min(lo + 1, v.size() - 1);
      return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    csv::write_row(f, {to_string(cfg.scenario), std::to_string(cfg.n), std::to_string(c.reps), std::to_string(failed),
                       fmt(q(0.25)), fmt(q(0.5)), fmt(q(0.75))});
    out << to_string(cfg.scenario) << ": median RMSE " << fmt(q(0.5)) << '\n';
  }
  return 0;
}

int cmd_compare(const RunConfig& c, Output& o, std::ostream& out) {
  Dataset d = load_training(c);
  FitResult ref = fit(d, c.rank, fit_options(c));
  if (!ref.converged) throw ConvergenceError("reduced-rank fit did not converge");
  CompareOptions co;
  co.replicates = c.replicates;
  co.seed = require_seed(c);
  co.fit = fit_options(c);
  co.count_sigma2 = c.count_sigma2;
  ComparisonReport rep = compare(d, ref, co);
  {
    auto f = o.csv("compare_criteria.csv");
    csv::write_row(f, {"model", "deviance", "K", "AIC", "BIC"});
    for (const auto& r : {rep.separate, rep.reduced}) {
      csv::write_row(f, {r.model, fmt(r.deviance), std::to_string(r.k), fmt(r.aic), fmt(r.bic)});
      out << r.model << ": deviance " << fmt(r.deviance) << " K " << r.k << " AIC " << fmt(r.aic) << " BIC "
          << fmt(r.bic) << '\n';
    }
  }
  auto table = [&](const std::string& name, const Matrix& m) {
    auto f = o.csv(name);
    write_matrix_table(f, "contrast", rep.rows, rep.columns, m);
  };
  table("separate_coefficients.csv", rep.separate_coefficients);
  table("gmr3_contrasts.csv", rep.reduced_contrasts);
  table("separate_se.csv", rep.separate_se);
  table("gmr3_se.csv", rep.reduced_se);
  o.json_file("compare_report.json", {{"separation_flagged", rep.separated},
                                      {"separate_failed_replicates", rep.separate_failures},
                                      {"gmr3_failed_replicates", rep.reduced_failures}});
  return 0;
}

}  // namespace

json RunConfig::to_json() const {
  return {{"command", command},
          {"data", data},
          {"schema", schema},
          {"model", model},
          {"rank", rank},
          {"ranks", ranks},
          {"folds", folds},
          {"repeats", repeats},
          {"replicates", replicates},
          {"seed", seed ? json(*seed) : json(nullptr)},
          {"tolerance", tolerance},
          {"max_iterations", max_iterations},
          {"neutral_impute_unseen", neutral_impute_unseen},
          {"count_sigma2", count_sigma2},
          {"step_order", to_string(step_order)},
          {"reps", reps},
          {"sim_n", sim_n},
          {"scenarios", scenarios}};
}

std::string RunConfig::digest() const { return fnv_hex(to_json().dump()); }

std::vector<int> parse_rank_list(const std::string& text) {
  std::vector<int> out;
  auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw ContractError("invalid rank list '" + text + "'");
    return v;
  };
  if (auto dots = text.find(".."); dots != std::string::npos) {
    int lo = to_int(text.substr(0, dots)), hi = to_int(text.substr(dots + 2));
    if (lo > hi) throw ContractError("invalid rank range '" + text + "'");
    for (int s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(item));
  if (out.empty()) throw ContractError("empty rank list");
  return out;
}

StepOrder parse_step_order(const std::string& text) {
  if (text == "standard") return StepOrder::Standard;
  if (text == "loadings-first") return StepOrder::LoadingsFirst;
  throw ContractError("unknown step order '" + text + "'");
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  RunConfig c = config;
  if (const char* env = std::getenv("GMR3_OUTPUT_DIR"); env && *env && c.output_dir == ".") c.output_dir = env;
  if (const char* env = std::getenv("GMR3_THREADS"); env && *env && c.threads == 0) c.threads = std::atoi(env);
  if (c.threads > 0) kernels::set_max_threads(c.threads);

  int code = 1;
  std::string kind = "error";
  std::string message;
  try {
    Output o(c, c.output_dir);
    if (c.command == "fit") return cmd_fit(c, o, out);
    if (c.command == "predict") return cmd_predict(c, o, out);
    if (c.command == "select") return cmd_select(c, o, out);
    if (c.command == "cv") return cmd_cv(c, o, out);
    if (c.command == "bootstrap") return cmd_bootstrap(c, o, out);
    if (c.command == "simulate") return cmd_simulate(c, o, out);
    if (c.command == "compare") return cmd_compare(c, o, out);
    throw ContractError("unknown command '" + c.command + "'");
  } catch (const ConvergenceError& e) {
    code = 3, kind = "convergence", message = e.what();
  } catch (const DataError& e) {
    code = 2, kind = "data", message = e.what();
  } catch (const ContractError& e) {
    code = 2, kind = "config", message = e.what();
  } catch (const std::exception& e) {
    code = 1, kind = "error", message = e.what();
  }
  json record = {{"error", kind}, {"message", message}, {"exit_code", code}, {"command", c.command}};
  err << record.dump() << '\n';
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  std::ofstream f(fs::path(c.output_dir) / "error.json");
  if (f) f << record.dump(2) << '\n';
  return code;
}

}  // namespace gmr3
