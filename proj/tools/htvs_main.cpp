// Copyright 2026 The htvs-opt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// htvs: command-line front end.
//
//   htvs gen      --rho 0.8 --n 100000 --seed 7 --out pop.csv
//   htvs fit      --in pop.csv --auto-k --out model.json
//   htvs optimize --preset paper-synthetic --rho 0.8 --alpha 0.5 --out result.json
//   htvs simulate --table pop.csv --policy result.json --preset paper-synthetic --out sim.json
//   htvs sweep    --config campaign.json --budgets 1e7,2e7 --out curve.csv
//
// Exit codes: 0 success, 2 usage or validation error, 3 numeric failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "htvs/error.hpp"
#include "htvs/gmm.hpp"
#include "htvs/io.hpp"
#include "htvs/optimizer.hpp"
#include "htvs/simulator.hpp"

namespace {

using htvs::ErrorCode;
using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

// Validation failure tied to a specific flag.
struct UsageError {
  std::string message;
};

[[noreturn]] void usage(const std::string& flag, const std::string& what) { throw UsageError{flag + ": " + what}; }

std::vector<double> parse_list(const std::string& flag, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(htvs::parse_real(tok));
    } catch (const htvs::Error&) {
      usage(flag, "not a number: '" + tok + "'");
    }
  }
  return out;
}

void print_config(const std::string& command, const json& resolved) {
  std::cout << "# " << command << " resolved config\n" << resolved.dump(2) << "\n";
}

struct CampaignFlags {
  std::string config;
  std::string preset;
  double rho = 0.8;
  std::optional<double> alpha;
  std::optional<double> budget;
};

void add_campaign_flags(CLI::App* cmd, CampaignFlags& f) {
  cmd->add_option("--config", f.config, "campaign JSON")->check(CLI::ExistingFile);
  cmd->add_option("--preset", f.preset, "built-in campaign")->check(CLI::IsMember({"paper-synthetic"}));
  cmd->add_option("--rho", f.rho, "correlation for the paper-synthetic preset");
  cmd->add_option("--alpha", f.alpha, "joint mode with this alpha");
  cmd->add_option("--budget", f.budget, "budgeted mode with this budget");
}

struct Campaign {
  htvs::CampaignConfig config;
  std::filesystem::path base_dir;
};

Campaign load_campaign(const CampaignFlags& f, int threads) {
  if (f.config.empty() == f.preset.empty()) usage("--config/--preset", "give exactly one of them");
  if (f.alpha && f.budget) usage("--alpha/--budget", "give at most one of them");
  Campaign c;
  if (!f.config.empty()) {
    c.config = htvs::load_campaign(f.config);
    c.base_dir = std::filesystem::path(f.config).parent_path();
  } else {
    if (!(f.rho > -1.0 && f.rho < 1.0)) usage("--rho", "must lie in (-1, 1)");
    c.config = htvs::paper_synthetic_campaign(f.rho);
    c.base_dir = std::filesystem::current_path();
  }
  if (f.alpha) {
    if (!(*f.alpha >= 0.0 && *f.alpha <= 1.0)) usage("--alpha", "must lie in [0, 1]");
    c.config.mode = htvs::JointMode{*f.alpha};
  }
  if (f.budget) {
    if (!(*f.budget >= 0.0)) usage("--budget", "must be non-negative");
    c.config.mode = htvs::BudgetedMode{*f.budget};
  }
  c.config.optimizer.threads = threads;
  return c;
}

htvs::OptimizationResult run_optimizer(const htvs::GmmModel& model, const htvs::CampaignConfig& c) {
  if (const auto* b = std::get_if<htvs::BudgetedMode>(&c.mode)) {
    return htvs::optimize_budgeted(model, c.pipeline, {b->budget}, c.optimizer);
  }
  return htvs::optimize_joint(model, c.pipeline, std::get<htvs::JointMode>(c.mode).alpha, c.optimizer);
}

void print_policy(const htvs::Policy& p) {
  std::cout << "policy:";
  for (double t : p.thresholds) std::cout << " " << htvs::format_real(t);
  std::cout << "\n";
}

void print_selection(const htvs::ComponentSelection& sel) {
  std::cout << "k,bic\n";
  for (std::size_t j = 0; j < sel.bic.size(); ++j) {
    std::cout << j + 1 << "," << htvs::format_real(sel.bic[j]) << "\n";
  }
  std::cout << "chosen k: " << sel.k << "\n";
}

int threads_from_env() {
  if (const char* env = std::getenv("HTVS_OPT_THREADS")) {
    try {
      const int t = std::stoi(env);
      if (t >= 1) return t;
    } catch (const std::exception&) {
    }
    usage("HTVS_OPT_THREADS", "must be a positive integer");
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Screening-policy optimizer for multi-stage virtual screening pipelines"};
  app.require_subcommand(1);
  std::optional<int> threads_flag;
  app.add_option("--threads", threads_flag, "worker threads (falls back to HTVS_OPT_THREADS)")
      ->check(CLI::PositiveNumber);

  // gen
  auto* gen = app.add_subcommand("gen", "sample the four-stage synthetic benchmark");
  double gen_rho = 0.0;
  long long gen_n = 0;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--rho", gen_rho, "correlation parameter")->required();
  gen->add_option("--n", gen_n, "number of rows")->required();
  gen->add_option("--seed", gen_seed, "sampling seed");
  gen->add_option("--out", gen_out, "output CSV")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "fit a Gaussian mixture to a score table by EM");
  std::string fit_in, fit_out;
  std::optional<int> fit_k;
  bool fit_auto = false;
  int fit_kmax = 5;
  std::uint64_t fit_seed = 0;
  fit->add_option("--in", fit_in, "score table CSV")->required();
  auto* kopt = fit->add_option("--k", fit_k, "number of components");
  auto* aopt = fit->add_flag("--auto-k", fit_auto, "choose k by BIC");
  kopt->excludes(aopt);
  fit->add_option("--k-max", fit_kmax, "largest k tried by --auto-k");
  fit->add_option("--seed", fit_seed, "EM seed");
  fit->add_option("--out", fit_out, "output model JSON")->required();

  // optimize
  auto* opt = app.add_subcommand("optimize", "compute the optimal screening policy");
  CampaignFlags opt_flags;
  std::string opt_out;
  add_campaign_flags(opt, opt_flags);
  opt->add_option("--out", opt_out, "output result JSON");

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a policy or the top-R_s baseline on a score table");
  CampaignFlags sim_flags;
  std::string sim_table, sim_policy, sim_out;
  std::optional<double> sim_baseline;
  add_campaign_flags(sim, sim_flags);
  sim->add_option("--table", sim_table, "score table CSV")->required();
  auto* popt = sim->add_option("--policy", sim_policy, "comma-separated thresholds or a result JSON");
  auto* bopt = sim->add_option("--baseline", sim_baseline, "top fraction kept per stage");
  popt->excludes(bopt);
  sim->add_option("--out", sim_out, "output report JSON");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "optimal expected detections over a list of budgets");
  CampaignFlags sweep_flags;
  std::string sweep_budgets, sweep_table, sweep_out;
  add_campaign_flags(sweep, sweep_flags);
  sweep->add_option("--budgets", sweep_budgets, "comma-separated budgets")->required();
  sweep->add_option("--table", sweep_table, "score table for an empirical_detected column");
  sweep->add_option("--out", sweep_out, "output curve CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    const int threads = threads_flag ? *threads_flag : threads_from_env();

    if (gen->parsed()) {
      if (!(gen_rho > -1.0 && gen_rho < 1.0)) usage("--rho", "must lie in (-1, 1)");
      if (gen_n < 1) usage("--n", "must be positive");
      print_config("gen", {{"rho", gen_rho}, {"n", gen_n}, {"seed", gen_seed}, {"out", gen_out}});
      htvs::ScoreTable table;
      try {
        table = htvs::generate_synthetic(gen_rho, static_cast<std::size_t>(gen_n), gen_seed);
      } catch (const htvs::Error& e) {
        if (e.code() == ErrorCode::kNotPositiveDefinite) usage("--rho", e.what());
        throw;
      }
      htvs::write_score_table(table, gen_out);
      std::cout << "wrote " << table.num_rows() << " rows to " << gen_out << "\n";
      return 0;
    }

    if (fit->parsed()) {
      if (!std::filesystem::exists(fit_in)) usage("--in", "no such file '" + fit_in + "'");
      if (!fit_k && !fit_auto) fit_auto = true;
      htvs::EmConfig em;
      em.seed = fit_seed;
      print_config("fit", {{"in", fit_in},
                           {"k", fit_k ? json(*fit_k) : json("auto")},
                           {"k_max", fit_kmax},
                           {"seed", fit_seed},
                           {"out", fit_out},
                           {"em", {{"max_iters", em.max_iters}, {"tol", em.tol}, {"reg_floor", em.reg_floor}}}});
      const htvs::ScoreTable table = htvs::load_score_table(fit_in);
      std::optional<htvs::GmmModel> model;
      if (fit_auto) {
        if (fit_kmax < 1) usage("--k-max", "must be positive");
        auto sel = htvs::select_components(table, fit_kmax, em);
        print_selection(sel);
        model = sel.model;
      } else {
        if (*fit_k < 1) usage("--k", "must be positive");
        model = htvs::fit_gmm(table, *fit_k, em);
      }
      htvs::write_gmm(*model, fit_out);
      std::cout << "log-likelihood: " << htvs::format_real(htvs::log_likelihood(*model, table)) << "\n";
      return 0;
    }

    if (opt->parsed()) {
      Campaign c = load_campaign(opt_flags, threads);
      print_config("optimize", htvs::campaign_to_json(c.config));
      const auto dist = htvs::resolve_distribution(c.config, c.base_dir);
      if (dist.selection) print_selection(*dist.selection);
      const auto result = run_optimizer(dist.model, c.config);
      if (!result.feasible) {
        std::cerr << "warning: budget is below the cost of screening every candidate with stage 1; "
                     "returning the block-all policy\n";
      }
      print_policy(result.policy);
      std::cout << "expected detected: "
                << htvs::format_real(result.report.reward * static_cast<double>(c.config.pipeline.population))
                << "\nexpected total cost: " << htvs::format_real(result.report.expected_total_cost)
                << "\nobjective evaluations: " << result.evaluations << "\n";
      if (!opt_out.empty()) htvs::write_report(result, opt_out, htvs::ReportFormat::kJson);
      return 0;
    }

    if (sim->parsed()) {
      if (sim_policy.empty() && !sim_baseline) usage("--policy/--baseline", "give one of them");
      Campaign c = load_campaign(sim_flags, threads);
      print_config("simulate", htvs::campaign_to_json(c.config));
      if (!std::filesystem::exists(sim_table)) usage("--table", "no such file '" + sim_table + "'");
      const auto table = htvs::negate_columns(htvs::load_score_table(sim_table), c.config.negate);
      for (const auto& s : c.config.pipeline.stages) {
        if (!table.find_column(s.name)) usage("--table", "missing column '" + s.name + "'");
      }
      htvs::SimReport rep;
      if (sim_baseline) {
        if (!(*sim_baseline > 0.0 && *sim_baseline <= 1.0)) usage("--baseline", "must lie in (0, 1]");
        rep = htvs::run_baseline(table, c.config.pipeline, *sim_baseline);
      } else {
        htvs::Policy policy;
        if (std::filesystem::exists(sim_policy)) {
          json j = json::parse(htvs::read_text_file(sim_policy));
          policy = htvs::policy_from_json(j.is_object() ? j.at("policy") : j);
        } else {
          policy.thresholds = parse_list("--policy", sim_policy);
        }
        if (policy.thresholds.size() + 1 != c.config.pipeline.num_stages()) {
          usage("--policy", "expected " + std::to_string(c.config.pipeline.num_stages() - 1) + " thresholds");
        }
        rep = htvs::run_policy(table, c.config.pipeline, policy);
      }
      print_policy(rep.policy_used);
      std::cout << "detected: " << rep.detected << " (reference " << rep.reference_detected << ")\n"
                << "total cost: " << htvs::format_real(rep.total_cost) << "\n";
      if (rep.savings_vs_reference) {
        std::cout << "savings vs final stage alone: " << htvs::format_real(*rep.savings_vs_reference) << "\n";
      }
      if (!sim_out.empty()) htvs::write_report(rep, sim_out, htvs::ReportFormat::kJson);
      return 0;
    }

    if (sweep->parsed()) {
      const auto budgets = parse_list("--budgets", sweep_budgets);
      if (budgets.empty()) usage("--budgets", "empty budget list");
      for (std::size_t i = 1; i < budgets.size(); ++i) {
        if (!(budgets[i] > budgets[i - 1])) usage("--budgets", "budgets must be strictly increasing");
      }
      Campaign c = load_campaign(sweep_flags, threads);
      print_config("sweep", htvs::campaign_to_json(c.config));
      const auto dist = htvs::resolve_distribution(c.config, c.base_dir);
      auto curve = htvs::budget_sweep(dist.model, c.config.pipeline, budgets, c.config.optimizer);
      if (!sweep_table.empty()) {
        if (!std::filesystem::exists(sweep_table)) usage("--table", "no such file '" + sweep_table + "'");
        const auto table = htvs::negate_columns(htvs::load_score_table(sweep_table), c.config.negate);
        for (const auto& s : c.config.pipeline.stages) {
          if (!table.find_column(s.name)) usage("--table", "missing column '" + s.name + "'");
        }
        for (auto& p : curve.points) {
          p.empirical_detected = static_cast<double>(htvs::run_policy(table, c.config.pipeline, p.policy).detected);
        }
      }
      std::cout << htvs::format_budget_curve_csv(curve);
      if (!sweep_out.empty()) htvs::write_report(curve, sweep_out, htvs::ReportFormat::kCsv);
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.message << "\n";
    return kExitUsage;
  } catch (const htvs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return htvs::is_numeric_failure(e.code()) ? kExitNumeric : kExitUsage;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
