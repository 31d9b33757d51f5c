// sept: train, test, run campaigns, aggregate and plot.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>

#include "sept/harness/harness.hpp"

namespace fs = std::filesystem;
using namespace sept;
using nlohmann::json;

namespace {

// Configuration problems exit 2 with one JSON line on stderr.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

struct CommonFlags {
  std::string domain = "nav2d";
  std::string method = "sept";
  std::string scale = "desk";
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
};

algo::TrainConfig train_config(const CommonFlags& f, const CLI::App& cmd) {
  try {
    json j;
    if (!f.config.empty()) {
      j = read_json_file(f.config);
    } else {
      j = {{"schema_version", algo::kConfigSchemaVersion}};
    }
    // explicit flags win over the file
    if (cmd.count("--domain") || !j.contains("domain")) j["domain"] = f.domain;
    if (cmd.count("--method") || !j.contains("method")) j["method"] = f.method;
    if (cmd.count("--scale") || !j.contains("scale")) j["scale"] = f.scale;
    if (cmd.count("--seed") || !j.contains("seed")) j["seed"] = f.seed;
    return algo::config_from_json(j);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void print_summary(const std::vector<harness::SummaryRow>& rows) {
  std::cout << std::left << std::setw(11) << "method" << std::setw(14) << "domain" << std::right << std::setw(5) << "n"
            << std::setw(18) << "steps (SE)" << std::setw(24) << "reward (SE)" << std::setw(10) << "solved" << "\n";
  for (const auto& r : rows) {
    char steps[64], reward[64], solved[32];
    std::snprintf(steps, sizeof steps, "%.2f (%.2f)%s", r.mean_steps, r.se_steps, r.se_undefined ? "*" : "");
    std::snprintf(reward, sizeof reward, "%.4g (%.3g)", r.mean_reward, r.se_reward);
    std::snprintf(solved, sizeof solved, "%.1f%%", r.percent_solved);
    std::cout << std::left << std::setw(11) << r.method << std::setw(14) << r.domain << std::right << std::setw(5)
              << r.n << std::setw(18) << steps << std::setw(24) << reward << std::setw(10) << solved << "\n";
  }
  if (std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.se_undefined; }))
    std::cout << "* single row: standard error undefined, shown as 0\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-episode policy transfer: training, evaluation and experiment campaigns"};
  app.require_subcommand(1);
  const std::vector<std::string> domains{"nav2d", "nav2d_switch", "acrobot", "hiv"};

  CommonFlags train_flags;
  auto* train = app.add_subcommand("train", "train one model and save a checkpoint");
  train->add_option("--domain", train_flags.domain, "nav2d, nav2d_switch, acrobot or hiv");
  train->add_option("--method", train_flags.method,
                    "sept, avg, oracle, epopt_adv, maml_fo, sept_np, totalvar, maxent or dynasept");
  train->add_option("--seed", train_flags.seed, "run seed");
  train->add_option("--scale", train_flags.scale, "desk or full")->check(CLI::IsMember({"desk", "full"}));
  train->add_option("--config", train_flags.config, "JSON training config; flags given explicitly override it");
  train->add_option("--out", train_flags.out, "checkpoint directory")->required();

  std::string test_checkpoint, test_out;
  int test_count = 0;
  std::uint64_t test_seed = 0;
  auto* test = app.add_subcommand("test", "run M single test episodes of a checkpoint");
  test->add_option("--checkpoint", test_checkpoint, "checkpoint directory written by train")->required();
  test->add_option("--out", test_out, "directory for episodes.csv and curves.csv")->required();
  test->add_option("--instances", test_count, "number of test instances (default: the config's M)");
  test->add_option("--seed", test_seed, "seed index recorded in the rows");

  std::string camp_config, camp_out, camp_scale = "desk";
  std::vector<std::string> camp_domains, camp_methods;
  int camp_seeds = 5, camp_m = 0;
  std::uint64_t camp_base = 0;
  auto* campaign = app.add_subcommand(
      "campaign", "train and test every (method, domain, seed); resumes from the manifest. Workers: SEPT_WORKERS");
  campaign->add_option("--config", camp_config, "campaign JSON; when given, the flags below are ignored");
  campaign->add_option("--domain", camp_domains, "domains (repeatable)");
  campaign->add_option("--method", camp_methods, "methods (repeatable, or 'all')");
  campaign->add_option("--seeds", camp_seeds, "independent runs per method and domain");
  campaign->add_option("--seed", camp_base, "base seed of the campaign");
  campaign->add_option("--test-instances", camp_m, "M test instances per run (default: preset)");
  campaign->add_option("--scale", camp_scale, "desk or full")->check(CLI::IsMember({"desk", "full"}));
  campaign->add_option("--out", camp_out, "campaign directory")->required();

  std::string agg_out;
  auto* aggregate = app.add_subcommand("aggregate", "summarize episodes.csv into summary.csv");
  aggregate->add_option("--out", agg_out, "directory holding episodes.csv")->required();

  std::string plot_out, plot_dir;
  auto* plot = app.add_subcommand("plot", "SVG plots and their CSVs from a campaign directory");
  plot->add_option("--out", plot_out, "campaign directory")->required();
  plot->add_option("--plots", plot_dir, "where to write plots (default: <out>/plots)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const auto cfg = train_config(train_flags, *train);
      std::cout << "training " << algo::to_string(cfg.method) << " on " << env::to_string(cfg.domain) << " ("
                << algo::to_string(cfg.scale) << ", " << cfg.total_episodes() << " episodes, seed " << cfg.seed
                << ")" << std::endl;
      const auto model = algo::train(cfg);
      algo::save_model(model, train_flags.out);
      const auto& log = model.log;
      const std::size_t tail = std::max<std::size_t>(1, log.solved.size() / 10);
      int solved = 0;
      for (std::size_t i = log.solved.size() - tail; i < log.solved.size(); ++i) solved += log.solved[i];
      std::cout << "last " << tail << " training episodes solved: " << solved << "\n"
                << "checkpoint: " << train_flags.out << "\n";
    } else if (*test) {
      const auto model = algo::load_model(test_checkpoint);
      const int m = test_count > 0 ? test_count : model.config.test_instances;
      const auto rows = harness::evaluate(model, static_cast<int>(test_seed), m);
      fs::create_directories(test_out);
      harness::write_episodes_csv(fs::path(test_out) / "episodes.csv", rows);
      harness::write_curves_csv(fs::path(test_out) / "curves.csv", rows);
      print_summary(harness::aggregate(rows));
    } else if (*campaign) {
      harness::Campaign c;
      try {
        if (!camp_config.empty()) {
          c = harness::campaign_from_json(read_json_file(camp_config));
        } else {
          json j{{"schema_version", 1}, {"seeds", camp_seeds}, {"scale", camp_scale}, {"base_seed", camp_base}};
          j["domains"] = camp_domains.empty() ? std::vector<std::string>{"nav2d"} : camp_domains;
          if (camp_methods.empty() || (camp_methods.size() == 1 && camp_methods[0] == "all")) {
            camp_methods.clear();
            for (auto m : algo::all_methods()) camp_methods.emplace_back(algo::to_string(m));
          }
          j["methods"] = camp_methods;
          if (camp_m > 0) j["test_instances"] = camp_m;
          c = harness::campaign_from_json(j);
        }
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      const int ran = harness::run_campaign(c, camp_out, &std::cout);
      const auto rows = harness::read_episodes_csv(fs::path(camp_out) / "episodes.csv");
      const auto summary = harness::aggregate(rows);
      harness::write_summary_csv(fs::path(camp_out) / "summary.csv", summary);
      std::cout << ran << " runs executed\n";
      print_summary(summary);
    } else if (*aggregate) {
      const auto summary = harness::aggregate(harness::read_episodes_csv(fs::path(agg_out) / "episodes.csv"));
      harness::write_summary_csv(fs::path(agg_out) / "summary.csv", summary);
      harness::check_summary(agg_out);
      print_summary(summary);
    } else if (*plot) {
      const fs::path dir = plot_dir.empty() ? fs::path(plot_out) / "plots" : fs::path(plot_dir);
      for (const auto& p : harness::emit_plots(plot_out, dir, &std::cerr)) std::cout << p.string() << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << json{{"error", "invalid_config"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "failure"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
