#pragma once

// Campaigns of independent (method, domain, seed) runs, row-level metrics,
// aggregation and plots.
//
// Output directory of a campaign:
//   manifest.json                 completed runs; a rerun skips them
//   runs/<method>_<domain>_s<k>/  checkpoint, training.csv, episodes.csv, curves.csv
//   episodes.csv, curves.csv, training.csv   merged rows of every run
//   summary.csv                   written by aggregate

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sept/algo/config.hpp"
#include "sept/sept/sept.hpp"

namespace sept::harness {

/// One test episode of one run.
struct EpisodeRow {
  std::string method;
  std::string domain;
  int seed = 0;
  int test_instance = 0;
  int steps_to_solve = 0;  // cap-valued when unsolved
  bool solved = false;
  double cumulative_reward = 0.0;
  std::vector<double> reward_trace;  // not part of episodes.csv; feeds curves.csv
};

struct SummaryRow {
  std::string method;
  std::string domain;
  int n = 0;
  double mean_steps = 0.0;
  double se_steps = 0.0;
  double mean_reward = 0.0;
  double se_reward = 0.0;
  double percent_solved = 0.0;
  bool se_undefined = false;  // n == 1: SE reported as 0
};

/// Mean, standard error (sample std / sqrt n) and percent solved per
/// (method, domain), in first-appearance order. Throws on empty input.
std::vector<SummaryRow> aggregate(const std::vector<EpisodeRow>& rows);

struct Campaign {
  std::vector<env::Domain> domains{env::Domain::nav2d};
  std::vector<algo::Method> methods{algo::Method::sept};
  int seeds = 5;
  algo::Scale scale = algo::Scale::desk;
  std::uint64_t base_seed = 0;
  std::optional<int> test_instances;  // M; preset value when unset
  nlohmann::json overrides = nlohmann::json::object();  // applied to every run's config
};

/// {"schema_version": 1, "domains": [...], "methods": [...], "seeds": 5,
///  "scale": "desk", "base_seed": 0, "test_instances": 4, "overrides": {...}}
/// Unknown keys throw std::invalid_argument.
Campaign campaign_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Campaign& c);

/// Seed of run `index` of (method, domain). Adding a method or domain to a
/// campaign never changes the seeds of the others.
std::uint64_t run_seed(std::uint64_t base, algo::Method method, env::Domain domain, int index);

/// Training configuration of one run: preset, then overrides, then the seed.
algo::TrainConfig run_config(const Campaign& c, algo::Method method, env::Domain domain, int index);

/// Test instances of a run, drawn from the test split with a stream derived
/// from the run seed.
std::vector<env::InstanceSpec> test_instances(const algo::TrainConfig& config, int count);

/// M test episodes of a trained model. Each episode starts from the same
/// trained parameters; nothing carries over between instances.
std::vector<EpisodeRow> evaluate(const algo::TrainedModel& model, int seed_index, int count);

/// Number of parallel jobs: SEPT_WORKERS if set and positive, else 1.
int worker_count();

/// Runs every (method, domain, seed) job not already in out/manifest.json,
/// up to worker_count() at a time, then rewrites the merged CSVs. Returns the
/// number of jobs executed.
int run_campaign(const Campaign& c, const std::filesystem::path& out, std::ostream* progress = nullptr);

// CSV I/O. Column orders are fixed:
//   episodes.csv: method,domain,seed,test_instance,steps_to_solve,solved,cumulative_reward
//   curves.csv:   method,domain,seed,test_instance,step,cumulative_reward
//   summary.csv:  method,domain,n,mean_steps,se_steps,mean_reward,se_reward,percent_solved,se_undefined
//   training.csv: method,domain,seed,episode,return,probe_return,steps,solved
void write_episodes_csv(const std::filesystem::path& path, const std::vector<EpisodeRow>& rows);
std::vector<EpisodeRow> read_episodes_csv(const std::filesystem::path& path);
/// One row per executed step; a trace shorter than the cap is held at its
/// final value so every episode spans the same steps.
void write_curves_csv(const std::filesystem::path& path, const std::vector<EpisodeRow>& rows);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path);
void write_training_csv(const std::filesystem::path& path, const algo::TrainedModel& model, int seed_index);

/// Recomputes the summary from episodes.csv and compares it with summary.csv;
/// throws std::runtime_error on any mismatch beyond 1e-9 relative.
void check_summary(const std::filesystem::path& dir);

/// Per domain, writes <domain>_steps_to_solve, _cumulative_reward,
/// _percent_solved and _probe_reward as .svg plus the .csv behind each, from
/// the CSVs in `dir`. Methods without
/// rows are skipped with a warning on `warn`. Returns the files written.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& dir, const std::filesystem::path& out_dir,
                                              std::ostream* warn = nullptr);

}  // namespace sept::harness
