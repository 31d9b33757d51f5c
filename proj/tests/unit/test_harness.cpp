#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sept/harness/harness.hpp"

using namespace sept;
using namespace sept::harness;
namespace fs = std::filesystem;

namespace {

EpisodeRow row(const std::string& method, int steps, bool solved, double reward = 0.0) {
  return {method, "nav2d", 0, 0, steps, solved, reward, {}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const char* name) {
  auto p = fs::temp_directory_path() / ("sept_harness_" + std::string(name));
  fs::remove_all(p);
  return p;
}

Campaign tiny_campaign() {
  Campaign c;
  c.methods = {algo::Method::sept, algo::Method::avg};
  c.seeds = 2;
  c.test_instances = 2;
  c.overrides = {{"instances", 3}, {"episodes_per_instance", 2}};
  return c;
}

}  // namespace

TEST_CASE("aggregate hand arithmetic") {
  const auto s = aggregate({row("sept", 20, true, 1), row("sept", 30, true, 2), row("sept", 50, false, 3)});
  REQUIRE(s.size() == 1);
  CHECK(s[0].n == 3);
  CHECK(s[0].mean_steps == doctest::Approx(100.0 / 3));
  // sample std of {20, 30, 50} is sqrt(700/3)
  CHECK(s[0].se_steps == doctest::Approx(std::sqrt(700.0 / 3) / std::sqrt(3.0)));
  CHECK(s[0].percent_solved == doctest::Approx(66.6667).epsilon(1e-4));
  CHECK(s[0].mean_reward == doctest::Approx(2.0));
  CHECK_FALSE(s[0].se_undefined);
}

TEST_CASE("aggregate degenerate cases") {
  const auto one = aggregate({row("avg", 12, true)});
  CHECK(one[0].se_steps == 0.0);
  CHECK(one[0].se_undefined);
  CHECK(one[0].percent_solved == 100.0);
  CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
  // groups keep first-appearance order
  const auto two = aggregate({row("b", 1, true), row("a", 2, true), row("b", 3, true)});
  CHECK(two[0].method == "b");
  CHECK(two[0].n == 2);
  CHECK(two[1].method == "a");
}

TEST_CASE("episodes and summary csv round trip") {
  const auto dir = scratch_dir("csv");
  std::vector<EpisodeRow> rows{row("sept", 20, true, 979.9), row("sept", 50, false, -5.000000000000001),
                               row("avg", 31, true, 0.1)};
  write_episodes_csv(dir / "episodes.csv", rows);
  const auto back = read_episodes_csv(dir / "episodes.csv");
  REQUIRE(back.size() == 3);
  CHECK(back[1].cumulative_reward == rows[1].cumulative_reward);
  CHECK(back[1].solved == false);
  write_summary_csv(dir / "summary.csv", aggregate(back));
  CHECK_NOTHROW(check_summary(dir));
  const auto sum = read_summary_csv(dir / "summary.csv");
  CHECK(sum[0].mean_steps == aggregate(rows)[0].mean_steps);

  // a summary that no longer matches the rows is caught
  auto bad = sum;
  bad[0].mean_steps += 1;
  write_summary_csv(dir / "summary.csv", bad);
  CHECK_THROWS_AS(check_summary(dir), std::runtime_error);

  std::ofstream(dir / "broken.csv") << "method,domain\nx,y\n";
  CHECK_THROWS_AS(read_episodes_csv(dir / "broken.csv"), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("curves hold the final value up to the cap") {
  const auto dir = scratch_dir("curves");
  EpisodeRow r = row("sept", 3, true);
  r.reward_trace = {-0.1, -0.1, 1000.0};
  write_curves_csv(dir / "curves.csv", {r});
  std::ifstream in(dir / "curves.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "method,domain,seed,test_instance,step,cumulative_reward");
  int n = 0;
  std::string last;
  while (std::getline(in, line)) {
    ++n;
    last = line;
  }
  CHECK(n == 50);
  CHECK(last.rfind("sept,nav2d,0,0,50,999.79", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("run seeds are independent of the other jobs") {
  const auto a = run_seed(0, algo::Method::sept, env::Domain::nav2d, 3);
  CHECK(a == run_seed(0, algo::Method::sept, env::Domain::nav2d, 3));
  CHECK(a != run_seed(0, algo::Method::sept, env::Domain::nav2d, 4));
  CHECK(a != run_seed(0, algo::Method::avg, env::Domain::nav2d, 3));
  CHECK(a != run_seed(0, algo::Method::sept, env::Domain::acrobot, 3));
  CHECK(a != run_seed(1, algo::Method::sept, env::Domain::nav2d, 3));
  auto c = tiny_campaign();
  const auto before = run_config(c, algo::Method::sept, env::Domain::nav2d, 1).seed;
  c.methods.push_back(algo::Method::maxent);
  CHECK(run_config(c, algo::Method::sept, env::Domain::nav2d, 1).seed == before);
}

TEST_CASE("campaign json validation") {
  const auto c = campaign_from_json(to_json(tiny_campaign()));
  CHECK(c.seeds == 2);
  CHECK(c.methods.size() == 2);
  CHECK(*c.test_instances == 2);
  auto j = to_json(tiny_campaign());
  j["sedes"] = 3;
  CHECK_THROWS_AS(campaign_from_json(j), std::invalid_argument);
  j = to_json(tiny_campaign());
  j["overrides"]["gama"] = 0.9;
  CHECK_THROWS_AS(campaign_from_json(j), std::invalid_argument);
  j = to_json(tiny_campaign());
  j["overrides"]["seed"] = 4;
  CHECK_THROWS_AS(campaign_from_json(j), std::invalid_argument);
  j = to_json(tiny_campaign());
  j["overrides"]["probe_steps"] = 0;
  CHECK_THROWS_AS(campaign_from_json(j), std::invalid_argument);
  j = to_json(tiny_campaign());
  j["methods"] = {"bnn"};
  CHECK_THROWS_AS(campaign_from_json(j), std::invalid_argument);
}

TEST_CASE("worker count from the environment") {
  ::setenv("SEPT_WORKERS", "3", 1);
  CHECK(worker_count() == 3);
  ::setenv("SEPT_WORKERS", "zero", 1);
  CHECK_THROWS_AS(worker_count(), std::invalid_argument);
  ::unsetenv("SEPT_WORKERS");
  CHECK(worker_count() == 1);
}

TEST_CASE("test instances come from the test split") {
  auto cfg = algo::preset(env::Domain::acrobot, algo::Method::avg, algo::Scale::desk);
  const auto inst = test_instances(cfg, 5);
  REQUIRE(inst.size() == 5);
  for (const auto& i : inst) {
    CHECK(i.split == env::Split::test);
    for (double z : i.z) CHECK(std::abs(std::abs(z - 1.0) - 0.2) * std::abs(std::abs(z - 1.0) - 0.35) < 1e-12);
  }
}

TEST_CASE("campaign is deterministic, resumable and parallel-safe") {
  const auto a = scratch_dir("camp_a"), b = scratch_dir("camp_b");
  const auto c = tiny_campaign();
  CHECK(run_campaign(c, a) == 4);
  CHECK(run_campaign(c, a) == 0);  // everything already recorded
  ::setenv("SEPT_WORKERS", "3", 1);
  CHECK(run_campaign(c, b) == 4);
  ::unsetenv("SEPT_WORKERS");
  CHECK(slurp(a / "episodes.csv") == slurp(b / "episodes.csv"));
  CHECK(slurp(a / "curves.csv") == slurp(b / "curves.csv"));
  CHECK(slurp(a / "training.csv") == slurp(b / "training.csv"));
  const auto rows = read_episodes_csv(a / "episodes.csv");
  CHECK(rows.size() == 8);

  // a half-finished campaign reruns only what is missing
  fs::remove_all(a / "runs" / "avg_nav2d_s1");
  CHECK(run_campaign(c, a) == 1);
  CHECK(slurp(a / "episodes.csv") == slurp(b / "episodes.csv"));

  // a changed configuration invalidates the recorded runs
  auto changed = c;
  changed.overrides["episodes_per_instance"] = 3;
  CHECK(run_campaign(changed, a) == 4);

  // checkpoints written by the campaign reproduce its rows
  const auto model = algo::load_model(b / "runs" / "sept_nav2d_s1" / "model");
  const auto again = evaluate(model, 1, 2);
  const auto recorded = read_episodes_csv(b / "runs" / "sept_nav2d_s1" / "episodes.csv");
  for (std::size_t k = 0; k < again.size(); ++k) {
    CHECK(again[k].steps_to_solve == recorded[k].steps_to_solve);
    CHECK(again[k].cumulative_reward == recorded[k].cumulative_reward);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("plots are regenerated bit for bit and skip missing methods") {
  const auto dir = scratch_dir("plots");
  auto c = tiny_campaign();
  run_campaign(c, dir);
  // ask for a method that produced nothing
  c.methods.push_back(algo::Method::maxent);
  std::ofstream(dir / "campaign.json") << to_json(c).dump();
  std::ostringstream warn;
  const auto files = emit_plots(dir, dir / "p1", &warn);
  CHECK(warn.str().find("maxent") != std::string::npos);
  CHECK(files.size() >= 8);
  for (const auto& f : files) CHECK(fs::file_size(f) > 0);
  emit_plots(dir, dir / "p2");
  for (const auto& f : files) CHECK(slurp(f) == slurp(dir / "p2" / f.filename()));
  CHECK(slurp(dir / "p1" / "nav2d_steps_to_solve.svg").rfind("<svg", 0) == 0);
  fs::remove_all(dir);
}
