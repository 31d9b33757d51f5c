#include "sept/harness/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace sept::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

// Reads a CSV with a required header; returns the data rows.
std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || (line != header && line != header + "\r"))
    throw std::runtime_error(path.string() + ": expected header '" + header + "'");
  const auto width = split_csv(header).size();
  std::vector<std::vector<std::string>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != width)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) +
                               " fields");
    rows.push_back(std::move(f));
  }
  return rows;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void atomic_write(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    auto out = open_out(tmp);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

double to_double(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(path.string() + ": bad number '" + s + "'");
  }
}

int to_int(const std::string& s, const fs::path& path) {
  const double v = to_double(s, path);
  if (v != std::floor(v)) throw std::runtime_error(path.string() + ": expected an integer, got '" + s + "'");
  return static_cast<int>(v);
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string job_name(algo::Method m, env::Domain d, int index) {
  return std::string(algo::to_string(m)) + "_" + std::string(env::to_string(d)) + "_s" + std::to_string(index);
}

constexpr const char* kEpisodesHeader = "method,domain,seed,test_instance,steps_to_solve,solved,cumulative_reward";
constexpr const char* kCurvesHeader = "method,domain,seed,test_instance,step,cumulative_reward";
constexpr const char* kSummaryHeader =
    "method,domain,n,mean_steps,se_steps,mean_reward,se_reward,percent_solved,se_undefined";
constexpr const char* kTrainingHeader = "method,domain,seed,episode,return,probe_return,steps,solved";

}  // namespace

// ---------------------------------------------------------------- aggregate

std::vector<SummaryRow> aggregate(const std::vector<EpisodeRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("aggregate: no rows");
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<const EpisodeRow*>> groups;
  for (const auto& r : rows) {
    auto key = std::make_pair(r.method, r.domain);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  auto mean_se = [](const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0;
    for (double x : v) mean += x;
    mean /= n;
    if (v.size() < 2) return std::make_pair(mean, 0.0);
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::make_pair(mean, std::sqrt(ss / (n - 1)) / std::sqrt(n));
  };
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    const auto& g = groups[key];
    std::vector<double> steps, rewards;
    int solved = 0;
    for (const auto* r : g) {
      steps.push_back(r->steps_to_solve);
      rewards.push_back(r->cumulative_reward);
      solved += r->solved ? 1 : 0;
    }
    SummaryRow s;
    s.method = key.first;
    s.domain = key.second;
    s.n = static_cast<int>(g.size());
    std::tie(s.mean_steps, s.se_steps) = mean_se(steps);
    std::tie(s.mean_reward, s.se_reward) = mean_se(rewards);
    s.percent_solved = 100.0 * solved / s.n;
    s.se_undefined = s.n < 2;
    out.push_back(s);
  }
  return out;
}

// ----------------------------------------------------------------- campaign

Campaign campaign_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("campaign: expected a JSON object");
  if (!j.contains("schema_version") || j.at("schema_version") != 1)
    throw std::invalid_argument("campaign: schema_version must be 1");
  static const std::set<std::string> known{"schema_version", "domains", "methods", "seeds", "scale",
                                           "base_seed",      "test_instances", "overrides"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw std::invalid_argument("campaign: unknown key '" + key + "'");
  Campaign c;
  try {
    if (j.contains("domains")) {
      c.domains.clear();
      for (const auto& d : j.at("domains")) c.domains.push_back(env::parse_domain(d.get<std::string>()));
    }
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) c.methods.push_back(algo::parse_method(m.get<std::string>()));
    }
    if (j.contains("seeds")) j.at("seeds").get_to(c.seeds);
    if (j.contains("scale")) c.scale = algo::parse_scale(j.at("scale").get<std::string>());
    if (j.contains("base_seed")) j.at("base_seed").get_to(c.base_seed);
    if (j.contains("test_instances")) c.test_instances = j.at("test_instances").get<int>();
    if (j.contains("overrides")) c.overrides = j.at("overrides");
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("campaign: ") + e.what());
  }
  if (c.domains.empty() || c.methods.empty()) throw std::invalid_argument("campaign: domains and methods must be non-empty");
  if (c.seeds < 1) throw std::invalid_argument("campaign: seeds must be >= 1");
  if (c.test_instances && *c.test_instances < 1) throw std::invalid_argument("campaign: test_instances must be >= 1");
  if (!c.overrides.is_object()) throw std::invalid_argument("campaign: overrides must be an object");
  for (const char* reserved : {"domain", "method", "scale", "seed", "schema_version"})
    if (c.overrides.contains(reserved))
      throw std::invalid_argument(std::string("campaign: '") + reserved + "' cannot be overridden per run");
  // catch typos now rather than inside a worker
  for (auto m : c.methods)
    for (auto d : c.domains) (void)run_config(c, m, d, 0);
  return c;
}

json to_json(const Campaign& c) {
  json j;
  j["schema_version"] = 1;
  for (auto d : c.domains) j["domains"].push_back(std::string(env::to_string(d)));
  for (auto m : c.methods) j["methods"].push_back(std::string(algo::to_string(m)));
  j["seeds"] = c.seeds;
  j["scale"] = std::string(algo::to_string(c.scale));
  j["base_seed"] = c.base_seed;
  if (c.test_instances) j["test_instances"] = *c.test_instances;
  j["overrides"] = c.overrides;
  return j;
}

std::uint64_t run_seed(std::uint64_t base, algo::Method method, env::Domain domain, int index) {
  const auto s = derive_seed(derive_seed(base, algo::to_string(method)), env::to_string(domain));
  return derive_seed(s, static_cast<std::uint64_t>(index));
}

algo::TrainConfig run_config(const Campaign& c, algo::Method method, env::Domain domain, int index) {
  json j = algo::to_json(algo::preset(domain, method, c.scale));
  for (const auto& [key, value] : c.overrides.items()) {
    if (!j.contains(key)) throw std::invalid_argument("campaign: unknown override '" + key + "'");
    j[key] = value;
  }
  if (c.test_instances) j["test_instances"] = *c.test_instances;
  j["seed"] = run_seed(c.base_seed, method, domain, index);
  return algo::config_from_json(j);
}

std::vector<env::InstanceSpec> test_instances(const algo::TrainConfig& config, int count) {
  Rng rng(derive_seed(config.seed, "test-instances"));
  std::vector<env::InstanceSpec> out;
  for (int k = 0; k < count; ++k) out.push_back(env::sample_instance(config.domain, env::Split::test, rng));
  return out;
}

std::vector<EpisodeRow> evaluate(const algo::TrainedModel& model, int seed_index, int count) {
  const auto& c = model.config;
  const auto instances = test_instances(c, count);
  std::vector<EpisodeRow> rows;
  for (int k = 0; k < count; ++k) {
    Rng rng(derive_seed(derive_seed(c.seed, "test-episode"), static_cast<std::uint64_t>(k)));
    const auto r = algo::test_episode(model, instances[k], rng);
    rows.push_back({std::string(algo::to_string(c.method)), std::string(env::to_string(c.domain)), seed_index, k,
                    r.steps_to_solve, r.solved, r.cumulative_reward, r.reward_trace});
  }
  return rows;
}

int worker_count() {
  const char* v = std::getenv("SEPT_WORKERS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw std::invalid_argument("SEPT_WORKERS must be a positive integer");
  return static_cast<int>(std::min<long>(n, 256));
}

namespace {

struct Job {
  algo::Method method;
  env::Domain domain;
  int index;
  std::string name;
};

json load_manifest(const fs::path& path) {
  if (!fs::exists(path)) return json{{"format", 1}, {"runs", json::object()}};
  std::ifstream in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (!j.contains("runs") || !j.at("runs").is_object()) throw std::runtime_error(path.string() + ": no runs table");
  return j;
}

void append_file(std::ostream& out, const fs::path& path, bool skip_header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first && skip_header) {
      first = false;
      continue;
    }
    first = false;
    out << line << '\n';
  }
}

}  // namespace

int run_campaign(const Campaign& c, const fs::path& out, std::ostream* progress) {
  fs::create_directories(out / "runs");
  atomic_write(out / "campaign.json", to_json(c).dump(2) + "\n");
  const fs::path manifest_path = out / "manifest.json";
  json manifest = load_manifest(manifest_path);

  std::vector<Job> all, todo;
  for (auto d : c.domains)
    for (auto m : c.methods)
      for (int k = 0; k < c.seeds; ++k) all.push_back({m, d, k, job_name(m, d, k)});
  for (const auto& job : all) {
    const auto cfg = run_config(c, job.method, job.domain, job.index);
    const auto hash = algo::sha1_hex(algo::to_json(cfg).dump());
    const auto& runs = manifest.at("runs");
    const bool done = runs.contains(job.name) && runs.at(job.name).value("config_hash", "") == hash &&
                      fs::exists(out / "runs" / job.name / "episodes.csv");
    if (!done) todo.push_back(job);
  }

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      const auto& job = todo[i];
      try {
        const auto cfg = run_config(c, job.method, job.domain, job.index);
        const auto started = utc_now();
        const auto t0 = std::chrono::steady_clock::now();
        const fs::path dir = out / "runs" / job.name;
        fs::create_directories(dir);
        const auto model = algo::train(cfg);
        algo::save_model(model, dir / "model");
        const auto rows = evaluate(model, job.index, cfg.test_instances);
        write_training_csv(dir / "training.csv", model, job.index);
        write_curves_csv(dir / "curves.csv", rows);
        write_episodes_csv(dir / "episodes.csv", rows);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        int solved = 0;
        for (const auto& r : rows) solved += r.solved ? 1 : 0;
        std::lock_guard lock(mu);
        manifest["runs"][job.name] = {{"method", std::string(algo::to_string(job.method))},
                                      {"domain", std::string(env::to_string(job.domain))},
                                      {"seed", job.index},
                                      {"run_seed", cfg.seed},
                                      {"config_hash", algo::sha1_hex(algo::to_json(cfg).dump())},
                                      {"started", started},
                                      {"finished", utc_now()},
                                      {"wall_seconds", secs},
                                      {"outputs",
                                       {{"model", "runs/" + job.name + "/model"},
                                        {"episodes", "runs/" + job.name + "/episodes.csv"},
                                        {"curves", "runs/" + job.name + "/curves.csv"},
                                        {"training", "runs/" + job.name + "/training.csv"}}}};
        atomic_write(manifest_path, manifest.dump(2) + "\n");
        if (progress)
          *progress << job.name << ": solved " << solved << "/" << rows.size() << " in " << std::lround(secs) << " s"
                    << std::endl;
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(worker_count(), static_cast<int>(todo.size())));
  std::vector<std::thread> threads;
  for (int w = 1; w < n_workers; ++w) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);

  // merged files in campaign order, independent of completion order
  auto episodes = open_out(out / "episodes.csv");
  auto curves = open_out(out / "curves.csv");
  auto training = open_out(out / "training.csv");
  episodes << kEpisodesHeader << '\n';
  curves << kCurvesHeader << '\n';
  training << kTrainingHeader << '\n';
  for (const auto& job : all) {
    const fs::path dir = out / "runs" / job.name;
    append_file(episodes, dir / "episodes.csv", true);
    append_file(curves, dir / "curves.csv", true);
    append_file(training, dir / "training.csv", true);
  }
  return static_cast<int>(todo.size());
}

// ---------------------------------------------------------------------- CSV

void write_episodes_csv(const fs::path& path, const std::vector<EpisodeRow>& rows) {
  auto out = open_out(path);
  out << kEpisodesHeader << '\n';
  for (const auto& r : rows)
    out << r.method << ',' << r.domain << ',' << r.seed << ',' << r.test_instance << ',' << r.steps_to_solve << ','
        << (r.solved ? 1 : 0) << ',' << num(r.cumulative_reward) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<EpisodeRow> read_episodes_csv(const fs::path& path) {
  std::vector<EpisodeRow> rows;
  for (const auto& f : read_csv(path, kEpisodesHeader)) {
    EpisodeRow r;
    r.method = f[0];
    r.domain = f[1];
    r.seed = to_int(f[2], path);
    r.test_instance = to_int(f[3], path);
    r.steps_to_solve = to_int(f[4], path);
    r.solved = to_int(f[5], path) != 0;
    r.cumulative_reward = to_double(f[6], path);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_curves_csv(const fs::path& path, const std::vector<EpisodeRow>& rows) {
  auto out = open_out(path);
  out << kCurvesHeader << '\n';
  for (const auto& r : rows) {
    const int cap = env::domain_info(env::parse_domain(r.domain)).max_steps;
    double acc = 0;
    for (int t = 0; t < cap; ++t) {
      if (t < static_cast<int>(r.reward_trace.size())) acc += r.reward_trace[t];
      out << r.method << ',' << r.domain << ',' << r.seed << ',' << r.test_instance << ',' << t + 1 << ',' << num(acc)
          << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_summary_csv(const fs::path& path, const std::vector<SummaryRow>& rows) {
  auto out = open_out(path);
  out << kSummaryHeader << '\n';
  for (const auto& s : rows)
    out << s.method << ',' << s.domain << ',' << s.n << ',' << num(s.mean_steps) << ',' << num(s.se_steps) << ','
        << num(s.mean_reward) << ',' << num(s.se_reward) << ',' << num(s.percent_solved) << ','
        << (s.se_undefined ? 1 : 0) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<SummaryRow> read_summary_csv(const fs::path& path) {
  std::vector<SummaryRow> rows;
  for (const auto& f : read_csv(path, kSummaryHeader)) {
    SummaryRow s;
    s.method = f[0];
    s.domain = f[1];
    s.n = to_int(f[2], path);
    s.mean_steps = to_double(f[3], path);
    s.se_steps = to_double(f[4], path);
    s.mean_reward = to_double(f[5], path);
    s.se_reward = to_double(f[6], path);
    s.percent_solved = to_double(f[7], path);
    s.se_undefined = to_int(f[8], path) != 0;
    rows.push_back(std::move(s));
  }
  return rows;
}

void write_training_csv(const fs::path& path, const algo::TrainedModel& model, int seed_index) {
  auto out = open_out(path);
  out << kTrainingHeader << '\n';
  const auto& log = model.log;
  const std::string prefix = std::string(algo::to_string(model.config.method)) + "," +
                             std::string(env::to_string(model.config.domain)) + "," + std::to_string(seed_index) + ",";
  for (std::size_t i = 0; i < log.returns.size(); ++i)
    out << prefix << i << ',' << num(log.returns[i]) << ',' << num(log.probe_returns[i]) << ',' << log.steps[i] << ','
        << log.solved[i] << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void check_summary(const fs::path& dir) {
  const auto want = aggregate(read_episodes_csv(dir / "episodes.csv"));
  const auto got = read_summary_csv(dir / "summary.csv");
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); };
  if (want.size() != got.size()) throw std::runtime_error("summary.csv: row count differs from episodes.csv");
  for (std::size_t i = 0; i < want.size(); ++i) {
    const auto &w = want[i], &g = got[i];
    if (w.method != g.method || w.domain != g.domain || w.n != g.n || w.se_undefined != g.se_undefined ||
        !close(w.mean_steps, g.mean_steps) || !close(w.se_steps, g.se_steps) || !close(w.mean_reward, g.mean_reward) ||
        !close(w.se_reward, g.se_reward) || !close(w.percent_solved, g.percent_solved))
      throw std::runtime_error("summary.csv: row " + std::to_string(i + 1) + " (" + g.method + ", " + g.domain +
                               ") does not match episodes.csv");
  }
}

// -------------------------------------------------------------------- plots

namespace {

struct Series {
  std::string name;
  std::vector<double> x, y, lo, hi;  // lo/hi empty when there is no band
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#17becf"};

std::string fmt(double v, int prec = 2) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string tick_label(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  static constexpr double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
  double px(double x) const { return L + (x - x0) / (x1 - x0) * (W - L - R); }
  double py(double y) const { return H - B - (y - y0) / (y1 - y0) * (H - T - B); }
};

void frame_bounds(Frame& f) {
  if (!(f.x1 > f.x0)) f.x1 = f.x0 + 1;
  if (!(f.y1 > f.y0)) {
    f.y0 -= 0.5;
    f.y1 += 0.5;
  } else {
    const double pad = 0.05 * (f.y1 - f.y0);
    f.y0 -= pad;
    f.y1 += pad;
  }
}

void axes(std::ostream& o, const Frame& f, const std::string& title, const std::string& xl, const std::string& yl) {
  o << "<rect x=\"0\" y=\"0\" width=\"" << Frame::W << "\" height=\"" << Frame::H << "\" fill=\"white\"/>\n";
  o << "<text x=\"" << Frame::W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  o << "<line x1=\"" << Frame::L << "\" y1=\"" << Frame::H - Frame::B << "\" x2=\"" << Frame::W - Frame::R
    << "\" y2=\"" << Frame::H - Frame::B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << Frame::L << "\" y1=\"" << Frame::T << "\" x2=\"" << Frame::L << "\" y2=\""
    << Frame::H - Frame::B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0, xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    o << "<text x=\"" << Frame::L - 6 << "\" y=\"" << fmt(f.py(yv) + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
      << tick_label(yv) << "</text>\n";
    o << "<text x=\"" << fmt(f.px(xv)) << "\" y=\"" << Frame::H - Frame::B + 16
      << "\" text-anchor=\"middle\" font-size=\"11\">" << tick_label(xv) << "</text>\n";
  }
  o << "<text x=\"" << (Frame::L + Frame::W - Frame::R) / 2 << "\" y=\"" << Frame::H - 12
    << "\" text-anchor=\"middle\" font-size=\"12\">" << xl << "</text>\n";
  o << "<text x=\"16\" y=\"" << Frame::H / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
    << Frame::H / 2 << ")\">" << yl << "</text>\n";
}

void legend(std::ostream& o, const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = Frame::T + 10 + 18.0 * i;
    o << "<rect x=\"" << Frame::W - Frame::R + 12 << "\" y=\"" << y - 8 << "\" width=\"12\" height=\"10\" fill=\""
      << kPalette[i % 9] << "\"/>\n";
    o << "<text x=\"" << Frame::W - Frame::R + 30 << "\" y=\"" << y + 1 << "\" font-size=\"12\">" << names[i]
      << "</text>\n";
  }
}

std::string svg_open() {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\" "
         "font-family=\"sans-serif\">\n";
}

void line_plot(const fs::path& path, const std::vector<Series>& series, const std::string& title, const std::string& xl,
               const std::string& yl) {
  Frame f{1e300, -1e300, 1e300, -1e300};
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      f.x0 = std::min(f.x0, s.x[i]);
      f.x1 = std::max(f.x1, s.x[i]);
      f.y0 = std::min(f.y0, s.lo.empty() ? s.y[i] : s.lo[i]);
      f.y1 = std::max(f.y1, s.hi.empty() ? s.y[i] : s.hi[i]);
    }
  frame_bounds(f);
  auto o = open_out(path);
  o << svg_open();
  axes(o, f, title, xl, yl);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    names.push_back(s.name);
    if (!s.lo.empty()) {
      o << "<polygon fill=\"" << kPalette[k % 9] << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) o << fmt(f.px(s.x[i])) << ',' << fmt(f.py(s.hi[i])) << ' ';
      for (std::size_t i = s.x.size(); i-- > 0;) o << fmt(f.px(s.x[i])) << ',' << fmt(f.py(s.lo[i])) << ' ';
      o << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << kPalette[k % 9] << "\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) o << fmt(f.px(s.x[i])) << ',' << fmt(f.py(s.y[i])) << ' ';
    o << "\"/>\n";
  }
  legend(o, names);
  o << "</svg>\n";
}

void bar_plot(const fs::path& path, const std::vector<SummaryRow>& rows, const std::string& title, double cap) {
  Frame f{0, static_cast<double>(rows.size()), 0, cap};
  frame_bounds(f);
  f.y0 = 0;
  auto o = open_out(path);
  o << svg_open();
  o << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n";
  o << "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  o << "<line x1=\"70\" y1=\"350\" x2=\"490\" y2=\"350\" stroke=\"black\"/>\n";
  o << "<line x1=\"70\" y1=\"40\" x2=\"70\" y2=\"350\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.y1 * i / 4.0;
    o << "<text x=\"64\" y=\"" << fmt(f.py(yv) + 4) << "\" text-anchor=\"end\" font-size=\"11\">" << tick_label(yv)
      << "</text>\n";
  }
  o << "<text x=\"16\" y=\"200\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 200)\">steps to "
       "solve</text>\n";
  std::vector<std::string> names;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    names.push_back(r.method);
    const double xl = f.px(k + 0.15), xr = f.px(k + 0.85);
    o << "<rect x=\"" << fmt(xl) << "\" y=\"" << fmt(f.py(r.mean_steps)) << "\" width=\"" << fmt(xr - xl)
      << "\" height=\"" << fmt(f.py(0) - f.py(r.mean_steps)) << "\" fill=\"" << kPalette[k % 9] << "\"/>\n";
    const double xm = (xl + xr) / 2;
    o << "<line x1=\"" << fmt(xm) << "\" y1=\"" << fmt(f.py(r.mean_steps - r.se_steps)) << "\" x2=\"" << fmt(xm)
      << "\" y2=\"" << fmt(f.py(r.mean_steps + r.se_steps)) << "\" stroke=\"black\"/>\n";
  }
  legend(o, names);
  o << "</svg>\n";
}

}  // namespace

std::vector<fs::path> emit_plots(const fs::path& dir, const fs::path& out_dir, std::ostream* warn) {
  const auto episodes = read_episodes_csv(dir / "episodes.csv");
  if (episodes.empty()) throw std::invalid_argument("emit_plots: episodes.csv has no rows");
  fs::create_directories(out_dir);
  std::vector<fs::path> written;

  std::vector<std::string> domains;
  for (const auto& r : episodes)
    if (std::find(domains.begin(), domains.end(), r.domain) == domains.end()) domains.push_back(r.domain);

  // Methods the campaign asked for but that produced nothing are reported.
  std::vector<std::string> requested;
  if (fs::exists(dir / "campaign.json")) {
    std::ifstream in(dir / "campaign.json");
    for (const auto& m : json::parse(in).value("methods", json::array()))
      requested.push_back(std::string(algo::to_string(algo::parse_method(m.get<std::string>()))));
  }

  // curves.csv grouped as (method, domain) -> step -> values
  std::map<std::pair<std::string, std::string>, std::map<int, std::vector<double>>> curves;
  if (fs::exists(dir / "curves.csv"))
    for (const auto& f : read_csv(dir / "curves.csv", kCurvesHeader))
      curves[{f[0], f[1]}][to_int(f[4], dir / "curves.csv")].push_back(to_double(f[5], dir / "curves.csv"));

  std::map<std::pair<std::string, std::string>, std::map<int, std::vector<double>>> probe;
  if (fs::exists(dir / "training.csv"))
    for (const auto& f : read_csv(dir / "training.csv", kTrainingHeader))
      if (algo::uses_probe(algo::parse_method(f[0])))
        probe[{f[0], f[1]}][to_int(f[3], dir / "training.csv")].push_back(to_double(f[5], dir / "training.csv"));

  for (const auto& domain : domains) {
    std::vector<EpisodeRow> dom_rows;
    for (const auto& r : episodes)
      if (r.domain == domain) dom_rows.push_back(r);
    const auto summary = aggregate(dom_rows);
    for (const auto& m : requested)
      if (std::none_of(summary.begin(), summary.end(), [&](const SummaryRow& s) { return s.method == m; }) && warn)
        *warn << "warning: no rows for method " << m << " on " << domain << "; series skipped\n";
    const int cap = env::domain_info(env::parse_domain(domain)).max_steps;

    const fs::path bar = out_dir / (domain + "_steps_to_solve.svg");
    bar_plot(bar, summary, domain + ": steps to solve (mean and SE)", cap);
    write_summary_csv(out_dir / (domain + "_steps_to_solve.csv"), summary);
    written.push_back(bar);
    written.push_back(out_dir / (domain + "_steps_to_solve.csv"));

    // cumulative reward with SE bands, and percent solved by step
    std::vector<Series> reward_series, solved_series;
    auto reward_csv = open_out(out_dir / (domain + "_cumulative_reward.csv"));
    auto solved_csv = open_out(out_dir / (domain + "_percent_solved.csv"));
    reward_csv << "method,step,mean,se\n";
    solved_csv << "method,step,percent_solved\n";
    for (const auto& s : summary) {
      const auto it = curves.find({s.method, domain});
      if (it == curves.end() || it->second.empty()) {
        if (warn) *warn << "warning: no reward curve for " << s.method << " on " << domain << "; series skipped\n";
      } else {
        Series rs{s.method, {}, {}, {}, {}};
        for (const auto& [step, vals] : it->second) {
          double mean = 0, ss = 0;
          for (double v : vals) mean += v;
          mean /= vals.size();
          for (double v : vals) ss += (v - mean) * (v - mean);
          const double se = vals.size() > 1 ? std::sqrt(ss / (vals.size() - 1)) / std::sqrt(vals.size()) : 0.0;
          rs.x.push_back(step);
          rs.y.push_back(mean);
          rs.lo.push_back(mean - se);
          rs.hi.push_back(mean + se);
          reward_csv << s.method << ',' << step << ',' << num(mean) << ',' << num(se) << '\n';
        }
        reward_series.push_back(std::move(rs));
      }
      Series ps{s.method, {}, {}, {}, {}};
      for (int t = 1; t <= cap; ++t) {
        int solved = 0, n = 0;
        for (const auto& r : dom_rows)
          if (r.method == s.method) {
            ++n;
            solved += (r.solved && r.steps_to_solve <= t) ? 1 : 0;
          }
        const double pct = 100.0 * solved / n;
        ps.x.push_back(t);
        ps.y.push_back(pct);
        solved_csv << s.method << ',' << t << ',' << num(pct) << '\n';
      }
      solved_series.push_back(std::move(ps));
    }
    if (!reward_series.empty()) {
      const fs::path p = out_dir / (domain + "_cumulative_reward.svg");
      line_plot(p, reward_series, domain + ": cumulative reward", "test episode step", "cumulative reward");
      written.push_back(p);
    }
    written.push_back(out_dir / (domain + "_cumulative_reward.csv"));
    const fs::path sp = out_dir / (domain + "_percent_solved.svg");
    line_plot(sp, solved_series, domain + ": percent of test instances solved", "test episode step", "percent solved");
    written.push_back(sp);
    written.push_back(out_dir / (domain + "_percent_solved.csv"));

    // probe return during training, mean over seeds, moving average
    std::vector<Series> probe_series;
    auto probe_csv = open_out(out_dir / (domain + "_probe_reward.csv"));
    probe_csv << "method,episode,probe_return\n";
    for (const auto& s : summary) {
      const auto it = probe.find({s.method, domain});
      if (it == probe.end()) continue;
      std::vector<double> mean;
      for (const auto& [ep, vals] : it->second) {
        double m = 0;
        for (double v : vals) m += v;
        mean.push_back(m / vals.size());
      }
      const std::size_t w = std::max<std::size_t>(1, mean.size() / 50);
      Series ps{s.method, {}, {}, {}, {}};
      double acc = 0;
      for (std::size_t i = 0; i < mean.size(); ++i) {
        acc += mean[i];
        if (i >= w) acc -= mean[i - w];
        const double v = acc / std::min(i + 1, w);
        if (i % w == 0 || i + 1 == mean.size()) {
          ps.x.push_back(static_cast<double>(i));
          ps.y.push_back(v);
        }
        probe_csv << s.method << ',' << i << ',' << num(v) << '\n';
      }
      probe_series.push_back(std::move(ps));
    }
    written.push_back(out_dir / (domain + "_probe_reward.csv"));
    if (!probe_series.empty()) {
      const fs::path p = out_dir / (domain + "_probe_reward.svg");
      line_plot(p, probe_series, domain + ": probe return during training", "training episode", "probe return");
      written.push_back(p);
    } else if (warn) {
      *warn << "warning: no probe-based method on " << domain << "; probe reward plot skipped\n";
    }
  }
  return written;
}

}  // namespace sept::harness
