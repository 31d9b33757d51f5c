#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <deque>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "sept/nn/checkpoint.hpp"
#include "sept/sept/sept.hpp"

namespace sept::algo {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha1_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1)
    throw std::runtime_error("sha1: digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string sha1_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha1_hex(ss.str());
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::vector<double> as_vector(const std::deque<double>& d) { return {d.begin(), d.end()}; }

// Visits every parameter set of the model with a stable file name.
template <typename Model, typename F>
void for_each_params(Model& m, F&& f) {
  f("q_online.bin", m.q.online, m.q.spec);
  f("q_target.bin", m.q.target, m.q.spec);
  if (m.vae) {
    auto& v = *m.vae;
    f("vae_online_encoder.bin", v.online.encoder, v.specs.encoder);
    f("vae_online_head.bin", v.online.head, v.specs.head);
    f("vae_online_decoder.bin", v.online.decoder, v.specs.decoder);
    f("vae_target_encoder.bin", v.target.encoder, v.specs.encoder);
    f("vae_target_head.bin", v.target.head, v.specs.head);
    f("vae_target_decoder.bin", v.target.decoder, v.specs.decoder);
  }
  if (m.probe) f("probe.bin", m.probe->params, m.probe->spec);
}

}  // namespace

void save_model(const TrainedModel& m, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<std::string> files{"config.json", "state.json"};
  write_text(dir / "config.json", to_json(m.config).dump(2) + "\n");

  json state;
  state["latent_rolling_mean"] = m.latent_rolling_mean;
  state["latent_estimates"] = m.latent_estimates;
  state["sigma_max"] = m.sigma_max;
  state["dyna_normalizer"] = as_vector(m.dyna_normalizer.values());
  if (m.probe) state["probe_normalizer"] = as_vector(m.probe->normalizer.values());
  state["q_env_steps"] = m.q.env_steps;
  state["q_train_steps"] = m.q.train_steps;
  state["log"] = {{"returns", m.log.returns},
                  {"probe_returns", m.log.probe_returns},
                  {"steps", m.log.steps},
                  {"solved", m.log.solved}};
  write_text(dir / "state.json", state.dump(2) + "\n");

  for_each_params(m, [&](const std::string& name, const auto& params, const nn::NetworkSpec& spec) {
    nn::save_parameters(dir / name, params, spec.fingerprint());
    files.push_back(name);
  });

  json manifest;
  manifest["format"] = 1;
  manifest["method"] = std::string(to_string(m.config.method));
  manifest["domain"] = std::string(env::to_string(m.config.domain));
  manifest["seed"] = m.config.seed;
  json hashes = json::object();
  for (const auto& name : files) hashes[name] = sha1_file(dir / name);
  manifest["files"] = hashes;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

TrainedModel load_model(const fs::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  for (const auto& [name, hash] : manifest.at("files").items())
    if (sha1_file(dir / name) != hash.get<std::string>())
      throw std::runtime_error("checkpoint: hash mismatch for " + (dir / name).string());

  TrainConfig config;
  try {
    config = config_from_json(read_json(dir / "config.json"));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
  Rng scratch(0);
  TrainedModel m = init_model(config, scratch);
  for_each_params(m, [&](const std::string& name, auto& params, const nn::NetworkSpec& spec) {
    params = nn::load_parameters<float>(dir / name, spec.fingerprint());
  });

  const json state = read_json(dir / "state.json");
  state.at("latent_rolling_mean").get_to(m.latent_rolling_mean);
  state.at("latent_estimates").get_to(m.latent_estimates);
  state.at("sigma_max").get_to(m.sigma_max);
  auto deque_of = [](const json& j) {
    const auto v = j.get<std::vector<double>>();
    return std::deque<double>(v.begin(), v.end());
  };
  m.dyna_normalizer.restore(deque_of(state.at("dyna_normalizer")));
  if (m.probe) m.probe->normalizer.restore(deque_of(state.at("probe_normalizer")));
  state.at("q_env_steps").get_to(m.q.env_steps);
  state.at("q_train_steps").get_to(m.q.train_steps);
  const auto& log = state.at("log");
  log.at("returns").get_to(m.log.returns);
  log.at("probe_returns").get_to(m.log.probe_returns);
  log.at("steps").get_to(m.log.steps);
  log.at("solved").get_to(m.log.solved);
  return m;
}

}  // namespace sept::algo
