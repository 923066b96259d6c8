#include "decaf/config.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "decaf/metrics.hpp"

namespace decaf {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

const std::array<const char*, 34> kKnownKeys = {
    "preset",         "algorithm",     "optimizer",          "topology",
    "topology.csv",   "topology.rows", "topology.cols",      "n_agents",
    "task.d",         "task.k",        "task.n_samples",     "task.heterogeneity",
    "task.noise_std", "task.rank",     "r",                  "eta",
    "sigma_init",     "alpha",         "alpha.schedule",     "batch_size",
    "tau",            "iters",         "seed",               "metric_interval",
    "split_mode",     "grad_point",    "msgd.beta",          "adam.beta1",
    "adam.beta2",     "adam.epsilon",  "adam.ht",            "threads",
    "dump_adapters",  "dump_data"};

bool known_key(const std::string& key) {
  for (const char* k : kKnownKeys)
    if (key == k) return true;
  return false;
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: invalid integer '" + v + "' for key '" + key + "'");
  }
}

long long to_ll(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long out = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: invalid integer '" + v + "' for key '" + key + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: invalid integer '" + v + "' for key '" + key + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: invalid number '" + v + "' for key '" + key + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: invalid boolean '" + v + "' for key '" + key + "'");
}

}  // namespace

KeyValues parse_config_text(const std::string& text) {
  KeyValues pairs;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not of the form key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config: empty key on line " + std::to_string(lineno));
    pairs.emplace_back(key, value);
  }
  return pairs;
}

KeyValues parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

ConfigBundle build_config(const KeyValues& pairs) {
  for (const auto& [key, value] : pairs) {
    (void)value;
    if (!known_key(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  }

  std::map<std::string, std::string> eff = {
      {"preset", "none"},      {"algorithm", "dlora"},
      {"optimizer", "sgd"},    {"topology", "fully_connected"},
      {"topology.csv", ""},    {"topology.rows", "0"},
      {"topology.cols", "0"},  {"n_agents", "8"},
      {"task.d", "16"},        {"task.k", "12"},
      {"task.n_samples", "32"},{"task.heterogeneity", "0"},
      {"task.noise_std", "0"}, {"task.rank", "4"},
      {"r", "4"},              {"eta", "1"},
      {"sigma_init", "0.02"},  {"alpha", "0.05"},
      {"alpha.schedule", "constant"}, {"batch_size", "0"},
      {"tau", "1"},            {"iters", "2000"},
      {"seed", "42"},          {"metric_interval", "10"},
      {"split_mode", "balanced"}, {"grad_point", "pre_consensus"},
      {"msgd.beta", "0.9"},    {"adam.beta1", "0.9"},
      {"adam.beta2", "0.999"}, {"adam.epsilon", "1e-8"},
      {"adam.ht", "amsgrad"},  {"threads", "0"},
      {"dump_adapters", "false"}, {"dump_data", "false"}};

  // Presets install their defaults before any explicit key applies.
  for (const auto& [key, value] : pairs) {
    if (key != "preset") continue;
    if (value == "vlm-like") {
      eff["r"] = "2";
      eff["eta"] = "1";
    } else if (value == "llm-like") {
      eff["r"] = "4";
      eff["eta"] = "8";
    } else if (value != "none") {
      throw std::invalid_argument("config: unknown preset '" + value + "'");
    }
    eff["preset"] = value;
  }
  for (const auto& [key, value] : pairs) {
    if (key == "preset") continue;
    eff[key] = value;
  }

  ConfigBundle bundle;
  RunConfig& cfg = bundle.run;
  try {
    cfg.algorithm = algorithm_from_string(eff["algorithm"]);
    cfg.optimizer = optimizer_kind_from_string(eff["optimizer"]);
    cfg.topology = topology_kind_from_string(eff["topology"]);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  cfg.opt.mode = cfg.optimizer;
  cfg.n_agents = to_int("n_agents", eff["n_agents"]);
  cfg.task.d = to_int("task.d", eff["task.d"]);
  cfg.task.k = to_int("task.k", eff["task.k"]);
  cfg.task.n_samples_per_agent = to_int("task.n_samples", eff["task.n_samples"]);
  cfg.task.heterogeneity = to_double("task.heterogeneity", eff["task.heterogeneity"]);
  cfg.task.noise_std = to_double("task.noise_std", eff["task.noise_std"]);
  cfg.task.ground_truth_rank = to_int("task.rank", eff["task.rank"]);
  cfg.r = to_int("r", eff["r"]);
  cfg.eta = to_double("eta", eff["eta"]);
  cfg.sigma_init = to_double("sigma_init", eff["sigma_init"]);
  cfg.alpha = to_double("alpha", eff["alpha"]);
  cfg.batch_size = to_int("batch_size", eff["batch_size"]);
  cfg.tau = to_ll("tau", eff["tau"]);
  cfg.iters = to_ll("iters", eff["iters"]);
  cfg.seed = to_u64("seed", eff["seed"]);
  cfg.metric_interval = to_ll("metric_interval", eff["metric_interval"]);
  cfg.opt.beta = to_double("msgd.beta", eff["msgd.beta"]);
  cfg.opt.beta1 = to_double("adam.beta1", eff["adam.beta1"]);
  cfg.opt.beta2 = to_double("adam.beta2", eff["adam.beta2"]);
  cfg.opt.epsilon = to_double("adam.epsilon", eff["adam.epsilon"]);
  cfg.threads = to_int("threads", eff["threads"]);

  const std::string& sched = eff["alpha.schedule"];
  if (sched == "constant") cfg.schedule = Schedule::constant;
  else if (sched == "cosine") cfg.schedule = Schedule::cosine;
  else throw std::invalid_argument("config: invalid value '" + sched + "' for key 'alpha.schedule'");

  const std::string& split = eff["split_mode"];
  if (split == "balanced") cfg.split_mode = SplitMode::balanced;
  else if (split == "sigma_left") cfg.split_mode = SplitMode::sigma_left;
  else throw std::invalid_argument("config: invalid value '" + split + "' for key 'split_mode'");

  const std::string& gp = eff["grad_point"];
  if (gp == "pre_consensus") cfg.grad_point = GradPoint::pre_consensus;
  else if (gp == "post_consensus") cfg.grad_point = GradPoint::post_consensus;
  else throw std::invalid_argument("config: invalid value '" + gp + "' for key 'grad_point'");

  const std::string& ht = eff["adam.ht"];
  if (ht == "amsgrad") cfg.opt.ht = AdamHt::amsgrad;
  else if (ht == "ema") cfg.opt.ht = AdamHt::ema;
  else throw std::invalid_argument("config: invalid value '" + ht + "' for key 'adam.ht'");

  const int grid_rows = to_int("topology.rows", eff["topology.rows"]);
  const int grid_cols = to_int("topology.cols", eff["topology.cols"]);
  if ((grid_rows > 0) != (grid_cols > 0))
    throw std::invalid_argument("config: topology.rows and topology.cols must be set together");
  if (grid_rows > 0) cfg.torus_dims = GridDims{grid_rows, grid_cols};

  bundle.topology_csv = eff["topology.csv"];
  if (!bundle.topology_csv.empty()) {
    if (cfg.topology != TopologyKind::custom)
      throw std::invalid_argument("config: topology.csv requires topology = custom");
    cfg.custom_weights = read_csv(bundle.topology_csv);
  } else if (cfg.topology == TopologyKind::custom) {
    throw std::invalid_argument("config: topology = custom requires topology.csv");
  }

  bundle.dump_adapters = to_bool("dump_adapters", eff["dump_adapters"]);
  bundle.dump_data = to_bool("dump_data", eff["dump_data"]);

  validate_config(cfg);

  bundle.resolved.reserve(kKnownKeys.size());
  for (const char* key : kKnownKeys) bundle.resolved.emplace_back(key, eff[key]);
  return bundle;
}

// ---------------------------------------------------------------------------
// SHA-1 (for git-style blob hashes of run inputs)

namespace {

struct Sha1 {
  std::uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};
  std::uint64_t total = 0;
  unsigned char block[64];
  std::size_t fill = 0;

  static std::uint32_t rol(std::uint32_t x, int s) { return (x << s) | (x >> (32 - s)); }

  void process(const unsigned char* p) {
    std::uint32_t w[80];
    for (int i = 0; i < 16; ++i)
      w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
             (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
    for (int i = 16; i < 80; ++i) w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
    std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
    for (int i = 0; i < 80; ++i) {
      std::uint32_t f, k;
      if (i < 20) { f = (b & c) | (~b & d); k = 0x5A827999u; }
      else if (i < 40) { f = b ^ c ^ d; k = 0x6ED9EBA1u; }
      else if (i < 60) { f = (b & c) | (b & d) | (c & d); k = 0x8F1BBCDCu; }
      else { f = b ^ c ^ d; k = 0xCA62C1D6u; }
      const std::uint32_t t = rol(a, 5) + f + e + k + w[i];
      e = d; d = c; c = rol(b, 30); b = a; a = t;
    }
    h[0] += a; h[1] += b; h[2] += c; h[3] += d; h[4] += e;
  }

  void update(const unsigned char* p, std::size_t n) {
    total += n;
    while (n > 0) {
      const std::size_t take = std::min(n, sizeof(block) - fill);
      std::copy(p, p + take, block + fill);
      fill += take;
      p += take;
      n -= take;
      if (fill == sizeof(block)) {
        process(block);
        fill = 0;
      }
    }
  }

  std::string finish() {
    const std::uint64_t bits = total * 8;
    const unsigned char one = 0x80;
    update(&one, 1);
    const unsigned char zero = 0x00;
    while (fill != 56) update(&zero, 1);
    unsigned char len[8];
    for (int i = 0; i < 8; ++i) len[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
    update(len, 8);
    char out[41];
    for (int i = 0; i < 5; ++i) std::snprintf(out + 8 * i, 9, "%08x", h[i]);
    return std::string(out, 40);
  }
};

}  // namespace

std::string sha1_hex(const std::string& bytes) {
  Sha1 s;
  s.update(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
  return s.finish();
}

std::string git_blob_hash(const std::string& content) {
  std::string framed = "blob " + std::to_string(content.size());
  framed.push_back('\0');
  framed += content;
  return sha1_hex(framed);
}

std::string inputs_hash(const ConfigBundle& bundle) {
  std::string canonical;
  for (const auto& [key, value] : bundle.resolved) canonical += key + " = " + value + "\n";
  if (!bundle.topology_csv.empty()) {
    std::ifstream in(bundle.topology_csv);
    if (in) {
      std::stringstream ss;
      ss << in.rdbuf();
      canonical += "topology.csv_blob = " + git_blob_hash(ss.str()) + "\n";
    }
  }
  return git_blob_hash(canonical);
}

std::string summary_json(const ConfigBundle& bundle, const RunResult& result) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [key, value] : bundle.resolved) cfg[key] = value;
  j["config"] = cfg;
  j["inputs_hash"] = inputs_hash(bundle);

  const RunSummary& s = result.summary;
  j["topology"] = {{"rho", s.rho}, {"spectral_gap", s.spectral_gap}};
  j["step_size"] = {{"alpha", bundle.run.alpha},
                    {"ceiling", s.alpha_ceiling},
                    {"within_bound", s.step_size_ok}};
  j["constants"] = {{"L", s.constants.L},
                    {"G", s.constants.G},
                    {"c", s.constants.c},
                    {"zeta", s.constants.zeta},
                    {"kappa", s.constants.kappa},
                    {"L_hat", s.l_hat},
                    {"note", "empirical trajectory-local estimates"}};
  j["final"] = {{"global_loss", s.final_global_loss},
                {"union_loss_mean", s.final_union_loss_mean},
                {"avg_grad_norm_sq", s.final_avg_grad_norm_sq},
                {"per_agent_losses", s.final_per_agent_losses}};
  j["communication"] = {{"rounds", s.comm_rounds}, {"total_bytes", s.total_comm_bytes}};
  j["wall_seconds"] = s.wall_seconds;
  j["warnings"] = s.warnings;
  return j.dump(2) + "\n";
}

void atomic_write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_run_outputs(const std::string& out_dir, const ConfigBundle& bundle,
                       const RunResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::string metrics = metrics_csv_header(bundle.run.n_agents) + "\n";
  for (const MetricsRecord& rec : result.records) metrics += metrics_csv_row(rec) + "\n";
  atomic_write_file(out_dir + "/metrics.csv", metrics);

  std::string ledger = "iter,edges,bytes\n";
  for (const LedgerEntry& e : result.ledger)
    ledger += std::to_string(e.iter) + ',' + std::to_string(e.edges) + ',' +
              std::to_string(e.bytes) + '\n';
  atomic_write_file(out_dir + "/ledger.csv", ledger);

  atomic_write_file(out_dir + "/summary.json", summary_json(bundle, result));

  if (bundle.dump_adapters) {
    fs::create_directories(out_dir + "/adapters");
    for (std::size_t i = 0; i < result.final_states.size(); ++i) {
      write_csv(out_dir + "/adapters/agent_" + std::to_string(i) + "_A.csv",
                result.final_states[i].a);
      write_csv(out_dir + "/adapters/agent_" + std::to_string(i) + "_B.csv",
                result.final_states[i].b);
    }
  }
  if (bundle.dump_data) {
    fs::create_directories(out_dir + "/data");
    Rng data_rng(bundle.run.seed, StreamTag::data);
    const GeneratedTask task =
        generate_data(bundle.run.task, bundle.run.n_agents, bundle.run.eta, data_rng);
    for (std::size_t i = 0; i < task.data.size(); ++i)
      save_dataset(out_dir + "/data/agent_" + std::to_string(i), task.data[i]);
  }
}

}  // namespace decaf
