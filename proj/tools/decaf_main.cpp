// decaf command-line front end. Talks to the simulator exclusively through
// the C API in decaf/decaf.h, the same surface other language bindings get.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "decaf/decaf.h"

namespace {

struct ConfigGuard {
  decaf_config* cfg = nullptr;
  ~ConfigGuard() { decaf_config_destroy(cfg); }
};

struct ResultGuard {
  decaf_result* res = nullptr;
  ~ResultGuard() { decaf_result_destroy(res); }
};

[[noreturn]] void die(const std::string& context) {
  std::fprintf(stderr, "error: %s: %s\n", context.c_str(), decaf_last_error());
  std::exit(1);
}

// Builds the config handle from --config, --set overrides (in order), an
// optional --threads shortcut and the DECAF_SEED environment override.
decaf_config* make_config(const std::string& config_path, const std::vector<std::string>& sets,
                          int threads) {
  decaf_config* cfg = nullptr;
  if (decaf_config_create(&cfg) != DECAF_OK) die("config create");
  if (!config_path.empty() && decaf_config_load_file(cfg, config_path.c_str()) != DECAF_OK) {
    std::string ctx = "loading " + config_path;
    decaf_config_destroy(cfg);
    die(ctx);
  }
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      decaf_config_destroy(cfg);
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      std::exit(1);
    }
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    if (decaf_config_set(cfg, key.c_str(), value.c_str()) != DECAF_OK) {
      decaf_config_destroy(cfg);
      die("applying --set " + kv);
    }
  }
  if (threads >= 0 &&
      decaf_config_set(cfg, "threads", std::to_string(threads).c_str()) != DECAF_OK) {
    decaf_config_destroy(cfg);
    die("applying --threads");
  }
  if (const char* env_seed = std::getenv("DECAF_SEED")) {
    if (decaf_config_set(cfg, "seed", env_seed) != DECAF_OK) {
      decaf_config_destroy(cfg);
      die("applying DECAF_SEED");
    }
  }
  return cfg;
}

void print_progress(const char* csv_row, void*) {
  // Columns: iter,global_loss,avg_grad_norm_sq,...
  std::string row = csv_row;
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (cells.size() < 4) {
    const auto comma = row.find(',', start);
    cells.push_back(row.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (cells.size() >= 4)
    std::printf("iter=%s global_loss=%s avg_grad_norm_sq=%s disagreement=%s\n", cells[0].c_str(),
                cells[1].c_str(), cells[2].c_str(), cells[3].c_str());
}

void print_warnings(const decaf_result* res) {
  size_t n = 0;
  decaf_result_num_warnings(res, &n);
  char buf[512];
  for (size_t i = 0; i < n; ++i)
    if (decaf_result_warning(res, i, buf, sizeof(buf)) == DECAF_OK)
      std::fprintf(stderr, "warning: %s\n", buf);
}

std::vector<std::string> split_values(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto comma = csv.find(',', start);
    out.push_back(csv.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decaf: decentralized low-rank-adapter fine-tuning simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", axis, values_csv, kind = "ring", csv_path;
  std::vector<std::string> sets;
  int threads = -1, agents = 4;
  int bench_d = 64, bench_k = 48, bench_r = 4, bench_trials = 20;
  std::uint64_t bench_seed = 42;

  CLI::App* cmd_run = app.add_subcommand("run", "execute one training run");
  cmd_run->add_option("--config", config_path, "flat key=value config file");
  cmd_run->add_option("--set", sets, "override, key=value (repeatable)");
  cmd_run->add_option("--out", out_dir, "output directory");
  cmd_run->add_option("--threads", threads, "worker threads (0 = hardware)");

  CLI::App* cmd_sweep = app.add_subcommand("sweep", "run a parameter sweep");
  cmd_sweep->add_option("--config", config_path, "flat key=value config file");
  cmd_sweep->add_option("--set", sets, "override, key=value (repeatable)");
  cmd_sweep->add_option("--axis", axis, "sweep axis: r, topology, n_agents, tau, alpha, heterogeneity")
      ->required();
  cmd_sweep->add_option("--values", values_csv, "comma-separated axis values")->required();
  cmd_sweep->add_option("--out", out_dir, "output directory");
  cmd_sweep->add_option("--threads", threads, "worker threads (0 = hardware)");

  CLI::App* cmd_topo = app.add_subcommand("validate-topology", "build a mixing matrix and report its spectrum");
  cmd_topo->add_option("--kind", kind, "fully_connected, ring, bipartite, torus, star, custom");
  cmd_topo->add_option("--agents", agents, "number of agents");
  cmd_topo->add_option("--csv", csv_path, "matrix file for kind=custom");

  CLI::App* cmd_bench = app.add_subcommand("bench-tsvd", "truncated-SVD timing/accuracy microbench");
  cmd_bench->add_option("--d", bench_d, "rows");
  cmd_bench->add_option("--k", bench_k, "cols");
  cmd_bench->add_option("--r", bench_r, "rank");
  cmd_bench->add_option("--trials", bench_trials, "number of decompositions");
  cmd_bench->add_option("--seed", bench_seed, "rng seed");

  CLI::App* cmd_const = app.add_subcommand("constants", "estimate L, G, c, zeta, kappa, L_hat for a config");
  cmd_const->add_option("--config", config_path, "flat key=value config file");
  cmd_const->add_option("--set", sets, "override, key=value (repeatable)");

  CLI11_PARSE(app, argc, argv);

  if (cmd_run->parsed()) {
    ConfigGuard cfg{make_config(config_path, sets, threads)};
    ResultGuard res;
    if (decaf_run(cfg.cfg, &print_progress, nullptr, &res.res) != DECAF_OK) die("run");
    print_warnings(res.res);
    if (decaf_result_write_outputs(res.res, out_dir.c_str()) != DECAF_OK) die("writing outputs");
    double final_loss = 0.0;
    decaf_result_summary_value(res.res, "final_global_loss", &final_loss);
    std::printf("done out=%s final_global_loss=%.12g\n", out_dir.c_str(), final_loss);
    return 0;
  }

  if (cmd_sweep->parsed()) {
    ConfigGuard cfg{make_config(config_path, sets, threads)};
    const std::vector<std::string> values = split_values(values_csv);
    std::vector<const char*> raw;
    raw.reserve(values.size());
    for (const std::string& v : values) raw.push_back(v.c_str());
    if (decaf_sweep(cfg.cfg, axis.c_str(), raw.data(), raw.size(), out_dir.c_str()) != DECAF_OK)
      die("sweep");
    std::printf("done out=%s runs=%zu\n", out_dir.c_str(), values.size());
    return 0;
  }

  if (cmd_topo->parsed()) {
    double rho = 0.0, gap = 0.0;
    int connected = 0;
    if (decaf_topology_report(kind.c_str(), agents, csv_path.empty() ? nullptr : csv_path.c_str(),
                              &rho, &gap, &connected) != DECAF_OK)
      die("validate-topology");
    std::printf("kind = %s\nagents = %d\nrho = %.12f\nspectral_gap = %.12f\nconnected = %s\n",
                kind.c_str(), agents, rho, gap, connected ? "true" : "false");
    return 0;
  }

  if (cmd_bench->parsed()) {
    double ms = 0.0, err = 0.0;
    if (decaf_bench_tsvd(bench_d, bench_k, bench_r, bench_trials, bench_seed, &ms, &err) != DECAF_OK)
      die("bench-tsvd");
    std::printf("tsvd d=%d k=%d r=%d trials=%d ms_per_call=%.4f max_rel_err=%.3e\n", bench_d,
                bench_k, bench_r, bench_trials, ms, err);
    return 0;
  }

  if (cmd_const->parsed()) {
    ConfigGuard cfg{make_config(config_path, sets, -1)};
    double vals[6] = {0, 0, 0, 0, 0, 0};
    if (decaf_estimate_constants(cfg.cfg, vals) != DECAF_OK) die("constants");
    const char* names[6] = {"L", "G", "c", "zeta", "kappa", "L_hat"};
    for (int i = 0; i < 6; ++i) std::printf("%s = %.12g\n", names[i], vals[i]);
    std::printf("note = empirical estimates at initialization\n");
    return 0;
  }

  return 1;
}
