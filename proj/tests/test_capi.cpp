#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "decaf/decaf.h"

namespace {

struct Cfg {
  decaf_config* h = nullptr;
  Cfg() { REQUIRE(decaf_config_create(&h) == DECAF_OK); }
  ~Cfg() { decaf_config_destroy(h); }
};

void set_small_run(decaf_config* cfg) {
  REQUIRE(decaf_config_set(cfg, "n_agents", "3") == DECAF_OK);
  REQUIRE(decaf_config_set(cfg, "task.d", "6") == DECAF_OK);
  REQUIRE(decaf_config_set(cfg, "task.k", "5") == DECAF_OK);
  REQUIRE(decaf_config_set(cfg, "task.n_samples", "8") == DECAF_OK);
  REQUIRE(decaf_config_set(cfg, "task.rank", "2") == DECAF_OK);
  REQUIRE(decaf_config_set(cfg, "r", "2") == DECAF_OK);
  REQUIRE(decaf_config_set(cfg, "iters", "12") == DECAF_OK);
  REQUIRE(decaf_config_set(cfg, "metric_interval", "4") == DECAF_OK);
  REQUIRE(decaf_config_set(cfg, "threads", "1") == DECAF_OK);
}

}  // namespace

TEST_CASE("config rejects unknown keys through the C surface") {
  Cfg cfg;
  CHECK(decaf_config_set(cfg.h, "definitely_not_a_key", "1") == DECAF_ERR_INVALID_ARG);
  CHECK(std::string(decaf_last_error()).find("definitely_not_a_key") != std::string::npos);

  CHECK(decaf_config_set(cfg.h, "iters", "banana") == DECAF_ERR_INVALID_ARG);
  // a failed set leaves the config usable
  CHECK(decaf_config_set(cfg.h, "iters", "7") == DECAF_OK);
  char buf[32];
  CHECK(decaf_config_get(cfg.h, "iters", buf, sizeof(buf)) == DECAF_OK);
  CHECK(std::string(buf) == "7");
}

TEST_CASE("clone is independent of the original") {
  Cfg cfg;
  REQUIRE(decaf_config_set(cfg.h, "r", "2") == DECAF_OK);
  decaf_config* copy = nullptr;
  REQUIRE(decaf_config_clone(cfg.h, &copy) == DECAF_OK);
  REQUIRE(decaf_config_set(copy, "r", "6") == DECAF_OK);
  char buf[8];
  CHECK(decaf_config_get(cfg.h, "r", buf, sizeof(buf)) == DECAF_OK);
  CHECK(std::string(buf) == "2");
  decaf_config_destroy(copy);
}

TEST_CASE("run produces records, summary values and outputs") {
  Cfg cfg;
  set_small_run(cfg.h);
  decaf_result* res = nullptr;
  int progress_calls = 0;
  auto cb = [](const char* row, void* user) {
    CHECK(row != nullptr);
    ++*static_cast<int*>(user);
  };
  REQUIRE(decaf_run(cfg.h, cb, &progress_calls, &res) == DECAF_OK);
  CHECK(progress_calls == 3);

  size_t n = 0;
  CHECK(decaf_result_num_records(res, &n) == DECAF_OK);
  CHECK(n == 3);
  int64_t iter = 0;
  CHECK(decaf_result_record_iter(res, 2, &iter) == DECAF_OK);
  CHECK(iter == 12);
  double loss = 0.0;
  CHECK(decaf_result_record_value(res, 2, "global_loss", &loss) == DECAF_OK);
  CHECK(std::isfinite(loss));
  double inter = 0.0;
  CHECK(decaf_result_record_value(res, 2, "interference_max", &inter) == DECAF_OK);
  CHECK(std::isfinite(inter));  // tau = 1: every iteration communicates
  double bad = 0.0;
  CHECK(decaf_result_record_value(res, 2, "no_such_field", &bad) == DECAF_ERR_INVALID_ARG);

  double rho = -1.0;
  CHECK(decaf_result_summary_value(res, "rho", &rho) == DECAF_OK);
  CHECK(rho == doctest::Approx(0.0));

  namespace fs = std::filesystem;
  const std::string dir = "test_capi_out";
  fs::remove_all(dir);
  CHECK(decaf_result_write_outputs(res, dir.c_str()) == DECAF_OK);
  CHECK(fs::exists(dir + "/metrics.csv"));
  CHECK(fs::exists(dir + "/summary.json"));
  CHECK(fs::exists(dir + "/ledger.csv"));
  fs::remove_all(dir);

  decaf_result_destroy(res);
}

TEST_CASE("config file loading through the C surface") {
  const std::string path = "test_capi_config.cfg";
  {
    std::ofstream out(path);
    out << "# small run\nn_agents = 2\ntask.d = 5\ntask.k = 4\ntask.n_samples = 6\n"
           "task.rank = 2\nr = 2\niters = 3\nthreads = 1\n";
  }
  Cfg cfg;
  REQUIRE(decaf_config_load_file(cfg.h, path.c_str()) == DECAF_OK);
  char buf[8];
  CHECK(decaf_config_get(cfg.h, "n_agents", buf, sizeof(buf)) == DECAF_OK);
  CHECK(std::string(buf) == "2");
  CHECK(decaf_config_load_file(cfg.h, "no_such_file.cfg") == DECAF_ERR_IO);
  std::remove(path.c_str());
}

TEST_CASE("topology report matches the ring-4 oracle") {
  double rho = 0.0, gap = 0.0;
  int connected = 0;
  REQUIRE(decaf_topology_report("ring", 4, nullptr, &rho, &gap, &connected) == DECAF_OK);
  CHECK(std::fabs(rho - 1.0 / 9.0) < 1e-10);
  CHECK(std::fabs(gap - 2.0 / 3.0) < 1e-10);
  CHECK(connected == 1);

  CHECK(decaf_topology_report("triangle", 4, nullptr, &rho, &gap, &connected) ==
        DECAF_ERR_INVALID_ARG);
  CHECK(decaf_topology_report("bipartite", 5, nullptr, &rho, &gap, &connected) ==
        DECAF_ERR_INVALID_ARG);
}

TEST_CASE("tsvd bench reports sub-1e-8 error on exact-rank inputs") {
  double ms = 0.0, err = 1.0;
  REQUIRE(decaf_bench_tsvd(24, 18, 3, 5, 7, &ms, &err) == DECAF_OK);
  CHECK(err < 1e-8);
  CHECK(ms >= 0.0);
  CHECK(decaf_bench_tsvd(4, 4, 5, 1, 7, &ms, &err) == DECAF_ERR_INVALID_ARG);
}

TEST_CASE("constants estimation through the C surface") {
  Cfg cfg;
  set_small_run(cfg.h);
  double vals[6] = {0, 0, 0, 0, 0, 0};
  REQUIRE(decaf_estimate_constants(cfg.h, vals) == DECAF_OK);
  CHECK(vals[0] > 0.0);  // L
  CHECK(vals[2] > 0.0);  // c: sigma_1 of the Gaussian A0
  CHECK(vals[5] > 0.0);  // L_hat
}

TEST_CASE("sweep writes one output directory per value") {
  Cfg cfg;
  set_small_run(cfg.h);
  namespace fs = std::filesystem;
  const std::string dir = "test_capi_sweep";
  fs::remove_all(dir);
  const char* values[2] = {"1", "2"};
  REQUIRE(decaf_sweep(cfg.h, "r", values, 2, dir.c_str()) == DECAF_OK);
  CHECK(fs::exists(dir + "/r=1/metrics.csv"));
  CHECK(fs::exists(dir + "/r=2/summary.json"));
  CHECK(decaf_sweep(cfg.h, "volume", values, 2, dir.c_str()) == DECAF_ERR_INVALID_ARG);
  fs::remove_all(dir);
}
