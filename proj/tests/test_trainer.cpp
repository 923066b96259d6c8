#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "decaf/metrics.hpp"
#include "decaf/trainer.hpp"
#include "test_util.hpp"

using namespace decaf;

namespace {

RunConfig small_config() {
  RunConfig cfg;
  cfg.n_agents = 4;
  cfg.task.d = 8;
  cfg.task.k = 6;
  cfg.task.n_samples_per_agent = 16;
  cfg.task.ground_truth_rank = 2;
  cfg.r = 2;
  cfg.iters = 60;
  cfg.metric_interval = 5;
  cfg.threads = 1;
  return cfg;
}

std::string metrics_text(const RunResult& res, int n_agents) {
  std::string out = metrics_csv_header(n_agents) + "\n";
  for (const MetricsRecord& rec : res.records) out += metrics_csv_row(rec) + "\n";
  return out;
}

}  // namespace

TEST_CASE("single-agent dlora reproduces a hand-rolled centralized loop") {
  RunConfig cfg = small_config();
  cfg.n_agents = 1;
  cfg.algorithm = Algorithm::dlora;
  cfg.batch_size = 8;
  cfg.iters = 40;
  const RunResult res = run(cfg);

  // independent replication of the exact pipeline for N=1
  Rng data_rng(cfg.seed, StreamTag::data);
  const GeneratedTask task = generate_data(cfg.task, 1, cfg.eta, data_rng);
  FrozenBase base;
  base.w0 = task.w0;
  Rng init_rng(cfg.seed, StreamTag::init, 0);
  AdapterPair p = init_adapter(cfg.task.d, cfg.task.k, cfg.r, cfg.sigma_init, cfg.eta, init_rng);
  Rng batch_rng(cfg.seed, StreamTag::batch, 0);
  for (long long t = 1; t <= cfg.iters; ++t) {
    const std::vector<int> batch = sample_batch(task.data[0], cfg.batch_size, batch_rng);
    const AdapterGrad g = grad_adapter(base, p, task.data[0], batch);
    p = sgd_step(p, g.ga, g.gb, cfg.alpha);  // self-loop consensus is identity
  }
  CHECK(res.final_states[0].a.values() == p.a.values());
  CHECK(res.final_states[0].b.values() == p.b.values());
}

TEST_CASE("identical configs give bit-identical metrics") {
  const RunConfig cfg = small_config();
  const RunResult a = run(cfg);
  const RunResult b = run(cfg);
  CHECK(metrics_text(a, cfg.n_agents) == metrics_text(b, cfg.n_agents));
}

TEST_CASE("thread count does not change results") {
  RunConfig cfg = small_config();
  cfg.algorithm = Algorithm::decaf;
  cfg.task.heterogeneity = 0.5;
  cfg.threads = 1;
  const RunResult one = run(cfg);
  cfg.threads = 4;
  const RunResult four = run(cfg);
  cfg.threads = 3;
  const RunResult three = run(cfg);
  CHECK(metrics_text(one, cfg.n_agents) == metrics_text(four, cfg.n_agents));
  CHECK(metrics_text(one, cfg.n_agents) == metrics_text(three, cfg.n_agents));
}

TEST_CASE("fedavg equals dlora on fully connected weights") {
  RunConfig cfg = small_config();
  cfg.algorithm = Algorithm::fedavg;
  const RunResult fed = run(cfg);
  cfg.algorithm = Algorithm::dlora;
  const RunResult dec = run(cfg);
  CHECK(metrics_text(fed, cfg.n_agents) == metrics_text(dec, cfg.n_agents));
}

TEST_CASE("local equals dlora on identity mixing") {
  RunConfig cfg = small_config();
  cfg.algorithm = Algorithm::local;
  const RunResult local = run(cfg);
  cfg.algorithm = Algorithm::dlora;
  cfg.topology = TopologyKind::custom;
  cfg.custom_weights = Mat::identity(cfg.n_agents);
  const RunResult dec = run(cfg);
  CHECK(metrics_text(local, cfg.n_agents) == metrics_text(dec, cfg.n_agents));
}

TEST_CASE("communication happens exactly at multiples of tau") {
  RunConfig cfg = small_config();
  cfg.tau = 3;
  cfg.iters = 20;
  const RunResult res = run(cfg);
  std::vector<long long> iters;
  for (const LedgerEntry& e : res.ledger) iters.push_back(e.iter);
  CHECK(iters == std::vector<long long>{3, 6, 9, 12, 15, 18});

  cfg.algorithm = Algorithm::local;
  const RunResult none = run(cfg);
  CHECK(none.ledger.empty());
  CHECK(none.summary.total_comm_bytes == 0);
}

TEST_CASE("metrics list length is ceil(T / interval)") {
  RunConfig cfg = small_config();
  cfg.iters = 23;
  cfg.metric_interval = 5;
  const RunResult res = run(cfg);
  CHECK(res.records.size() == 5);  // 5, 10, 15, 20, 23
  CHECK(res.records.back().iter == 23);

  cfg.iters = 20;
  const RunResult even = run(cfg);
  CHECK(even.records.size() == 4);
}

TEST_CASE("per-round ledger bytes follow the payload accounting") {
  RunConfig cfg = small_config();
  cfg.algorithm = Algorithm::dlora;
  cfg.topology = TopologyKind::ring;
  cfg.iters = 4;
  const RunResult res = run(cfg);
  // ring of 4: 8 directed edges; payload (d + k) * r * 8 bytes
  const long long payload = (cfg.task.d + cfg.task.k) * cfg.r * 8;
  REQUIRE(res.ledger.size() == 4);
  CHECK(res.ledger[0].edges == 8);
  CHECK(res.ledger[0].bytes == 8 * payload);

  cfg.algorithm = Algorithm::dlora_fa;
  const RunResult fa = run(cfg);
  CHECK(fa.ledger[0].bytes == 8 * cfg.task.d * cfg.r * 8);

  cfg.algorithm = Algorithm::decaf;
  cfg.optimizer = OptimizerKind::adam;
  cfg.opt.mode = OptimizerKind::adam;
  const RunResult adam = run(cfg);
  CHECK(adam.ledger[0].bytes == 2 * 8 * payload);
}

TEST_CASE("gradient norms trend downward on the default IID task") {
  for (Algorithm alg : {Algorithm::dlora, Algorithm::decaf, Algorithm::fedavg}) {
    RunConfig cfg = small_config();
    cfg.algorithm = alg;
    cfg.iters = 400;
    cfg.metric_interval = 1;
    const RunResult res = run(cfg);
    double first = 0.0, second = 0.0;
    int nf = 0, ns = 0;
    for (const MetricsRecord& rec : res.records) {
      if (rec.iter <= cfg.iters / 2) {
        first += rec.avg_grad_norm_sq;
        ++nf;
      } else {
        second += rec.avg_grad_norm_sq;
        ++ns;
      }
    }
    CHECK(second / ns < first / nf);
  }
}

TEST_CASE("frozen-A runs have zero interference at every round") {
  RunConfig cfg = small_config();
  cfg.algorithm = Algorithm::dlora_fa;
  cfg.task.heterogeneity = 0.8;
  cfg.metric_interval = 1;
  cfg.iters = 50;
  const RunResult res = run(cfg);
  int rounds = 0;
  for (const MetricsRecord& rec : res.records) {
    if (rec.has_comm_fields()) {
      CHECK(rec.interference_max <= 1e-12);
      ++rounds;
    }
  }
  CHECK(rounds == 50);
}

TEST_CASE("decaf records truncation errors within their bounds") {
  RunConfig cfg = small_config();
  cfg.algorithm = Algorithm::decaf;
  cfg.task.heterogeneity = 0.9;
  cfg.topology = TopologyKind::ring;
  cfg.metric_interval = 1;
  cfg.iters = 50;
  const RunResult res = run(cfg);
  for (const MetricsRecord& rec : res.records) {
    REQUIRE(rec.has_comm_fields());
    CHECK(rec.tsvd_error_max >= 0.0);
    CHECK(rec.tsvd_error_max <= rec.tsvd_bound_max + 1e-9);
  }
}

TEST_CASE("msgd with zero beta matches sgd trajectories bit for bit") {
  RunConfig cfg = small_config();
  cfg.optimizer = OptimizerKind::sgd;
  const RunResult sgd_run = run(cfg);
  cfg.optimizer = OptimizerKind::msgd;
  cfg.opt.mode = OptimizerKind::msgd;
  cfg.opt.beta = 0.0;
  const RunResult msgd_run = run(cfg);
  CHECK(metrics_text(sgd_run, cfg.n_agents) == metrics_text(msgd_run, cfg.n_agents));
  for (int i = 0; i < cfg.n_agents; ++i) {
    CHECK(sgd_run.final_states[i].a.values() == msgd_run.final_states[i].a.values());
    CHECK(sgd_run.final_states[i].b.values() == msgd_run.final_states[i].b.values());
  }
}

TEST_CASE("grad_point post_consensus changes the trajectory") {
  RunConfig cfg = small_config();
  cfg.task.heterogeneity = 0.7;
  cfg.topology = TopologyKind::ring;
  const RunResult pre = run(cfg);
  cfg.grad_point = GradPoint::post_consensus;
  const RunResult post = run(cfg);
  CHECK(metrics_text(pre, cfg.n_agents) != metrics_text(post, cfg.n_agents));
}

TEST_CASE("cosine schedule decays the effective step") {
  RunConfig cfg = small_config();
  cfg.schedule = Schedule::cosine;
  cfg.iters = 50;
  CHECK_NOTHROW(run(cfg));
}

TEST_CASE("adam and msgd run end to end with every consensus mode") {
  for (Algorithm alg : {Algorithm::dlora, Algorithm::decaf, Algorithm::dlora_fa, Algorithm::local}) {
    for (OptimizerKind opt : {OptimizerKind::msgd, OptimizerKind::adam}) {
      RunConfig cfg = small_config();
      cfg.algorithm = alg;
      cfg.optimizer = opt;
      cfg.opt.mode = opt;
      cfg.alpha = 0.002;  // adam without bias correction needs a gentle step here
      cfg.iters = 30;
      const RunResult res = run(cfg);
      CHECK(res.records.size() == 6);
      for (const MetricsRecord& rec : res.records) {
        CHECK(std::isfinite(rec.global_loss));
        CHECK(std::isfinite(rec.avg_grad_norm_sq));
      }
    }
  }
}

TEST_CASE("invalid configurations are rejected before iteration zero") {
  RunConfig cfg = small_config();
  cfg.algorithm = Algorithm::fedavg;
  cfg.topology = TopologyKind::ring;
  CHECK_THROWS_AS(run(cfg), std::invalid_argument);

  cfg = small_config();
  cfg.r = 7;  // exceeds min(d=8, k=6)
  CHECK_THROWS_AS(run(cfg), std::invalid_argument);

  cfg = small_config();
  cfg.tau = 0;
  CHECK_THROWS_AS(run(cfg), std::invalid_argument);

  cfg = small_config();
  cfg.topology = TopologyKind::custom;  // no matrix supplied
  CHECK_THROWS_AS(run(cfg), std::invalid_argument);

  cfg = small_config();
  cfg.batch_size = 17;  // dataset has 16 samples
  CHECK_THROWS_AS(run(cfg), std::invalid_argument);
}

TEST_CASE("step-size warning fires when alpha exceeds the ceiling") {
  RunConfig cfg = small_config();
  cfg.alpha = 1e6;
  cfg.iters = 2;
  const RunResult res = run(cfg);
  CHECK_FALSE(res.summary.step_size_ok);
  bool found = false;
  for (const std::string& w : res.summary.warnings)
    if (w.find("step size exceeds") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("sweep runs one config per value with seeds held fixed") {
  RunConfig cfg = small_config();
  cfg.iters = 10;
  const auto results = sweep(cfg, "r", {"1", "2", "4"});
  REQUIRE(results.size() == 3);
  CHECK(results[0].first == "1");
  CHECK(results[2].first == "4");

  const auto topo = sweep(cfg, "topology", {"ring", "fully_connected"});
  REQUIRE(topo.size() == 2);

  CHECK_THROWS_AS(sweep(cfg, "nonsense", {"1"}), std::invalid_argument);
  CHECK_THROWS_AS(sweep(cfg, "r", {"abc"}), std::invalid_argument);

  // the swept value is the only difference: r=2 sweep equals the base run
  const RunResult base_run = run(cfg);
  CHECK(metrics_text(results[1].second, cfg.n_agents) == metrics_text(base_run, cfg.n_agents));
}

TEST_CASE("heterogeneity sweep reaches the task spec") {
  RunConfig cfg = small_config();
  cfg.iters = 5;
  const auto results = sweep(cfg, "heterogeneity", {"0", "0.5"});
  REQUIRE(results.size() == 2);
  CHECK(results[0].second.summary.final_global_loss !=
        doctest::Approx(results[1].second.summary.final_global_loss));
}
