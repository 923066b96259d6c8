#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "decaf/optimizer.hpp"
#include "test_util.hpp"

using namespace decaf;

namespace {

AdapterPair scalar_pair(double a, double b) {
  AdapterPair p;
  p.rank = 1;
  p.eta = 1.0;
  p.a = Mat(1, 1);
  p.b = Mat(1, 1);
  p.a(0, 0) = a;
  p.b(0, 0) = b;
  return p;
}

Mat scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return m;
}

}  // namespace

TEST_CASE("sgd leaves parameters alone on zero gradients") {
  Rng rng(1);
  AdapterPair p;
  p.rank = 2;
  p.eta = 1.0;
  p.a = testutil::random_mat(2, 3, rng);
  p.b = testutil::random_mat(4, 2, rng);
  const AdapterPair next = sgd_step(p, Mat(2, 3), Mat(4, 2), 0.1);
  CHECK(next.a.values() == p.a.values());
  CHECK(next.b.values() == p.b.values());
}

TEST_CASE("sgd scalar arithmetic") {
  const AdapterPair next = sgd_step(scalar_pair(2.0, 0.0), scalar(15.0), scalar(0.0), 0.1);
  CHECK(next.a(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(sgd_step(scalar_pair(1, 1), scalar(0), scalar(0), 0.0), std::invalid_argument);
}

TEST_CASE("two sgd steps match a hand trace of the scalar regression") {
  // f(a, b) = 0.5 (a b - 1)^2 with x = 1, y = 1; gradients gA = b(ab-1),
  // gB = a(ab-1).
  double a = 2.0, b = 3.0;
  const double alpha = 0.01;
  AdapterPair p = scalar_pair(a, b);
  for (int step = 0; step < 2; ++step) {
    const double resid = a * b - 1.0;
    const double ga = b * resid;
    const double gb = a * resid;
    p = sgd_step(p, scalar(ga), scalar(gb), alpha);
    a -= alpha * ga;
    b -= alpha * gb;
    CHECK(p.a(0, 0) == doctest::Approx(a).epsilon(1e-15));
    CHECK(p.b(0, 0) == doctest::Approx(b).epsilon(1e-15));
  }
}

TEST_CASE("msgd with zero momentum reproduces sgd bit for bit") {
  Rng rng(2);
  AdapterPair p_sgd;
  p_sgd.rank = 2;
  p_sgd.eta = 1.0;
  p_sgd.a = testutil::random_mat(2, 4, rng);
  p_sgd.b = testutil::random_mat(5, 2, rng);
  AdapterPair p_msgd = p_sgd;
  OptState st = make_opt_state(OptimizerKind::msgd, 5, 4, 2);
  Rng grads(3);
  for (int step = 0; step < 25; ++step) {
    const Mat ga = testutil::random_mat(2, 4, grads);
    const Mat gb = testutil::random_mat(5, 2, grads);
    p_sgd = sgd_step(p_sgd, ga, gb, 0.05);
    p_msgd = msgd_step(p_msgd, ga, gb, st, 0.05, 0.0);
    CHECK(p_sgd.a.values() == p_msgd.a.values());
    CHECK(p_sgd.b.values() == p_msgd.b.values());
  }
}

TEST_CASE("msgd velocity follows the geometric recursion") {
  OptState st = make_opt_state(OptimizerKind::msgd, 1, 1, 1);
  AdapterPair p = scalar_pair(0.0, 0.0);
  const double expected[3] = {-0.1, -0.19, -0.271};
  for (int step = 0; step < 3; ++step) {
    p = msgd_step(p, scalar(1.0), scalar(0.0), st, 0.1, 0.9);
    CHECK(st.vel_a(0, 0) == doctest::Approx(expected[step]).epsilon(1e-12));
  }
}

TEST_CASE("msgd velocities decay geometrically once gradients stop") {
  OptState st = make_opt_state(OptimizerKind::msgd, 1, 1, 1);
  AdapterPair p = scalar_pair(0.0, 0.0);
  p = msgd_step(p, scalar(1.0), scalar(1.0), st, 0.1, 0.5);
  double prev = st.vel_a(0, 0);
  for (int step = 0; step < 5; ++step) {
    p = msgd_step(p, scalar(0.0), scalar(0.0), st, 0.1, 0.5);
    CHECK(st.vel_a(0, 0) == doctest::Approx(0.5 * prev).epsilon(1e-12));
    prev = st.vel_a(0, 0);
  }
}

TEST_CASE("adam first step with beta1 = beta2 = 0") {
  OptHyper hp;
  hp.mode = OptimizerKind::adam;
  hp.beta1 = 0.0;
  hp.beta2 = 0.0;
  hp.epsilon = 1e-8;
  OptState st = make_opt_state(OptimizerKind::adam, 1, 1, 1);
  const double g = 0.3;
  const AdapterPair next = adam_step(scalar_pair(1.0, 1.0), scalar(g), scalar(0.0), st, hp, 0.1);
  // update = -alpha * g / max(|g|, sqrt(eps))
  const double expected = 1.0 - 0.1 * g / std::max(std::fabs(g), std::sqrt(hp.epsilon));
  CHECK(next.a(0, 0) == doctest::Approx(expected).epsilon(1e-14));
  // with |g| > sqrt(eps) this is a unit-magnitude signed step
  CHECK(next.a(0, 0) == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("adam is inert under all-zero gradients") {
  OptHyper hp;
  hp.mode = OptimizerKind::adam;
  OptState st = make_opt_state(OptimizerKind::adam, 2, 3, 1);
  Rng rng(4);
  AdapterPair p;
  p.rank = 1;
  p.eta = 1.0;
  p.a = testutil::random_mat(1, 3, rng);
  p.b = testutil::random_mat(2, 1, rng);
  const AdapterPair start = p;
  for (int step = 0; step < 5; ++step)
    p = adam_step(p, Mat(1, 3), Mat(2, 1), st, hp, 0.1);
  CHECK(p.a.values() == start.a.values());
  CHECK(p.b.values() == start.b.values());
}

TEST_CASE("adam with a huge epsilon floor is scaled momentum") {
  OptHyper hp;
  hp.mode = OptimizerKind::adam;
  hp.beta1 = 0.9;
  hp.epsilon = 1e12;
  OptState st = make_opt_state(OptimizerKind::adam, 1, 1, 1);
  AdapterPair p = scalar_pair(5.0, 0.0);
  double reference = 5.0;
  double momentum = 0.0;
  Rng rng(5);
  for (int step = 0; step < 100; ++step) {
    const double g = rng.gaussian();
    momentum = 0.9 * momentum + 0.1 * g;
    reference -= 0.1 * momentum / std::sqrt(1e12);
    p = adam_step(p, scalar(g), scalar(0.0), st, hp, 0.1);
    CHECK(p.a(0, 0) == doctest::Approx(reference).epsilon(1e-12));
  }
}

TEST_CASE("adam floors negative accumulators at epsilon") {
  OptHyper hp;
  hp.mode = OptimizerKind::adam;
  hp.epsilon = 1e-8;
  OptState st = make_opt_state(OptimizerKind::adam, 1, 1, 1);
  adam_accumulate(st, scalar(1.0), scalar(0.0), hp);
  st.uhat_a(0, 0) = -5.0;  // as can happen after a product split
  st.uhat_half_a = st.uhat_a;
  const AdapterPair next = adam_apply(scalar_pair(0.0, 0.0), st, hp, 0.1);
  // denominator is sqrt(eps), step = -alpha * m / sqrt(eps)
  const double m1 = (1.0 - hp.beta1) * 1.0;
  CHECK(next.a(0, 0) == doctest::Approx(-0.1 * m1 / std::sqrt(hp.epsilon)).epsilon(1e-12));
  CHECK(std::isfinite(next.a(0, 0)));
}

TEST_CASE("amsgrad tracker is monotone, ema tracker is not") {
  OptHyper ams;
  ams.mode = OptimizerKind::adam;
  ams.beta2 = 0.5;
  ams.ht = AdamHt::amsgrad;
  OptHyper ema = ams;
  ema.ht = AdamHt::ema;
  OptState st_ams = make_opt_state(OptimizerKind::adam, 1, 1, 1);
  OptState st_ema = make_opt_state(OptimizerKind::adam, 1, 1, 1);
  const double gs[4] = {2.0, 0.1, 0.1, 0.1};
  double prev_ams = 0.0;
  bool ema_decreased = false;
  double prev_ema = 0.0;
  for (double g : gs) {
    adam_accumulate(st_ams, scalar(g), scalar(0.0), ams);
    adam_accumulate(st_ema, scalar(g), scalar(0.0), ema);
    CHECK(st_ams.vt_a(0, 0) >= prev_ams);
    if (st_ema.vt_a(0, 0) < prev_ema) ema_decreased = true;
    prev_ams = st_ams.vt_a(0, 0);
    prev_ema = st_ema.vt_a(0, 0);
  }
  CHECK(ema_decreased);
}

TEST_CASE("updates act blockwise on stacked independent problems") {
  // two independent scalar problems embedded as a rank-2 diagonal; every
  // optimizer must treat the blocks independently.
  OptHyper hp;
  hp.mode = OptimizerKind::adam;
  OptState stacked = make_opt_state(OptimizerKind::adam, 2, 2, 2);
  OptState s0 = make_opt_state(OptimizerKind::adam, 1, 1, 1);
  OptState s1 = make_opt_state(OptimizerKind::adam, 1, 1, 1);

  AdapterPair big;
  big.rank = 2;
  big.eta = 2.0;  // keep eta/r = 1 like the scalar problems
  big.a = Mat(2, 2);
  big.b = Mat(2, 2);
  big.a(0, 0) = 1.0;
  big.a(1, 1) = -2.0;
  big.b(0, 0) = 0.5;
  big.b(1, 1) = 3.0;
  AdapterPair p0 = scalar_pair(1.0, 0.5);
  AdapterPair p1 = scalar_pair(-2.0, 3.0);

  Rng rng(6);
  for (int step = 0; step < 10; ++step) {
    const double g0a = rng.gaussian(), g0b = rng.gaussian();
    const double g1a = rng.gaussian(), g1b = rng.gaussian();
    Mat ga(2, 2), gb(2, 2);
    ga(0, 0) = g0a;
    ga(1, 1) = g1a;
    gb(0, 0) = g0b;
    gb(1, 1) = g1b;
    big = adam_step(big, ga, gb, stacked, hp, 0.05);
    p0 = adam_step(p0, scalar(g0a), scalar(g0b), s0, hp, 0.05);
    p1 = adam_step(p1, scalar(g1a), scalar(g1b), s1, hp, 0.05);
    CHECK(big.a(0, 0) == doctest::Approx(p0.a(0, 0)).epsilon(1e-14));
    CHECK(big.a(1, 1) == doctest::Approx(p1.a(0, 0)).epsilon(1e-14));
    CHECK(big.b(0, 0) == doctest::Approx(p0.b(0, 0)).epsilon(1e-14));
    CHECK(big.b(1, 1) == doctest::Approx(p1.b(0, 0)).epsilon(1e-14));
    CHECK(big.a(0, 1) == 0.0);
    CHECK(big.a(1, 0) == 0.0);
  }
}

TEST_CASE("buffer consensus: identical accumulators are a fixed point") {
  const MixingMatrix m = build_topology(TopologyKind::fully_connected, 3);
  OptHyper hp;
  hp.mode = OptimizerKind::adam;
  std::vector<OptState> states;
  Rng rng(7);
  const Mat ga = testutil::random_mat(2, 3, rng);
  const Mat gb = testutil::random_mat(4, 2, rng);
  for (int i = 0; i < 3; ++i) {
    OptState st = make_opt_state(OptimizerKind::adam, 4, 3, 2);
    adam_accumulate(st, ga, gb, hp);
    states.push_back(std::move(st));
  }
  consensus_opt_buffers(states, m, ConsensusMode::individual, 2);
  for (const OptState& st : states) {
    CHECK(frobenius_dist(st.uhat_half_a, states[0].uhat_a) < 1e-14);
    CHECK(frobenius_dist(st.uhat_half_b, states[0].uhat_b) < 1e-14);
  }
}

TEST_CASE("buffer consensus under identity mixing keeps accumulators") {
  const MixingMatrix m = custom_topology(Mat::identity(2));
  OptHyper hp;
  hp.mode = OptimizerKind::adam;
  std::vector<OptState> states;
  Rng rng(8);
  for (int i = 0; i < 2; ++i) {
    OptState st = make_opt_state(OptimizerKind::adam, 3, 2, 1);
    adam_accumulate(st, testutil::random_mat(1, 2, rng), testutil::random_mat(3, 1, rng), hp);
    states.push_back(std::move(st));
  }
  consensus_opt_buffers(states, m, ConsensusMode::individual, 1);
  for (const OptState& st : states) {
    CHECK(st.uhat_half_a.values() == st.uhat_a.values());
    CHECK(st.uhat_half_b.values() == st.uhat_b.values());
  }
}

TEST_CASE("buffer consensus averages two agents individually") {
  const MixingMatrix m = build_topology(TopologyKind::fully_connected, 2);
  OptHyper hp;
  hp.mode = OptimizerKind::adam;
  std::vector<OptState> states;
  Rng rng(9);
  for (int i = 0; i < 2; ++i) {
    OptState st = make_opt_state(OptimizerKind::adam, 3, 2, 1);
    adam_accumulate(st, testutil::random_mat(1, 2, rng), testutil::random_mat(3, 1, rng), hp);
    states.push_back(std::move(st));
  }
  const Mat mean_a = 0.5 * (states[0].uhat_a + states[1].uhat_a);
  const Mat mean_b = 0.5 * (states[0].uhat_b + states[1].uhat_b);
  consensus_opt_buffers(states, m, ConsensusMode::individual, 1);
  for (const OptState& st : states) {
    CHECK(frobenius_dist(st.uhat_half_a, mean_a) < 1e-15);
    CHECK(frobenius_dist(st.uhat_half_b, mean_b) < 1e-15);
  }
}

TEST_CASE("product buffer consensus truncates the accumulator product") {
  const MixingMatrix m = build_topology(TopologyKind::fully_connected, 2);
  OptHyper hp;
  hp.mode = OptimizerKind::adam;
  std::vector<OptState> states;
  Rng rng(10);
  for (int i = 0; i < 2; ++i) {
    OptState st = make_opt_state(OptimizerKind::adam, 4, 3, 2);
    adam_accumulate(st, testutil::random_mat(2, 3, rng), testutil::random_mat(4, 2, rng), hp);
    states.push_back(std::move(st));
  }
  Mat avg(4, 3);
  for (int j = 0; j < 2; ++j)
    add_scaled(avg, 0.5, matmul(states[j].uhat_b, states[j].uhat_a));
  consensus_opt_buffers(states, m, ConsensusMode::product_tsvd, 2);
  const TsvdResult t = tsvd(avg, 2);
  auto [ua, ub] = factor_split(t);
  CHECK(frobenius_dist(matmul(states[0].uhat_half_b, states[0].uhat_half_a), matmul(ub, ua)) <
        1e-10);
}

TEST_CASE("buffer consensus refuses non-adam states") {
  const MixingMatrix m = build_topology(TopologyKind::fully_connected, 2);
  std::vector<OptState> states = {make_opt_state(OptimizerKind::sgd, 2, 2, 1),
                                  make_opt_state(OptimizerKind::sgd, 2, 2, 1)};
  CHECK_THROWS_AS(consensus_opt_buffers(states, m, ConsensusMode::individual, 1),
                  std::invalid_argument);
}
