#include "decaf/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "decaf/parallel.hpp"

namespace decaf {

const char* to_string(Algorithm alg) {
  switch (alg) {
    case Algorithm::local: return "local";
    case Algorithm::local_fa: return "local_fa";
    case Algorithm::fedavg: return "fedavg";
    case Algorithm::fedavg_fa: return "fedavg_fa";
    case Algorithm::dlora: return "dlora";
    case Algorithm::dlora_fa: return "dlora_fa";
    case Algorithm::decaf: return "decaf";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "local") return Algorithm::local;
  if (name == "local_fa") return Algorithm::local_fa;
  if (name == "fedavg") return Algorithm::fedavg;
  if (name == "fedavg_fa") return Algorithm::fedavg_fa;
  if (name == "dlora") return Algorithm::dlora;
  if (name == "dlora_fa") return Algorithm::dlora_fa;
  if (name == "decaf") return Algorithm::decaf;
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

const char* to_string(Schedule s) { return s == Schedule::constant ? "constant" : "cosine"; }

const char* to_string(GradPoint g) {
  return g == GradPoint::pre_consensus ? "pre_consensus" : "post_consensus";
}

ConsensusMode consensus_mode_for(Algorithm alg) {
  switch (alg) {
    case Algorithm::local:
    case Algorithm::local_fa: return ConsensusMode::none;
    case Algorithm::fedavg:
    case Algorithm::dlora: return ConsensusMode::individual;
    case Algorithm::fedavg_fa:
    case Algorithm::dlora_fa: return ConsensusMode::frozen_a;
    case Algorithm::decaf: return ConsensusMode::product_tsvd;
  }
  return ConsensusMode::none;
}

bool uses_frozen_a(Algorithm alg) {
  return alg == Algorithm::local_fa || alg == Algorithm::fedavg_fa || alg == Algorithm::dlora_fa;
}

bool algorithm_communicates(Algorithm alg) {
  return alg != Algorithm::local && alg != Algorithm::local_fa;
}

void validate_config(const RunConfig& cfg) {
  if (cfg.n_agents < 1) throw std::invalid_argument("config: n_agents must be >= 1");
  if (cfg.iters < 1) throw std::invalid_argument("config: iters must be >= 1");
  if (cfg.tau < 1) throw std::invalid_argument("config: tau must be >= 1");
  if (cfg.metric_interval < 1) throw std::invalid_argument("config: metric_interval must be >= 1");
  if (cfg.r < 1 || cfg.r > std::min(cfg.task.d, cfg.task.k))
    throw std::invalid_argument("config: adapter rank must satisfy 1 <= r <= min(d, k)");
  if (cfg.eta <= 0.0) throw std::invalid_argument("config: eta must be positive");
  if (cfg.sigma_init < 0.0) throw std::invalid_argument("config: sigma_init must be >= 0");
  if (cfg.alpha <= 0.0) throw std::invalid_argument("config: alpha must be positive");
  if (cfg.batch_size < 0 || cfg.batch_size > cfg.task.n_samples_per_agent)
    throw std::invalid_argument("config: batch_size out of range (0 means full batch)");
  if ((cfg.algorithm == Algorithm::fedavg || cfg.algorithm == Algorithm::fedavg_fa) &&
      cfg.topology != TopologyKind::fully_connected && cfg.topology != TopologyKind::star)
    throw std::invalid_argument("config: fedavg requires fully_connected (or star) weights");
  if (cfg.topology == TopologyKind::custom && !cfg.custom_weights)
    throw std::invalid_argument("config: custom topology needs an explicit weight matrix");
  if (cfg.task.heterogeneity < 0.0 || cfg.task.heterogeneity > 1.0)
    throw std::invalid_argument("config: task.heterogeneity must lie in [0, 1]");
  // surface size constraints (bipartite parity, torus squareness) up front
  if (cfg.topology == TopologyKind::custom) {
    if (cfg.custom_weights->rows() != cfg.n_agents)
      throw std::invalid_argument("config: custom matrix size does not match n_agents");
    validate_mixing_matrix(
        MixingMatrix{cfg.n_agents, *cfg.custom_weights, TopologyKind::custom});
  } else {
    build_topology(cfg.topology, cfg.n_agents, cfg.torus_dims);
  }
}

namespace {

double scheduled_alpha(const RunConfig& cfg, long long t) {
  if (cfg.schedule == Schedule::constant) return cfg.alpha;
  const double frac = static_cast<double>(t - 1) / static_cast<double>(cfg.iters);
  return cfg.alpha * 0.5 * (1.0 + std::cos(M_PI * frac));
}

long long payload_bytes_per_edge(const RunConfig& cfg) {
  const long long d = cfg.task.d, k = cfg.task.k, r = cfg.r;
  long long payload = uses_frozen_a(cfg.algorithm) ? d * r * 8 : (d + k) * r * 8;
  if (cfg.optimizer == OptimizerKind::adam) payload *= 2;  // U-hat rides along
  return payload;
}

std::string fmt_diag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

RunResult run(const RunConfig& cfg, const ProgressFn& progress) {
  validate_config(cfg);
  const auto wall_start = std::chrono::steady_clock::now();

  const int n = cfg.n_agents;
  MixingMatrix topo = cfg.topology == TopologyKind::custom
                          ? custom_topology(*cfg.custom_weights)
                          : build_topology(cfg.topology, n, cfg.torus_dims);
  const SpectralReport spectral = spectral_report(topo);

  Rng data_rng(cfg.seed, StreamTag::data);
  GeneratedTask task = generate_data(cfg.task, n, cfg.eta, data_rng);

  FrozenBase base;
  base.w0 = task.w0;

  const bool frozen = uses_frozen_a(cfg.algorithm);
  std::vector<AdapterPair> states(n);
  if (frozen) {
    // One shared A0, drawn before the per-agent streams split.
    Rng shared_rng(cfg.seed, StreamTag::shared_a0);
    const AdapterPair proto =
        init_adapter(cfg.task.d, cfg.task.k, cfg.r, cfg.sigma_init, cfg.eta, shared_rng);
    base.a0 = proto.a;
    for (int i = 0; i < n; ++i) states[i] = proto;
  } else {
    for (int i = 0; i < n; ++i) {
      Rng init_rng(cfg.seed, StreamTag::init, static_cast<std::uint64_t>(i));
      states[i] = init_adapter(cfg.task.d, cfg.task.k, cfg.r, cfg.sigma_init, cfg.eta, init_rng);
    }
  }

  std::vector<OptState> opt_states;
  opt_states.reserve(n);
  for (int i = 0; i < n; ++i)
    opt_states.push_back(make_opt_state(cfg.optimizer, cfg.task.d, cfg.task.k, cfg.r));

  std::vector<Rng> batch_streams;
  batch_streams.reserve(n);
  for (int i = 0; i < n; ++i)
    batch_streams.emplace_back(cfg.seed, StreamTag::batch, static_cast<std::uint64_t>(i));

  RunResult res;
  RunSummary& sum = res.summary;
  sum.rho = spectral.rho;
  sum.spectral_gap = spectral.spectral_gap;

  // Step-size check against the derived smoothness constant at
  // initialization; the run proceeds either way.
  {
    Rng probe_rng(cfg.seed, StreamTag::probe);
    const ConstantEstimates init_est =
        estimate_constants(base, states, task.data, cfg.batch_size, 2, probe_rng);
    const double c_assump = cfg.eta * init_est.c / std::sqrt(static_cast<double>(cfg.r));
    const double l_hat =
        smoothness_constant(init_est.L, c_assump, init_est.c, init_est.G, cfg.eta, cfg.r);
    sum.alpha_ceiling = step_size_ceiling(spectral.rho, l_hat);
    sum.step_size_ok = cfg.alpha <= sum.alpha_ceiling;
    if (!sum.step_size_ok)
      sum.warnings.push_back("step size exceeds (1-sqrt(rho))/(4*sqrt(2)*L_hat): alpha=" +
                             fmt_diag(cfg.alpha) + " ceiling=" + fmt_diag(sum.alpha_ceiling));
  }

  const ConsensusMode mode = consensus_mode_for(cfg.algorithm);
  const bool can_communicate = algorithm_communicates(cfg.algorithm);
  const long long payload = payload_bytes_per_edge(cfg);
  const long long edges = directed_edges(topo);
  // A network with no edges exchanges nothing: individual and frozen-A
  // merges are exact no-ops, so those rounds are treated as silent. Product
  // consensus still refactors through the TSVD even for a lone self-loop.
  const bool rounds_merge = edges > 0 || mode == ConsensusMode::product_tsvd;

  double g_run = 0.0;  // trajectory maxima feeding the bound evaluations
  double c_run = 0.0;
  long long cum_bytes = 0;
  int bound_diag_count = 0;

  std::vector<AdapterGrad> grads(n);
  std::vector<std::vector<int>> batches(n);

  for (long long t = 1; t <= cfg.iters; ++t) {
    const double alpha_t = scheduled_alpha(cfg, t);
    const bool comm = can_communicate && (t % cfg.tau == 0) && rounds_merge;
    const bool record = (t % cfg.metric_interval == 0) || t == cfg.iters;

    // Gradient phase: per-agent batches and gradients at the current state.
    parallel_for(n, cfg.threads, [&](int i) {
      batches[i] = cfg.batch_size == 0 ? full_batch(task.data[i])
                                       : sample_batch(task.data[i], cfg.batch_size, batch_streams[i]);
      const Mat gw = grad_w(base, states[i], task.data[i], batches[i]);
      AdapterGrad g = adapter_grad_from_w(states[i], gw);
      if (frozen) g.ga = Mat(cfg.r, cfg.task.k);  // A never trains
      grads[i] = std::move(g);
      if (cfg.optimizer == OptimizerKind::adam)
        adam_accumulate(opt_states[i], grads[i].ga, grads[i].gb, cfg.opt);
    });

    // Consensus phase (synchronous barrier).
    double round_interference = -1.0;
    double round_tsvd_err = -1.0, round_tsvd_bound = -1.0;
    double round_bound = -1.0;
    std::vector<AdapterPair> half;
    if (comm) {
      std::vector<double> gw_norms(n);
      std::vector<double> sigma_max(n);
      std::vector<double> inter(n);
      parallel_for(n, cfg.threads, [&](int i) {
        gw_norms[i] =
            frobenius_norm(grad_w(base, states[i], task.data[i], full_batch(task.data[i])));
        sigma_max[i] = std::max(spectral_norm(states[i].a), spectral_norm(states[i].b));
        inter[i] = interference(states, topo, i);
      });
      for (int i = 0; i < n; ++i) {
        g_run = std::max(g_run, gw_norms[i]);
        c_run = std::max(c_run, sigma_max[i]);
        round_interference = std::max(round_interference, inter[i]);
      }
      if (spectral.rho < 1.0)
        round_bound = theorem2_bound(alpha_t, g_run, cfg.eta, c_run, cfg.r, spectral.rho,
                                     static_cast<double>(t));
      if (cfg.optimizer == OptimizerKind::sgd && sum.step_size_ok && round_bound >= 0.0 &&
          round_interference > round_bound && bound_diag_count < 16) {
        ++bound_diag_count;
        sum.warnings.push_back(
            "consensus_diff exceeded theorem-2 bound at iter " + std::to_string(t) +
            ": measured=" + fmt_diag(round_interference) + " bound=" + fmt_diag(round_bound) +
            " (G=" + fmt_diag(g_run) + ", c=" + fmt_diag(c_run) +
            "); rerun with the same seed to reproduce the state");
      }

      switch (mode) {
        case ConsensusMode::individual:
          half = individual_consensus(states, topo);
          break;
        case ConsensusMode::product_tsvd: {
          ProductConsensusResult pc = product_consensus_tsvd(states, topo, cfg.split_mode);
          half = std::move(pc.states);
          for (int i = 0; i < n; ++i) {
            const TsvdRoundError& e = pc.errors[i];
            round_tsvd_err = std::max(round_tsvd_err, e.measured);
            round_tsvd_bound = std::max(round_tsvd_bound, e.bound);
            if (e.measured > e.bound + 1e-9 * (1.0 + e.bound))
              throw std::runtime_error(
                  "tsvd approximation bound violated at iter " + std::to_string(t) + ", agent " +
                  std::to_string(i) + ": measured=" + fmt_diag(e.measured) +
                  " bound=" + fmt_diag(e.bound));
          }
          break;
        }
        case ConsensusMode::frozen_a:
          half = frozen_a_consensus(states, topo);
          break;
        case ConsensusMode::none:
          half = states;
          break;
      }
      if (cfg.optimizer == OptimizerKind::adam)
        consensus_opt_buffers(opt_states, topo, mode, cfg.r, cfg.split_mode);

      if (edges > 0) {
        cum_bytes += edges * payload;
        res.ledger.push_back({t, edges, edges * payload});
      }
    } else {
      half = states;
    }

    // Local update phase.
    parallel_for(n, cfg.threads, [&](int i) {
      AdapterGrad& g = grads[i];
      if (cfg.grad_point == GradPoint::post_consensus && comm) {
        const Mat gw = grad_w(base, half[i], task.data[i], batches[i]);
        g = adapter_grad_from_w(half[i], gw);
        if (frozen) g.ga = Mat(cfg.r, cfg.task.k);
      }
      switch (cfg.optimizer) {
        case OptimizerKind::sgd:
          states[i] = sgd_step(half[i], g.ga, g.gb, alpha_t);
          break;
        case OptimizerKind::msgd:
          states[i] = msgd_step(half[i], g.ga, g.gb, opt_states[i], alpha_t, cfg.opt.beta);
          break;
        case OptimizerKind::adam:
          states[i] = adam_apply(half[i], opt_states[i], cfg.opt, alpha_t);
          break;
      }
    });

    // Metrics phase: read-only, full batches, no agent RNG involved.
    if (record) {
      MetricsRecord rec;
      rec.iter = t;
      rec.per_agent_losses.resize(n);
      parallel_for(n, cfg.threads, [&](int i) {
        rec.per_agent_losses[i] = loss(base, states[i], task.data[i], full_batch(task.data[i]));
      });
      rec.global_loss = global_loss_at_mean(base, states, task.data);
      rec.avg_grad_norm_sq = avg_grad_norm_sq(base, states, task.data);
      rec.disagreement = adapter_disagreement(states);
      if (comm) {
        rec.interference_max = round_interference;
        rec.consensus_diff = round_interference;
        rec.consensus_diff_bound = round_bound;
        if (mode == ConsensusMode::product_tsvd) {
          rec.tsvd_error_max = round_tsvd_err;
          rec.tsvd_bound_max = round_tsvd_bound;
        }
      }
      rec.comm_bytes = cum_bytes;
      if (progress) progress(rec);
      res.records.push_back(std::move(rec));
    }
  }

  res.final_states = states;
  sum.final_per_agent_losses.resize(n);
  for (int i = 0; i < n; ++i)
    sum.final_per_agent_losses[i] = loss(base, states[i], task.data[i], full_batch(task.data[i]));
  sum.final_global_loss = global_loss_at_mean(base, states, task.data);
  sum.final_avg_grad_norm_sq = avg_grad_norm_sq(base, states, task.data);
  // Personalized evaluation: every agent's model against every agent's data.
  {
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        acc += loss(base, states[i], task.data[j], full_batch(task.data[j]));
    sum.final_union_loss_mean = acc / static_cast<double>(n) / static_cast<double>(n);
  }

  {
    Rng probe_rng(cfg.seed, StreamTag::probe, 1);
    sum.constants = estimate_constants(base, states, task.data, cfg.batch_size, 4, probe_rng);
    if (g_run > 0.0) sum.constants.G = std::max(sum.constants.G, g_run);
    if (c_run > 0.0) sum.constants.c = std::max(sum.constants.c, c_run);
    const double c_assump = cfg.eta * sum.constants.c / std::sqrt(static_cast<double>(cfg.r));
    sum.l_hat = smoothness_constant(sum.constants.L, c_assump, sum.constants.c, sum.constants.G,
                                    cfg.eta, cfg.r);
  }
  sum.total_comm_bytes = cum_bytes;
  sum.comm_rounds = static_cast<long long>(res.ledger.size());
  sum.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return res;
}

RunConfig apply_sweep_value(const RunConfig& base, const std::string& axis,
                            const std::string& value) {
  RunConfig cfg = base;
  try {
    if (axis == "r") {
      cfg.r = std::stoi(value);
    } else if (axis == "topology") {
      cfg.topology = topology_kind_from_string(value);
    } else if (axis == "n_agents") {
      cfg.n_agents = std::stoi(value);
    } else if (axis == "tau") {
      cfg.tau = std::stoll(value);
    } else if (axis == "alpha") {
      cfg.alpha = std::stod(value);
    } else if (axis == "heterogeneity") {
      cfg.task.heterogeneity = std::stod(value);
    } else {
      throw std::invalid_argument("sweep: unknown axis '" + axis + "'");
    }
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception&) {
    throw std::invalid_argument("sweep: bad value '" + value + "' for axis '" + axis + "'");
  }
  return cfg;
}

std::vector<std::pair<std::string, RunResult>> sweep(const RunConfig& base, const std::string& axis,
                                                     const std::vector<std::string>& values,
                                                     const ProgressFn& progress) {
  std::vector<std::pair<std::string, RunResult>> out;
  out.reserve(values.size());
  for (const std::string& v : values)
    out.emplace_back(v, run(apply_sweep_value(base, axis, v), progress));
  return out;
}

void write_ledger_csv(const std::string& path, const std::vector<LedgerEntry>& ledger) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_ledger_csv: cannot open " + path);
  out << "iter,edges,bytes\n";
  for (const LedgerEntry& e : ledger)
    out << e.iter << ',' << e.edges << ',' << e.bytes << '\n';
  if (!out) throw std::runtime_error("write_ledger_csv: write failed for " + path);
}

}  // namespace decaf
