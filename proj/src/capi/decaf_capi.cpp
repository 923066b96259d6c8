#include "decaf/decaf.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <memory>
#include <string>

#include "decaf/config.hpp"
#include "decaf/metrics.hpp"
#include "decaf/svd.hpp"
#include "decaf/topology.hpp"
#include "decaf/trainer.hpp"

namespace {

thread_local std::string g_last_error;

decaf_status fail(decaf_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

decaf_status copy_out(const std::string& s, char* buf, size_t buf_len) {
  if (buf == nullptr || buf_len == 0) return fail(DECAF_ERR_INVALID_ARG, "output buffer is null");
  const size_t n = std::min(buf_len - 1, s.size());
  std::memcpy(buf, s.data(), n);
  buf[n] = '\0';
  return DECAF_OK;
}

template <typename Fn>
decaf_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    return fail(DECAF_ERR_INVALID_ARG, e.what());
  } catch (const std::runtime_error& e) {
    return fail(DECAF_ERR_RUNTIME, e.what());
  } catch (const std::exception& e) {
    return fail(DECAF_ERR_RUNTIME, e.what());
  }
}

}  // namespace

// The config handle accumulates key/value pairs; they are resolved into a
// validated RunConfig each time something consumes the handle, so later
// overrides behave exactly like later config-file lines.
struct decaf_config {
  decaf::KeyValues pairs;
};

struct decaf_result {
  decaf::ConfigBundle bundle;
  decaf::RunResult result;
};

extern "C" {

const char* decaf_version(void) { return "0.1.0"; }

const char* decaf_last_error(void) { return g_last_error.c_str(); }

decaf_status decaf_config_create(decaf_config** out) {
  if (out == nullptr) return fail(DECAF_ERR_INVALID_ARG, "out is null");
  *out = new decaf_config();
  return DECAF_OK;
}

decaf_status decaf_config_clone(const decaf_config* cfg, decaf_config** out) {
  if (cfg == nullptr || out == nullptr) return fail(DECAF_ERR_INVALID_ARG, "null argument");
  *out = new decaf_config(*cfg);
  return DECAF_OK;
}

void decaf_config_destroy(decaf_config* cfg) { delete cfg; }

decaf_status decaf_config_load_file(decaf_config* cfg, const char* path) {
  if (cfg == nullptr || path == nullptr) return fail(DECAF_ERR_INVALID_ARG, "null argument");
  return guarded([&]() {
    decaf::KeyValues pairs;
    try {
      pairs = decaf::parse_config_file(path);
    } catch (const std::runtime_error& e) {
      return fail(DECAF_ERR_IO, e.what());
    }
    decaf::KeyValues merged = cfg->pairs;
    merged.insert(merged.end(), pairs.begin(), pairs.end());
    decaf::build_config(merged);  // validate before committing
    cfg->pairs = std::move(merged);
    return DECAF_OK;
  });
}

decaf_status decaf_config_set(decaf_config* cfg, const char* key, const char* value) {
  if (cfg == nullptr || key == nullptr || value == nullptr)
    return fail(DECAF_ERR_INVALID_ARG, "null argument");
  return guarded([&]() {
    decaf::KeyValues merged = cfg->pairs;
    merged.emplace_back(key, value);
    decaf::build_config(merged);
    cfg->pairs = std::move(merged);
    return DECAF_OK;
  });
}

decaf_status decaf_config_get(const decaf_config* cfg, const char* key, char* buf,
                              size_t buf_len) {
  if (cfg == nullptr || key == nullptr) return fail(DECAF_ERR_INVALID_ARG, "null argument");
  return guarded([&]() {
    const decaf::ConfigBundle bundle = decaf::build_config(cfg->pairs);
    for (const auto& [k, v] : bundle.resolved)
      if (k == key) return copy_out(v, buf, buf_len);
    return fail(DECAF_ERR_INVALID_ARG, "config: unknown key '" + std::string(key) + "'");
  });
}

decaf_status decaf_run(const decaf_config* cfg, decaf_progress_fn progress, void* user,
                       decaf_result** out) {
  if (cfg == nullptr || out == nullptr) return fail(DECAF_ERR_INVALID_ARG, "null argument");
  return guarded([&]() {
    auto res = std::make_unique<decaf_result>();
    res->bundle = decaf::build_config(cfg->pairs);
    decaf::ProgressFn cb;
    if (progress != nullptr)
      cb = [&](const decaf::MetricsRecord& rec) {
        progress(decaf::metrics_csv_row(rec).c_str(), user);
      };
    res->result = decaf::run(res->bundle.run, cb);
    *out = res.release();
    return DECAF_OK;
  });
}

decaf_status decaf_sweep(const decaf_config* cfg, const char* axis, const char* const* values,
                         size_t n_values, const char* out_dir) {
  if (cfg == nullptr || axis == nullptr || values == nullptr || out_dir == nullptr)
    return fail(DECAF_ERR_INVALID_ARG, "null argument");
  if (n_values == 0) return fail(DECAF_ERR_INVALID_ARG, "sweep: no values given");
  return guarded([&]() {
    const decaf::ConfigBundle base = decaf::build_config(cfg->pairs);
    for (size_t i = 0; i < n_values; ++i) {
      const std::string value = values[i];
      // Re-resolve through the key/value layer so the per-run summary echoes
      // the swept value.
      decaf::KeyValues pairs = cfg->pairs;
      const std::string key = std::string(axis) == "heterogeneity" ? "task.heterogeneity"
                                                                   : std::string(axis);
      decaf::apply_sweep_value(base.run, axis, value);  // axis validation
      pairs.emplace_back(key, value);
      decaf::ConfigBundle bundle = decaf::build_config(pairs);
      decaf_result res;
      res.bundle = bundle;
      res.result = decaf::run(bundle.run);
      decaf::write_run_outputs(std::string(out_dir) + "/" + axis + "=" + value, res.bundle,
                               res.result);
    }
    return DECAF_OK;
  });
}

void decaf_result_destroy(decaf_result* res) { delete res; }

decaf_status decaf_result_write_outputs(const decaf_result* res, const char* out_dir) {
  if (res == nullptr || out_dir == nullptr) return fail(DECAF_ERR_INVALID_ARG, "null argument");
  return guarded([&]() {
    try {
      decaf::write_run_outputs(out_dir, res->bundle, res->result);
    } catch (const std::runtime_error& e) {
      return fail(DECAF_ERR_IO, e.what());
    }
    return DECAF_OK;
  });
}

decaf_status decaf_result_num_records(const decaf_result* res, size_t* out) {
  if (res == nullptr || out == nullptr) return fail(DECAF_ERR_INVALID_ARG, "null argument");
  *out = res->result.records.size();
  return DECAF_OK;
}

decaf_status decaf_result_record_iter(const decaf_result* res, size_t index, int64_t* out) {
  if (res == nullptr || out == nullptr) return fail(DECAF_ERR_INVALID_ARG, "null argument");
  if (index >= res->result.records.size())
    return fail(DECAF_ERR_INVALID_ARG, "record index out of range");
  *out = res->result.records[index].iter;
  return DECAF_OK;
}

decaf_status decaf_result_record_value(const decaf_result* res, size_t index, const char* name,
                                       double* out) {
  if (res == nullptr || name == nullptr || out == nullptr)
    return fail(DECAF_ERR_INVALID_ARG, "null argument");
  if (index >= res->result.records.size())
    return fail(DECAF_ERR_INVALID_ARG, "record index out of range");
  const decaf::MetricsRecord& r = res->result.records[index];
  const std::string key = name;
  const double nan = std::nan("");
  auto opt = [&](double v) { return v >= 0.0 ? v : nan; };
  if (key == "global_loss") *out = r.global_loss;
  else if (key == "avg_grad_norm_sq") *out = r.avg_grad_norm_sq;
  else if (key == "disagreement") *out = r.disagreement;
  else if (key == "interference_max") *out = opt(r.interference_max);
  else if (key == "tsvd_error_max") *out = opt(r.tsvd_error_max);
  else if (key == "tsvd_bound_max") *out = opt(r.tsvd_bound_max);
  else if (key == "consensus_diff") *out = opt(r.consensus_diff);
  else if (key == "consensus_diff_bound") *out = opt(r.consensus_diff_bound);
  else if (key == "comm_bytes") *out = static_cast<double>(r.comm_bytes);
  else return fail(DECAF_ERR_INVALID_ARG, "unknown record field '" + key + "'");
  return DECAF_OK;
}

decaf_status decaf_result_summary_value(const decaf_result* res, const char* name, double* out) {
  if (res == nullptr || name == nullptr || out == nullptr)
    return fail(DECAF_ERR_INVALID_ARG, "null argument");
  const decaf::RunSummary& s = res->result.summary;
  const std::string key = name;
  if (key == "final_global_loss") *out = s.final_global_loss;
  else if (key == "final_union_loss_mean") *out = s.final_union_loss_mean;
  else if (key == "final_avg_grad_norm_sq") *out = s.final_avg_grad_norm_sq;
  else if (key == "rho") *out = s.rho;
  else if (key == "spectral_gap") *out = s.spectral_gap;
  else if (key == "alpha_ceiling") *out = s.alpha_ceiling;
  else if (key == "L") *out = s.constants.L;
  else if (key == "G") *out = s.constants.G;
  else if (key == "c") *out = s.constants.c;
  else if (key == "zeta") *out = s.constants.zeta;
  else if (key == "kappa") *out = s.constants.kappa;
  else if (key == "L_hat") *out = s.l_hat;
  else if (key == "total_comm_bytes") *out = static_cast<double>(s.total_comm_bytes);
  else if (key == "comm_rounds") *out = static_cast<double>(s.comm_rounds);
  else if (key == "wall_seconds") *out = s.wall_seconds;
  else if (key == "step_size_ok") *out = s.step_size_ok ? 1.0 : 0.0;
  else return fail(DECAF_ERR_INVALID_ARG, "unknown summary field '" + key + "'");
  return DECAF_OK;
}

decaf_status decaf_result_num_warnings(const decaf_result* res, size_t* out) {
  if (res == nullptr || out == nullptr) return fail(DECAF_ERR_INVALID_ARG, "null argument");
  *out = res->result.summary.warnings.size();
  return DECAF_OK;
}

decaf_status decaf_result_warning(const decaf_result* res, size_t index, char* buf,
                                  size_t buf_len) {
  if (res == nullptr) return fail(DECAF_ERR_INVALID_ARG, "null argument");
  if (index >= res->result.summary.warnings.size())
    return fail(DECAF_ERR_INVALID_ARG, "warning index out of range");
  return copy_out(res->result.summary.warnings[index], buf, buf_len);
}

decaf_status decaf_topology_report(const char* kind, int n_agents, const char* csv_path,
                                   double* rho, double* spectral_gap, int* connected) {
  if (kind == nullptr || rho == nullptr || spectral_gap == nullptr || connected == nullptr)
    return fail(DECAF_ERR_INVALID_ARG, "null argument");
  return guarded([&]() {
    decaf::MixingMatrix m;
    const decaf::TopologyKind tk = decaf::topology_kind_from_string(kind);
    if (tk == decaf::TopologyKind::custom) {
      if (csv_path == nullptr)
        return fail(DECAF_ERR_INVALID_ARG, "custom topology needs a csv path");
      try {
        m = decaf::load_topology_csv(csv_path);
      } catch (const std::runtime_error& e) {
        return fail(DECAF_ERR_IO, e.what());
      }
    } else {
      m = decaf::build_topology(tk, n_agents);
    }
    const decaf::SpectralReport rep = decaf::spectral_report(m);
    *rho = rep.rho;
    *spectral_gap = rep.spectral_gap;
    *connected = rep.connected ? 1 : 0;
    return DECAF_OK;
  });
}

decaf_status decaf_estimate_constants(const decaf_config* cfg, double out[6]) {
  if (cfg == nullptr || out == nullptr) return fail(DECAF_ERR_INVALID_ARG, "null argument");
  return guarded([&]() {
    const decaf::ConfigBundle bundle = decaf::build_config(cfg->pairs);
    const decaf::RunConfig& rc = bundle.run;
    decaf::Rng data_rng(rc.seed, decaf::StreamTag::data);
    const decaf::GeneratedTask task = decaf::generate_data(rc.task, rc.n_agents, rc.eta, data_rng);
    decaf::FrozenBase base;
    base.w0 = task.w0;
    std::vector<decaf::AdapterPair> states;
    for (int i = 0; i < rc.n_agents; ++i) {
      decaf::Rng init_rng(rc.seed, decaf::StreamTag::init, static_cast<std::uint64_t>(i));
      states.push_back(
          decaf::init_adapter(rc.task.d, rc.task.k, rc.r, rc.sigma_init, rc.eta, init_rng));
    }
    decaf::Rng probe_rng(rc.seed, decaf::StreamTag::probe);
    const decaf::ConstantEstimates est =
        decaf::estimate_constants(base, states, task.data, rc.batch_size, 8, probe_rng);
    const double c_assump = rc.eta * est.c / std::sqrt(static_cast<double>(rc.r));
    out[0] = est.L;
    out[1] = est.G;
    out[2] = est.c;
    out[3] = est.zeta;
    out[4] = est.kappa;
    out[5] = decaf::smoothness_constant(est.L, c_assump, est.c, est.G, rc.eta, rc.r);
    return DECAF_OK;
  });
}

decaf_status decaf_bench_tsvd(int d, int k, int r, int trials, uint64_t seed, double* ms_per_call,
                              double* max_rel_err) {
  if (ms_per_call == nullptr || max_rel_err == nullptr)
    return fail(DECAF_ERR_INVALID_ARG, "null argument");
  if (d < 1 || k < 1 || r < 1 || r > std::min(d, k) || trials < 1)
    return fail(DECAF_ERR_INVALID_ARG, "bench_tsvd: invalid dimensions");
  return guarded([&]() {
    decaf::Rng rng(seed);
    double worst = 0.0;
    double total_ms = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
      decaf::Mat left(d, r), right(r, k);
      for (std::size_t i = 0; i < left.size(); ++i) left.data()[i] = rng.gaussian();
      for (std::size_t i = 0; i < right.size(); ++i) right.data()[i] = rng.gaussian();
      const decaf::Mat m = matmul(left, right);
      const auto start = std::chrono::steady_clock::now();
      const decaf::TsvdResult t = decaf::tsvd(m, r);
      total_ms +=
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
              .count();
      decaf::Mat us = t.u_r;
      for (int col = 0; col < r; ++col)
        for (int row = 0; row < d; ++row) us(row, col) *= t.sigma_r[col];
      const decaf::Mat recon = matmul(us, transpose(t.v_r));
      const double denom = frobenius_norm(m);
      if (denom > 0.0) worst = std::max(worst, frobenius_dist(m, recon) / denom);
    }
    *ms_per_call = total_ms / trials;
    *max_rel_err = worst;
    return DECAF_OK;
  });
}

}  // extern "C"
