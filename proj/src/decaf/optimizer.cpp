#include "decaf/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace decaf {

namespace {

void check_grad_shapes(const AdapterPair& p, const Mat& ga, const Mat& gb) {
  if (!ga.same_shape(p.a) || !gb.same_shape(p.b))
    throw std::invalid_argument("optimizer: gradient shapes do not match the adapter");
}

}  // namespace

const char* to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::msgd: return "msgd";
    case OptimizerKind::adam: return "adam";
  }
  return "?";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "msgd") return OptimizerKind::msgd;
  if (name == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

OptState make_opt_state(OptimizerKind mode, int d, int k, int r) {
  OptState st;
  st.mode = mode;
  if (mode == OptimizerKind::msgd) {
    st.vel_a = Mat(r, k);
    st.vel_b = Mat(d, r);
  } else if (mode == OptimizerKind::adam) {
    st.m_a = Mat(r, k);
    st.m_b = Mat(d, r);
    st.vt_a = Mat(r, k);
    st.vt_b = Mat(d, r);
    st.prev_vt_a = Mat(r, k);
    st.prev_vt_b = Mat(d, r);
    st.uhat_a = Mat(r, k);
    st.uhat_b = Mat(d, r);
    st.uhat_half_a = Mat(r, k);
    st.uhat_half_b = Mat(d, r);
  }
  return st;
}

AdapterPair sgd_step(const AdapterPair& p, const Mat& ga, const Mat& gb, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("sgd_step: alpha must be positive");
  check_grad_shapes(p, ga, gb);
  AdapterPair next = p;
  for (std::size_t i = 0; i < next.a.size(); ++i) next.a.data()[i] -= alpha * ga.data()[i];
  for (std::size_t i = 0; i < next.b.size(); ++i) next.b.data()[i] -= alpha * gb.data()[i];
  return next;
}

AdapterPair msgd_step(const AdapterPair& p, const Mat& ga, const Mat& gb, OptState& st,
                      double alpha, double beta) {
  if (st.mode != OptimizerKind::msgd) throw std::invalid_argument("msgd_step: wrong optimizer state");
  check_grad_shapes(p, ga, gb);
  AdapterPair next = p;
  for (std::size_t i = 0; i < next.a.size(); ++i) {
    st.vel_a.data()[i] = beta * st.vel_a.data()[i] - alpha * ga.data()[i];
    next.a.data()[i] += st.vel_a.data()[i];
  }
  for (std::size_t i = 0; i < next.b.size(); ++i) {
    st.vel_b.data()[i] = beta * st.vel_b.data()[i] - alpha * gb.data()[i];
    next.b.data()[i] += st.vel_b.data()[i];
  }
  return next;
}

void adam_accumulate(OptState& st, const Mat& ga, const Mat& gb, const OptHyper& hp) {
  if (st.mode != OptimizerKind::adam) throw std::invalid_argument("adam_accumulate: wrong state");
  auto update = [&](Mat& m, Mat& vt, Mat& prev_vt, Mat& uhat, Mat& uhat_half, const Mat& g) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double gi = g.data()[i];
      m.data()[i] = hp.beta1 * m.data()[i] + (1.0 - hp.beta1) * gi;
      prev_vt.data()[i] = vt.data()[i];
      const double ema = hp.beta2 * vt.data()[i] + (1.0 - hp.beta2) * gi * gi;
      vt.data()[i] = hp.ht == AdamHt::amsgrad ? std::max(vt.data()[i], ema) : ema;
    }
    if (!st.adam_started) uhat = vt;  // U-hat_1 = V_1
    uhat_half = uhat;                 // overwritten by buffer consensus if any
  };
  update(st.m_a, st.vt_a, st.prev_vt_a, st.uhat_a, st.uhat_half_a, ga);
  update(st.m_b, st.vt_b, st.prev_vt_b, st.uhat_b, st.uhat_half_b, gb);
  st.adam_started = true;
}

AdapterPair adam_apply(const AdapterPair& p_half, OptState& st, const OptHyper& hp, double alpha) {
  if (st.mode != OptimizerKind::adam) throw std::invalid_argument("adam_apply: wrong state");
  if (!st.adam_started) throw std::invalid_argument("adam_apply: accumulate must run first");
  AdapterPair next = p_half;
  auto apply = [&](Mat& factor, const Mat& m, const Mat& vt, const Mat& prev_vt, Mat& uhat,
                   const Mat& uhat_half) {
    for (std::size_t i = 0; i < factor.size(); ++i) {
      const double u = std::max(uhat.data()[i], hp.epsilon);
      factor.data()[i] -= alpha * m.data()[i] / std::sqrt(u);
      uhat.data()[i] = uhat_half.data()[i] - prev_vt.data()[i] + vt.data()[i];
    }
  };
  apply(next.a, st.m_a, st.vt_a, st.prev_vt_a, st.uhat_a, st.uhat_half_a);
  apply(next.b, st.m_b, st.vt_b, st.prev_vt_b, st.uhat_b, st.uhat_half_b);
  return next;
}

AdapterPair adam_step(const AdapterPair& p_half, const Mat& ga, const Mat& gb, OptState& st,
                      const OptHyper& hp, double alpha) {
  check_grad_shapes(p_half, ga, gb);
  adam_accumulate(st, ga, gb, hp);
  return adam_apply(p_half, st, hp, alpha);
}

void consensus_opt_buffers(std::vector<OptState>& states, const MixingMatrix& m, ConsensusMode mode,
                           int rank, SplitMode split_mode) {
  if (static_cast<int>(states.size()) != m.n_agents)
    throw std::invalid_argument("consensus_opt_buffers: one state per agent required");
  if (mode == ConsensusMode::none) return;
  for (const OptState& st : states)
    if (st.mode != OptimizerKind::adam)
      throw std::invalid_argument("consensus_opt_buffers: only adam communicates buffers");

  const int n = m.n_agents;
  for (int i = 0; i < n; ++i) {
    OptState& st = states[i];
    switch (mode) {
      case ConsensusMode::individual: {
        Mat acc_a(st.uhat_a.rows(), st.uhat_a.cols());
        Mat acc_b(st.uhat_b.rows(), st.uhat_b.cols());
        for (int j = 0; j < n; ++j) {
          const double w = m.weights(i, j);
          if (w == 0.0) continue;
          add_scaled(acc_a, w, states[j].uhat_a);
          add_scaled(acc_b, w, states[j].uhat_b);
        }
        st.uhat_half_a = std::move(acc_a);
        st.uhat_half_b = std::move(acc_b);
        break;
      }
      case ConsensusMode::product_tsvd: {
        Mat prod(st.uhat_b.rows(), st.uhat_a.cols());
        for (int j = 0; j < n; ++j) {
          const double w = m.weights(i, j);
          if (w == 0.0) continue;
          add_scaled(prod, w, matmul(states[j].uhat_b, states[j].uhat_a));
        }
        const TsvdResult trunc = tsvd(prod, rank);
        auto [ua, ub] = factor_split(trunc, split_mode);
        st.uhat_half_a = std::move(ua);
        st.uhat_half_b = std::move(ub);
        break;
      }
      case ConsensusMode::frozen_a: {
        Mat acc_b(st.uhat_b.rows(), st.uhat_b.cols());
        for (int j = 0; j < n; ++j) {
          const double w = m.weights(i, j);
          if (w == 0.0) continue;
          add_scaled(acc_b, w, states[j].uhat_b);
        }
        st.uhat_half_b = std::move(acc_b);
        st.uhat_half_a = st.uhat_a;
        break;
      }
      case ConsensusMode::none:
        break;
    }
  }
}

}  // namespace decaf
