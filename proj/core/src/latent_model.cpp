#include "airtomo/latent_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "airtomo/rng.hpp"

namespace airtomo {

using nlohmann::json;

double LatentModel::access_prob(int i) const {
  double s = 0.0;
  for (int f = 0; f < F; ++f) s += lambda[f] * p_at(i, f);
  return s;
}

std::array<double, 4> model_pair(const LatentModel& m, int i, int j) {
  if (i == j) throw std::invalid_argument("model_pair: i == j");
  std::array<double, 4> t{0.0, 0.0, 0.0, 0.0};
  const double* pi = &m.p[static_cast<std::size_t>(i) * m.F];
  const double* pj = &m.p[static_cast<std::size_t>(j) * m.F];
  for (int f = 0; f < m.F; ++f) {
    const double l = m.lambda[f];
    const double a = pi[f];
    const double b = pj[f];
    t[0] += l * (1.0 - a) * (1.0 - b);
    t[1] += l * a * (1.0 - b);
    t[2] += l * (1.0 - a) * b;
    t[3] += l * a * b;
  }
  return t;
}

double query_mask(const LatentModel& m, const std::vector<int>& group, std::uint32_t access_mask) {
  double total = 0.0;
  for (int f = 0; f < m.F; ++f) {
    double term = m.lambda[f];
    for (std::size_t k = 0; k < group.size(); ++k) {
      const double p = m.p_at(group[k], f);
      term *= (access_mask >> k) & 1u ? p : 1.0 - p;
    }
    total += term;
  }
  return std::clamp(total, 0.0, 1.0);
}

double query(const LatentModel& m, const MarginalQuery& q) {
  std::uint32_t mask = 0;
  for (int a : q.accessing) {
    bool found = false;
    for (std::size_t k = 0; k < q.group.size(); ++k) {
      if (q.group[k] == a) {
        mask |= 1u << k;
        found = true;
        break;
      }
    }
    if (!found) throw std::invalid_argument("query: accessing client not in group");
  }
  return query_mask(m, q.group, mask);
}

namespace {

struct PairRecord {
  int i;
  int j;
  std::array<double, 4> target;      // smoothed measured table
  std::array<double, 4> log_target;  // entropy terms of the KL
};

struct Workspace {
  int n = 0;
  int F = 0;
  std::vector<PairRecord> pairs;
  // Evaluates loss; when grads are non-null also accumulates gradients with
  // respect to lambda and p (model space, not logit space).
  double loss(const std::vector<double>& lambda, const std::vector<double>& p,
              std::vector<double>* g_lambda, std::vector<double>* g_p) const {
    double total = 0.0;
    if (g_lambda) {
      g_lambda->assign(F, 0.0);
      g_p->assign(static_cast<std::size_t>(n) * F, 0.0);
    }
    for (const PairRecord& pr : pairs) {
      const double* pi = &p[static_cast<std::size_t>(pr.i) * F];
      const double* pj = &p[static_cast<std::size_t>(pr.j) * F];
      std::array<double, 4> q{0.0, 0.0, 0.0, 0.0};
      for (int f = 0; f < F; ++f) {
        const double l = lambda[f];
        const double a = pi[f];
        const double b = pj[f];
        q[0] += l * (1.0 - a) * (1.0 - b);
        q[1] += l * a * (1.0 - b);
        q[2] += l * (1.0 - a) * b;
        q[3] += l * a * b;
      }
      std::array<double, 4> dq;
      for (int k = 0; k < 4; ++k) {
        const double qk = std::max(q[k], 1e-300);
        total += pr.target[k] * (pr.log_target[k] - std::log(qk));
        dq[k] = -pr.target[k] / qk;
      }
      if (!g_lambda) continue;
      double* gl = g_lambda->data();
      double* gpi = &(*g_p)[static_cast<std::size_t>(pr.i) * F];
      double* gpj = &(*g_p)[static_cast<std::size_t>(pr.j) * F];
      for (int f = 0; f < F; ++f) {
        const double l = lambda[f];
        const double a = pi[f];
        const double b = pj[f];
        gl[f] += dq[0] * (1.0 - a) * (1.0 - b) + dq[1] * a * (1.0 - b) +
                 dq[2] * (1.0 - a) * b + dq[3] * a * b;
        gpi[f] += l * ((dq[1] - dq[0]) * (1.0 - b) + (dq[3] - dq[2]) * b);
        gpj[f] += l * ((dq[2] - dq[0]) * (1.0 - a) + (dq[3] - dq[1]) * a);
      }
    }
    return total;
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double logit(double p) { return std::log(p / (1.0 - p)); }

void materialize(const std::vector<double>& theta, const std::vector<double>& phi, int F,
                 std::vector<double>& lambda, std::vector<double>& p) {
  double max_t = theta[0];
  for (double t : theta) max_t = std::max(max_t, t);
  double z = 0.0;
  lambda.resize(F);
  for (int f = 0; f < F; ++f) {
    lambda[f] = std::exp(theta[f] - max_t);
    z += lambda[f];
  }
  for (int f = 0; f < F; ++f) lambda[f] /= z;
  p.resize(phi.size());
  for (std::size_t k = 0; k < phi.size(); ++k) p[k] = sigmoid(phi[k]);
}

}  // namespace

namespace {

struct OptimizerState {
  std::vector<double> theta, phi;      // logits
  std::vector<double> lambda, p;       // materialized parameters
  std::vector<double> v_theta, v_phi;  // squared-gradient accumulators
  double loss = 0.0;
  double step = 0.0;
  long long steps_seen = 0;
  bool converged = false;
};

// Backtracking descent from the current state for at most `budget`
// iterations. The direction is the gradient, optionally rescaled by an
// RMSProp-style diagonal accumulator; the Armijo test keeps the recorded
// loss trace non-increasing either way.
void optimize(const Workspace& ws, const FitOptions& options, OptimizerState& st, int budget,
              std::vector<double>* trace) {
  const int F = ws.F;
  std::vector<double> g_lambda, g_p, g_theta, g_phi, d_theta(F), d_phi;
  std::vector<double> cand_theta, cand_phi, cand_lambda, cand_p;
  const double beta = options.precondition_beta;

  for (int iter = 0; iter < budget; ++iter) {
    ws.loss(st.lambda, st.p, &g_lambda, &g_p);

    // Chain rule into the logit space.
    g_theta.assign(F, 0.0);
    double dot = 0.0;
    for (int f = 0; f < F; ++f) dot += st.lambda[f] * g_lambda[f];
    for (int f = 0; f < F; ++f) g_theta[f] = st.lambda[f] * (g_lambda[f] - dot);
    g_phi.resize(g_p.size());
    for (std::size_t k = 0; k < g_p.size(); ++k) {
      g_phi[k] = g_p[k] * st.p[k] * (1.0 - st.p[k]);
    }

    // Descent direction and its inner product with the gradient.
    st.steps_seen += 1;
    double g_dot_d = 0.0;
    d_phi.resize(g_phi.size());
    if (options.precondition) {
      const double correction = 1.0 - std::pow(beta, static_cast<double>(st.steps_seen));
      for (int f = 0; f < F; ++f) {
        st.v_theta[f] = beta * st.v_theta[f] + (1.0 - beta) * g_theta[f] * g_theta[f];
        d_theta[f] = g_theta[f] / (std::sqrt(st.v_theta[f] / correction) + 1e-12);
        g_dot_d += g_theta[f] * d_theta[f];
      }
      for (std::size_t k = 0; k < g_phi.size(); ++k) {
        st.v_phi[k] = beta * st.v_phi[k] + (1.0 - beta) * g_phi[k] * g_phi[k];
        d_phi[k] = g_phi[k] / (std::sqrt(st.v_phi[k] / correction) + 1e-12);
        g_dot_d += g_phi[k] * d_phi[k];
      }
    } else {
      for (int f = 0; f < F; ++f) {
        d_theta[f] = g_theta[f];
        g_dot_d += g_theta[f] * g_theta[f];
      }
      for (std::size_t k = 0; k < g_phi.size(); ++k) {
        d_phi[k] = g_phi[k];
        g_dot_d += g_phi[k] * g_phi[k];
      }
    }
    if (!(g_dot_d > 1e-24)) {
      st.converged = true;
      break;
    }

    // Warm-start the line search from twice the last accepted step.
    st.step = std::min(st.step * 2.0, 64.0 * options.initial_step);
    bool accepted = false;
    double cand_loss = st.loss;
    for (int bt = 0; bt < options.max_backtracks; ++bt) {
      cand_theta = st.theta;
      cand_phi = st.phi;
      for (int f = 0; f < F; ++f) cand_theta[f] -= st.step * d_theta[f];
      for (std::size_t k = 0; k < cand_phi.size(); ++k) cand_phi[k] -= st.step * d_phi[k];
      materialize(cand_theta, cand_phi, F, cand_lambda, cand_p);
      cand_loss = ws.loss(cand_lambda, cand_p, nullptr, nullptr);
      if (cand_loss <= st.loss - options.armijo_c * st.step * g_dot_d) {
        accepted = true;
        break;
      }
      st.step *= 0.5;
    }
    if (!accepted) {  // numerical floor reached
      st.converged = true;
      break;
    }

    st.theta.swap(cand_theta);
    st.phi.swap(cand_phi);
    st.lambda.swap(cand_lambda);
    st.p.swap(cand_p);
    const double prev = st.loss;
    st.loss = cand_loss;
    if (trace) trace->push_back(st.loss);
    if (std::abs(prev - st.loss) <= options.rel_tolerance * std::max(std::abs(prev), 1e-12)) {
      st.converged = true;
      break;
    }
  }
}

}  // namespace

LatentModel fit_latent_model(const PairwiseEstimates& pairwise, int num_clients,
                             const FitOptions& options, FitReport* report) {
  const int n = num_clients;
  const int F = options.F > 0 ? options.F : n;
  if (F < 1) throw std::invalid_argument("fit_latent_model: F >= 1 required");

  Workspace ws;
  ws.n = n;
  ws.F = F;
  for (const auto& [key, table] : pairwise.tables) {
    PairRecord pr;
    pr.i = key.first;
    pr.j = key.second;
    if (pr.i < 0 || pr.j >= n) throw std::invalid_argument("fit_latent_model: pair outside [0, N)");
    double z = 0.0;
    for (int k = 0; k < 4; ++k) {
      pr.target[k] = table[k] + options.smoothing;
      z += pr.target[k];
    }
    for (int k = 0; k < 4; ++k) {
      pr.target[k] /= z;
      pr.log_target[k] = std::log(pr.target[k]);
    }
    ws.pairs.push_back(pr);
  }

  // First-order marginals seed the conditionals.
  std::vector<double> marg(n, 0.5);
  std::vector<int> seen(n, 0);
  for (const PairRecord& pr : ws.pairs) {
    marg[pr.i] += pr.target[1] + pr.target[3];
    marg[pr.j] += pr.target[2] + pr.target[3];
    ++seen[pr.i];
    ++seen[pr.j];
  }
  for (int i = 0; i < n; ++i) marg[i] = seen[i] ? (marg[i] - 0.5) / seen[i] : 0.5;

  const auto initial_state = [&](std::uint64_t stream) {
    OptimizerState st;
    Rng rng(derive_seed(options.seed, stream));
    st.theta.assign(F, 0.0);
    st.phi.resize(static_cast<std::size_t>(n) * F);
    for (int i = 0; i < n; ++i) {
      // Clients measured at (or next to) 0 or 1 start saturated: descent
      // through the sigmoid tail is too slow to recover them otherwise.
      const double m0 = std::clamp(marg[i], 1e-7, 1.0 - 1e-7);
      const double scale = std::min(options.init_noise, 0.5 * std::min(m0, 1.0 - m0));
      for (int f = 0; f < F; ++f) {
        st.phi[static_cast<std::size_t>(i) * F + f] = logit(m0 + rng.range(-scale, scale));
      }
    }
    st.v_theta.assign(F, 0.0);
    st.v_phi.assign(st.phi.size(), 0.0);
    materialize(st.theta, st.phi, F, st.lambda, st.p);
    st.loss = ws.loss(st.lambda, st.p, nullptr, nullptr);
    st.step = options.initial_step / 2.0;
    return st;
  };

  const int restarts = std::max(1, options.restarts);
  const int explore =
      restarts > 1 ? std::min(options.explore_iterations, options.max_iterations) : 0;

  OptimizerState best;
  std::vector<double> best_trace;
  for (int r = 0; r < restarts; ++r) {
    OptimizerState st = initial_state(2 + static_cast<std::uint64_t>(r));
    std::vector<double> trace{st.loss};
    optimize(ws, options, st, explore, &trace);
    if (r == 0 || st.loss < best.loss) {
      best = std::move(st);
      best_trace = std::move(trace);
    }
  }
  if (!best.converged) {
    optimize(ws, options, best, options.max_iterations - explore, &best_trace);
  }

  FitReport rep;
  rep.initial_loss = best_trace.empty() ? best.loss : best_trace.front();
  rep.loss_trace = std::move(best_trace);
  rep.iterations = static_cast<int>(rep.loss_trace.size()) - 1;
  rep.converged = best.converged;
  rep.final_loss = best.loss;

  LatentModel m;
  m.F = F;
  m.num_clients = n;
  m.channel = pairwise.channel;
  m.lambda = std::move(best.lambda);
  m.p = std::move(best.p);
  if (report) *report = std::move(rep);
  return m;
}

double hod_mse(const LatentModel& m, const ExactJointDistribution& truth) {
  const std::size_t patterns = truth.probabilities.size();
  double sum = 0.0;
  for (std::uint32_t k = 0; k < patterns; ++k) {
    const double diff = query_mask(m, truth.clients, k) - truth.probabilities[k];
    sum += diff * diff;
  }
  return sum / static_cast<double>(patterns);
}

std::string LatentModel::to_json() const {
  json j;
  j["schema"] = 1;
  j["F"] = F;
  j["num_clients"] = num_clients;
  j["channel"] = channel;
  j["lambda"] = lambda;
  j["p"] = p;
  return j.dump();
}

LatentModel LatentModel::from_json(const std::string& text) {
  json j = json::parse(text);
  LatentModel m;
  m.F = j.at("F").get<int>();
  m.num_clients = j.at("num_clients").get<int>();
  m.channel = j.at("channel").get<int>();
  m.lambda = j.at("lambda").get<std::vector<double>>();
  m.p = j.at("p").get<std::vector<double>>();
  if (static_cast<int>(m.lambda.size()) != m.F ||
      m.p.size() != static_cast<std::size_t>(m.num_clients) * m.F)
    throw std::runtime_error("LatentModel: inconsistent dimensions");
  return m;
}

}  // namespace airtomo
