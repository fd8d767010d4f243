#include "airtomo/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>

#include "airtomo/rng.hpp"

namespace airtomo {

namespace {

// Floor for the throughput EWMA. Deeply starved clients keep a strong but
// bounded priority; an unbounded 1/R turns any nonzero access probability
// into a mandatory desperation bet.
constexpr double kMinAverage = 1e-3;

inline bool test_bit(const std::vector<std::uint64_t>& mask, int i) {
  return (mask[i >> 6] >> (i & 63)) & 1ULL;
}

}  // namespace

std::string policy_name(Policy p) {
  switch (p) {
    case Policy::kPf: return "pf";
    case Policy::kAa: return "aa";
    case Policy::kJaa: return "jaa";
    case Policy::kSp: return "sp";
    case Policy::kOracle: return "oracle";
  }
  return "unknown";
}

Policy policy_from_name(const std::string& name) {
  if (name == "pf") return Policy::kPf;
  if (name == "aa") return Policy::kAa;
  if (name == "jaa") return Policy::kJaa;
  if (name == "sp") return Policy::kSp;
  if (name == "oracle") return Policy::kOracle;
  throw std::invalid_argument("unknown policy: " + name);
}

RateModel make_rate_model(int num_clients, int M, double kappa, double stream_gain_cap,
                          std::uint64_t seed, double lo, double hi) {
  RateModel r;
  r.M = M;
  r.kappa = kappa;
  r.stream_gain_cap = stream_gain_cap;
  Rng rng(derive_seed(seed, 4));
  r.base.resize(num_clients);
  const double log_lo = std::log(lo);
  const double log_hi = std::log(hi);
  for (int i = 0; i < num_clients; ++i) {
    r.base[i] = std::exp(rng.range(log_lo, log_hi));
  }
  return r;
}

ClientState ClientState::warm_start(const RateModel& rates, double alpha) {
  ClientState s;
  s.alpha = alpha;
  s.R = rates.base;
  return s;
}

void ClientState::update(const std::vector<double>& realized) {
  for (std::size_t i = 0; i < R.size(); ++i) {
    R[i] = std::max(alpha * realized[i] + (1.0 - alpha) * R[i], kMinAverage);
  }
}

namespace {

// Greedy weighted group growth shared by PF and AA: maximizes
// sum_i w_i * rate_group(i, |G|, |G|) / R_i, all streams assumed active.
RbAssignment greedy_weighted_group(const RateModel& rates, const ClientState& state,
                                   const std::vector<int>& candidates,
                                   const std::vector<double>& weight, int M) {
  RbAssignment out;
  if (candidates.empty()) return out;
  std::vector<int> group;
  std::vector<char> used(candidates.size(), 0);
  double value = 0.0;
  while (static_cast<int>(group.size()) < M) {
    const int g1 = static_cast<int>(group.size()) + 1;
    int best = -1;
    double best_value = value;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      if (used[k]) continue;
      const int l = candidates[k];
      double v = weight[l] * rates.rate_group(l, g1, g1) / state.R[l];
      for (int i : group) v += weight[i] * rates.rate_group(i, g1, g1) / state.R[i];
      if (v > best_value + 1e-15) {
        best_value = v;
        best = static_cast<int>(k);
      }
    }
    if (best < 0) break;
    used[best] = 1;
    group.push_back(candidates[best]);
    value = best_value;
  }
  std::sort(group.begin(), group.end());
  out.group = std::move(group);
  out.expected_utility = value;
  return out;
}

}  // namespace

RbAssignment schedule_pf(const RateModel& rates, const ClientState& state,
                         const std::vector<int>& candidates, int M) {
  std::vector<double> ones(state.R.size(), 1.0);
  return greedy_weighted_group(rates, state, candidates, ones, M);
}

RbAssignment schedule_aa(const RateModel& rates, const ClientState& state,
                         const std::vector<int>& candidates,
                         const std::vector<double>& access_prob, int M) {
  return greedy_weighted_group(rates, state, candidates, access_prob, M);
}

double speculative_expected_utility(const RateModel& rates, const ClientState& state,
                                    const std::vector<int>& group, const LatentModel& model) {
  // E(G) = sum_i P(i accesses, rest blocked) * r_i / R_i under the model.
  double e = 0.0;
  for (int f = 0; f < model.F; ++f) {
    const double l = model.lambda[f];
    double weighted = 0.0;
    for (std::size_t k = 0; k < group.size(); ++k) {
      double term = model.p_at(group[k], f);
      for (std::size_t j = 0; j < group.size(); ++j) {
        if (j != k) term *= 1.0 - model.p_at(group[j], f);
      }
      weighted += term * rates.rate(group[k]) / state.R[group[k]];
    }
    e += l * weighted;
  }
  return e;
}

double speculative_expected_utility(const RateModel& rates, const ClientState& state,
                                    const std::vector<int>& group, const TransmitSupport& support) {
  double e = 0.0;
  for (int entry = 0; entry < support.size(); ++entry) {
    int open = -1;
    bool multiple = false;
    for (int i : group) {
      if (!support.is_blocked(entry, i)) {
        if (open >= 0) {
          multiple = true;
          break;
        }
        open = i;
      }
    }
    if (!multiple && open >= 0) {
      e += support.prob[entry] * rates.rate(open) / state.R[open];
    }
  }
  return e;
}

double mimo_expected_utility(const RateModel& rates, const ClientState& state,
                             const std::vector<int>& group, const LatentModel& model, int M) {
  (void)M;
  const int n = static_cast<int>(group.size());
  if (n == 0) return 0.0;
  const int g_total = n;
  double e = 0.0;
  std::vector<double> others(n);  // P(k of the other members transmit | H = f)
  for (int f = 0; f < model.F; ++f) {
    const double l = model.lambda[f];
    double weighted = 0.0;
    for (int k = 0; k < n; ++k) {
      others.assign(n, 0.0);
      others[0] = 1.0;
      int filled = 0;
      for (int j = 0; j < n; ++j) {
        if (j == k) continue;
        const double pj = model.p_at(group[j], f);
        for (int c = filled; c >= 0; --c) {
          others[c + 1] += others[c] * pj;
          others[c] *= 1.0 - pj;
        }
        ++filled;
      }
      const double pk = model.p_at(group[k], f);
      double expect_rate = 0.0;
      for (int c = 0; c <= filled; ++c) {
        expect_rate += others[c] * rates.rate_group(group[k], c + 1, g_total);
      }
      weighted += pk * expect_rate / state.R[group[k]];
    }
    e += l * weighted;
  }
  return e;
}

double mimo_expected_utility(const RateModel& rates, const ClientState& state,
                             const std::vector<int>& group, const TransmitSupport& support, int M) {
  (void)M;
  const int g_total = static_cast<int>(group.size());
  double e = 0.0;
  std::vector<int> open;
  for (int entry = 0; entry < support.size(); ++entry) {
    open.clear();
    for (int i : group) {
      if (!support.is_blocked(entry, i)) open.push_back(i);
    }
    if (open.empty()) continue;
    double sum = 0.0;
    for (int i : open) {
      sum += rates.rate_group(i, static_cast<int>(open.size()), g_total) / state.R[i];
    }
    e += support.prob[entry] * sum;
  }
  return e;
}

RbAssignment schedule_jaa(const RateModel& rates, const ClientState& state,
                          const std::vector<int>& candidates, const LatentModel& model, int M) {
  RbAssignment out;
  if (candidates.empty()) return out;

  // Seed with the best access-aware pair, then grow by expected-utility gain.
  std::vector<double> access(state.R.size(), 0.0);
  for (int i : candidates) access[i] = model.access_prob(i);
  RbAssignment seed = schedule_aa(rates, state, candidates, access, std::min(2, M));

  std::vector<int> group = seed.group;
  double value = mimo_expected_utility(rates, state, group, model, M);
  while (static_cast<int>(group.size()) < M) {
    int best = -1;
    double best_value = value;
    std::vector<int> trial;
    for (int l : candidates) {
      if (std::find(group.begin(), group.end(), l) != group.end()) continue;
      trial = group;
      trial.push_back(l);
      std::sort(trial.begin(), trial.end());
      const double v = mimo_expected_utility(rates, state, trial, model, M);
      if (v > best_value + 1e-15) {
        best_value = v;
        best = l;
      }
    }
    if (best < 0) break;
    group.push_back(best);
    std::sort(group.begin(), group.end());
    value = best_value;
  }
  out.group = std::move(group);
  out.expected_utility = value;
  return out;
}

namespace {

template <typename EvalFn>
RbAssignment grow_speculative(const std::vector<int>& candidates, int seed_client, int group_cap,
                              EvalFn&& eval) {
  RbAssignment out;
  std::vector<int> group{seed_client};
  double value = eval(group);
  while (static_cast<int>(group.size()) < group_cap) {
    int best = -1;
    double best_value = value;
    std::vector<int> trial;
    for (int l : candidates) {
      if (std::find(group.begin(), group.end(), l) != group.end()) continue;
      trial = group;
      trial.push_back(l);
      std::sort(trial.begin(), trial.end());
      const double v = eval(trial);
      if (v > best_value + 1e-15) {
        best_value = v;
        best = l;
      }
    }
    if (best < 0) break;
    group.push_back(best);
    std::sort(group.begin(), group.end());
    value = best_value;
  }
  std::sort(group.begin(), group.end());
  out.group = std::move(group);
  out.expected_utility = value;
  return out;
}

}  // namespace

RbAssignment schedule_sp(const RateModel& rates, const ClientState& state,
                         const std::vector<int>& candidates, const LatentModel& model,
                         int group_cap) {
  RbAssignment out;
  if (candidates.empty()) return out;
  // AA winner seeds the over-scheduled group.
  int seed = candidates[0];
  double best = -1.0;
  for (int i : candidates) {
    const double v = model.access_prob(i) * rates.rate(i) / state.R[i];
    if (v > best + 1e-15) {
      best = v;
      seed = i;
    }
  }
  return grow_speculative(candidates, seed, group_cap, [&](const std::vector<int>& g) {
    return speculative_expected_utility(rates, state, g, model);
  });
}

namespace {

// Clients with identical blocked signatures are interchangeable for
// speculative scheduling except for their utility; keeping only the best
// per signature never loses the optimum.
std::vector<int> signature_class_reps(const std::vector<int>& candidates,
                                      const TransmitSupport& support,
                                      const std::vector<double>& utility) {
  std::vector<std::vector<std::uint64_t>> signatures;
  std::vector<int> reps;
  for (int i : candidates) {
    std::vector<std::uint64_t> sig((support.size() + 63) / 64, 0);
    for (int e = 0; e < support.size(); ++e) {
      if (support.is_blocked(e, i)) sig[e >> 6] |= 1ULL << (e & 63);
    }
    bool found = false;
    for (std::size_t s = 0; s < signatures.size(); ++s) {
      if (signatures[s] == sig) {
        if (utility[i] > utility[reps[s]] + 1e-15) reps[s] = i;
        found = true;
        break;
      }
    }
    if (!found) {
      signatures.push_back(std::move(sig));
      reps.push_back(i);
    }
  }
  std::sort(reps.begin(), reps.end());
  return reps;
}

void enumerate_groups(const std::vector<int>& pool, int max_size,
                      const std::function<void(const std::vector<int>&)>& visit) {
  std::vector<int> current;
  const std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (!current.empty()) visit(current);
    if (static_cast<int>(current.size()) == max_size) return;
    for (std::size_t k = start; k < pool.size(); ++k) {
      current.push_back(pool[k]);
      rec(k + 1);
      current.pop_back();
    }
  };
  rec(0);
}

}  // namespace

RbAssignment schedule_oracle_siso(const RateModel& rates, const ClientState& state,
                                  const std::vector<int>& candidates,
                                  const TransmitSupport& support, int group_cap) {
  RbAssignment out;
  if (candidates.empty()) return out;
  std::vector<double> utility(state.R.size(), 0.0);
  for (int i : candidates) utility[i] = rates.rate(i) / state.R[i];
  const std::vector<int> pool = signature_class_reps(candidates, support, utility);

  double best = -1.0;
  std::vector<int> best_group;
  enumerate_groups(pool, group_cap, [&](const std::vector<int>& g) {
    const double e = speculative_expected_utility(rates, state, g, support);
    if (e > best + 1e-15) {
      best = e;
      best_group = g;
    }
  });
  out.group = std::move(best_group);
  out.expected_utility = std::max(best, 0.0);
  return out;
}

RbAssignment schedule_oracle_mimo(const RateModel& rates, const ClientState& state,
                                  const std::vector<int>& candidates,
                                  const TransmitSupport& support, int M) {
  RbAssignment out;
  if (candidates.empty()) return out;
  // Exhaustive enumeration; guard the combinatorial bound.
  double groups = 0.0;
  double binom = 1.0;
  for (int m = 1; m <= M; ++m) {
    binom = binom * (static_cast<double>(candidates.size()) - m + 1) / m;
    groups += binom;
  }
  if (groups > 2e5)
    throw std::invalid_argument("schedule_oracle_mimo: enumeration bound exceeded");

  double best = -1.0;
  std::vector<int> best_group;
  enumerate_groups(candidates, M, [&](const std::vector<int>& g) {
    const double e = mimo_expected_utility(rates, state, g, support, M);
    if (e > best + 1e-15) {
      best = e;
      best_group = g;
    }
  });
  out.group = std::move(best_group);
  out.expected_utility = std::max(best, 0.0);
  return out;
}

namespace {

struct ChannelPlan {
  std::vector<int> candidates;
  std::unique_ptr<ChannelSim> sim;
};

}  // namespace

EpisodeMetrics run_episode(const Topology& t, const PolicyInputs& inputs,
                           const EpisodeConfig& config) {
  const int C = t.num_channels;
  const int N = t.num_clients();
  const Policy policy = config.policy;
  const bool needs_model = policy == Policy::kJaa || policy == Policy::kSp;
  const bool needs_support = policy == Policy::kOracle;
  if (needs_model && static_cast<int>(inputs.models.size()) != C)
    throw std::invalid_argument("run_episode: missing fitted models");
  if (needs_support && static_cast<int>(inputs.supports.size()) != C)
    throw std::invalid_argument("run_episode: missing exact supports");
  const bool needs_access = policy == Policy::kAa;
  if (needs_access && static_cast<int>(inputs.access.size()) != C)
    throw std::invalid_argument("run_episode: missing access marginals");

  // Static channel partition. PF and AA split channel-agnostically; the
  // HOD policies send each client to its best-access channel.
  std::vector<ChannelPlan> plans(C);
  for (int c = 0; c < C; ++c) plans[c].sim = std::make_unique<ChannelSim>(t, c);
  if (C == 1) {
    for (int i = 0; i < N; ++i) plans[0].candidates.push_back(i);
  } else if (policy == Policy::kPf || policy == Policy::kAa) {
    for (int i = 0; i < N; ++i) plans[i % C].candidates.push_back(i);
  } else {
    for (int i = 0; i < N; ++i) {
      int best_c = 0;
      double best_a = -1.0;
      for (int c = 0; c < C; ++c) {
        const double a = needs_support ? inputs.supports[c].access_prob(i)
                                       : inputs.models[c].access_prob(i);
        if (a > best_a + 1e-15) {
          best_a = a;
          best_c = c;
        }
      }
      plans[best_c].candidates.push_back(i);
    }
  }

  ClientState state = ClientState::warm_start(inputs.rates, config.alpha);
  Rng rng(derive_seed(config.seed, 5));

  EpisodeMetrics metrics;
  metrics.per_client_throughput.assign(N, 0.0);
  metrics.frames = config.frames;
  long long rb_slots = 0;
  long long rb_success = 0;

  std::vector<double> realized(N, 0.0);
  std::vector<std::uint64_t> blocked;
  std::vector<int> open;

  for (long long frame = 0; frame < config.frames; ++frame) {
    std::fill(realized.begin(), realized.end(), 0.0);
    for (int c = 0; c < C; ++c) {
      const ChannelPlan& plan = plans[c];
      if (plan.candidates.empty()) continue;

      RbAssignment rb;
      switch (policy) {
        case Policy::kPf:
          rb = schedule_pf(inputs.rates, state, plan.candidates, config.M);
          break;
        case Policy::kAa:
          rb = schedule_aa(inputs.rates, state, plan.candidates, inputs.access[c], config.M);
          break;
        case Policy::kJaa:
          rb = schedule_jaa(inputs.rates, state, plan.candidates, inputs.models[c], config.M);
          break;
        case Policy::kSp:
          rb = schedule_sp(inputs.rates, state, plan.candidates, inputs.models[c],
                           config.sp_group_cap);
          break;
        case Policy::kOracle:
          rb = config.M > 1 ? schedule_oracle_mimo(inputs.rates, state, plan.candidates,
                                                   inputs.supports[c], config.M)
                            : schedule_oracle_siso(inputs.rates, state, plan.candidates,
                                                   inputs.supports[c], config.sp_group_cap);
          break;
      }
      plan.sim->step_blocked(rng, blocked);
      rb_slots += config.B;
      if (rb.group.empty()) continue;

      open.clear();
      for (int i : rb.group) {
        if (!test_bit(blocked, i)) open.push_back(i);
      }
      const bool over_scheduled = config.M == 1 && rb.group.size() > 1;
      if (config.M == 1) {
        // SISO decode: exactly one transmitter or the block is wasted.
        if (open.size() == 1) {
          realized[open[0]] += config.B * inputs.rates.rate(open[0]);
          rb_success += config.B;
        } else if (over_scheduled && open.size() > 1) {
          metrics.collisions += config.B;
        }
      } else {
        if (!open.empty()) {
          for (int i : open) {
            realized[i] += config.B * inputs.rates.rate_group(i, static_cast<int>(open.size()),
                                                              static_cast<int>(rb.group.size()));
          }
          rb_success += config.B;
        }
      }
    }
    for (int i = 0; i < N; ++i) {
      metrics.per_client_throughput[i] += realized[i];
      metrics.cum_throughput += realized[i];
    }
    state.update(realized);
  }
  metrics.rbu = rb_slots > 0 ? static_cast<double>(rb_success) / rb_slots : 0.0;
  return metrics;
}

}  // namespace airtomo
