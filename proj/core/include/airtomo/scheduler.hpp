#ifndef AIRTOMO_SCHEDULER_HPP
#define AIRTOMO_SCHEDULER_HPP

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "airtomo/latent_model.hpp"
#include "airtomo/simulator.hpp"
#include "airtomo/topology.hpp"

namespace airtomo {

enum class Policy { kPf, kAa, kJaa, kSp, kOracle };

std::string policy_name(Policy p);
Policy policy_from_name(const std::string& name);

// Deterministic per-topology rate model. SISO rate of client i is base[i]
// (log-uniform in [1, 4]); the MU-MIMO rate of i when `active` of the
// `group` scheduled streams transmit is
//   base[i] * min(stream_gain_cap, M / active) / (1 + kappa * (group - 1)).
struct RateModel {
  std::vector<double> base;
  int M = 1;
  double kappa = 0.1;
  double stream_gain_cap = 2.0;

  double rate(int i) const { return base[i]; }
  double rate_group(int i, int active, int group) const {
    const double share = std::min(stream_gain_cap, static_cast<double>(M) / active);
    return base[i] * share / (1.0 + kappa * (group - 1));
  }
};

RateModel make_rate_model(int num_clients, int M, double kappa, double stream_gain_cap,
                          std::uint64_t seed, double lo = 1.0, double hi = 4.0);

// Exponentially averaged per-client throughput, floored away from zero so
// proportional-fair utilities stay finite.
struct ClientState {
  std::vector<double> R;
  double alpha = 0.05;

  static ClientState warm_start(const RateModel& rates, double alpha);
  void update(const std::vector<double>& realized);
};

struct RbAssignment {
  std::vector<int> group;  // ascending client ids
  double expected_utility = 0.0;
};

struct ScheduleDecision {
  std::vector<RbAssignment> rbs;  // one entry per resource block
};

// Per-RB policy decisions over a candidate client set. All utilities are
// r/R based; ties always break toward the lowest client id.
RbAssignment schedule_pf(const RateModel& rates, const ClientState& state,
                         const std::vector<int>& candidates, int M);
RbAssignment schedule_aa(const RateModel& rates, const ClientState& state,
                         const std::vector<int>& candidates,
                         const std::vector<double>& access_prob, int M);
RbAssignment schedule_jaa(const RateModel& rates, const ClientState& state,
                          const std::vector<int>& candidates, const LatentModel& model, int M);
RbAssignment schedule_sp(const RateModel& rates, const ClientState& state,
                         const std::vector<int>& candidates, const LatentModel& model,
                         int group_cap);
RbAssignment schedule_oracle_siso(const RateModel& rates, const ClientState& state,
                                  const std::vector<int>& candidates,
                                  const TransmitSupport& support, int group_cap);
RbAssignment schedule_oracle_mimo(const RateModel& rates, const ClientState& state,
                                  const std::vector<int>& candidates,
                                  const TransmitSupport& support, int M);

// Speculative expected utility: the RB pays off only when exactly one
// scheduled client transmits. Model- and oracle-probability variants.
double speculative_expected_utility(const RateModel& rates, const ClientState& state,
                                    const std::vector<int>& group, const TransmitSupport& support);
double speculative_expected_utility(const RateModel& rates, const ClientState& state,
                                    const std::vector<int>& group, const LatentModel& model);
// MU-MIMO expected utility over realized transmit subsets of the group.
double mimo_expected_utility(const RateModel& rates, const ClientState& state,
                             const std::vector<int>& group, const LatentModel& model, int M);
double mimo_expected_utility(const RateModel& rates, const ClientState& state,
                             const std::vector<int>& group, const TransmitSupport& support, int M);

struct EpisodeConfig {
  Policy policy = Policy::kPf;
  long long frames = 1500;
  int B = 10;
  int M = 1;
  double alpha = 0.05;
  int sp_group_cap = 4;
  std::uint64_t seed = 1;
};

// Everything an episode needs besides the topology: the rate model, the
// measured access marginals, the fitted per-channel models (JAA/SP), and the
// exact supports (oracle).
struct PolicyInputs {
  RateModel rates;
  std::vector<std::vector<double>> access;  // [channel][client]
  std::vector<LatentModel> models;          // per channel, may be empty for PF/AA
  std::vector<TransmitSupport> supports;    // per channel, oracle only
};

struct EpisodeMetrics {
  double rbu = 0.0;             // successful RBs / scheduled RB slots
  double cum_throughput = 0.0;  // sum of realized rates over the episode
  std::vector<double> per_client_throughput;
  long long frames = 0;
  long long collisions = 0;     // over-scheduled RBs wasted by >1 transmitter
};

EpisodeMetrics run_episode(const Topology& t, const PolicyInputs& inputs,
                           const EpisodeConfig& config);

}  // namespace airtomo

#endif  // AIRTOMO_SCHEDULER_HPP
