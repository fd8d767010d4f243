#ifndef AIRTOMO_SIMULATOR_HPP
#define AIRTOMO_SIMULATOR_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "airtomo/ledger.hpp"
#include "airtomo/rng.hpp"
#include "airtomo/topology.hpp"

namespace airtomo {

struct FrameOutcome {
  long long frame_index = 0;
  int channel = 0;
  std::vector<int> transmitting_hts;  // ascending HT ids
  std::vector<int> blocked_clients;   // ascending client ids
};

// Exact joint access distribution of an ordered client subset on a channel.
// probabilities[k]: bit m of k set means clients[m] accesses the channel.
struct ExactJointDistribution {
  int channel = 0;
  std::vector<int> clients;
  std::vector<double> probabilities;

  double prob_of(std::uint32_t pattern) const { return probabilities[pattern]; }
  // First-order access marginal of clients[m].
  double marginal(int m) const;
};

// Removes one client from the distribution by summing its two outcomes.
ExactJointDistribution marginalize_out(const ExactJointDistribution& d, int client_id);

// Exact distribution over blocked-client sets produced by the HT process on
// one channel. Entries are deduplicated on the blocked set; probabilities
// sum to 1.
struct TransmitSupport {
  int channel = 0;
  int num_clients = 0;
  int mask_words = 0;
  std::vector<double> prob;                        // per entry
  std::vector<std::vector<std::uint64_t>> blocked;  // per entry, client bitmask

  int size() const { return static_cast<int>(prob.size()); }
  bool is_blocked(int entry, int client) const {
    return (blocked[entry][client >> 6] >> (client & 63)) & 1ULL;
  }
  double access_prob(int client) const;
};

// Per-channel simulation context with precomputed coverage and sensing
// relations. One frame: every active HT attempts independently with its
// transmit probability, then CSMA resolves attempts in a uniformly random
// priority order (an attempting HT backs off iff a sensing neighbor already
// transmits). Blocked clients are the union of the transmitters' disks.
class ChannelSim {
 public:
  ChannelSim(const Topology& t, int channel);

  int channel() const { return channel_; }
  int num_active_hts() const { return static_cast<int>(active_ids_.size()); }
  int mask_words() const { return mask_words_; }

  FrameOutcome step(Rng& rng, long long frame_index = 0) const;

  // Hot path used by measurement and episode loops: fills `blocked` (client
  // bitmask, mask_words() words) for one frame.
  void step_blocked(Rng& rng, std::vector<std::uint64_t>& blocked) const;

  // Exact distribution over blocked sets. Throws when more than
  // max_active_hts HTs are active on the channel.
  TransmitSupport exact_support(int max_active_hts = 20) const;

 private:
  const Topology* topo_;
  int channel_;
  int mask_words_;
  std::vector<int> active_ids_;
  std::vector<double> q_;
  std::vector<std::uint64_t> sense_adj_;                 // over active index
  std::vector<std::vector<std::uint64_t>> coverage_;     // per active HT
};

FrameOutcome step_frame(const Topology& t, int channel, Rng& rng, long long frame_index = 0);

// Brute-force oracle: exact joint access distribution of `subset` (ascending
// client ids, size <= 20) on a channel with at most 20 active HTs.
ExactJointDistribution exact_joint(const Topology& t, int channel, const std::vector<int>& subset);
ExactJointDistribution exact_joint(const TransmitSupport& support, const std::vector<int>& subset);

// Runs `frames` frames with `scheduled` clients granted on the channel and
// counts the observed access patterns (bit m = scheduled[m] accessed).
// Charges one sampling session to the ledger when given.
std::vector<long long> schedule_and_observe(const Topology& t, int channel,
                                            const std::vector<int>& scheduled, long long frames,
                                            Rng& rng, MeasurementLedger* ledger = nullptr);

// Measurement backend for the tomography phases: one call = one scheduling
// session of a client set on a channel, returning the empirical (or exact)
// access-pattern distribution.
class JointSampler {
 public:
  virtual ~JointSampler() = default;
  virtual std::vector<double> measure(int channel, const std::vector<int>& clients,
                                      long long frames) = 0;
  MeasurementLedger& ledger() { return ledger_; }
  const MeasurementLedger& ledger() const { return ledger_; }

 protected:
  MeasurementLedger ledger_;
};

class MonteCarloSampler : public JointSampler {
 public:
  MonteCarloSampler(const Topology& t, std::uint64_t seed);
  std::vector<double> measure(int channel, const std::vector<int>& clients,
                              long long frames) override;

 private:
  const Topology* topo_;
  Rng rng_;
  std::vector<std::unique_ptr<ChannelSim>> sims_;
};

// Infinite-sample mode: swaps the simulator for the oracle but keeps the
// ledger accounting identical.
class ExactSampler : public JointSampler {
 public:
  explicit ExactSampler(const Topology& t);
  std::vector<double> measure(int channel, const std::vector<int>& clients,
                              long long frames) override;
  const TransmitSupport& support(int channel);

 private:
  const Topology* topo_;
  std::vector<std::unique_ptr<TransmitSupport>> supports_;
};

}  // namespace airtomo

#endif  // AIRTOMO_SIMULATOR_HPP
