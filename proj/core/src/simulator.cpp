#include "airtomo/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace airtomo {

namespace {

inline void set_bit(std::vector<std::uint64_t>& mask, int i) {
  mask[i >> 6] |= 1ULL << (i & 63);
}

inline bool test_bit(const std::vector<std::uint64_t>& mask, int i) {
  return (mask[i >> 6] >> (i & 63)) & 1ULL;
}

inline void or_into(std::vector<std::uint64_t>& dst, const std::vector<std::uint64_t>& src) {
  for (std::size_t w = 0; w < dst.size(); ++w) dst[w] |= src[w];
}

}  // namespace

double ExactJointDistribution::marginal(int m) const {
  double p = 0.0;
  for (std::uint32_t k = 0; k < probabilities.size(); ++k) {
    if (k & (1u << m)) p += probabilities[k];
  }
  return p;
}

ExactJointDistribution marginalize_out(const ExactJointDistribution& d, int client_id) {
  int m = -1;
  for (std::size_t i = 0; i < d.clients.size(); ++i) {
    if (d.clients[i] == client_id) m = static_cast<int>(i);
  }
  if (m < 0) throw std::invalid_argument("marginalize_out: client not in distribution");
  ExactJointDistribution r;
  r.channel = d.channel;
  for (int i = 0; i < static_cast<int>(d.clients.size()); ++i) {
    if (i != m) r.clients.push_back(d.clients[i]);
  }
  const std::uint32_t n = static_cast<std::uint32_t>(d.clients.size());
  r.probabilities.assign(1u << (n - 1), 0.0);
  const std::uint32_t low = (1u << m) - 1;
  for (std::uint32_t k = 0; k < (1u << n); ++k) {
    const std::uint32_t reduced = (k & low) | ((k >> (m + 1)) << m);
    r.probabilities[reduced] += d.probabilities[k];
  }
  return r;
}

double TransmitSupport::access_prob(int client) const {
  double p = 0.0;
  for (int e = 0; e < size(); ++e) {
    if (!is_blocked(e, client)) p += prob[e];
  }
  return p;
}

ChannelSim::ChannelSim(const Topology& t, int channel) : topo_(&t), channel_(channel) {
  if (channel < 0 || channel >= t.num_channels)
    throw std::invalid_argument("ChannelSim: channel out of range");
  mask_words_ = (t.num_clients() + 63) / 64;
  for (int h = 0; h < t.num_hts(); ++h) {
    if (t.hts[h].active_on(channel)) {
      active_ids_.push_back(h);
      q_.push_back(t.hts[h].transmit_prob[channel]);
    }
  }
  const int a = static_cast<int>(active_ids_.size());
  if (a > 64) throw std::invalid_argument("ChannelSim: more than 64 active HTs on one channel");
  sense_adj_.assign(a, 0);
  coverage_.assign(a, std::vector<std::uint64_t>(mask_words_, 0));
  for (int u = 0; u < a; ++u) {
    for (int v = 0; v < a; ++v) {
      if (u != v && t.hts_sense(active_ids_[u], active_ids_[v], channel))
        sense_adj_[u] |= 1ULL << v;
    }
    for (int i = 0; i < t.num_clients(); ++i) {
      if (t.covers(active_ids_[u], i, channel)) set_bit(coverage_[u], i);
    }
  }
}

void ChannelSim::step_blocked(Rng& rng, std::vector<std::uint64_t>& blocked) const {
  blocked.assign(mask_words_, 0);
  const int a = num_active_hts();
  if (a == 0) return;

  // Attempt draws, then a uniformly random priority order over attempters.
  int attempt[64];
  int n_attempt = 0;
  for (int u = 0; u < a; ++u) {
    if (rng.unit() < q_[u]) attempt[n_attempt++] = u;
  }
  for (int i = n_attempt - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.index(static_cast<std::size_t>(i) + 1));
    std::swap(attempt[i], attempt[j]);
  }
  std::uint64_t tx = 0;
  for (int i = 0; i < n_attempt; ++i) {
    const int u = attempt[i];
    if ((tx & sense_adj_[u]) == 0) {
      tx |= 1ULL << u;
      or_into(blocked, coverage_[u]);
    }
  }
}

FrameOutcome ChannelSim::step(Rng& rng, long long frame_index) const {
  FrameOutcome out;
  out.frame_index = frame_index;
  out.channel = channel_;
  std::vector<std::uint64_t> blocked(mask_words_, 0);
  const int a = num_active_hts();

  int attempt[64];
  int n_attempt = 0;
  for (int u = 0; u < a; ++u) {
    if (rng.unit() < q_[u]) attempt[n_attempt++] = u;
  }
  for (int i = n_attempt - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.index(static_cast<std::size_t>(i) + 1));
    std::swap(attempt[i], attempt[j]);
  }
  std::uint64_t tx = 0;
  for (int i = 0; i < n_attempt; ++i) {
    const int u = attempt[i];
    if ((tx & sense_adj_[u]) == 0) {
      tx |= 1ULL << u;
      or_into(blocked, coverage_[u]);
    }
  }
  for (int u = 0; u < a; ++u) {
    if (tx & (1ULL << u)) out.transmitting_hts.push_back(active_ids_[u]);
  }
  for (int i = 0; i < topo_->num_clients(); ++i) {
    if (test_bit(blocked, i)) out.blocked_clients.push_back(i);
  }
  return out;
}

namespace {

// Distribution over transmitting subsets of one connected component of the
// attempting-HT sensing graph, averaged over all priority orders. Forward DP
// on (remaining, transmitting) states; blocked-and-processed HTs never
// influence later decisions, so they are dropped from the state.
void component_order_average(const std::vector<int>& members,
                             const std::vector<std::uint64_t>& sense_adj,
                             std::vector<std::pair<std::uint64_t, double>>& out) {
  const int m = static_cast<int>(members.size());
  // Local adjacency restricted to the component.
  std::vector<std::uint32_t> adj(m, 0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i != j && (sense_adj[members[i]] >> members[j]) & 1ULL) adj[i] |= 1u << j;
    }
  }
  std::unordered_map<std::uint64_t, double> level;
  const auto key = [m](std::uint32_t remaining, std::uint32_t tx) {
    return (static_cast<std::uint64_t>(remaining) << m) | tx;
  };
  level[key((1u << m) - 1, 0)] = 1.0;
  for (int step = 0; step < m; ++step) {
    std::unordered_map<std::uint64_t, double> next;
    for (const auto& [k, p] : level) {
      const std::uint32_t remaining = static_cast<std::uint32_t>(k >> m);
      const std::uint32_t tx = static_cast<std::uint32_t>(k & ((1ULL << m) - 1));
      const int n_rem = std::popcount(remaining);
      const double share = p / n_rem;
      for (std::uint32_t r = remaining; r;) {
        const int i = std::countr_zero(r);
        r &= r - 1;
        const std::uint32_t tx2 = (adj[i] & tx) ? tx : (tx | (1u << i));
        next[key(remaining & ~(1u << i), tx2)] += share;
      }
    }
    level.swap(next);
  }
  out.clear();
  for (const auto& [k, p] : level) {
    const std::uint32_t tx = static_cast<std::uint32_t>(k & ((1ULL << m) - 1));
    std::uint64_t global_tx = 0;
    for (int i = 0; i < m; ++i) {
      if (tx & (1u << i)) global_tx |= 1ULL << members[i];
    }
    out.emplace_back(global_tx, p);
  }
}

}  // namespace

TransmitSupport ChannelSim::exact_support(int max_active_hts) const {
  const int a = num_active_hts();
  if (a > max_active_hts)
    throw std::invalid_argument("exact_support: active HT count exceeds enumeration bound");

  TransmitSupport s;
  s.channel = channel_;
  s.num_clients = topo_->num_clients();
  s.mask_words = mask_words_;

  std::map<std::vector<std::uint64_t>, double> by_blocked;
  std::vector<std::pair<std::uint64_t, double>> comp_dist;
  std::vector<std::pair<std::uint64_t, double>> outcomes, merged;

  for (std::uint64_t pattern = 0; pattern < (1ULL << a); ++pattern) {
    double p_pattern = 1.0;
    for (int u = 0; u < a; ++u) {
      p_pattern *= (pattern >> u) & 1ULL ? q_[u] : 1.0 - q_[u];
    }
    if (p_pattern == 0.0) continue;

    // Split the attempting set into sensing components; HTs with no
    // attempting neighbor transmit unconditionally.
    std::uint64_t base_tx = 0;
    std::uint64_t rest = pattern;
    outcomes.assign(1, {0, 1.0});
    while (rest) {
      const int seed_ht = std::countr_zero(rest);
      // BFS component within the attempt pattern.
      std::uint64_t comp = 1ULL << seed_ht;
      std::uint64_t frontier = comp;
      while (frontier) {
        std::uint64_t grow = 0;
        for (std::uint64_t f = frontier; f;) {
          const int u = std::countr_zero(f);
          f &= f - 1;
          grow |= sense_adj_[u] & pattern & ~comp;
        }
        comp |= grow;
        frontier = grow;
      }
      rest &= ~comp;
      if (std::popcount(comp) == 1) {
        base_tx |= comp;
        continue;
      }
      std::vector<int> members;
      for (std::uint64_t c = comp; c;) {
        members.push_back(std::countr_zero(c));
        c &= c - 1;
      }
      component_order_average(members, sense_adj_, comp_dist);
      merged.clear();
      for (const auto& [tx0, p0] : outcomes) {
        for (const auto& [tx1, p1] : comp_dist) {
          merged.emplace_back(tx0 | tx1, p0 * p1);
        }
      }
      outcomes.swap(merged);
    }

    std::vector<std::uint64_t> blocked(mask_words_);
    for (const auto& [tx, p_tx] : outcomes) {
      std::fill(blocked.begin(), blocked.end(), 0);
      std::uint64_t all_tx = tx | base_tx;
      while (all_tx) {
        const int u = std::countr_zero(all_tx);
        all_tx &= all_tx - 1;
        or_into(blocked, coverage_[u]);
      }
      by_blocked[blocked] += p_pattern * p_tx;
    }
  }

  for (auto& [blocked, p] : by_blocked) {
    s.blocked.push_back(blocked);
    s.prob.push_back(p);
  }
  return s;
}

FrameOutcome step_frame(const Topology& t, int channel, Rng& rng, long long frame_index) {
  return ChannelSim(t, channel).step(rng, frame_index);
}

ExactJointDistribution exact_joint(const TransmitSupport& support, const std::vector<int>& subset) {
  const int n = static_cast<int>(subset.size());
  if (n > 20) throw std::invalid_argument("exact_joint: subset exceeds enumeration bound");
  if (!std::is_sorted(subset.begin(), subset.end()))
    throw std::invalid_argument("exact_joint: subset must be ascending");
  ExactJointDistribution d;
  d.channel = support.channel;
  d.clients = subset;
  d.probabilities.assign(std::size_t{1} << n, 0.0);
  for (int e = 0; e < support.size(); ++e) {
    std::uint32_t pattern = 0;
    for (int m = 0; m < n; ++m) {
      if (!support.is_blocked(e, subset[m])) pattern |= 1u << m;
    }
    d.probabilities[pattern] += support.prob[e];
  }
  return d;
}

ExactJointDistribution exact_joint(const Topology& t, int channel, const std::vector<int>& subset) {
  ChannelSim sim(t, channel);
  return exact_joint(sim.exact_support(20), subset);
}

std::vector<long long> schedule_and_observe(const Topology& t, int channel,
                                            const std::vector<int>& scheduled, long long frames,
                                            Rng& rng, MeasurementLedger* ledger) {
  if (scheduled.empty()) throw std::invalid_argument("schedule_and_observe: empty client set");
  if (!std::is_sorted(scheduled.begin(), scheduled.end()))
    throw std::invalid_argument("schedule_and_observe: clients must be ascending");
  const int n = static_cast<int>(scheduled.size());
  if (n > 20) throw std::invalid_argument("schedule_and_observe: more than 20 clients");

  ChannelSim sim(t, channel);
  std::vector<long long> counts(std::size_t{1} << n, 0);
  std::vector<std::uint64_t> blocked;
  for (long long f = 0; f < frames; ++f) {
    sim.step_blocked(rng, blocked);
    std::uint32_t pattern = 0;
    for (int m = 0; m < n; ++m) {
      if (!test_bit(blocked, scheduled[m])) pattern |= 1u << m;
    }
    ++counts[pattern];
  }
  if (ledger) {
    std::map<std::uint32_t, long long> access;
    for (std::uint32_t k = 0; k < counts.size(); ++k) {
      if (counts[k] > 0) access[k] = counts[k];
    }
    ledger->record_session(channel, scheduled, frames, access);
  }
  return counts;
}

MonteCarloSampler::MonteCarloSampler(const Topology& t, std::uint64_t seed)
    : topo_(&t), rng_(seed) {
  sims_.resize(t.num_channels);
}

std::vector<double> MonteCarloSampler::measure(int channel, const std::vector<int>& clients,
                                               long long frames) {
  if (frames < 1) throw std::invalid_argument("measure: frames >= 1 required");
  if (!sims_[channel]) sims_[channel] = std::make_unique<ChannelSim>(*topo_, channel);
  const int n = static_cast<int>(clients.size());
  std::vector<long long> counts(std::size_t{1} << n, 0);
  std::vector<std::uint64_t> blocked;
  for (long long f = 0; f < frames; ++f) {
    sims_[channel]->step_blocked(rng_, blocked);
    std::uint32_t pattern = 0;
    for (int m = 0; m < n; ++m) {
      if (!test_bit(blocked, clients[m])) pattern |= 1u << m;
    }
    ++counts[pattern];
  }
  std::map<std::uint32_t, long long> access;
  std::vector<double> table(counts.size());
  for (std::uint32_t k = 0; k < counts.size(); ++k) {
    table[k] = static_cast<double>(counts[k]) / static_cast<double>(frames);
    if (counts[k] > 0) access[k] = counts[k];
  }
  ledger_.record_session(channel, clients, frames, access);
  return table;
}

ExactSampler::ExactSampler(const Topology& t) : topo_(&t) {
  supports_.resize(t.num_channels);
}

const TransmitSupport& ExactSampler::support(int channel) {
  if (!supports_[channel]) {
    ChannelSim sim(*topo_, channel);
    supports_[channel] = std::make_unique<TransmitSupport>(sim.exact_support());
  }
  return *supports_[channel];
}

std::vector<double> ExactSampler::measure(int channel, const std::vector<int>& clients,
                                          long long frames) {
  if (frames < 1) throw std::invalid_argument("measure: frames >= 1 required");
  const ExactJointDistribution d = exact_joint(support(channel), clients);
  std::map<std::uint32_t, long long> access;
  for (std::uint32_t k = 0; k < d.probabilities.size(); ++k) {
    const long long c = static_cast<long long>(std::floor(d.probabilities[k] * frames));
    if (c > 0) access[k] = c;
  }
  ledger_.record_session(channel, clients, frames, access);
  return d.probabilities;
}

}  // namespace airtomo
