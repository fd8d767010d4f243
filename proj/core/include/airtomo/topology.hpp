#ifndef AIRTOMO_TOPOLOGY_HPP
#define AIRTOMO_TOPOLOGY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "airtomo/geometry.hpp"

namespace airtomo {

struct Client {
  int id = 0;
  Point position;
};

// An interferer that blocks clients inside its impact disk but sits far
// enough from the BS that the BS never senses it.
struct HiddenTerminal {
  int id = 0;
  Point position;
  std::vector<double> transmit_prob;  // per channel, length C
  double impact_radius = 50.0;
  std::vector<int> active_channels;  // sorted subset of [0, C)

  bool active_on(int channel) const;
};

struct TopologyParams {
  int num_clients = 20;
  int num_channels = 1;
  int num_hts = 4;
  double bs_range = 70.0;
  double ht_impact_radius = 50.0;
  double ht_sense_radius = 50.0;
  double min_ht_bs_distance = 70.0;
  // Outer edge of the HT placement annulus; 0 means bs_range + impact_radius.
  double max_ht_bs_distance = 0.0;
  double transmit_prob_lo = 0.2;
  double transmit_prob_hi = 0.8;
  // One transmit probability per HT shared across its channels; when false
  // each active channel gets an independent draw.
  bool shared_transmit_prob = true;
  int max_placement_attempts = 100000;
  std::uint64_t seed = 1;
};

class Topology {
 public:
  Point bs_position;
  double bs_range = 70.0;
  std::vector<Client> clients;
  std::vector<HiddenTerminal> hts;
  int num_channels = 1;
  double ht_sense_radius = 50.0;
  double min_ht_bs_distance = 70.0;
  std::uint64_t seed = 0;

  int num_clients() const { return static_cast<int>(clients.size()); }
  int num_hts() const { return static_cast<int>(hts.size()); }

  // HT h covers client i on channel c iff h is active on c and the client
  // sits strictly inside the impact disk.
  bool covers(int ht, int client, int channel) const;

  // HTs h1, h2 sense each other on channel c iff both active on c and
  // strictly within ht_sense_radius of each other.
  bool hts_sense(int ht1, int ht2, int channel) const;

  // Ids of HTs active on the channel, ascending.
  std::vector<int> active_hts(int channel) const;

  // True count of interference sources visible on a channel: active HTs
  // covering at least one client.
  int impacting_ht_count(int channel) const;

  void validate() const;  // throws std::invalid_argument on broken invariants

  std::string to_json() const;  // versioned document, schema field = 1
  static Topology from_json(const std::string& text);
  void save(const std::string& path) const;
  static Topology load(const std::string& path);
};

// Deterministic function of params (including seed). Throws
// std::invalid_argument for unsatisfiable parameters and std::runtime_error
// when rejection sampling exhausts max_placement_attempts.
Topology generate_topology(const TopologyParams& params);

// client id -> ids of HTs covering it on the channel.
std::vector<std::vector<int>> coverage_map(const Topology& t, int channel);

}  // namespace airtomo

#endif  // AIRTOMO_TOPOLOGY_HPP
