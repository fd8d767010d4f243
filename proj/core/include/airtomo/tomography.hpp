#ifndef AIRTOMO_TOMOGRAPHY_HPP
#define AIRTOMO_TOMOGRAPHY_HPP

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "airtomo/simulator.hpp"
#include "airtomo/topology.hpp"

namespace airtomo {

// Per-client channel access vector: a[c] = estimated P(client accesses c).
struct AccessVector {
  int client = 0;
  std::vector<double> a;
};

struct Clustering {
  int K = 0;
  std::vector<int> assignment;       // client -> cluster
  std::vector<int> representatives;  // cluster -> client id

  std::vector<std::vector<int>> members() const;
  std::string to_json() const;
  static Clustering from_json(const std::string& text);
};

// 2x2 access tables for client pairs on one channel. Table layout for the
// ordered pair (i, j), i < j: entry index a + 2*b is P(Z_i = a, Z_j = b).
struct PairwiseEstimates {
  int channel = 0;
  std::map<std::pair<int, int>, std::array<double, 4>> tables;  // key i < j

  bool has(int i, int j) const;
  // Table oriented as (first argument, second argument).
  std::array<double, 4> at(int i, int j) const;
  void set(int i, int j, const std::array<double, 4>& table);
  // Access marginal of client i averaged over every table containing it.
  double marginal(int i) const;
  std::vector<int> client_ids() const;
  std::string to_csv() const;  // channel,i,j,p00,p10,p01,p11
};

// Schedules every client alone on every channel (C*N sampling units) and
// returns the empirical access vectors.
std::vector<AccessVector> measure_first_order(const Topology& t, JointSampler& sampler,
                                              long long frames_per_sample);

// K-means over the C-dimensional access vectors, squared-L2 metric, seeded
// farthest-point init, at most 100 iterations, centroid-movement tolerance
// 1e-6. Representatives drawn uniformly (seeded) within each cluster.
Clustering cluster_clients(const std::vector<AccessVector>& vectors, int K, std::uint64_t seed);

int default_cluster_count(int num_clients, int num_channels);  // max(2, N/C)

// Jointly schedules every unordered representative pair on every channel:
// C*K*(K-1)/2 sampling units.
std::vector<PairwiseEstimates> measure_pairwise(const Topology& t, const Clustering& clustering,
                                                JointSampler& sampler, long long frames_per_sample);

// Lifts representative-pair tables to all client pairs: cross-cluster pairs
// inherit their representatives' table; same-cluster pairs get the
// perfectly-correlated table implied by the pair's averaged first-order
// marginal.
PairwiseEstimates expand_to_clients(const PairwiseEstimates& rep_pairs, const Clustering& clustering,
                                    const std::vector<AccessVector>& vectors);

std::string access_vectors_to_csv(const std::vector<AccessVector>& vectors);

}  // namespace airtomo

#endif  // AIRTOMO_TOMOGRAPHY_HPP
