#ifndef AIRTOMO_BLUEPRINT_HPP
#define AIRTOMO_BLUEPRINT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "airtomo/latent_model.hpp"
#include "airtomo/topology.hpp"

namespace airtomo {

// Joint access vector of a client: p[f] = lambda[f] * P(Z_i = 1 | H = f).
// Clients blocked by the same interferers have strongly correlated vectors.
struct JointAccessVector {
  int client = 0;
  std::vector<double> p;
};

JointAccessVector joint_access_vector(const LatentModel& m, int client);

struct HtClusters {
  std::vector<int> assignment;            // client -> cluster
  std::vector<std::vector<int>> members;  // cluster -> clients
  std::vector<int> representatives;       // cluster -> client id
  int size() const { return static_cast<int>(members.size()); }
};

struct DependencyGraph {
  std::vector<int> vertices;                 // representative client ids, ascending
  std::vector<std::pair<int, int>> edges;    // (u, v), u < v, client ids
  bool adjacent(int u, int v) const;
};

struct InferredHt {
  std::vector<int> members;  // representative client ids, ascending
  double cond_blocked_prob = 0.0;
};

struct InterferenceBlueprint {
  int channel = 0;
  std::vector<InferredHt> hts;
  // Cliques whose conditioning event had probability below eps_cond.
  std::vector<std::vector<int>> skipped_cliques;

  std::string to_json() const;
  static InterferenceBlueprint from_json(const std::string& text);
};

struct BlueprintOptions {
  double eps_dep = 0.02;        // independence tolerance for graph edges
  double eps_ht = 0.02;         // nonzero threshold on P(blocked | rest access)
  double delta_margin = 0.1;    // multiplicative margin of the new-HT test
  double eps_cond = 1e-4;       // minimum probability of the conditioning event
  int max_clique_size = 4;
  double dbscan_eps_factor = 0.1;  // eps = factor * median pairwise distance
  int dbscan_min_pts = 2;
  std::uint64_t seed = 1;
};

// DBSCAN over the joint access vectors (Euclidean); noise points become
// singleton clusters; one seeded-random representative per cluster.
HtClusters ht_cluster(const LatentModel& m, const BlueprintOptions& options);

// Edge iff |P(i and j access) - P(i)P(j)| exceeds eps_dep, probabilities from
// the fitted model.
DependencyGraph build_dependency_graph(const LatentModel& m, const std::vector<int>& reps,
                                       double eps_dep);

// Clique iteration in non-decreasing size: a clique becomes a new HT group
// when its conditional blocked probability is positive (above eps_ht) and
// exceeds, with margin, every product over partitions into existing groups.
InterferenceBlueprint estimate_hts(const DependencyGraph& graph, const LatentModel& m,
                                   const BlueprintOptions& options);

struct BlueprintResult {
  HtClusters clusters;
  DependencyGraph graph;
  InterferenceBlueprint blueprint;
};

BlueprintResult run_blueprint(const LatentModel& m, const BlueprintOptions& options);

// Clients impacted by each inferred HT: the union of the member
// representatives' clusters.
std::vector<std::vector<int>> impacted_clients(const InterferenceBlueprint& bp,
                                               const HtClusters& clusters);

// Classification hit: inferred HT count equals the number of true HTs active
// on the channel that cover at least one client.
bool count_hit(const InterferenceBlueprint& bp, const Topology& t, int channel);

std::string dependency_edges_to_csv(const DependencyGraph& g);

}  // namespace airtomo

#endif  // AIRTOMO_BLUEPRINT_HPP
