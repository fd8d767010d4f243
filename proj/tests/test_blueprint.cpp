#include <doctest.h>

#include <algorithm>
#include <set>

#include "airtomo/blueprint.hpp"

using namespace airtomo;

namespace {

HiddenTerminal ht_at(int id, double x, double y, double q, double radius) {
  HiddenTerminal h;
  h.id = id;
  h.position = {x, y};
  h.impact_radius = radius;
  h.transmit_prob = {q};
  h.active_channels = {0};
  return h;
}

// Ten clients, four HTs: one covering {0}, one {0,9}, one {3,4,5}, one
// {5,6,7}; clients 1, 2, 8 are clean. HTs too far apart to sense each other.
Topology worked_example() {
  Topology t;
  t.bs_position = {0.0, -300.0};
  t.bs_range = 400.0;
  t.num_channels = 1;
  t.ht_sense_radius = 1.0;
  t.min_ht_bs_distance = 70.0;
  const double xs[10] = {0, 100, 105, 40, 45, 60, 75, 80, 110, -40};
  for (int i = 0; i < 10; ++i) t.clients.push_back({i, {xs[i], 0.0}});
  t.hts.push_back(ht_at(0, 0.0, 20.0, 0.30, 21.0));    // {0}
  t.hts.push_back(ht_at(1, -20.0, 10.0, 0.25, 25.0));  // {0, 9}
  t.hts.push_back(ht_at(2, 50.0, 10.0, 0.35, 16.0));   // {3, 4, 5}
  t.hts.push_back(ht_at(3, 70.0, 10.0, 0.40, 16.0));   // {5, 6, 7}
  t.validate();
  return t;
}

LatentModel fit_exact(const Topology& t, int F = 0, std::uint64_t seed = 17) {
  PairwiseEstimates pairs;
  pairs.channel = 0;
  for (int i = 0; i < t.num_clients(); ++i) {
    for (int j = i + 1; j < t.num_clients(); ++j) {
      const auto d = exact_joint(t, 0, {i, j});
      pairs.set(i, j, {d.probabilities[0], d.probabilities[1], d.probabilities[2],
                       d.probabilities[3]});
    }
  }
  FitOptions options;
  options.F = F;
  options.seed = seed;
  return fit_latent_model(pairs, t.num_clients(), options);
}

std::set<std::vector<int>> impacted_sets(const BlueprintResult& r) {
  std::set<std::vector<int>> out;
  for (const auto& g : impacted_clients(r.blueprint, r.clusters)) out.insert(g);
  return out;
}

}  // namespace

TEST_CASE("joint access vectors sum to the first-order marginal") {
  Topology t = worked_example();
  const LatentModel m = fit_exact(t);
  for (int i = 0; i < t.num_clients(); ++i) {
    const JointAccessVector v = joint_access_vector(m, i);
    double sum = 0.0;
    for (double x : v.p) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
      sum += x;
    }
    CHECK(sum == doctest::Approx(m.access_prob(i)).epsilon(1e-9));
  }
}

TEST_CASE("unaffected clients collapse into one cluster") {
  LatentModel m;
  m.F = 3;
  m.num_clients = 4;
  m.channel = 0;
  m.lambda = {0.5, 0.3, 0.2};
  m.p.assign(12, 1.0);  // everyone always accesses
  BlueprintOptions options;
  const HtClusters c = ht_cluster(m, options);
  CHECK(c.size() == 1);
  CHECK(c.members[0] == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("worked example: DBSCAN recovers the interference clusters") {
  Topology t = worked_example();
  const LatentModel m = fit_exact(t, 20);
  BlueprintOptions options;
  options.seed = 9;
  const HtClusters c = ht_cluster(m, options);

  std::set<std::vector<int>> groups(c.members.begin(), c.members.end());
  const std::set<std::vector<int>> expected{{0}, {1, 2, 8}, {3, 4}, {5}, {6, 7}, {9}};
  CHECK(groups == expected);
}

TEST_CASE("worked example: dependency graph has exactly the three paper edges") {
  Topology t = worked_example();
  const LatentModel m = fit_exact(t, 20);
  BlueprintOptions options;
  options.seed = 9;
  const HtClusters c = ht_cluster(m, options);
  const DependencyGraph g = build_dependency_graph(m, c.representatives, options.eps_dep);

  // Map each edge to the pair of clusters it connects.
  std::set<std::pair<int, int>> cluster_edges;
  for (const auto& [u, v] : g.edges) {
    int cu = c.assignment[u], cv = c.assignment[v];
    cluster_edges.insert({std::min(cu, cv), std::max(cu, cv)});
  }
  CHECK(g.edges.size() == 3);

  const auto cluster_of = [&](int client) { return c.assignment[client]; };
  const std::set<std::pair<int, int>> expected{
      {std::min(cluster_of(3), cluster_of(5)), std::max(cluster_of(3), cluster_of(5))},
      {std::min(cluster_of(5), cluster_of(7)), std::max(cluster_of(5), cluster_of(7))},
      {std::min(cluster_of(0), cluster_of(9)), std::max(cluster_of(0), cluster_of(9))}};
  CHECK(cluster_edges == expected);
}

TEST_CASE("worked example: clique iteration finds the paper's four HTs") {
  Topology t = worked_example();
  const LatentModel m = fit_exact(t, 20);
  BlueprintOptions options;
  options.seed = 9;
  const BlueprintResult r = run_blueprint(m, options);

  REQUIRE(r.blueprint.hts.size() == 4);
  const std::set<std::vector<int>> expected{{0}, {0, 9}, {3, 4, 5}, {5, 6, 7}};
  CHECK(impacted_sets(r) == expected);
}

TEST_CASE("no interference means zero inferred HTs") {
  LatentModel m;
  m.F = 2;
  m.num_clients = 5;
  m.channel = 0;
  m.lambda = {0.6, 0.4};
  m.p.assign(10, 1.0);
  BlueprintOptions options;
  const BlueprintResult r = run_blueprint(m, options);
  CHECK(r.blueprint.hts.empty());
  CHECK(r.graph.edges.empty());
}

TEST_CASE("single shared HT is inferred as one pair group, not two singletons") {
  // Two representatives blocked by the same HT.
  Topology t;
  t.bs_position = {0.0, -300.0};
  t.bs_range = 400.0;
  t.num_channels = 1;
  t.ht_sense_radius = 1.0;
  t.min_ht_bs_distance = 70.0;
  t.clients.push_back({0, {0.0, 0.0}});
  t.clients.push_back({1, {30.0, 0.0}});
  t.clients.push_back({2, {200.0, 0.0}});  // clean bystander
  t.hts.push_back(ht_at(0, 15.0, 10.0, 0.5, 20.0));  // covers 0 and 1
  t.validate();
  const LatentModel m = fit_exact(t);
  BlueprintOptions options;
  options.seed = 4;
  const BlueprintResult r = run_blueprint(m, options);
  REQUIRE(r.blueprint.hts.size() == 1);
  const std::set<std::vector<int>> expected{{0, 1}};
  CHECK(impacted_sets(r) == expected);
}

TEST_CASE("disjoint independent HTs produce an edgeless graph and singleton groups") {
  Topology t;
  t.bs_position = {0.0, -300.0};
  t.bs_range = 400.0;
  t.num_channels = 1;
  t.ht_sense_radius = 1.0;
  t.min_ht_bs_distance = 70.0;
  t.clients.push_back({0, {0.0, 0.0}});
  t.clients.push_back({1, {100.0, 0.0}});
  t.hts.push_back(ht_at(0, 0.0, 15.0, 0.4, 20.0));    // covers 0
  t.hts.push_back(ht_at(1, 100.0, 15.0, 0.6, 20.0));  // covers 1
  t.validate();
  const LatentModel m = fit_exact(t);
  BlueprintOptions options;
  options.seed = 4;
  const BlueprintResult r = run_blueprint(m, options);
  CHECK(r.graph.edges.empty());
  REQUIRE(r.blueprint.hts.size() == 2);
  const std::set<std::vector<int>> expected{{0}, {1}};
  CHECK(impacted_sets(r) == expected);
}

TEST_CASE("count_hit compares against impacting HTs only") {
  Topology t = worked_example();
  // Add an HT covering nobody.
  t.hts.push_back(ht_at(4, 200.0, 150.0, 0.9, 5.0));
  t.validate();
  CHECK(t.impacting_ht_count(0) == 4);

  InterferenceBlueprint bp;
  bp.channel = 0;
  bp.hts.resize(4);
  CHECK(count_hit(bp, t, 0));
  bp.hts.resize(5);
  CHECK(!count_hit(bp, t, 0));
}

TEST_CASE("inferred groups are cliques and unique") {
  Topology t = worked_example();
  const LatentModel m = fit_exact(t, 20);
  BlueprintOptions options;
  options.seed = 9;
  const BlueprintResult r = run_blueprint(m, options);
  std::set<std::vector<int>> seen;
  for (const auto& ht : r.blueprint.hts) {
    CHECK(seen.insert(ht.members).second);  // unique
    for (std::size_t a = 0; a < ht.members.size(); ++a) {
      for (std::size_t b = a + 1; b < ht.members.size(); ++b) {
        CHECK(r.graph.adjacent(ht.members[a], ht.members[b]));
      }
    }
  }
}

TEST_CASE("blueprint json round trip") {
  InterferenceBlueprint bp;
  bp.channel = 2;
  bp.hts.push_back({{1, 4}, 0.25});
  bp.hts.push_back({{7}, 0.1});
  bp.skipped_cliques.push_back({2, 3});
  const InterferenceBlueprint back = InterferenceBlueprint::from_json(bp.to_json());
  CHECK(back.channel == 2);
  REQUIRE(back.hts.size() == 2);
  CHECK(back.hts[0].members == std::vector<int>{1, 4});
  CHECK(back.skipped_cliques == bp.skipped_cliques);
}
