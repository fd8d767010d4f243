#include <doctest.h>

#include <cmath>

#include "airtomo/tomography.hpp"

using namespace airtomo;

namespace {

Topology line_topology(int n_clients, int n_channels = 1) {
  Topology t;
  t.bs_position = {0, 0};
  t.bs_range = 200.0;
  t.num_channels = n_channels;
  t.min_ht_bs_distance = 0.0;
  for (int i = 0; i < n_clients; ++i) {
    t.clients.push_back({i, {static_cast<double>(15 * i), 0.0}});
  }
  return t;
}

HiddenTerminal ht_at(int id, double x, double y, double q, double radius, int channels) {
  HiddenTerminal h;
  h.id = id;
  h.position = {x, y};
  h.impact_radius = radius;
  h.transmit_prob.assign(channels, q);
  for (int c = 0; c < channels; ++c) h.active_channels.push_back(c);
  return h;
}

}  // namespace

TEST_CASE("first-order marginals: clean client exact, covered client within CI") {
  Topology t = line_topology(2);
  // HT over client 0 only.
  t.hts.push_back(ht_at(0, 0.0, 10.0, 0.3, 11.0, 1));
  MonteCarloSampler sampler(t, 77);
  const long long frames = 20000;
  const auto vectors = measure_first_order(t, sampler, frames);
  CHECK(vectors[1].a[0] == doctest::Approx(1.0));
  const double sigma = std::sqrt(0.7 * 0.3 / frames);
  CHECK(std::abs(vectors[0].a[0] - 0.7) <= 3.0 * sigma);
}

TEST_CASE("first-order phase charges exactly C*N sampling units") {
  const int C = 3, N = 10;
  Topology t = line_topology(N, C);
  MonteCarloSampler sampler(t, 1);
  measure_first_order(t, sampler, 10);
  CHECK(sampler.ledger().session_count() == C * N);
}

TEST_CASE("identical access vectors are co-clustered") {
  std::vector<AccessVector> vectors;
  vectors.push_back({0, {0.5, 1.0}});
  vectors.push_back({1, {0.5, 1.0}});
  vectors.push_back({2, {1.0, 0.2}});
  vectors.push_back({3, {1.0, 0.2}});
  const Clustering c = cluster_clients(vectors, 2, 5);
  CHECK(c.assignment[0] == c.assignment[1]);
  CHECK(c.assignment[2] == c.assignment[3]);
  CHECK(c.assignment[0] != c.assignment[2]);
}

TEST_CASE("K = N gives singleton clusters with every client its own representative") {
  std::vector<AccessVector> vectors;
  for (int i = 0; i < 5; ++i) {
    vectors.push_back({i, {0.1 * i, 1.0 - 0.1 * i}});
  }
  const Clustering c = cluster_clients(vectors, 5, 9);
  std::vector<int> reps = c.representatives;
  std::sort(reps.begin(), reps.end());
  CHECK(reps == std::vector<int>{0, 1, 2, 3, 4});
  for (int k = 0; k < c.K; ++k) {
    CHECK(c.assignment[c.representatives[k]] == k);
  }
}

TEST_CASE("clustering is deterministic for a fixed seed and rejects K > N") {
  std::vector<AccessVector> vectors;
  for (int i = 0; i < 6; ++i) vectors.push_back({i, {0.2 * i}});
  const Clustering a = cluster_clients(vectors, 3, 42);
  const Clustering b = cluster_clients(vectors, 3, 42);
  CHECK(a.assignment == b.assignment);
  CHECK(a.representatives == b.representatives);
  CHECK_THROWS(cluster_clients(vectors, 7, 42));
}

TEST_CASE("default cluster count is max(2, N/C)") {
  CHECK(default_cluster_count(20, 1) == 20);
  CHECK(default_cluster_count(30, 3) == 10);
  CHECK(default_cluster_count(4, 3) == 2);
}

TEST_CASE("pairwise measurement: independence, shared blocking, ledger units") {
  const int C = 3;
  Topology t = line_topology(5, C);
  // One HT covering clients 0 and 1 on all channels (they sit 15 m apart).
  t.hts.push_back(ht_at(0, 7.5, 10.0, 0.4, 15.0, C));
  MonteCarloSampler sampler(t, 3);
  const auto vectors = measure_first_order(t, sampler, 4000);
  const Clustering c = cluster_clients(vectors, 5, 8);  // singletons
  const auto before = sampler.ledger().session_count();
  const auto pairwise = measure_pairwise(t, c, sampler, 4000);
  CHECK(sampler.ledger().session_count() - before == C * 5 * 4 / 2);

  // Clients 0 and 1 share the single HT: opposite outcomes are impossible.
  const auto t01 = pairwise[0].at(0, 1);
  CHECK(t01[1] == doctest::Approx(0.0).epsilon(0.01));
  CHECK(t01[2] == doctest::Approx(0.0).epsilon(0.01));
  CHECK(t01[3] == doctest::Approx(0.6).epsilon(0.1));

  // Clients 3 and 4 are not covered at all: both always access.
  const auto t34 = pairwise[0].at(3, 4);
  CHECK(t34[3] == doctest::Approx(1.0));

  // Client 0 is covered, client 4 clean: product structure.
  const auto t04 = pairwise[0].at(0, 4);
  CHECK(t04[3] == doctest::Approx(0.6).epsilon(0.1));
  CHECK(t04[0] == doctest::Approx(0.0));
}

TEST_CASE("exact sampling mode reproduces oracle tables exactly") {
  const int C = 1;
  Topology t = line_topology(4, C);
  t.hts.push_back(ht_at(0, 0.0, 10.0, 0.25, 12.0, C));
  ExactSampler sampler(t);
  const auto vectors = measure_first_order(t, sampler, 1000);
  const Clustering c = cluster_clients(vectors, 4, 8);
  const auto pairwise = measure_pairwise(t, c, sampler, 1000);
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      const auto measured = pairwise[0].at(i, j);
      const auto truth = exact_joint(t, 0, {i, j});
      for (int k = 0; k < 4; ++k) {
        CHECK(measured[k] == doctest::Approx(truth.probabilities[k]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("expand_to_clients completes same-cluster and cross-cluster pairs") {
  std::vector<AccessVector> vectors;
  vectors.push_back({0, {0.7}});
  vectors.push_back({1, {0.7}});
  vectors.push_back({2, {1.0}});
  Clustering c;
  c.K = 2;
  c.assignment = {0, 0, 1};
  c.representatives = {0, 2};

  PairwiseEstimates reps;
  reps.channel = 0;
  reps.set(0, 2, {0.0, 0.3, 0.0, 0.7});

  const PairwiseEstimates full = expand_to_clients(reps, c, vectors);
  // Same cluster, averaged marginal 0.7: perfectly correlated completion.
  const auto t01 = full.at(0, 1);
  CHECK(t01[0] == doctest::Approx(0.3));
  CHECK(t01[3] == doctest::Approx(0.7));
  CHECK(t01[1] == doctest::Approx(0.0));
  CHECK(t01[2] == doctest::Approx(0.0));
  // Member pair inherits the representative table verbatim.
  const auto t12 = full.at(1, 2);
  const auto t02 = full.at(0, 2);
  for (int k = 0; k < 4; ++k) CHECK(t12[k] == doctest::Approx(t02[k]));
  // Every 2x2 table sums to one.
  for (const auto& [key, table] : full.tables) {
    (void)key;
    CHECK(table[0] + table[1] + table[2] + table[3] == doctest::Approx(1.0));
  }
}

TEST_CASE("pair table orientation flips consistently") {
  PairwiseEstimates p;
  p.channel = 0;
  p.set(3, 1, {0.1, 0.2, 0.3, 0.4});  // stored under (1,3) transposed
  const auto t13 = p.at(1, 3);
  const auto t31 = p.at(3, 1);
  CHECK(t31[1] == doctest::Approx(t13[2]));
  CHECK(t31[2] == doctest::Approx(t13[1]));
  CHECK(t31[0] == doctest::Approx(t13[0]));
  CHECK(t31[3] == doctest::Approx(t13[3]));
  CHECK(p.marginal(3) == doctest::Approx(0.2 + 0.4));
}
