#include <doctest.h>

#include <cmath>

#include "airtomo/latent_model.hpp"
#include "airtomo/rng.hpp"

using namespace airtomo;

namespace {

LatentModel make_model(int F, int n, std::vector<double> lambda, std::vector<double> p) {
  LatentModel m;
  m.F = F;
  m.num_clients = n;
  m.channel = 0;
  m.lambda = std::move(lambda);
  m.p = std::move(p);
  return m;
}

LatentModel random_model(int F, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> lambda(F);
  double z = 0.0;
  for (double& l : lambda) {
    l = rng.range(0.05, 1.0);
    z += l;
  }
  for (double& l : lambda) l /= z;
  std::vector<double> p(static_cast<std::size_t>(n) * F);
  for (double& v : p) v = rng.unit();
  return make_model(F, n, std::move(lambda), std::move(p));
}

// Direct evaluation of the naive Bayes joint for a pattern over `group`.
double brute_force_joint(const LatentModel& m, const std::vector<int>& group,
                         std::uint32_t pattern) {
  double total = 0.0;
  for (int f = 0; f < m.F; ++f) {
    double term = m.lambda[f];
    for (std::size_t k = 0; k < group.size(); ++k) {
      const double p = m.p_at(group[k], f);
      term *= (pattern >> k) & 1u ? p : 1.0 - p;
    }
    total += term;
  }
  return total;
}

}  // namespace

TEST_CASE("model_pair: single latent state is the independent product") {
  const LatentModel m = make_model(1, 2, {1.0}, {0.5, 0.5});
  const auto t = model_pair(m, 0, 1);
  CHECK(t[3] == doctest::Approx(0.25));
  CHECK(t[0] == doctest::Approx(0.25));
  CHECK(t[1] == doctest::Approx(0.25));
  CHECK(t[2] == doctest::Approx(0.25));
}

TEST_CASE("model_pair: two opposite states give perfect correlation") {
  // p rows: client 0 -> (1, 0), client 1 -> (1, 0)
  const LatentModel m = make_model(2, 2, {0.5, 0.5}, {1.0, 0.0, 1.0, 0.0});
  const auto t = model_pair(m, 0, 1);
  CHECK(t[3] == doctest::Approx(0.5));
  CHECK(t[0] == doctest::Approx(0.5));
  CHECK(t[1] == doctest::Approx(0.0));
  CHECK(t[2] == doctest::Approx(0.0));
}

TEST_CASE("model_pair matches direct enumeration for arbitrary parameters") {
  const LatentModel m = random_model(5, 4, 404);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (i == j) continue;
      const auto t = model_pair(m, i, j);
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const double expected = brute_force_joint(m, {i, j}, static_cast<std::uint32_t>(a | (b << 1)));
          CHECK(t[a + 2 * b] == doctest::Approx(expected).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("query: empty group is the empty product") {
  const LatentModel m = random_model(3, 2, 7);
  CHECK(query(m, {{}, {}}) == doctest::Approx(1.0));
}

TEST_CASE("query normalizes over all access patterns") {
  const LatentModel m = random_model(6, 5, 11);
  const std::vector<int> group{0, 1, 2, 3, 4};
  double sum = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << group.size()); ++mask) {
    sum += query_mask(m, group, mask);
  }
  CHECK(std::abs(sum - 1.0) <= 1e-9);
}

TEST_CASE("query: degree-1 and marginalization consistency") {
  const LatentModel m = random_model(4, 3, 19);
  double expected = 0.0;
  for (int f = 0; f < m.F; ++f) expected += m.lambda[f] * m.p_at(1, f);
  CHECK(query(m, {{1}, {1}}) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(m.access_prob(1) == doctest::Approx(expected).epsilon(1e-12));

  // Summing the two completions of client 2 equals the reduced query.
  const double reduced = query_mask(m, {0, 1}, 0b01);
  const double with0 = query_mask(m, {0, 1, 2}, 0b001);
  const double with1 = query_mask(m, {0, 1, 2}, 0b101);
  CHECK(with0 + with1 == doctest::Approx(reduced).epsilon(1e-12));
}

TEST_CASE("query is invariant under latent state relabeling") {
  const LatentModel m = random_model(4, 3, 23);
  LatentModel permuted = m;
  const std::vector<int> perm{2, 0, 3, 1};
  for (int f = 0; f < 4; ++f) {
    permuted.lambda[f] = m.lambda[perm[f]];
    for (int i = 0; i < 3; ++i) {
      permuted.p[static_cast<std::size_t>(i) * 4 + f] = m.p_at(i, perm[f]);
    }
  }
  const std::vector<int> group{0, 1, 2};
  for (std::uint32_t mask = 0; mask < 8; ++mask) {
    CHECK(query_mask(m, group, mask) ==
          doctest::Approx(query_mask(permuted, group, mask)).epsilon(1e-12));
  }
}

TEST_CASE("fit recovers independent tables at F=1 with tiny KL") {
  const int n = 5;
  const std::vector<double> marg{0.9, 0.7, 1.0, 0.55, 0.8};
  PairwiseEstimates pairs;
  pairs.channel = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      pairs.set(i, j, {(1 - marg[i]) * (1 - marg[j]), marg[i] * (1 - marg[j]),
                       (1 - marg[i]) * marg[j], marg[i] * marg[j]});
    }
  }
  FitOptions options;
  options.F = 1;
  options.seed = 5;
  FitReport report;
  const LatentModel m = fit_latent_model(pairs, n, options, &report);
  CHECK(report.final_loss < 1e-6);
  for (int i = 0; i < n; ++i) {
    CHECK(m.access_prob(i) == doctest::Approx(marg[i]).epsilon(1e-2));
  }
}

TEST_CASE("fit defaults to F = N and records a non-increasing loss trace") {
  const int n = 4;
  PairwiseEstimates pairs;
  pairs.channel = 0;
  // Perfectly correlated pair plus independent bystanders.
  pairs.set(0, 1, {0.4, 0.0, 0.0, 0.6});
  pairs.set(0, 2, {0.0, 0.0, 0.4, 0.6});
  pairs.set(0, 3, {0.0, 0.0, 0.4, 0.6});
  pairs.set(1, 2, {0.0, 0.0, 0.4, 0.6});
  pairs.set(1, 3, {0.0, 0.0, 0.4, 0.6});
  pairs.set(2, 3, {0.0, 0.0, 0.0, 1.0});
  FitOptions options;
  options.seed = 5;
  FitReport report;
  const LatentModel m = fit_latent_model(pairs, n, options, &report);
  CHECK(m.F == n);
  for (std::size_t k = 1; k < report.loss_trace.size(); ++k) {
    CHECK(report.loss_trace[k] <= report.loss_trace[k - 1] + 1e-12);
  }
}

TEST_CASE("fit on exact pairwise tables approximates the oracle HOD") {
  // Small instance: 4 clients, 2 independent HTs covering {0,1} and {2}.
  Topology t;
  t.bs_position = {0, 0};
  t.bs_range = 200.0;
  t.num_channels = 1;
  t.min_ht_bs_distance = 0.0;
  for (int i = 0; i < 4; ++i) t.clients.push_back({i, {15.0 * i, 0.0}});
  HiddenTerminal h0;
  h0.id = 0;
  h0.position = {7.5, 10.0};
  h0.impact_radius = 15.0;
  h0.transmit_prob = {0.45};
  h0.active_channels = {0};
  t.hts.push_back(h0);
  HiddenTerminal h1;
  h1.id = 1;
  h1.position = {30.0, -10.0};
  h1.impact_radius = 11.0;
  h1.transmit_prob = {0.3};
  h1.active_channels = {0};
  t.hts.push_back(h1);

  PairwiseEstimates pairs;
  pairs.channel = 0;
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      const auto d = exact_joint(t, 0, {i, j});
      pairs.set(i, j, {d.probabilities[0], d.probabilities[1], d.probabilities[2],
                       d.probabilities[3]});
    }
  }
  FitOptions options;
  options.seed = 29;
  const LatentModel m = fit_latent_model(pairs, 4, options);

  const ExactJointDistribution truth = exact_joint(t, 0, {0, 1, 2, 3});
  double max_err = 0.0;
  for (std::uint32_t k = 0; k < 16; ++k) {
    max_err = std::max(max_err, std::abs(query_mask(m, truth.clients, k) - truth.probabilities[k]));
  }
  CHECK(max_err <= 0.05);
  CHECK(hod_mse(m, truth) < 0.05 * 0.05);
}

TEST_CASE("hod_mse is zero for a model evaluated against itself") {
  const LatentModel m = random_model(3, 3, 31);
  ExactJointDistribution d;
  d.channel = 0;
  d.clients = {0, 1, 2};
  d.probabilities.resize(8);
  for (std::uint32_t k = 0; k < 8; ++k) d.probabilities[k] = query_mask(m, d.clients, k);
  CHECK(hod_mse(m, d) == doctest::Approx(0.0));
}

TEST_CASE("hod_mse vanishes when fitting the truth's own independent pairwise tables") {
  const int n = 3;
  const std::vector<double> marg{0.8, 0.6, 0.9};
  PairwiseEstimates pairs;
  pairs.channel = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      pairs.set(i, j, {(1 - marg[i]) * (1 - marg[j]), marg[i] * (1 - marg[j]),
                       (1 - marg[i]) * marg[j], marg[i] * marg[j]});
    }
  }
  FitOptions options;
  options.F = 1;
  options.seed = 3;
  options.rel_tolerance = 1e-14;
  const LatentModel m = fit_latent_model(pairs, n, options);
  ExactJointDistribution truth;
  truth.channel = 0;
  truth.clients = {0, 1, 2};
  truth.probabilities.assign(8, 0.0);
  for (std::uint32_t k = 0; k < 8; ++k) {
    double v = 1.0;
    for (int i = 0; i < n; ++i) v *= (k >> i) & 1u ? marg[i] : 1.0 - marg[i];
    truth.probabilities[k] = v;
  }
  CHECK(hod_mse(m, truth) < 1e-10);
}

TEST_CASE("latent model json round trip") {
  const LatentModel m = random_model(4, 6, 47);
  const LatentModel back = LatentModel::from_json(m.to_json());
  CHECK(back.F == m.F);
  CHECK(back.num_clients == m.num_clients);
  for (int f = 0; f < m.F; ++f) CHECK(back.lambda[f] == doctest::Approx(m.lambda[f]));
  for (std::size_t k = 0; k < m.p.size(); ++k) CHECK(back.p[k] == doctest::Approx(m.p[k]));
}
