#include <doctest.h>

#include <cmath>

#include "airtomo/scheduler.hpp"

using namespace airtomo;

namespace {

RateModel flat_rates(std::vector<double> base, int M, double kappa = 0.05,
                     double cap = 2.0) {
  RateModel r;
  r.base = std::move(base);
  r.M = M;
  r.kappa = kappa;
  r.stream_gain_cap = cap;
  return r;
}

ClientState state_with(std::vector<double> R) {
  ClientState s;
  s.R = std::move(R);
  s.alpha = 0.05;
  return s;
}

// Latent model where one HT with transmit probability q blocks `covered`;
// everyone else always accesses.
LatentModel single_ht_model(int n, const std::vector<int>& covered, double q) {
  LatentModel m;
  m.F = 2;
  m.num_clients = n;
  m.channel = 0;
  m.lambda = {1.0 - q, q};
  m.p.assign(2 * n, 1.0);
  for (int i : covered) m.p[2 * i + 1] = 0.0;  // blocked when the HT transmits
  return m;
}

LatentModel independence_model(int n, const std::vector<double>& access) {
  LatentModel m;
  m.F = 1;
  m.num_clients = n;
  m.channel = 0;
  m.lambda = {1.0};
  m.p = access;
  return m;
}

}  // namespace

TEST_CASE("pf picks the strictly best rate and breaks ties toward the lowest id") {
  const RateModel rates = flat_rates({1.0, 3.0, 2.0}, 1);
  const ClientState s = state_with({1.0, 1.0, 1.0});
  const RbAssignment rb = schedule_pf(rates, s, {0, 1, 2}, 1);
  CHECK(rb.group == std::vector<int>{1});

  // rates (2,1), R=(2,1): utilities tie at 1 -> client 0.
  const RateModel tie_rates = flat_rates({2.0, 1.0}, 1);
  const ClientState tie_state = state_with({2.0, 1.0});
  const RbAssignment tie_rb = schedule_pf(tie_rates, tie_state, {0, 1}, 1);
  CHECK(tie_rb.group == std::vector<int>{0});
}

TEST_CASE("aa with unit access probabilities reduces to pf") {
  const RateModel rates = flat_rates({1.5, 2.5, 0.5, 2.0}, 2);
  const ClientState s = state_with({1.0, 2.0, 0.4, 1.0});
  const std::vector<double> ones(4, 1.0);
  for (int M : {1, 2}) {
    const RbAssignment pf = schedule_pf(rates, s, {0, 1, 2, 3}, M);
    const RbAssignment aa = schedule_aa(rates, s, {0, 1, 2, 3}, ones, M);
    CHECK(pf.group == aa.group);
  }
}

TEST_CASE("aa weighs utilities by access probability") {
  // client 0: rate 10, P=0.1; client 1: rate 2, P=0.9; equal R.
  const RateModel rates = flat_rates({10.0, 2.0}, 1);
  const ClientState s = state_with({1.0, 1.0});
  const RbAssignment rb = schedule_aa(rates, s, {0, 1}, {0.1, 0.9}, 1);
  CHECK(rb.group == std::vector<int>{1});
  CHECK(rb.expected_utility == doctest::Approx(1.8));
}

TEST_CASE("aa never schedules a zero-access client while a positive one exists") {
  const RateModel rates = flat_rates({100.0, 0.01}, 1);
  const ClientState s = state_with({0.001, 1.0});
  const RbAssignment rb = schedule_aa(rates, s, {0, 1}, {0.0, 0.6}, 1);
  CHECK(rb.group == std::vector<int>{1});
}

TEST_CASE("jaa equals mu-mimo pf when the model encodes no interference") {
  const RateModel rates = flat_rates({2.0, 1.2, 1.8, 0.7}, 3);
  const ClientState s = state_with({1.0, 0.5, 2.0, 0.3});
  const LatentModel m = independence_model(4, {1.0, 1.0, 1.0, 1.0});
  const RbAssignment pf = schedule_pf(rates, s, {0, 1, 2, 3}, 3);
  const RbAssignment jaa = schedule_jaa(rates, s, {0, 1, 2, 3}, m, 3);
  CHECK(pf.group == jaa.group);
}

TEST_CASE("jaa prefers the independent partner over the co-blocked one") {
  // Seed client 0 and two equal-rate partners: client 1 perfectly co-blocked
  // with 0, client 2 independently clean with the same marginal.
  LatentModel m;
  m.F = 2;
  m.num_clients = 3;
  m.channel = 0;
  const double q = 0.4;
  m.lambda = {1.0 - q, q};
  // p rows: client 0 and 1 blocked in state 1; client 2 has marginal 1-q flat.
  m.p = {1.0, 0.0, 1.0, 0.0, 1.0 - q, 1.0 - q};
  const RateModel rates = flat_rates({1.0, 1.0, 1.0}, 2);
  const ClientState s = state_with({1.0, 1.0, 1.0});
  const RbAssignment rb = schedule_jaa(rates, s, {0, 1, 2}, m, 2);
  CHECK(rb.group == std::vector<int>{0, 2});
}

TEST_CASE("jaa greedy matches exhaustive enumeration on a three-client instance") {
  LatentModel m;
  m.F = 3;
  m.num_clients = 3;
  m.channel = 0;
  m.lambda = {0.5, 0.3, 0.2};
  m.p = {0.9, 0.2, 0.7, 0.6, 0.8, 0.1, 0.3, 0.9, 0.5};
  const RateModel rates = flat_rates({1.0, 1.3, 0.8}, 2);
  const ClientState s = state_with({0.9, 1.1, 0.6});

  const RbAssignment greedy = schedule_jaa(rates, s, {0, 1, 2}, m, 2);
  double best = -1.0;
  std::vector<int> best_group;
  const std::vector<std::vector<int>> groups{{0}, {1}, {2}, {0, 1}, {0, 2}, {1, 2}};
  for (const auto& g : groups) {
    const double e = mimo_expected_utility(rates, s, g, m, 2);
    if (e > best) {
      best = e;
      best_group = g;
    }
  }
  CHECK(greedy.group == best_group);
  CHECK(greedy.expected_utility == doctest::Approx(best));
}

TEST_CASE("sp stays singleton when both candidates share the blocking HT") {
  const LatentModel m = single_ht_model(2, {0, 1}, 0.5);
  const RateModel rates = flat_rates({1.0, 1.0}, 1);
  const ClientState s = state_with({1.0, 1.0});
  const RbAssignment rb = schedule_sp(rates, s, {0, 1}, m, 4);
  CHECK(rb.group.size() == 1);
  // P(i, j blocked) = 0 for both orders, so adding never helps.
  CHECK(rb.expected_utility == doctest::Approx(0.5));
}

TEST_CASE("sp over-schedules complementary-blocked clients") {
  // Exactly one of the two is blocked each frame.
  LatentModel m;
  m.F = 2;
  m.num_clients = 2;
  m.channel = 0;
  m.lambda = {0.5, 0.5};
  m.p = {0.0, 1.0, 1.0, 0.0};
  const RateModel rates = flat_rates({1.0, 1.0}, 1);
  const ClientState s = state_with({1.0, 1.0});
  const RbAssignment rb = schedule_sp(rates, s, {0, 1}, m, 4);
  CHECK(rb.group == std::vector<int>{0, 1});
  CHECK(rb.expected_utility == doctest::Approx(1.0));  // 0.5*u0 + 0.5*u1
}

TEST_CASE("sp collapses to the aa winner under a no-interference model") {
  const LatentModel m = independence_model(3, {1.0, 1.0, 1.0});
  const RateModel rates = flat_rates({1.0, 2.0, 1.5}, 1);
  const ClientState s = state_with({1.0, 1.0, 1.0});
  const RbAssignment rb = schedule_sp(rates, s, {0, 1, 2}, m, 4);
  CHECK(rb.group == std::vector<int>{1});
}

namespace {

Topology oracle_instance() {
  Topology t;
  t.bs_position = {0.0, -300.0};
  t.bs_range = 400.0;
  t.num_channels = 1;
  t.ht_sense_radius = 1.0;
  t.min_ht_bs_distance = 70.0;
  for (int i = 0; i < 4; ++i) t.clients.push_back({i, {30.0 * i, 0.0}});
  HiddenTerminal h0;
  h0.id = 0;
  h0.position = {0.0, 15.0};
  h0.impact_radius = 20.0;
  h0.transmit_prob = {0.5};
  h0.active_channels = {0};
  t.hts.push_back(h0);
  HiddenTerminal h1;
  h1.id = 1;
  h1.position = {30.0, -15.0};
  h1.impact_radius = 20.0;
  h1.transmit_prob = {0.3};
  h1.active_channels = {0};
  t.hts.push_back(h1);
  t.validate();
  return t;
}

}  // namespace

TEST_CASE("oracle expected utility dominates every policy on the same state") {
  const Topology t = oracle_instance();
  const TransmitSupport support = ChannelSim(t, 0).exact_support();
  const RateModel rates = flat_rates({1.0, 1.4, 0.9, 1.1}, 1);
  // Truth-equivalent model: two independent HTs -> four product states.
  LatentModel m;
  m.F = 4;
  m.num_clients = 4;
  m.channel = 0;
  m.lambda = {0.5 * 0.7, 0.5 * 0.7, 0.5 * 0.3, 0.5 * 0.3};
  m.p.assign(16, 1.0);
  // client 0 blocked when HT0 transmits (states 1, 3), client 1 when HT1 does.
  m.p[0 * 4 + 1] = 0.0;
  m.p[0 * 4 + 3] = 0.0;
  m.p[1 * 4 + 2] = 0.0;
  m.p[1 * 4 + 3] = 0.0;

  const std::vector<int> all{0, 1, 2, 3};
  for (const std::vector<double>& R :
       {std::vector<double>{1, 1, 1, 1}, std::vector<double>{0.2, 1, 2, 0.5},
        std::vector<double>{3, 0.1, 0.4, 1}}) {
    const ClientState s = state_with(R);
    const RbAssignment oracle = schedule_oracle_siso(rates, s, all, support, 4);
    const double oracle_e = speculative_expected_utility(rates, s, oracle.group, support);
    std::vector<double> access(4);
    for (int i = 0; i < 4; ++i) access[i] = support.access_prob(i);
    for (const RbAssignment& rb :
         {schedule_pf(rates, s, all, 1), schedule_aa(rates, s, all, access, 1),
          schedule_sp(rates, s, all, m, 4)}) {
      const double e = speculative_expected_utility(rates, s, rb.group, support);
      CHECK(oracle_e >= e - 1e-12);
    }
  }
}

TEST_CASE("oracle mimo matches jaa when the fitted model equals the truth") {
  const Topology t = oracle_instance();
  const TransmitSupport support = ChannelSim(t, 0).exact_support();
  LatentModel m;
  m.F = 4;
  m.num_clients = 4;
  m.channel = 0;
  m.lambda = {0.35, 0.35, 0.15, 0.15};
  m.p.assign(16, 1.0);
  m.p[0 * 4 + 1] = 0.0;
  m.p[0 * 4 + 3] = 0.0;
  m.p[1 * 4 + 2] = 0.0;
  m.p[1 * 4 + 3] = 0.0;

  const RateModel rates = flat_rates({1.0, 1.0, 1.0, 1.0}, 2);
  const ClientState s = state_with({1.0, 1.0, 1.0, 1.0});
  const RbAssignment oracle = schedule_oracle_mimo(rates, s, {0, 1, 2, 3}, support, 2);
  const RbAssignment jaa = schedule_jaa(rates, s, {0, 1, 2, 3}, m, 2);
  CHECK(oracle.group == jaa.group);
  CHECK(oracle.expected_utility == doctest::Approx(jaa.expected_utility).epsilon(1e-9));
}

TEST_CASE("policy decisions are invariant to a global rate scale") {
  const Topology t = oracle_instance();
  const TransmitSupport support = ChannelSim(t, 0).exact_support();
  const LatentModel m = single_ht_model(4, {0}, 0.5);
  RateModel rates = flat_rates({1.0, 1.4, 0.9, 1.1}, 1);
  const ClientState s = state_with({0.7, 1.2, 0.5, 1.0});
  std::vector<double> access(4, 1.0);
  access[0] = 0.5;

  const auto pf1 = schedule_pf(rates, s, {0, 1, 2, 3}, 1);
  const auto aa1 = schedule_aa(rates, s, {0, 1, 2, 3}, access, 1);
  const auto sp1 = schedule_sp(rates, s, {0, 1, 2, 3}, m, 4);
  const auto or1 = schedule_oracle_siso(rates, s, {0, 1, 2, 3}, support, 4);
  for (double& b : rates.base) b *= 37.5;
  CHECK(schedule_pf(rates, s, {0, 1, 2, 3}, 1).group == pf1.group);
  CHECK(schedule_aa(rates, s, {0, 1, 2, 3}, access, 1).group == aa1.group);
  CHECK(schedule_sp(rates, s, {0, 1, 2, 3}, m, 4).group == sp1.group);
  CHECK(schedule_oracle_siso(rates, s, {0, 1, 2, 3}, support, 4).group == or1.group);
}

TEST_CASE("episode with zero HTs under pf utilizes every block") {
  TopologyParams p;
  p.num_clients = 6;
  p.num_hts = 0;
  p.seed = 3;
  const Topology t = generate_topology(p);
  PolicyInputs inputs;
  inputs.rates = make_rate_model(6, 1, 0.05, 2.0, 11);
  EpisodeConfig ec;
  ec.policy = Policy::kPf;
  ec.frames = 200;
  ec.seed = 5;
  const EpisodeMetrics m = run_episode(t, inputs, ec);
  CHECK(m.rbu == doctest::Approx(1.0));
  CHECK(m.cum_throughput > 0.0);
  CHECK(m.collisions == 0);
}

TEST_CASE("episodes are deterministic given the seed") {
  TopologyParams p;
  p.num_clients = 8;
  p.num_hts = 3;
  p.seed = 17;
  const Topology t = generate_topology(p);
  PolicyInputs inputs;
  inputs.rates = make_rate_model(8, 1, 0.05, 2.0, 11);
  inputs.supports.push_back(ChannelSim(t, 0).exact_support());
  EpisodeConfig ec;
  ec.policy = Policy::kOracle;
  ec.frames = 300;
  ec.seed = 5;
  const EpisodeMetrics a = run_episode(t, inputs, ec);
  const EpisodeMetrics b = run_episode(t, inputs, ec);
  CHECK(a.cum_throughput == b.cum_throughput);
  CHECK(a.rbu == b.rbu);
  CHECK(a.per_client_throughput == b.per_client_throughput);
}

TEST_CASE("rate model base rates stay within the configured spread") {
  const RateModel r = make_rate_model(200, 1, 0.05, 2.0, 9);
  for (double b : r.base) {
    CHECK(b >= 1.0);
    CHECK(b <= 4.0);
  }
  // MU-MIMO monotonicity: more active streams never raise a per-client rate.
  const RateModel mimo = make_rate_model(4, 4, 0.05, 2.0, 9);
  for (int g = 1; g < 4; ++g) {
    CHECK(mimo.rate_group(0, g + 1, 4) <= mimo.rate_group(0, g, 4) + 1e-12);
  }
}

TEST_CASE("speculative utility agrees between model and oracle probabilities") {
  const Topology t = oracle_instance();
  const TransmitSupport support = ChannelSim(t, 0).exact_support();
  LatentModel m;
  m.F = 4;
  m.num_clients = 4;
  m.channel = 0;
  m.lambda = {0.35, 0.35, 0.15, 0.15};
  m.p.assign(16, 1.0);
  m.p[0 * 4 + 1] = 0.0;
  m.p[0 * 4 + 3] = 0.0;
  m.p[1 * 4 + 2] = 0.0;
  m.p[1 * 4 + 3] = 0.0;
  const RateModel rates = flat_rates({1.0, 1.4, 0.9, 1.1}, 1);
  const ClientState s = state_with({0.7, 1.2, 0.5, 1.0});
  for (const std::vector<int>& g :
       {std::vector<int>{0}, std::vector<int>{0, 1}, std::vector<int>{0, 1, 2},
        std::vector<int>{0, 1, 2, 3}}) {
    CHECK(speculative_expected_utility(rates, s, g, m) ==
          doctest::Approx(speculative_expected_utility(rates, s, g, support)).epsilon(1e-9));
  }
}
