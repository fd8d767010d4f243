#ifndef AIRTOMO_LATENT_MODEL_HPP
#define AIRTOMO_LATENT_MODEL_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "airtomo/simulator.hpp"
#include "airtomo/tomography.hpp"

namespace airtomo {

// One-hidden-variable model of the joint access distribution on a channel:
// P(z_1..z_N) = sum_f lambda[f] * prod_i P(Z_i = z_i | H = f), with
// p[i*F+f] = P(Z_i = 1 | H = f).
struct LatentModel {
  int F = 0;
  int num_clients = 0;
  int channel = 0;
  std::vector<double> lambda;  // length F, simplex
  std::vector<double> p;       // N x F row-major

  double p_at(int i, int f) const { return p[static_cast<std::size_t>(i) * F + f]; }
  double access_prob(int i) const;

  std::string to_json() const;
  static LatentModel from_json(const std::string& text);
};

// Subset query: clients in `group`, of which those listed in `accessing`
// access the channel and the rest are blocked.
struct MarginalQuery {
  std::vector<int> group;
  std::vector<int> accessing;  // subset of group
};

// 2x2 table of the model for pair (i, j); same layout as PairwiseEstimates.
std::array<double, 4> model_pair(const LatentModel& m, int i, int j);

double query(const LatentModel& m, const MarginalQuery& q);
// Mask form: bit k set means group[k] accesses.
double query_mask(const LatentModel& m, const std::vector<int>& group, std::uint32_t access_mask);

struct FitOptions {
  int F = 0;  // 0 means use num_clients
  double initial_step = 0.1;
  double armijo_c = 1e-4;
  int max_iterations = 5000;
  double rel_tolerance = 1e-8;
  double smoothing = 1e-9;
  double init_noise = 0.05;
  int max_backtracks = 60;
  // Diagonal preconditioning of the descent direction (RMSProp-style
  // accumulator); plain gradient descent saturates too slowly through the
  // sigmoid tails to reach the loss levels the pipeline needs.
  bool precondition = true;
  double precondition_beta = 0.99;
  // Multi-start: short exploratory runs from distinct seeds, then the best
  // basin is optimized to the full budget. 1 disables exploration.
  int restarts = 4;
  int explore_iterations = 300;
  std::uint64_t seed = 1;
};

struct FitReport {
  bool converged = false;
  int iterations = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> loss_trace;  // loss after each accepted step
};

// Minimizes sum over pairs of KL(measured table || model table) by full-batch
// gradient descent on reparameterized variables (softmax prior, sigmoid
// conditionals) with Armijo backtracking. Measured tables are
// epsilon-smoothed and renormalized first. The recorded loss trace is
// non-increasing; failure to converge is reported, never thrown.
LatentModel fit_latent_model(const PairwiseEstimates& pairwise, int num_clients,
                             const FitOptions& options, FitReport* report = nullptr);

// Mean squared error between model queries and the exact distribution over
// all outcome patterns of the truth's client subset.
double hod_mse(const LatentModel& m, const ExactJointDistribution& truth);

}  // namespace airtomo

#endif  // AIRTOMO_LATENT_MODEL_HPP
