#ifndef AIRTOMO_EXPERIMENT_HPP
#define AIRTOMO_EXPERIMENT_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "airtomo/blueprint.hpp"
#include "airtomo/geoloc.hpp"
#include "airtomo/latent_model.hpp"
#include "airtomo/scheduler.hpp"
#include "airtomo/simulator.hpp"
#include "airtomo/tomography.hpp"
#include "airtomo/topology.hpp"

namespace airtomo {

// measure -> cluster -> pairwise -> expand -> fit, per channel.
struct PipelineOptions {
  long long frames = 1000;
  int K = 0;          // 0: max(2, N/C)
  int F = 0;          // 0: N
  bool exact = false; // swap the Monte-Carlo sampler for the oracle
  FitOptions fit;
  std::uint64_t seed = 1;
};

struct PipelineResult {
  std::vector<AccessVector> access;
  Clustering clustering;
  std::vector<PairwiseEstimates> rep_pairs;     // per channel
  std::vector<PairwiseEstimates> client_pairs;  // per channel, expanded
  std::vector<LatentModel> models;              // per channel
  std::vector<FitReport> fit_reports;
  long long ledger_sessions = 0;
  long long ledger_frames = 0;

  std::vector<std::vector<double>> access_table() const;  // [channel][client]
};

PipelineResult run_measurement_pipeline(const Topology& t, const PipelineOptions& options);

struct ExperimentConfig {
  std::string kind;  // scheduler-vs-hts | client-density | multi-channel |
                     // mimo-sweep | cluster-sweep | hod-mse | localization | ht-count
  // Topology parameters.
  int clients = 20;
  int channels = 1;
  std::vector<int> ht_counts = {2, 4, 6, 8};
  double bs_range = 100.0;
  double impact_radius = 50.0;
  double sense_radius = 50.0;
  double min_ht_bs_distance = 70.0;
  double max_ht_bs_distance = 90.0;  // 0: bs_range + impact_radius
  int hts_per_channel = 0;  // multi-channel mode: isolates HTs per channel

  // Sweeps.
  std::vector<int> antenna_counts = {2, 4, 8};
  std::vector<int> client_counts = {8, 12, 16, 20};
  std::vector<int> channel_counts = {1, 2, 3};
  std::vector<int> cluster_counts;
  std::vector<int> latent_sizes = {2, 10, 20, 40};
  int subset_size = 5;       // hod-mse query subsets
  int subsets_per_seed = 5;

  // Policies and episodes.
  std::vector<std::string> policies = {"pf", "aa", "sp", "oracle"};
  long long measure_frames = 1000;
  long long episode_frames = 1500;
  int B = 10;
  int M = 1;
  int K = 0;
  int F = 0;
  double kappa = 0.05;
  double stream_gain_cap = 2.0;
  bool exact_measure = false;

  BlueprintOptions blueprint;
  double localize_cell = 1.0;

  // Seeds and execution.
  int num_seeds = 10;
  std::uint64_t seed_base = 1;
  std::vector<std::uint64_t> seeds;  // explicit list wins over num_seeds
  int threads = 0;
  std::string out_dir = "out";

  std::vector<std::uint64_t> seed_list() const;
  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::string& path);
};

struct RunManifest {
  std::string kind;
  std::string config_hash;
  std::string code_version;
  std::string status;  // running | complete | failed
  double wall_clock_sec = 0.0;
  std::vector<std::string> output_files;
  std::vector<std::string> seed_errors;

  std::string to_json() const;
};

// Runs the configured protocol over all seeds (worker pool), writes CSV and
// summary outputs under config.out_dir, and returns the finalized manifest.
// Per-seed failures are recorded and the remaining seeds continue.
RunManifest run_experiment(const ExperimentConfig& config);

// Closed-form measurement overhead accounting.
struct OverheadReport {
  int clients = 0;
  int channels = 0;
  int clusters = 0;
  int antennas = 0;
  long long frames_per_sample = 0;
  long long first_order_sets = 0;   // C * N
  long long pairwise_sets = 0;      // C * K(K-1)/2
  long long tomography_frames = 0;  // (sets) * frames
  long long oracle_sets = 0;        // C * sum_{m=1..M} C(N, m)
  long long oracle_frames = 0;

  std::string to_csv() const;
};

OverheadReport overhead_report(int clients, int channels, int clusters, int antennas,
                               long long frames_per_sample);

// Aggregation helper: p in [0, 100], linear interpolation.
double percentile(std::vector<double> values, double p);

std::string version_string();

}  // namespace airtomo

#endif  // AIRTOMO_EXPERIMENT_HPP
