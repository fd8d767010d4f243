#include "airtomo/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "airtomo/parallel.hpp"
#include "airtomo/rng.hpp"

namespace airtomo {

using nlohmann::json;

std::string version_string() { return "0.1.0"; }

std::vector<std::vector<double>> PipelineResult::access_table() const {
  std::vector<std::vector<double>> table;
  if (access.empty()) return table;
  const int C = static_cast<int>(access[0].a.size());
  table.assign(C, std::vector<double>(access.size(), 0.0));
  for (std::size_t i = 0; i < access.size(); ++i) {
    for (int c = 0; c < C; ++c) table[c][i] = access[i].a[c];
  }
  return table;
}

PipelineResult run_measurement_pipeline(const Topology& t, const PipelineOptions& options) {
  PipelineResult r;
  std::unique_ptr<JointSampler> sampler;
  if (options.exact) {
    sampler = std::make_unique<ExactSampler>(t);
  } else {
    sampler = std::make_unique<MonteCarloSampler>(t, derive_seed(options.seed, 10));
  }

  r.access = measure_first_order(t, *sampler, options.frames);

  const int K = options.K > 0 ? options.K
                              : std::min(t.num_clients(),
                                         default_cluster_count(t.num_clients(), t.num_channels));
  r.clustering = cluster_clients(r.access, K, derive_seed(options.seed, 11));

  if (K >= 2) {
    r.rep_pairs = measure_pairwise(t, r.clustering, *sampler, options.frames);
  } else {
    r.rep_pairs.assign(t.num_channels, PairwiseEstimates{});
    for (int c = 0; c < t.num_channels; ++c) r.rep_pairs[c].channel = c;
  }

  r.client_pairs.reserve(t.num_channels);
  r.models.reserve(t.num_channels);
  r.fit_reports.resize(t.num_channels);
  for (int c = 0; c < t.num_channels; ++c) {
    r.client_pairs.push_back(expand_to_clients(r.rep_pairs[c], r.clustering, r.access));
    FitOptions fit = options.fit;
    if (options.F > 0) fit.F = options.F;
    fit.seed = derive_seed(options.seed, 20 + c);
    r.models.push_back(
        fit_latent_model(r.client_pairs[c], t.num_clients(), fit, &r.fit_reports[c]));
  }
  r.ledger_sessions = sampler->ledger().session_count();
  r.ledger_frames = sampler->ledger().total_measurement_frames();
  return r;
}

std::vector<std::uint64_t> ExperimentConfig::seed_list() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> list(num_seeds);
  for (int s = 0; s < num_seeds; ++s) list[s] = seed_base + static_cast<std::uint64_t>(s);
  return list;
}

namespace {

json blueprint_to_json(const BlueprintOptions& b) {
  return json{{"eps_dep", b.eps_dep},       {"eps_ht", b.eps_ht},
              {"delta_margin", b.delta_margin}, {"eps_cond", b.eps_cond},
              {"max_clique_size", b.max_clique_size},
              {"dbscan_eps_factor", b.dbscan_eps_factor},
              {"dbscan_min_pts", b.dbscan_min_pts}};
}

BlueprintOptions blueprint_from_json(const json& j, BlueprintOptions b) {
  b.eps_dep = j.value("eps_dep", b.eps_dep);
  b.eps_ht = j.value("eps_ht", b.eps_ht);
  b.delta_margin = j.value("delta_margin", b.delta_margin);
  b.eps_cond = j.value("eps_cond", b.eps_cond);
  b.max_clique_size = j.value("max_clique_size", b.max_clique_size);
  b.dbscan_eps_factor = j.value("dbscan_eps_factor", b.dbscan_eps_factor);
  b.dbscan_min_pts = j.value("dbscan_min_pts", b.dbscan_min_pts);
  return b;
}

}  // namespace

std::string ExperimentConfig::to_json() const {
  json j;
  j["kind"] = kind;
  j["clients"] = clients;
  j["channels"] = channels;
  j["ht_counts"] = ht_counts;
  j["bs_range"] = bs_range;
  j["impact_radius"] = impact_radius;
  j["sense_radius"] = sense_radius;
  j["min_ht_bs_distance"] = min_ht_bs_distance;
  j["max_ht_bs_distance"] = max_ht_bs_distance;
  j["hts_per_channel"] = hts_per_channel;
  j["antenna_counts"] = antenna_counts;
  j["client_counts"] = client_counts;
  j["channel_counts"] = channel_counts;
  j["cluster_counts"] = cluster_counts;
  j["latent_sizes"] = latent_sizes;
  j["subset_size"] = subset_size;
  j["subsets_per_seed"] = subsets_per_seed;
  j["policies"] = policies;
  j["measure_frames"] = measure_frames;
  j["episode_frames"] = episode_frames;
  j["B"] = B;
  j["M"] = M;
  j["K"] = K;
  j["F"] = F;
  j["kappa"] = kappa;
  j["stream_gain_cap"] = stream_gain_cap;
  j["exact_measure"] = exact_measure;
  j["blueprint"] = blueprint_to_json(blueprint);
  j["localize_cell"] = localize_cell;
  j["num_seeds"] = num_seeds;
  j["seed_base"] = seed_base;
  j["seeds"] = seeds;
  j["threads"] = threads;
  j["out_dir"] = out_dir;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig c;
  c.kind = j.value("kind", c.kind);
  c.clients = j.value("clients", c.clients);
  c.channels = j.value("channels", c.channels);
  c.ht_counts = j.value("ht_counts", c.ht_counts);
  c.bs_range = j.value("bs_range", c.bs_range);
  c.impact_radius = j.value("impact_radius", c.impact_radius);
  c.sense_radius = j.value("sense_radius", c.sense_radius);
  c.min_ht_bs_distance = j.value("min_ht_bs_distance", c.min_ht_bs_distance);
  c.max_ht_bs_distance = j.value("max_ht_bs_distance", c.max_ht_bs_distance);
  c.hts_per_channel = j.value("hts_per_channel", c.hts_per_channel);
  c.antenna_counts = j.value("antenna_counts", c.antenna_counts);
  c.client_counts = j.value("client_counts", c.client_counts);
  c.channel_counts = j.value("channel_counts", c.channel_counts);
  c.cluster_counts = j.value("cluster_counts", c.cluster_counts);
  c.latent_sizes = j.value("latent_sizes", c.latent_sizes);
  c.subset_size = j.value("subset_size", c.subset_size);
  c.subsets_per_seed = j.value("subsets_per_seed", c.subsets_per_seed);
  c.policies = j.value("policies", c.policies);
  c.measure_frames = j.value("measure_frames", c.measure_frames);
  c.episode_frames = j.value("episode_frames", c.episode_frames);
  c.B = j.value("B", c.B);
  c.M = j.value("M", c.M);
  c.K = j.value("K", c.K);
  c.F = j.value("F", c.F);
  c.kappa = j.value("kappa", c.kappa);
  c.stream_gain_cap = j.value("stream_gain_cap", c.stream_gain_cap);
  c.exact_measure = j.value("exact_measure", c.exact_measure);
  if (j.contains("blueprint")) c.blueprint = blueprint_from_json(j["blueprint"], c.blueprint);
  c.localize_cell = j.value("localize_cell", c.localize_cell);
  c.num_seeds = j.value("num_seeds", c.num_seeds);
  c.seed_base = j.value("seed_base", c.seed_base);
  c.seeds = j.value("seeds", c.seeds);
  c.threads = j.value("threads", c.threads);
  c.out_dir = j.value("out_dir", c.out_dir);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string RunManifest::to_json() const {
  json j;
  j["kind"] = kind;
  j["config_hash"] = config_hash;
  j["code_version"] = code_version;
  j["status"] = status;
  j["wall_clock_sec"] = wall_clock_sec;
  j["output_files"] = output_files;
  j["seed_errors"] = seed_errors;
  return j.dump(2);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double rank = (p / 100.0) * (values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(rank));
  const double w = rank - lo;
  return values[lo] * (1.0 - w) + values[hi] * w;
}

OverheadReport overhead_report(int clients, int channels, int clusters, int antennas,
                               long long frames_per_sample) {
  OverheadReport r;
  r.clients = clients;
  r.channels = channels;
  r.clusters = clusters;
  r.antennas = antennas;
  r.frames_per_sample = frames_per_sample;
  r.first_order_sets = static_cast<long long>(channels) * clients;
  r.pairwise_sets =
      static_cast<long long>(channels) * clusters * (clusters - 1) / 2;
  r.tomography_frames = (r.first_order_sets + r.pairwise_sets) * frames_per_sample;
  long long total = 0;
  long long binom = 1;
  for (int m = 1; m <= antennas; ++m) {
    binom = binom * (clients - m + 1) / m;
    total += binom;
  }
  r.oracle_sets = static_cast<long long>(channels) * total;
  r.oracle_frames = r.oracle_sets * frames_per_sample;
  return r;
}

std::string OverheadReport::to_csv() const {
  std::ostringstream out;
  out << "clients,channels,clusters,antennas,frames_per_sample,"
         "first_order_sets,pairwise_sets,tomography_frames,oracle_sets,oracle_frames\n";
  out << clients << ',' << channels << ',' << clusters << ',' << antennas << ','
      << frames_per_sample << ',' << first_order_sets << ',' << pairwise_sets << ','
      << tomography_frames << ',' << oracle_sets << ',' << oracle_frames << '\n';
  return out.str();
}

namespace {

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct MetricsRow {
  std::uint64_t seed;
  std::string policy;
  int channel_count;
  int antennas;
  int n_hts;
  int n_clients;
  long long frame;
  double rbu;
  double cum_throughput;
};

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "seed,policy,channel_count,antennas,n_hts,n_clients,frame,rbu,cum_throughput\n";
  for (const auto& r : rows) {
    out << r.seed << ',' << r.policy << ',' << r.channel_count << ',' << r.antennas << ','
        << r.n_hts << ',' << r.n_clients << ',' << r.frame << ',' << format_double(r.rbu) << ','
        << format_double(r.cum_throughput) << '\n';
  }
  return out.str();
}

Topology make_experiment_topology(const ExperimentConfig& cfg, int n_clients, int n_hts,
                                  int channels, std::uint64_t seed) {
  TopologyParams p;
  p.num_clients = n_clients;
  p.num_channels = channels;
  p.num_hts = cfg.hts_per_channel > 0 ? cfg.hts_per_channel * channels : n_hts;
  p.bs_range = cfg.bs_range;
  p.ht_impact_radius = cfg.impact_radius;
  p.ht_sense_radius = cfg.sense_radius;
  p.min_ht_bs_distance = cfg.min_ht_bs_distance;
  p.max_ht_bs_distance = cfg.max_ht_bs_distance;
  p.seed = seed;
  Topology t = generate_topology(p);
  if (cfg.hts_per_channel > 0) {
    // Multi-channel isolation mode: pin a fixed number of HTs to each channel.
    for (int h = 0; h < t.num_hts(); ++h) {
      const int c = h % channels;
      double q = 0.0;
      for (double v : t.hts[h].transmit_prob) q = std::max(q, v);
      t.hts[h].active_channels = {c};
      t.hts[h].transmit_prob.assign(channels, 0.0);
      t.hts[h].transmit_prob[c] = q;
    }
  }
  return t;
}

bool pipeline_needed(const std::vector<std::string>& policies) {
  for (const auto& p : policies) {
    if (p == "aa" || p == "jaa" || p == "sp") return true;
  }
  return false;
}

// One scheduling task: topology -> measurement (when needed) -> one episode
// per policy, common random numbers across policies.
struct SchedTaskSpec {
  std::uint64_t seed = 1;
  int n_clients = 20;
  int n_hts = 4;
  int channels = 1;
  int antennas = 1;
  int clusters = 0;  // 0: default
};

std::vector<MetricsRow> run_sched_task(const ExperimentConfig& cfg, const SchedTaskSpec& spec) {
  const Topology t =
      make_experiment_topology(cfg, spec.n_clients, spec.n_hts, spec.channels, spec.seed);

  PolicyInputs inputs;
  inputs.rates = make_rate_model(t.num_clients(), spec.antennas, cfg.kappa, cfg.stream_gain_cap,
                                 derive_seed(spec.seed, 100));

  const bool measured = pipeline_needed(cfg.policies);
  PipelineResult pipeline;
  if (measured) {
    PipelineOptions po;
    po.frames = cfg.measure_frames;
    po.K = spec.clusters > 0 ? spec.clusters : cfg.K;
    po.F = cfg.F;
    po.exact = cfg.exact_measure;
    po.seed = spec.seed;
    pipeline = run_measurement_pipeline(t, po);
    inputs.access = pipeline.access_table();
    inputs.models = pipeline.models;
  }

  bool need_support = false;
  for (const auto& p : cfg.policies) need_support |= (p == "oracle");
  if (need_support) {
    for (int c = 0; c < t.num_channels; ++c) {
      inputs.supports.push_back(ChannelSim(t, c).exact_support());
    }
  }

  std::vector<MetricsRow> rows;
  for (const auto& policy : cfg.policies) {
    EpisodeConfig ec;
    ec.policy = policy_from_name(policy);
    ec.frames = cfg.episode_frames;
    ec.B = cfg.B;
    ec.M = spec.antennas;
    ec.seed = derive_seed(spec.seed, 200);  // shared across policies
    const EpisodeMetrics m = run_episode(t, inputs, ec);
    rows.push_back({spec.seed, policy, spec.channels, spec.antennas, spec.n_hts,
                    spec.n_clients, m.frames, m.rbu, m.cum_throughput});
  }
  return rows;
}

json summarize_metrics(const std::vector<MetricsRow>& rows) {
  // Group by (policy, sweep coordinates) and aggregate.
  std::map<std::string, std::vector<const MetricsRow*>> groups;
  for (const auto& r : rows) {
    std::ostringstream key;
    key << r.policy << "|c" << r.channel_count << "|m" << r.antennas << "|h" << r.n_hts << "|n"
        << r.n_clients;
    groups[key.str()].push_back(&r);
  }
  json out = json::array();
  for (const auto& [key, list] : groups) {
    std::vector<double> rbu, tput;
    for (const MetricsRow* r : list) {
      rbu.push_back(r->rbu);
      tput.push_back(r->cum_throughput);
    }
    double mean_rbu = 0.0, mean_tput = 0.0;
    for (double v : rbu) mean_rbu += v;
    for (double v : tput) mean_tput += v;
    mean_rbu /= rbu.size();
    mean_tput /= tput.size();
    const MetricsRow* first = list.front();
    out.push_back({{"policy", first->policy},
                   {"channel_count", first->channel_count},
                   {"antennas", first->antennas},
                   {"n_hts", first->n_hts},
                   {"n_clients", first->n_clients},
                   {"episodes", list.size()},
                   {"mean_rbu", mean_rbu},
                   {"mean_cum_throughput", mean_tput},
                   {"median_rbu", percentile(rbu, 50)},
                   {"median_cum_throughput", percentile(tput, 50)},
                   {"p25_cum_throughput", percentile(tput, 25)},
                   {"p75_cum_throughput", percentile(tput, 75)},
                   {"p90_cum_throughput", percentile(tput, 90)}});
  }
  return out;
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  const auto t_start = std::chrono::steady_clock::now();

  RunManifest manifest;
  manifest.kind = config.kind;
  manifest.config_hash = fnv1a_hex(config.to_json());
  manifest.code_version = version_string();
  manifest.status = "running";

  fs::create_directories(config.out_dir);
  const auto out_path = [&](const std::string& name) {
    return (fs::path(config.out_dir) / name).string();
  };
  write_text(out_path("config.json"), config.to_json());
  write_text(out_path("manifest.json"), manifest.to_json());
  manifest.output_files.push_back(out_path("config.json"));

  const std::vector<std::uint64_t> seeds = config.seed_list();
  json summary;
  summary["kind"] = config.kind;

  const auto record_error = [&](std::uint64_t seed, const std::string& what) {
    manifest.seed_errors.push_back("seed " + std::to_string(seed) + ": " + what);
  };

  if (config.kind == "scheduler-vs-hts" || config.kind == "client-density" ||
      config.kind == "multi-channel" || config.kind == "mimo-sweep" ||
      config.kind == "cluster-sweep") {
    // Build the task grid: sweep dimension x seeds.
    std::vector<SchedTaskSpec> specs;
    for (std::uint64_t seed : seeds) {
      SchedTaskSpec base;
      base.seed = seed;
      base.n_clients = config.clients;
      base.n_hts = config.ht_counts.empty() ? 4 : config.ht_counts.front();
      base.channels = config.channels;
      base.antennas = config.M;
      if (config.kind == "scheduler-vs-hts") {
        for (int h : config.ht_counts) {
          SchedTaskSpec s = base;
          s.n_hts = h;
          specs.push_back(s);
        }
      } else if (config.kind == "client-density") {
        for (int n : config.client_counts) {
          SchedTaskSpec s = base;
          s.n_clients = n;
          specs.push_back(s);
        }
      } else if (config.kind == "multi-channel") {
        for (int c : config.channel_counts) {
          SchedTaskSpec s = base;
          s.channels = c;
          specs.push_back(s);
        }
      } else if (config.kind == "mimo-sweep") {
        for (int m : config.antenna_counts) {
          SchedTaskSpec s = base;
          s.antennas = m;
          specs.push_back(s);
        }
      } else {  // cluster-sweep
        for (int k : config.cluster_counts) {
          SchedTaskSpec s = base;
          s.clusters = k;
          specs.push_back(s);
        }
      }
    }

    std::vector<std::vector<MetricsRow>> results(specs.size());
    std::vector<std::string> errors(specs.size());
    parallel_for(specs.size(), config.threads, [&](std::size_t i) {
      try {
        results[i] = run_sched_task(config, specs[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });

    std::vector<MetricsRow> rows;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (!errors[i].empty()) {
        record_error(specs[i].seed, errors[i]);
        continue;
      }
      rows.insert(rows.end(), results[i].begin(), results[i].end());
    }
    write_text(out_path("metrics.csv"), metrics_csv(rows));
    manifest.output_files.push_back(out_path("metrics.csv"));

    // Closed-form overhead beside the performance numbers.
    std::ostringstream overhead;
    bool first = true;
    for (const auto& spec : specs) {
      if (spec.seed != seeds.front()) continue;
      const int k_used = spec.clusters > 0
                             ? spec.clusters
                             : (config.K > 0 ? config.K
                                             : std::min(spec.n_clients,
                                                        default_cluster_count(spec.n_clients,
                                                                              spec.channels)));
      const OverheadReport rep = overhead_report(spec.n_clients, spec.channels, k_used,
                                                 spec.antennas, config.measure_frames);
      std::istringstream lines(rep.to_csv());
      std::string header, body;
      std::getline(lines, header);
      std::getline(lines, body);
      if (first) overhead << header << '\n';
      overhead << body << '\n';
      first = false;
    }
    write_text(out_path("overhead.csv"), overhead.str());
    manifest.output_files.push_back(out_path("overhead.csv"));
    summary["groups"] = summarize_metrics(rows);
  } else if (config.kind == "hod-mse") {
    struct MseRow {
      std::uint64_t seed;
      int F;
      int subset;
      double mse;
    };
    std::vector<std::vector<MseRow>> results(seeds.size());
    std::vector<std::string> errors(seeds.size());
    parallel_for(seeds.size(), config.threads, [&](std::size_t si) {
      try {
        const std::uint64_t seed = seeds[si];
        const Topology t = make_experiment_topology(config, config.clients,
                                                    config.ht_counts.empty()
                                                        ? 4
                                                        : config.ht_counts.front(),
                                                    config.channels, seed);
        ExactSampler sampler(t);
        // Exact pairwise tables over all client pairs.
        PairwiseEstimates pairs;
        pairs.channel = 0;
        for (int i = 0; i < t.num_clients(); ++i) {
          for (int j = i + 1; j < t.num_clients(); ++j) {
            const auto table = sampler.measure(0, {i, j}, config.measure_frames);
            pairs.set(i, j, {table[0], table[1], table[2], table[3]});
          }
        }
        // Shared query subsets across F values.
        Rng subset_rng(derive_seed(seed, 30));
        std::vector<std::vector<int>> subsets;
        for (int s = 0; s < config.subsets_per_seed; ++s) {
          std::set<int> chosen;
          while (static_cast<int>(chosen.size()) < config.subset_size) {
            chosen.insert(static_cast<int>(subset_rng.index(t.num_clients())));
          }
          subsets.emplace_back(chosen.begin(), chosen.end());
        }
        for (int F : config.latent_sizes) {
          FitOptions fo;
          fo.F = F;
          fo.seed = derive_seed(seed, 40 + F);
          const LatentModel model = fit_latent_model(pairs, t.num_clients(), fo);
          for (int s = 0; s < static_cast<int>(subsets.size()); ++s) {
            const ExactJointDistribution truth = exact_joint(sampler.support(0), subsets[s]);
            results[si].push_back({seed, F, s, hod_mse(model, truth)});
          }
        }
      } catch (const std::exception& e) {
        errors[si] = e.what();
      }
    });
    std::ostringstream csv;
    csv << "seed,F,subset,mse\n";
    std::map<int, std::vector<double>> by_f;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      if (!errors[si].empty()) {
        record_error(seeds[si], errors[si]);
        continue;
      }
      for (const auto& r : results[si]) {
        csv << r.seed << ',' << r.F << ',' << r.subset << ',' << format_double(r.mse) << '\n';
        by_f[r.F].push_back(r.mse);
      }
    }
    write_text(out_path("hod_mse.csv"), csv.str());
    manifest.output_files.push_back(out_path("hod_mse.csv"));
    json medians = json::array();
    for (auto& [F, values] : by_f) {
      medians.push_back({{"F", F},
                         {"median_mse", percentile(values, 50)},
                         {"p75_mse", percentile(values, 75)},
                         {"p90_mse", percentile(values, 90)}});
    }
    summary["mse_by_F"] = medians;
  } else if (config.kind == "ht-count") {
    struct CountRow {
      std::uint64_t seed;
      int n_hts_param;
      int true_count;
      int inferred;
      bool hit;
    };
    std::vector<SchedTaskSpec> specs;
    for (std::uint64_t seed : seeds) {
      for (int h : config.ht_counts) {
        SchedTaskSpec s;
        s.seed = seed;
        s.n_clients = config.clients;
        s.n_hts = h;
        s.channels = config.channels;
        specs.push_back(s);
      }
    }
    std::vector<std::optional<CountRow>> results(specs.size());
    std::vector<std::string> errors(specs.size());
    parallel_for(specs.size(), config.threads, [&](std::size_t i) {
      try {
        const SchedTaskSpec& spec = specs[i];
        const Topology t =
            make_experiment_topology(config, spec.n_clients, spec.n_hts, spec.channels, spec.seed);
        PipelineOptions po;
        po.frames = config.measure_frames;
        po.K = config.K;
        po.F = config.F;
        po.exact = config.exact_measure;
        po.seed = spec.seed;
        const PipelineResult pipeline = run_measurement_pipeline(t, po);
        BlueprintOptions bo = config.blueprint;
        bo.seed = derive_seed(spec.seed, 50);
        const BlueprintResult bp = run_blueprint(pipeline.models[0], bo);
        CountRow row;
        row.seed = spec.seed;
        row.n_hts_param = spec.n_hts;
        row.true_count = t.impacting_ht_count(0);
        row.inferred = static_cast<int>(bp.blueprint.hts.size());
        row.hit = row.true_count == row.inferred;
        results[i] = row;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
    std::ostringstream csv;
    csv << "seed,n_hts_param,true_count,inferred,hit\n";
    std::map<int, std::pair<int, int>> tally;  // param -> (hits, total)
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (!errors[i].empty()) {
        record_error(specs[i].seed, errors[i]);
        continue;
      }
      const CountRow& r = *results[i];
      csv << r.seed << ',' << r.n_hts_param << ',' << r.true_count << ',' << r.inferred << ','
          << (r.hit ? 1 : 0) << '\n';
      auto& [hits, total] = tally[r.n_hts_param];
      hits += r.hit ? 1 : 0;
      ++total;
    }
    write_text(out_path("ht_count.csv"), csv.str());
    manifest.output_files.push_back(out_path("ht_count.csv"));
    json acc = json::array();
    for (const auto& [param, ht] : tally) {
      acc.push_back({{"n_hts", param},
                     {"topologies", ht.second},
                     {"accuracy", ht.second ? static_cast<double>(ht.first) / ht.second : 0.0}});
    }
    summary["classification"] = acc;
  } else if (config.kind == "localization") {
    std::vector<LocalizationBatch> reps_batches(seeds.size()), all_batches(seeds.size());
    std::vector<std::string> errors(seeds.size());
    parallel_for(seeds.size(), config.threads, [&](std::size_t si) {
      try {
        const std::uint64_t seed = seeds[si];
        const int n_hts = config.ht_counts.empty() ? 3 : config.ht_counts.front();
        const Topology t =
            make_experiment_topology(config, config.clients, n_hts, config.channels, seed);
        PipelineOptions po;
        po.frames = config.measure_frames;
        po.K = config.K;
        po.F = config.F;
        po.exact = config.exact_measure;
        po.seed = seed;
        const PipelineResult pipeline = run_measurement_pipeline(t, po);
        BlueprintOptions bo = config.blueprint;
        bo.seed = derive_seed(seed, 50);
        const BlueprintResult bp = run_blueprint(pipeline.models[0], bo);
        reps_batches[si] = evaluate_localization(t, 0, bp, AnchorMode::kRepresentativesOnly,
                                                 config.impact_radius, config.localize_cell);
        all_batches[si] = evaluate_localization(t, 0, bp, AnchorMode::kAllClients,
                                                config.impact_radius, config.localize_cell);
      } catch (const std::exception& e) {
        errors[si] = e.what();
      }
    });
    std::vector<LocalizationRecord> records;
    int empty_zones = 0, unmatched = 0;
    std::vector<double> acc_reps, acc_all, prec_reps, prec_all;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      if (!errors[si].empty()) {
        record_error(seeds[si], errors[si]);
        continue;
      }
      for (const auto* batch : {&reps_batches[si], &all_batches[si]}) {
        empty_zones += batch->empty_zones;
        unmatched += batch->unmatched_true;
        for (const auto& r : batch->records) {
          records.push_back(r);
          if (r.mode == AnchorMode::kRepresentativesOnly) {
            acc_reps.push_back(r.accuracy_m);
            prec_reps.push_back(r.precision_m2);
          } else {
            acc_all.push_back(r.accuracy_m);
            prec_all.push_back(r.precision_m2);
          }
        }
      }
    }
    write_text(out_path("localization.csv"), localization_to_csv(records));
    manifest.output_files.push_back(out_path("localization.csv"));
    summary["localization"] = {
        {"median_accuracy_all_m", percentile(acc_all, 50)},
        {"median_accuracy_reps_m", percentile(acc_reps, 50)},
        {"median_precision_all_m2", percentile(prec_all, 50)},
        {"median_precision_reps_m2", percentile(prec_reps, 50)},
        {"p80_precision_reps_m2", percentile(prec_reps, 80)},
        {"empty_zones", empty_zones},
        {"unmatched_true_hts", unmatched},
        {"localized", records.size()}};
  } else {
    throw std::invalid_argument("run_experiment: unknown kind '" + config.kind + "'");
  }

  write_text(out_path("summary.json"), summary.dump(2));
  manifest.output_files.push_back(out_path("summary.json"));

  manifest.status = manifest.seed_errors.empty() ? "complete" : "complete_with_errors";
  manifest.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  write_text(out_path("manifest.json"), manifest.to_json());
  return manifest;
}

}  // namespace airtomo
