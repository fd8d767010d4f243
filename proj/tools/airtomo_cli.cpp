// Command-line front-end for the tomography pipeline: topology generation,
// measurement, model fitting, interference blueprinting, localization,
// scheduling episodes, experiment protocols, and overhead accounting.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "airtomo/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace airtomo;

namespace {

void write_file(const std::string& path, const std::string& content) {
  if (const fs::path p = fs::path(path).parent_path(); !p.empty()) fs::create_directories(p);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json pairs_to_json(const PairwiseEstimates& p) {
  json tables = json::array();
  for (const auto& [key, t] : p.tables) {
    tables.push_back({{"i", key.first}, {"j", key.second}, {"p", t}});
  }
  return json{{"channel", p.channel}, {"tables", tables}};
}

PairwiseEstimates pairs_from_json(const json& j) {
  PairwiseEstimates p;
  p.channel = j.at("channel").get<int>();
  for (const auto& jt : j.at("tables")) {
    const auto arr = jt.at("p").get<std::array<double, 4>>();
    p.set(jt.at("i").get<int>(), jt.at("j").get<int>(), arr);
  }
  return p;
}

struct MeasurementBundle {
  std::uint64_t topology_seed = 0;
  std::vector<AccessVector> access;
  Clustering clustering;
  std::vector<PairwiseEstimates> rep_pairs;

  std::string to_json() const {
    json j;
    j["schema"] = 1;
    j["topology_seed"] = topology_seed;
    json acc = json::array();
    for (const auto& v : access) acc.push_back({{"client", v.client}, {"a", v.a}});
    j["access"] = acc;
    j["clustering"] = json::parse(clustering.to_json());
    json rp = json::array();
    for (const auto& p : rep_pairs) rp.push_back(pairs_to_json(p));
    j["rep_pairs"] = rp;
    return j.dump(2);
  }

  static MeasurementBundle parse(const std::string& text) {
    json j = json::parse(text);
    MeasurementBundle b;
    b.topology_seed = j.at("topology_seed").get<std::uint64_t>();
    for (const auto& jv : j.at("access")) {
      b.access.push_back({jv.at("client").get<int>(), jv.at("a").get<std::vector<double>>()});
    }
    b.clustering = Clustering::from_json(j.at("clustering").dump());
    for (const auto& jp : j.at("rep_pairs")) b.rep_pairs.push_back(pairs_from_json(jp));
    return b;
  }
};

json clusters_to_json(const HtClusters& c) {
  return json{{"assignment", c.assignment},
              {"members", c.members},
              {"representatives", c.representatives}};
}

HtClusters clusters_from_json(const json& j) {
  HtClusters c;
  c.assignment = j.at("assignment").get<std::vector<int>>();
  c.members = j.at("members").get<std::vector<std::vector<int>>>();
  c.representatives = j.at("representatives").get<std::vector<int>>();
  return c;
}

json graph_to_json(const DependencyGraph& g) {
  json edges = json::array();
  for (const auto& [u, v] : g.edges) edges.push_back({u, v});
  return json{{"vertices", g.vertices}, {"edges", edges}};
}

DependencyGraph graph_from_json(const json& j) {
  DependencyGraph g;
  g.vertices = j.at("vertices").get<std::vector<int>>();
  for (const auto& je : j.at("edges")) g.edges.emplace_back(je[0].get<int>(), je[1].get<int>());
  return g;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"network tomography for shared-spectrum access"};
  app.require_subcommand(1);

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "generate a topology");
  std::uint64_t gen_seed = 1;
  TopologyParams gen_params;
  std::string gen_out = "topology.json";
  gen->add_option("--seed", gen_seed, "topology seed");
  gen->add_option("--clients", gen_params.num_clients, "number of clients");
  gen->add_option("--channels", gen_params.num_channels, "number of channels");
  gen->add_option("--hts", gen_params.num_hts, "number of hidden terminals");
  gen->add_option("--bs-range", gen_params.bs_range, "client placement radius (m)");
  gen->add_option("--impact-radius", gen_params.ht_impact_radius, "HT impact radius (m)");
  gen->add_option("--sense-radius", gen_params.ht_sense_radius, "HT-HT sensing radius (m)");
  gen->add_option("--min-ht-bs", gen_params.min_ht_bs_distance, "minimum HT-BS distance (m)");
  gen->add_option("--out", gen_out, "output file");

  // ---- measure ----
  auto* measure = app.add_subcommand("measure", "run the direct measurement phase");
  std::string measure_topo, measure_out = "measurement";
  long long measure_frames = 1000;
  int measure_k = 0;
  bool measure_exact = false;
  std::uint64_t measure_seed = 1;
  measure->add_option("--topology", measure_topo, "topology json")->required();
  measure->add_option("--frames", measure_frames, "frames per sampling session");
  measure->add_option("--k", measure_k, "cluster count (0 = max(2, N/C))");
  measure->add_flag("--exact", measure_exact, "use the oracle instead of sampling");
  measure->add_option("--seed", measure_seed, "measurement seed");
  measure->add_option("--out", measure_out, "output directory");

  // ---- fit ----
  auto* fit = app.add_subcommand("fit", "fit latent models from a measurement bundle");
  std::string fit_measure, fit_out = "models.json";
  int fit_F = 0;
  std::uint64_t fit_seed = 1;
  fit->add_option("--measure", fit_measure, "measurement bundle json")->required();
  fit->add_option("--F", fit_F, "latent alphabet size (0 = N)");
  fit->add_option("--seed", fit_seed, "fit seed");
  fit->add_option("--out", fit_out, "output file");

  // ---- blueprint ----
  auto* blueprint = app.add_subcommand("blueprint", "infer interference structure from models");
  std::string bp_models, bp_out = "blueprint";
  BlueprintOptions bp_options;
  std::uint64_t bp_seed = 1;
  blueprint->add_option("--models", bp_models, "models json")->required();
  blueprint->add_option("--eps-dep", bp_options.eps_dep, "independence tolerance");
  blueprint->add_option("--eps-ht", bp_options.eps_ht, "conditional blocked threshold");
  blueprint->add_option("--delta", bp_options.delta_margin, "new-HT margin");
  blueprint->add_option("--max-clique", bp_options.max_clique_size, "clique size cap");
  blueprint->add_option("--seed", bp_seed, "representative seed");
  blueprint->add_option("--out", bp_out, "output directory");

  // ---- localize ----
  auto* localize_cmd = app.add_subcommand("localize", "localize inferred HTs");
  std::string loc_topo, loc_bundle, loc_mode = "reps", loc_out = "localization.csv";
  double loc_d = -1.0, loc_cell = 1.0;
  localize_cmd->add_option("--topology", loc_topo, "topology json")->required();
  localize_cmd->add_option("--blueprint", loc_bundle, "blueprint bundle json")->required();
  localize_cmd->add_option("--mode", loc_mode, "anchor mode: reps | all");
  localize_cmd->add_option("--radius", loc_d, "impact range D (m); default: topology's");
  localize_cmd->add_option("--cell", loc_cell, "raster cell size (m)");
  localize_cmd->add_option("--out", loc_out, "output csv");

  // ---- schedule ----
  auto* schedule = app.add_subcommand("schedule", "run a scheduling episode");
  std::string sch_topo, sch_measure, sch_models, sch_policy = "pf", sch_out = "metrics.csv";
  long long sch_frames = 1500;
  int sch_b = 10, sch_m = 1;
  double sch_kappa = 0.05, sch_gain_cap = 2.0;
  std::uint64_t sch_seed = 1;
  schedule->add_option("--topology", sch_topo, "topology json")->required();
  schedule->add_option("--measure", sch_measure, "measurement bundle (aa/jaa/sp)");
  schedule->add_option("--models", sch_models, "models json (jaa/sp)");
  schedule->add_option("--policy", sch_policy, "pf | aa | jaa | sp | oracle");
  schedule->add_option("--frames", sch_frames, "episode frames");
  schedule->add_option("--B", sch_b, "resource blocks per frame");
  schedule->add_option("--M", sch_m, "antennas");
  schedule->add_option("--kappa", sch_kappa, "group-size rate penalty");
  schedule->add_option("--gain-cap", sch_gain_cap, "per-stream gain cap");
  schedule->add_option("--seed", sch_seed, "episode seed");
  schedule->add_option("--out", sch_out, "output csv");

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "run an experiment protocol from a config");
  std::string eval_config, eval_out;
  int eval_num_seeds = -1, eval_threads = -1;
  std::uint64_t eval_seed_base = 0;
  bool eval_has_seed_base = false;
  eval->add_option("--config", eval_config, "experiment config json")->required();
  eval->add_option("--out", eval_out, "output directory override");
  eval->add_option("--num-seeds", eval_num_seeds, "seed count override");
  eval->add_option("--seed", eval_seed_base, "seed base override")
      ->each([&](const std::string&) { eval_has_seed_base = true; });
  eval->add_option("--threads", eval_threads, "worker threads override");

  // ---- overhead ----
  auto* overhead = app.add_subcommand("overhead", "closed-form measurement overhead");
  int ov_clients = 20, ov_channels = 1, ov_k = 0, ov_m = 4;
  long long ov_frames = 1000;
  std::string ov_out;
  overhead->add_option("--clients", ov_clients, "number of clients");
  overhead->add_option("--channels", ov_channels, "number of channels");
  overhead->add_option("--k", ov_k, "cluster count (0 = max(2, N/C))");
  overhead->add_option("--antennas", ov_m, "antennas (oracle group order)");
  overhead->add_option("--frames", ov_frames, "frames per sampling session");
  overhead->add_option("--out", ov_out, "also write csv here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      gen_params.seed = gen_seed;
      const Topology t = generate_topology(gen_params);
      write_file(gen_out, t.to_json() + "\n");
      std::cout << "wrote " << gen_out << " (" << t.num_clients() << " clients, " << t.num_hts()
                << " HTs, " << t.num_channels << " channels)\n";
    } else if (*measure) {
      const Topology t = Topology::load(measure_topo);
      PipelineOptions po;
      po.frames = measure_frames;
      po.K = measure_k;
      po.exact = measure_exact;
      po.seed = measure_seed;
      // Measurement only; the fit happens in `fit`.
      std::unique_ptr<JointSampler> sampler;
      if (po.exact) {
        sampler = std::make_unique<ExactSampler>(t);
      } else {
        sampler = std::make_unique<MonteCarloSampler>(t, derive_seed(po.seed, 10));
      }
      MeasurementBundle bundle;
      bundle.topology_seed = t.seed;
      bundle.access = measure_first_order(t, *sampler, po.frames);
      const int K = po.K > 0 ? po.K
                             : std::min(t.num_clients(),
                                        default_cluster_count(t.num_clients(), t.num_channels));
      bundle.clustering = cluster_clients(bundle.access, K, derive_seed(po.seed, 11));
      if (K >= 2) {
        bundle.rep_pairs = measure_pairwise(t, bundle.clustering, *sampler, po.frames);
      } else {
        bundle.rep_pairs.assign(t.num_channels, PairwiseEstimates{});
        for (int c = 0; c < t.num_channels; ++c) bundle.rep_pairs[c].channel = c;
      }
      fs::create_directories(measure_out);
      write_file((fs::path(measure_out) / "measurement.json").string(), bundle.to_json());
      write_file((fs::path(measure_out) / "access_vectors.csv").string(),
                 access_vectors_to_csv(bundle.access));
      write_file((fs::path(measure_out) / "clustering.json").string(),
                 bundle.clustering.to_json());
      for (const auto& p : bundle.rep_pairs) {
        write_file((fs::path(measure_out) / ("pairwise_ch" + std::to_string(p.channel) + ".csv"))
                       .string(),
                   p.to_csv());
      }
      write_file((fs::path(measure_out) / "ledger.csv").string(), sampler->ledger().to_csv());
      std::cout << "measurement complete: " << sampler->ledger().session_count()
                << " sampling sessions, " << sampler->ledger().total_measurement_frames()
                << " frames\n";
    } else if (*fit) {
      const MeasurementBundle bundle = MeasurementBundle::parse(read_file(fit_measure));
      const int n = static_cast<int>(bundle.access.size());
      json models = json::array();
      for (const auto& rep_pairs : bundle.rep_pairs) {
        const PairwiseEstimates expanded =
            expand_to_clients(rep_pairs, bundle.clustering, bundle.access);
        FitOptions fo;
        fo.F = fit_F;
        fo.seed = derive_seed(fit_seed, 20 + rep_pairs.channel);
        FitReport report;
        const LatentModel model = fit_latent_model(expanded, n, fo, &report);
        json jm = json::parse(model.to_json());
        jm["fit"] = {{"converged", report.converged},
                     {"iterations", report.iterations},
                     {"initial_loss", report.initial_loss},
                     {"final_loss", report.final_loss}};
        models.push_back(jm);
        std::cout << "channel " << rep_pairs.channel << ": loss " << report.initial_loss
                  << " -> " << report.final_loss << " in " << report.iterations
                  << " iterations\n";
      }
      write_file(fit_out, models.dump(2));
    } else if (*blueprint) {
      const json jmodels = json::parse(read_file(bp_models));
      json bundle = json::array();
      fs::create_directories(bp_out);
      for (const auto& jm : jmodels) {
        const LatentModel model = LatentModel::from_json(jm.dump());
        BlueprintOptions bo = bp_options;
        bo.seed = derive_seed(bp_seed, 50);
        const BlueprintResult r = run_blueprint(model, bo);
        json jb;
        jb["channel"] = model.channel;
        jb["clusters"] = clusters_to_json(r.clusters);
        jb["graph"] = graph_to_json(r.graph);
        jb["blueprint"] = json::parse(r.blueprint.to_json());
        bundle.push_back(jb);
        write_file((fs::path(bp_out) / ("edges_ch" + std::to_string(model.channel) + ".csv"))
                       .string(),
                   dependency_edges_to_csv(r.graph));
        std::cout << "channel " << model.channel << ": " << r.blueprint.hts.size()
                  << " inferred HTs\n";
      }
      write_file((fs::path(bp_out) / "blueprint.json").string(), bundle.dump(2));
    } else if (*localize_cmd) {
      const Topology t = Topology::load(loc_topo);
      const json bundle = json::parse(read_file(loc_bundle));
      const AnchorMode mode =
          loc_mode == "all" ? AnchorMode::kAllClients : AnchorMode::kRepresentativesOnly;
      std::vector<LocalizationRecord> records;
      int empty_zones = 0;
      for (const auto& jb : bundle) {
        BlueprintResult r;
        r.clusters = clusters_from_json(jb.at("clusters"));
        r.graph = graph_from_json(jb.at("graph"));
        r.blueprint = InterferenceBlueprint::from_json(jb.at("blueprint").dump());
        const LocalizationBatch batch =
            evaluate_localization(t, jb.at("channel").get<int>(), r, mode, loc_d, loc_cell);
        records.insert(records.end(), batch.records.begin(), batch.records.end());
        empty_zones += batch.empty_zones;
      }
      write_file(loc_out, localization_to_csv(records));
      std::cout << "localized " << records.size() << " HTs (" << empty_zones
                << " empty zones) -> " << loc_out << "\n";
    } else if (*schedule) {
      const Topology t = Topology::load(sch_topo);
      PolicyInputs inputs;
      inputs.rates = make_rate_model(t.num_clients(), sch_m, sch_kappa, sch_gain_cap,
                                     derive_seed(sch_seed, 100));
      const Policy policy = policy_from_name(sch_policy);
      if (policy == Policy::kAa || policy == Policy::kJaa || policy == Policy::kSp) {
        if (sch_measure.empty())
          throw std::runtime_error("--measure required for policy " + sch_policy);
        const MeasurementBundle bundle = MeasurementBundle::parse(read_file(sch_measure));
        inputs.access.assign(t.num_channels, std::vector<double>(t.num_clients(), 0.0));
        for (const auto& v : bundle.access) {
          for (int c = 0; c < t.num_channels; ++c) inputs.access[c][v.client] = v.a[c];
        }
      }
      if (policy == Policy::kJaa || policy == Policy::kSp) {
        if (sch_models.empty())
          throw std::runtime_error("--models required for policy " + sch_policy);
        for (const auto& jm : json::parse(read_file(sch_models))) {
          inputs.models.push_back(LatentModel::from_json(jm.dump()));
        }
      }
      if (policy == Policy::kOracle) {
        for (int c = 0; c < t.num_channels; ++c)
          inputs.supports.push_back(ChannelSim(t, c).exact_support());
      }
      EpisodeConfig ec;
      ec.policy = policy;
      ec.frames = sch_frames;
      ec.B = sch_b;
      ec.M = sch_m;
      ec.seed = derive_seed(sch_seed, 200);
      const EpisodeMetrics m = run_episode(t, inputs, ec);
      std::ostringstream csv;
      csv << "seed,policy,channel_count,antennas,n_hts,n_clients,frame,rbu,cum_throughput\n";
      char buf[64];
      csv << t.seed << ',' << sch_policy << ',' << t.num_channels << ',' << sch_m << ','
          << t.num_hts() << ',' << t.num_clients() << ',' << m.frames;
      std::snprintf(buf, sizeof(buf), ",%.17g", m.rbu);
      csv << buf;
      std::snprintf(buf, sizeof(buf), ",%.17g\n", m.cum_throughput);
      csv << buf;
      write_file(sch_out, csv.str());
      std::cout << "policy " << sch_policy << ": rbu " << m.rbu << ", throughput "
                << m.cum_throughput << "\n";
    } else if (*eval) {
      ExperimentConfig config = ExperimentConfig::load(eval_config);
      if (!eval_out.empty()) config.out_dir = eval_out;
      if (eval_num_seeds >= 0) {
        config.num_seeds = eval_num_seeds;
        config.seeds.clear();
      }
      if (eval_has_seed_base) {
        config.seed_base = eval_seed_base;
        config.seeds.clear();
      }
      if (eval_threads >= 0) config.threads = eval_threads;
      const RunManifest manifest = run_experiment(config);
      std::cout << "experiment " << config.kind << " " << manifest.status << " in "
                << manifest.wall_clock_sec << " s\n";
      for (const auto& f : manifest.output_files) std::cout << "  " << f << "\n";
      if (!manifest.seed_errors.empty()) {
        for (const auto& e : manifest.seed_errors) std::cerr << "  error: " << e << "\n";
        return 2;
      }
    } else if (*overhead) {
      if (ov_k == 0) ov_k = std::max(2, ov_clients / std::max(1, ov_channels));
      const OverheadReport r =
          overhead_report(ov_clients, ov_channels, ov_k, ov_m, ov_frames);
      std::cout << r.to_csv();
      if (!ov_out.empty()) write_file(ov_out, r.to_csv());
    }
  } catch (const std::exception& e) {
    json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
