#include "airtomo/blueprint.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "airtomo/rng.hpp"

namespace airtomo {

using nlohmann::json;

JointAccessVector joint_access_vector(const LatentModel& m, int client) {
  JointAccessVector v;
  v.client = client;
  v.p.resize(m.F);
  for (int f = 0; f < m.F; ++f) v.p[f] = m.lambda[f] * m.p_at(client, f);
  return v;
}

namespace {

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

HtClusters ht_cluster(const LatentModel& m, const BlueprintOptions& options) {
  const int n = m.num_clients;
  std::vector<std::vector<double>> vecs(n);
  for (int i = 0; i < n; ++i) vecs[i] = joint_access_vector(m, i).p;

  std::vector<double> dist(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> all;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = euclidean(vecs[i], vecs[j]);
      dist[static_cast<std::size_t>(i) * n + j] = d;
      dist[static_cast<std::size_t>(j) * n + i] = d;
      all.push_back(d);
    }
  }
  double eps = 0.0;
  if (!all.empty()) {
    std::sort(all.begin(), all.end());
    eps = options.dbscan_eps_factor * all[(all.size() - 1) / 2];
  }

  // DBSCAN; the neighborhood count includes the point itself.
  const int min_pts = options.dbscan_min_pts;
  std::vector<std::vector<int>> neigh(n);
  std::vector<bool> core(n, false);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (dist[static_cast<std::size_t>(i) * n + j] <= eps) neigh[i].push_back(j);
    }
    core[i] = static_cast<int>(neigh[i].size()) >= min_pts;
  }

  std::vector<int> assign(n, -1);
  int next_cluster = 0;
  for (int i = 0; i < n; ++i) {
    if (assign[i] != -1 || !core[i]) continue;
    const int c = next_cluster++;
    std::deque<int> queue{i};
    assign[i] = c;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      if (!core[u]) continue;
      for (int v : neigh[u]) {
        if (assign[v] == -1) {
          assign[v] = c;
          queue.push_back(v);
        }
      }
    }
  }
  // Noise points become singleton clusters.
  for (int i = 0; i < n; ++i) {
    if (assign[i] == -1) assign[i] = next_cluster++;
  }

  HtClusters result;
  result.assignment = assign;
  result.members.resize(next_cluster);
  for (int i = 0; i < n; ++i) result.members[assign[i]].push_back(i);
  Rng rng(derive_seed(options.seed, 3));
  result.representatives.resize(next_cluster);
  for (int c = 0; c < next_cluster; ++c) {
    result.representatives[c] = result.members[c][rng.index(result.members[c].size())];
  }
  return result;
}

bool DependencyGraph::adjacent(int u, int v) const {
  const auto e = std::minmax(u, v);
  return std::find(edges.begin(), edges.end(), std::make_pair(e.first, e.second)) != edges.end();
}

DependencyGraph build_dependency_graph(const LatentModel& m, const std::vector<int>& reps,
                                       double eps_dep) {
  if (reps.empty()) throw std::invalid_argument("build_dependency_graph: no representatives");
  DependencyGraph g;
  g.vertices = reps;
  std::sort(g.vertices.begin(), g.vertices.end());
  for (std::size_t a = 0; a < g.vertices.size(); ++a) {
    for (std::size_t b = a + 1; b < g.vertices.size(); ++b) {
      const int i = g.vertices[a];
      const int j = g.vertices[b];
      const double joint = model_pair(m, i, j)[3];
      const double product = m.access_prob(i) * m.access_prob(j);
      if (std::abs(joint - product) > eps_dep) g.edges.emplace_back(i, j);
    }
  }
  return g;
}

namespace {

// All cliques of the graph with size in [1, max_size], in non-decreasing
// size order, lexicographic within a size.
std::vector<std::vector<int>> enumerate_cliques(const DependencyGraph& g, int max_size) {
  std::vector<std::vector<int>> cliques;
  const std::vector<int>& v = g.vertices;
  const int n = static_cast<int>(v.size());
  std::vector<int> idx;
  for (int size = 1; size <= std::min(max_size, n); ++size) {
    idx.assign(size, 0);
    for (int k = 0; k < size; ++k) idx[k] = k;
    while (true) {
      bool is_clique = true;
      for (int a = 0; a < size && is_clique; ++a) {
        for (int b = a + 1; b < size && is_clique; ++b) {
          if (!g.adjacent(v[idx[a]], v[idx[b]])) is_clique = false;
        }
      }
      if (is_clique) {
        std::vector<int> clique(size);
        for (int k = 0; k < size; ++k) clique[k] = v[idx[k]];
        cliques.push_back(std::move(clique));
      }
      int k = size - 1;
      while (k >= 0 && idx[k] == n - size + k) --k;
      if (k < 0) break;
      ++idx[k];
      for (int l = k + 1; l < size; ++l) idx[l] = idx[l - 1] + 1;
    }
  }
  return cliques;
}

// True when some exact partition of `target` into elements of `groups`
// satisfies the visitor returning true for the product test. The visitor
// receives the list of chosen group indices.
bool any_partition(const std::vector<int>& target, const std::vector<std::vector<int>>& groups,
                   std::vector<int>& chosen,
                   const std::function<bool(const std::vector<int>&)>& accept) {
  if (target.empty()) return accept(chosen);
  const int head = target[0];
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const std::vector<int>& g = groups[gi];
    if (std::find(g.begin(), g.end(), head) == g.end()) continue;
    // The part must be fully contained in the remaining target.
    bool contained = true;
    for (int x : g) {
      if (std::find(target.begin(), target.end(), x) == target.end()) contained = false;
    }
    if (!contained) continue;
    std::vector<int> rest;
    for (int x : target) {
      if (std::find(g.begin(), g.end(), x) == g.end()) rest.push_back(x);
    }
    chosen.push_back(static_cast<int>(gi));
    if (any_partition(rest, groups, chosen, accept)) return true;
    chosen.pop_back();
  }
  return false;
}

}  // namespace

InterferenceBlueprint estimate_hts(const DependencyGraph& graph, const LatentModel& m,
                                   const BlueprintOptions& options) {
  InterferenceBlueprint bp;
  bp.channel = m.channel;
  const std::vector<int>& all = graph.vertices;

  // P(all of `rest` access), shared denominator per clique.
  const auto cond_blocked = [&](const std::vector<int>& blocked_set,
                                const std::vector<int>& rest, double p_rest) {
    std::vector<int> group = rest;
    group.insert(group.end(), blocked_set.begin(), blocked_set.end());
    std::uint32_t mask = (1u << rest.size()) - 1;  // rest listed first, all accessing
    const double joint = query_mask(m, group, mask);
    return joint / p_rest;
  };

  std::vector<std::vector<int>> found;

  for (const std::vector<int>& q : enumerate_cliques(graph, options.max_clique_size)) {
    // Duplicate groups are never added twice.
    if (std::find(found.begin(), found.end(), q) != found.end()) continue;

    std::vector<int> rest;
    std::set_difference(all.begin(), all.end(), q.begin(), q.end(), std::back_inserter(rest));
    const double p_rest = rest.empty() ? 1.0 : query_mask(m, rest, (1u << rest.size()) - 1);
    if (p_rest < options.eps_cond) {
      bp.skipped_cliques.push_back(q);
      continue;
    }
    const double cond_q = cond_blocked(q, rest, p_rest);
    if (cond_q <= options.eps_ht) continue;

    std::vector<int> chosen;
    const bool explained = any_partition(q, found, chosen, [&](const std::vector<int>& parts) {
      double product = 1.0;
      for (int gi : parts) product *= cond_blocked(found[gi], rest, p_rest);
      return cond_q <= (1.0 + options.delta_margin) * product;
    });
    if (explained) continue;

    found.push_back(q);
    bp.hts.push_back({q, cond_q});
  }
  return bp;
}

BlueprintResult run_blueprint(const LatentModel& m, const BlueprintOptions& options) {
  BlueprintResult r;
  r.clusters = ht_cluster(m, options);
  r.graph = build_dependency_graph(m, r.clusters.representatives, options.eps_dep);
  r.blueprint = estimate_hts(r.graph, m, options);
  return r;
}

std::vector<std::vector<int>> impacted_clients(const InterferenceBlueprint& bp,
                                               const HtClusters& clusters) {
  std::vector<std::vector<int>> out;
  for (const InferredHt& ht : bp.hts) {
    std::vector<int> clients;
    for (int rep : ht.members) {
      const int c = clusters.assignment[rep];
      clients.insert(clients.end(), clusters.members[c].begin(), clusters.members[c].end());
    }
    std::sort(clients.begin(), clients.end());
    clients.erase(std::unique(clients.begin(), clients.end()), clients.end());
    out.push_back(std::move(clients));
  }
  return out;
}

bool count_hit(const InterferenceBlueprint& bp, const Topology& t, int channel) {
  return static_cast<int>(bp.hts.size()) == t.impacting_ht_count(channel);
}

std::string InterferenceBlueprint::to_json() const {
  json j;
  j["schema"] = 1;
  j["channel"] = channel;
  j["hts"] = json::array();
  for (std::size_t k = 0; k < hts.size(); ++k) {
    j["hts"].push_back({{"ht_index", k},
                        {"member_clients", hts[k].members},
                        {"cond_blocked_prob", hts[k].cond_blocked_prob}});
  }
  j["skipped_cliques"] = skipped_cliques;
  return j.dump(2);
}

InterferenceBlueprint InterferenceBlueprint::from_json(const std::string& text) {
  json j = json::parse(text);
  InterferenceBlueprint bp;
  bp.channel = j.at("channel").get<int>();
  for (const auto& jh : j.at("hts")) {
    InferredHt ht;
    ht.members = jh.at("member_clients").get<std::vector<int>>();
    ht.cond_blocked_prob = jh.at("cond_blocked_prob").get<double>();
    bp.hts.push_back(std::move(ht));
  }
  if (j.contains("skipped_cliques"))
    bp.skipped_cliques = j.at("skipped_cliques").get<std::vector<std::vector<int>>>();
  return bp;
}

std::string dependency_edges_to_csv(const DependencyGraph& g) {
  std::ostringstream out;
  out << "u,v\n";
  for (const auto& [u, v] : g.edges) out << u << ',' << v << '\n';
  return out.str();
}

}  // namespace airtomo
