#include "airtomo/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "airtomo/rng.hpp"

namespace airtomo {

using nlohmann::json;

std::vector<std::vector<int>> Clustering::members() const {
  std::vector<std::vector<int>> m(K);
  for (int i = 0; i < static_cast<int>(assignment.size()); ++i) m[assignment[i]].push_back(i);
  return m;
}

std::string Clustering::to_json() const {
  json j;
  j["schema"] = 1;
  j["K"] = K;
  j["assignment"] = assignment;
  j["representatives"] = representatives;
  return j.dump(2);
}

Clustering Clustering::from_json(const std::string& text) {
  json j = json::parse(text);
  Clustering c;
  c.K = j.at("K").get<int>();
  c.assignment = j.at("assignment").get<std::vector<int>>();
  c.representatives = j.at("representatives").get<std::vector<int>>();
  return c;
}

bool PairwiseEstimates::has(int i, int j) const {
  return tables.count({std::min(i, j), std::max(i, j)}) > 0;
}

std::array<double, 4> PairwiseEstimates::at(int i, int j) const {
  if (i == j) throw std::invalid_argument("PairwiseEstimates: i == j");
  auto it = tables.find({std::min(i, j), std::max(i, j)});
  if (it == tables.end()) throw std::out_of_range("PairwiseEstimates: missing pair");
  std::array<double, 4> t = it->second;
  if (i > j) {
    std::swap(t[1], t[2]);  // transpose to (i, j) orientation
  }
  return t;
}

void PairwiseEstimates::set(int i, int j, const std::array<double, 4>& table) {
  if (i == j) throw std::invalid_argument("PairwiseEstimates: i == j");
  std::array<double, 4> t = table;
  if (i > j) {
    std::swap(t[1], t[2]);
    std::swap(i, j);
  }
  tables[{i, j}] = t;
}

double PairwiseEstimates::marginal(int i) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& [key, t] : tables) {
    if (key.first == i) {
      sum += t[1] + t[3];
      ++n;
    } else if (key.second == i) {
      sum += t[2] + t[3];
      ++n;
    }
  }
  if (n == 0) throw std::out_of_range("PairwiseEstimates: client absent");
  return sum / n;
}

std::vector<int> PairwiseEstimates::client_ids() const {
  std::vector<int> ids;
  for (const auto& [key, t] : tables) {
    (void)t;
    ids.push_back(key.first);
    ids.push_back(key.second);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::string PairwiseEstimates::to_csv() const {
  std::ostringstream out;
  out << "channel,i,j,p00,p10,p01,p11\n";
  char buf[64];
  for (const auto& [key, t] : tables) {
    out << channel << ',' << key.first << ',' << key.second;
    for (int k = 0; k < 4; ++k) {
      std::snprintf(buf, sizeof(buf), ",%.17g", t[k]);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::vector<AccessVector> measure_first_order(const Topology& t, JointSampler& sampler,
                                              long long frames_per_sample) {
  if (frames_per_sample < 1)
    throw std::invalid_argument("measure_first_order: frames_per_sample >= 1 required");
  std::vector<AccessVector> vectors(t.num_clients());
  for (int i = 0; i < t.num_clients(); ++i) {
    vectors[i].client = i;
    vectors[i].a.assign(t.num_channels, 0.0);
  }
  for (int c = 0; c < t.num_channels; ++c) {
    for (int i = 0; i < t.num_clients(); ++i) {
      const std::vector<double> table = sampler.measure(c, {i}, frames_per_sample);
      vectors[i].a[c] = table[1];
    }
  }
  return vectors;
}

int default_cluster_count(int num_clients, int num_channels) {
  return std::max(2, num_clients / std::max(1, num_channels));
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    d += diff * diff;
  }
  return d;
}

}  // namespace

Clustering cluster_clients(const std::vector<AccessVector>& vectors, int K, std::uint64_t seed) {
  const int n = static_cast<int>(vectors.size());
  if (n == 0) throw std::invalid_argument("cluster_clients: no vectors");
  if (K < 1 || K > n) throw std::invalid_argument("cluster_clients: K outside [1, N]");

  Rng rng(derive_seed(seed, 1));
  std::vector<std::vector<double>> centers;
  centers.reserve(K);

  // Farthest-point init: seeded first pick, then the point farthest from its
  // nearest chosen center (lowest index on ties).
  centers.push_back(vectors[rng.index(n)].a);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < K) {
    int best = -1;
    double best_d = -1.0;
    for (int i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], sq_dist(vectors[i].a, centers.back()));
      if (nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    centers.push_back(vectors[best].a);
  }

  std::vector<int> assign(n, 0);
  const int dims = static_cast<int>(vectors[0].a.size());
  for (int iter = 0; iter < 100; ++iter) {
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(vectors[i].a, centers[0]);
      for (int k = 1; k < K; ++k) {
        const double d = sq_dist(vectors[i].a, centers[k]);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      assign[i] = best;
    }

    std::vector<std::vector<double>> next(K, std::vector<double>(dims, 0.0));
    std::vector<int> size(K, 0);
    for (int i = 0; i < n; ++i) {
      ++size[assign[i]];
      for (int d = 0; d < dims; ++d) next[assign[i]][d] += vectors[i].a[d];
    }
    // Re-seed empty clusters with the point farthest from its own centroid.
    for (int k = 0; k < K; ++k) {
      if (size[k] > 0) continue;
      int worst = -1;
      double worst_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (size[assign[i]] <= 1) continue;
        const double d = sq_dist(vectors[i].a, centers[assign[i]]);
        if (d > worst_d) {
          worst_d = d;
          worst = i;
        }
      }
      if (worst < 0) throw std::runtime_error("cluster_clients: cannot refill empty cluster");
      --size[assign[worst]];
      for (int d = 0; d < dims; ++d) next[assign[worst]][d] -= vectors[worst].a[d];
      assign[worst] = k;
      size[k] = 1;
      next[k] = vectors[worst].a;
    }

    double moved = 0.0;
    for (int k = 0; k < K; ++k) {
      for (int d = 0; d < dims; ++d) next[k][d] /= size[k];
      moved = std::max(moved, sq_dist(next[k], centers[k]));
    }
    centers.swap(next);
    if (std::sqrt(moved) < 1e-6) break;
  }

  // Final assignment against the converged centers.
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double best_d = sq_dist(vectors[i].a, centers[0]);
    for (int k = 1; k < K; ++k) {
      const double d = sq_dist(vectors[i].a, centers[k]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    assign[i] = best;
  }
  // K-means can strand an empty cluster in the final assignment; steal the
  // farthest point so every cluster keeps a representative.
  std::vector<int> size(K, 0);
  for (int a : assign) ++size[a];
  for (int k = 0; k < K; ++k) {
    if (size[k] > 0) continue;
    int worst = -1;
    double worst_d = -1.0;
    for (int i = 0; i < n; ++i) {
      if (size[assign[i]] <= 1) continue;
      const double d = sq_dist(vectors[i].a, centers[assign[i]]);
      if (d > worst_d) {
        worst_d = d;
        worst = i;
      }
    }
    if (worst < 0) throw std::runtime_error("cluster_clients: cannot refill empty cluster");
    --size[assign[worst]];
    assign[worst] = k;
    size[k] = 1;
  }

  Clustering result;
  result.K = K;
  result.assignment = assign;
  result.representatives.assign(K, -1);
  auto groups = result.members();
  for (int k = 0; k < K; ++k) {
    result.representatives[k] = groups[k][rng.index(groups[k].size())];
  }
  return result;
}

std::vector<PairwiseEstimates> measure_pairwise(const Topology& t, const Clustering& clustering,
                                                JointSampler& sampler, long long frames_per_sample) {
  if (clustering.K < 2) throw std::invalid_argument("measure_pairwise: K >= 2 required");
  std::vector<int> reps = clustering.representatives;
  std::sort(reps.begin(), reps.end());
  std::vector<PairwiseEstimates> result(t.num_channels);
  for (int c = 0; c < t.num_channels; ++c) {
    result[c].channel = c;
    for (std::size_t u = 0; u < reps.size(); ++u) {
      for (std::size_t v = u + 1; v < reps.size(); ++v) {
        const std::vector<double> table =
            sampler.measure(c, {reps[u], reps[v]}, frames_per_sample);
        result[c].set(reps[u], reps[v], {table[0], table[1], table[2], table[3]});
      }
    }
  }
  return result;
}

PairwiseEstimates expand_to_clients(const PairwiseEstimates& rep_pairs, const Clustering& clustering,
                                    const std::vector<AccessVector>& vectors) {
  const int n = static_cast<int>(clustering.assignment.size());
  const int c = rep_pairs.channel;
  PairwiseEstimates out;
  out.channel = c;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const int u = clustering.assignment[i];
      const int v = clustering.assignment[j];
      if (u == v) {
        // Co-clustered clients are modelled as blocked together.
        const double a = 0.5 * (vectors[i].a[c] + vectors[j].a[c]);
        out.set(i, j, {1.0 - a, 0.0, 0.0, a});
      } else {
        const int ri = clustering.representatives[u];
        const int rj = clustering.representatives[v];
        const std::array<double, 4> t = rep_pairs.at(ri, rj);
        out.set(i, j, t);
      }
    }
  }
  return out;
}

std::string access_vectors_to_csv(const std::vector<AccessVector>& vectors) {
  std::ostringstream out;
  out << "client";
  if (!vectors.empty()) {
    for (std::size_t c = 0; c < vectors[0].a.size(); ++c) out << ",a" << c;
  }
  out << '\n';
  char buf[64];
  for (const auto& v : vectors) {
    out << v.client;
    for (double a : v.a) {
      std::snprintf(buf, sizeof(buf), ",%.17g", a);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace airtomo
