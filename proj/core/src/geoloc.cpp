#include "airtomo/geoloc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace airtomo {

bool CandidateZone::empty() const {
  return std::find(cells.begin(), cells.end(), std::uint8_t{1}) == cells.end();
}

double CandidateZone::area() const {
  long long n = 0;
  for (std::uint8_t c : cells) n += c;
  return static_cast<double>(n) * cell_size * cell_size;
}

std::optional<Point> CandidateZone::centroid() const {
  double sx = 0.0, sy = 0.0;
  long long n = 0;
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      if (cells[static_cast<std::size_t>(iy) * nx + ix]) {
        sx += min_x + (ix + 0.5) * cell_size;
        sy += min_y + (iy + 0.5) * cell_size;
        ++n;
      }
    }
  }
  if (n == 0) return std::nullopt;
  return Point{sx / n, sy / n};
}

bool CandidateZone::contains(const Point& p) const {
  const int ix = static_cast<int>(std::floor((p.x - min_x) / cell_size));
  const int iy = static_cast<int>(std::floor((p.y - min_y) / cell_size));
  if (ix < 0 || iy < 0 || ix >= nx || iy >= ny) return false;
  return cells[static_cast<std::size_t>(iy) * nx + ix] != 0;
}

double CandidateZone::distance_to(const Point& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      if (!cells[static_cast<std::size_t>(iy) * nx + ix]) continue;
      const Point c{min_x + (ix + 0.5) * cell_size, min_y + (iy + 0.5) * cell_size};
      best = std::min(best, distance(c, p));
    }
  }
  return best;
}

CandidateZone candidate_zone(const std::vector<Point>& impacted_anchors,
                             const std::vector<Point>& clear_anchors, const Point& bs, double D,
                             double cell_size) {
  if (impacted_anchors.empty())
    throw std::invalid_argument("candidate_zone: at least one impacted anchor required");
  if (D <= 0.0 || cell_size <= 0.0)
    throw std::invalid_argument("candidate_zone: D and cell size must be positive");

  // The zone lies inside every impacted disk, so the tightest impacted
  // bounding box bounds the raster.
  double lo_x = -std::numeric_limits<double>::infinity();
  double hi_x = std::numeric_limits<double>::infinity();
  double lo_y = lo_x, hi_y = hi_x;
  for (const Point& a : impacted_anchors) {
    lo_x = std::max(lo_x, a.x - D);
    hi_x = std::min(hi_x, a.x + D);
    lo_y = std::max(lo_y, a.y - D);
    hi_y = std::min(hi_y, a.y + D);
  }

  CandidateZone z;
  z.cell_size = cell_size;
  z.min_x = std::floor(lo_x / cell_size) * cell_size;
  z.min_y = std::floor(lo_y / cell_size) * cell_size;
  z.nx = std::max(0, static_cast<int>(std::ceil((hi_x - z.min_x) / cell_size)));
  z.ny = std::max(0, static_cast<int>(std::ceil((hi_y - z.min_y) / cell_size)));
  z.cells.assign(static_cast<std::size_t>(z.nx) * z.ny, 0);

  const double D2 = D * D;
  for (int iy = 0; iy < z.ny; ++iy) {
    const double cy = z.min_y + (iy + 0.5) * cell_size;
    for (int ix = 0; ix < z.nx; ++ix) {
      const double cx = z.min_x + (ix + 0.5) * cell_size;
      const Point c{cx, cy};
      bool inside = true;
      for (const Point& a : impacted_anchors) {
        if (squared_distance(c, a) >= D2) {
          inside = false;
          break;
        }
      }
      if (inside && squared_distance(c, bs) < D2) inside = false;
      if (inside) {
        for (const Point& a : clear_anchors) {
          if (squared_distance(c, a) < D2) {
            inside = false;
            break;
          }
        }
      }
      if (inside) z.cells[static_cast<std::size_t>(iy) * z.nx + ix] = 1;
    }
  }
  return z;
}

std::optional<Point> localize(const CandidateZone& zone) { return zone.centroid(); }

LocalizationBatch evaluate_localization(const Topology& t, int channel,
                                        const BlueprintResult& result, AnchorMode mode,
                                        double D, double cell_size) {
  if (D <= 0.0) D = t.hts.empty() ? 50.0 : t.hts[0].impact_radius;

  LocalizationBatch batch;
  const auto impacted_sets = impacted_clients(result.blueprint, result.clusters);

  // One zone + centroid per inferred HT.
  std::vector<std::optional<Point>> centroids;
  std::vector<double> areas;
  for (std::size_t k = 0; k < result.blueprint.hts.size(); ++k) {
    std::vector<Point> impacted, clear;
    if (mode == AnchorMode::kRepresentativesOnly) {
      const auto& members = result.blueprint.hts[k].members;
      for (int rep : result.clusters.representatives) {
        const bool in = std::find(members.begin(), members.end(), rep) != members.end();
        (in ? impacted : clear).push_back(t.clients[rep].position);
      }
    } else {
      const auto& clients = impacted_sets[k];
      for (int i = 0; i < t.num_clients(); ++i) {
        const bool in = std::binary_search(clients.begin(), clients.end(), i);
        (in ? impacted : clear).push_back(t.clients[i].position);
      }
    }
    const CandidateZone zone = candidate_zone(impacted, clear, t.bs_position, D, cell_size);
    const auto c = zone.centroid();
    if (!c) ++batch.empty_zones;
    centroids.push_back(c);
    areas.push_back(zone.area());
  }

  // Greedy nearest-centroid one-to-one matching against true impacting HTs.
  std::vector<int> true_hts;
  for (int h = 0; h < t.num_hts(); ++h) {
    if (!t.hts[h].active_on(channel)) continue;
    bool impacts = false;
    for (int i = 0; i < t.num_clients() && !impacts; ++i) impacts = t.covers(h, i, channel);
    if (impacts) true_hts.push_back(h);
  }
  std::vector<bool> true_used(true_hts.size(), false);
  std::vector<bool> inferred_used(centroids.size(), false);
  while (true) {
    double best_d = std::numeric_limits<double>::infinity();
    int best_k = -1, best_h = -1;
    for (std::size_t k = 0; k < centroids.size(); ++k) {
      if (inferred_used[k] || !centroids[k]) continue;
      for (std::size_t h = 0; h < true_hts.size(); ++h) {
        if (true_used[h]) continue;
        const double d = distance(*centroids[k], t.hts[true_hts[h]].position);
        if (d < best_d) {
          best_d = d;
          best_k = static_cast<int>(k);
          best_h = static_cast<int>(h);
        }
      }
    }
    if (best_k < 0) break;
    inferred_used[best_k] = true;
    true_used[best_h] = true;
    LocalizationRecord rec;
    rec.topology_seed = t.seed;
    rec.channel = channel;
    rec.ht_index = true_hts[best_h];
    rec.accuracy_m = best_d;
    rec.precision_m2 = areas[best_k];
    rec.mode = mode;
    batch.records.push_back(rec);
  }
  for (bool used : true_used) {
    if (!used) ++batch.unmatched_true;
  }
  return batch;
}

std::string localization_to_csv(const std::vector<LocalizationRecord>& records) {
  std::ostringstream out;
  out << "topology_seed,channel,ht_index,accuracy_m,precision_m2,mode\n";
  char buf[96];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%llu,%d,%d,%.17g,%.17g,%s\n",
                  static_cast<unsigned long long>(r.topology_seed), r.channel, r.ht_index,
                  r.accuracy_m, r.precision_m2,
                  r.mode == AnchorMode::kAllClients ? "all" : "reps");
    out << buf;
  }
  return out.str();
}

}  // namespace airtomo
