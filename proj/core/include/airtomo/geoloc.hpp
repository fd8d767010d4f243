#ifndef AIRTOMO_GEOLOC_HPP
#define AIRTOMO_GEOLOC_HPP

#include <optional>
#include <string>
#include <vector>

#include "airtomo/blueprint.hpp"
#include "airtomo/geometry.hpp"
#include "airtomo/topology.hpp"

namespace airtomo {

// Rasterized candidate region for one interferer: inside every impacted
// anchor's disk of radius D, outside every clear anchor's disk, outside the
// BS disk.
struct CandidateZone {
  double cell_size = 1.0;
  double min_x = 0.0;
  double min_y = 0.0;
  int nx = 0;
  int ny = 0;
  std::vector<std::uint8_t> cells;  // row-major, 1 = inside

  bool empty() const;
  double area() const;  // true cells * cell area
  std::optional<Point> centroid() const;
  bool contains(const Point& p) const;          // cell under p is set
  double distance_to(const Point& p) const;     // to nearest set cell center
};

CandidateZone candidate_zone(const std::vector<Point>& impacted_anchors,
                             const std::vector<Point>& clear_anchors, const Point& bs, double D,
                             double cell_size = 1.0);

std::optional<Point> localize(const CandidateZone& zone);

enum class AnchorMode { kRepresentativesOnly, kAllClients };

struct LocalizationRecord {
  std::uint64_t topology_seed = 0;
  int channel = 0;
  int ht_index = 0;       // index of the matched true HT, -1 when unmatched
  double accuracy_m = 0;  // centroid to true HT distance
  double precision_m2 = 0;
  AnchorMode mode = AnchorMode::kRepresentativesOnly;
};

struct LocalizationBatch {
  std::vector<LocalizationRecord> records;
  int empty_zones = 0;     // inferred HTs whose zone vanished
  int unmatched_true = 0;  // true impacting HTs with no inferred partner
};

// Builds one zone per inferred HT from the blueprint, localizes it, and
// scores accuracy against the true HTs via greedy one-to-one
// nearest-centroid matching. D defaults to the topology's impact radius.
LocalizationBatch evaluate_localization(const Topology& t, int channel,
                                        const BlueprintResult& result, AnchorMode mode,
                                        double D = -1.0, double cell_size = 1.0);

std::string localization_to_csv(const std::vector<LocalizationRecord>& records);

}  // namespace airtomo

#endif  // AIRTOMO_GEOLOC_HPP
