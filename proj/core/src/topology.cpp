#include "airtomo/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "airtomo/rng.hpp"

namespace airtomo {

using nlohmann::json;

bool HiddenTerminal::active_on(int channel) const {
  return std::binary_search(active_channels.begin(), active_channels.end(), channel);
}

bool Topology::covers(int ht, int client, int channel) const {
  const HiddenTerminal& h = hts[ht];
  if (!h.active_on(channel)) return false;
  const double r = h.impact_radius;
  return squared_distance(h.position, clients[client].position) < r * r;
}

bool Topology::hts_sense(int ht1, int ht2, int channel) const {
  if (ht1 == ht2) return false;
  const HiddenTerminal& a = hts[ht1];
  const HiddenTerminal& b = hts[ht2];
  if (!a.active_on(channel) || !b.active_on(channel)) return false;
  return squared_distance(a.position, b.position) < ht_sense_radius * ht_sense_radius;
}

std::vector<int> Topology::active_hts(int channel) const {
  std::vector<int> ids;
  for (const auto& h : hts) {
    if (h.active_on(channel)) ids.push_back(h.id);
  }
  return ids;
}

int Topology::impacting_ht_count(int channel) const {
  int count = 0;
  for (int h = 0; h < num_hts(); ++h) {
    if (!hts[h].active_on(channel)) continue;
    for (int i = 0; i < num_clients(); ++i) {
      if (covers(h, i, channel)) {
        ++count;
        break;
      }
    }
  }
  return count;
}

void Topology::validate() const {
  if (num_channels < 1) throw std::invalid_argument("topology: num_channels < 1");
  for (int i = 0; i < num_clients(); ++i) {
    const Client& c = clients[i];
    if (c.id != i) throw std::invalid_argument("topology: client ids not dense");
    if (!std::isfinite(c.position.x) || !std::isfinite(c.position.y))
      throw std::invalid_argument("topology: non-finite client position");
    if (distance(c.position, bs_position) > bs_range + 1e-9)
      throw std::invalid_argument("topology: client outside bs_range");
  }
  for (int h = 0; h < num_hts(); ++h) {
    const HiddenTerminal& ht = hts[h];
    if (ht.id != h) throw std::invalid_argument("topology: HT ids not dense");
    if (ht.impact_radius <= 0.0) throw std::invalid_argument("topology: impact_radius <= 0");
    if (static_cast<int>(ht.transmit_prob.size()) != num_channels)
      throw std::invalid_argument("topology: transmit_prob length != num_channels");
    for (double q : ht.transmit_prob) {
      if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("topology: transmit_prob outside [0,1]");
    }
    if (ht.active_channels.empty())
      throw std::invalid_argument("topology: HT with no active channel");
    for (int c : ht.active_channels) {
      if (c < 0 || c >= num_channels) throw std::invalid_argument("topology: active channel out of range");
    }
    if (distance(ht.position, bs_position) < min_ht_bs_distance - 1e-9)
      throw std::invalid_argument("topology: HT closer to BS than min_ht_bs_distance");
  }
}

Topology generate_topology(const TopologyParams& params) {
  if (params.num_clients < 1) throw std::invalid_argument("generate_topology: N >= 1 required");
  if (params.num_channels < 1) throw std::invalid_argument("generate_topology: C >= 1 required");
  if (params.num_hts < 0) throw std::invalid_argument("generate_topology: negative HT count");
  if (params.bs_range <= 0.0) throw std::invalid_argument("generate_topology: bs_range <= 0");
  if (params.ht_impact_radius <= 0.0) throw std::invalid_argument("generate_topology: impact_radius <= 0");

  Topology t;
  t.bs_position = {0.0, 0.0};
  t.bs_range = params.bs_range;
  t.num_channels = params.num_channels;
  t.ht_sense_radius = params.ht_sense_radius;
  t.min_ht_bs_distance = params.min_ht_bs_distance;
  t.seed = params.seed;

  Rng rng(derive_seed(params.seed, 0));

  // Clients uniform over the BS disk.
  for (int i = 0; i < params.num_clients; ++i) {
    const double r = params.bs_range * std::sqrt(rng.unit());
    const double theta = 2.0 * M_PI * rng.unit();
    t.clients.push_back({i, {r * std::cos(theta), r * std::sin(theta)}});
  }

  // HTs uniform over the annulus [min_ht_bs_distance, max_ht_bs_distance],
  // by rejection from the outer disk.
  const double outer = params.max_ht_bs_distance > 0.0
                           ? params.max_ht_bs_distance
                           : params.bs_range + params.ht_impact_radius;
  if (params.min_ht_bs_distance >= outer && params.num_hts > 0)
    throw std::invalid_argument("generate_topology: min_ht_bs_distance >= placement-region radius");

  for (int h = 0; h < params.num_hts; ++h) {
    Point pos;
    bool placed = false;
    for (int attempt = 0; attempt < params.max_placement_attempts; ++attempt) {
      const double x = rng.range(-outer, outer);
      const double y = rng.range(-outer, outer);
      const double d2 = x * x + y * y;
      if (d2 <= outer * outer && d2 >= params.min_ht_bs_distance * params.min_ht_bs_distance) {
        pos = {x, y};
        placed = true;
        break;
      }
    }
    if (!placed)
      throw std::runtime_error("generate_topology: HT placement rejection sampling exhausted");

    HiddenTerminal ht;
    ht.id = h;
    ht.position = pos;
    ht.impact_radius = params.ht_impact_radius;

    // Non-empty uniform subset of channels.
    const int c = params.num_channels;
    if (c == 1) {
      ht.active_channels = {0};
    } else {
      std::uint64_t mask = 0;
      // Uniform over non-empty subsets: redraw the (rare) empty mask.
      do {
        mask = rng.next() & ((1ULL << c) - 1);
      } while (mask == 0);
      for (int ch = 0; ch < c; ++ch) {
        if (mask & (1ULL << ch)) ht.active_channels.push_back(ch);
      }
    }

    ht.transmit_prob.assign(c, 0.0);
    if (params.shared_transmit_prob) {
      const double q = rng.range(params.transmit_prob_lo, params.transmit_prob_hi);
      for (int ch : ht.active_channels) ht.transmit_prob[ch] = q;
    } else {
      for (int ch : ht.active_channels)
        ht.transmit_prob[ch] = rng.range(params.transmit_prob_lo, params.transmit_prob_hi);
    }
    t.hts.push_back(std::move(ht));
  }

  t.validate();
  return t;
}

std::vector<std::vector<int>> coverage_map(const Topology& t, int channel) {
  if (channel < 0 || channel >= t.num_channels)
    throw std::invalid_argument("coverage_map: channel out of range");
  std::vector<std::vector<int>> cov(t.num_clients());
  for (int i = 0; i < t.num_clients(); ++i) {
    for (int h = 0; h < t.num_hts(); ++h) {
      if (t.covers(h, i, channel)) cov[i].push_back(h);
    }
  }
  return cov;
}

namespace {

json point_to_json(const Point& p) { return json{{"x", p.x}, {"y", p.y}}; }
Point point_from_json(const json& j) { return {j.at("x").get<double>(), j.at("y").get<double>()}; }

}  // namespace

std::string Topology::to_json() const {
  json j;
  j["schema"] = 1;
  j["bs_position"] = point_to_json(bs_position);
  j["bs_range"] = bs_range;
  j["num_channels"] = num_channels;
  j["ht_sense_radius"] = ht_sense_radius;
  j["min_ht_bs_distance"] = min_ht_bs_distance;
  j["seed"] = seed;
  j["clients"] = json::array();
  for (const auto& c : clients) {
    j["clients"].push_back({{"id", c.id}, {"position", point_to_json(c.position)}});
  }
  j["hts"] = json::array();
  for (const auto& h : hts) {
    j["hts"].push_back({{"id", h.id},
                        {"position", point_to_json(h.position)},
                        {"transmit_prob", h.transmit_prob},
                        {"impact_radius", h.impact_radius},
                        {"active_channels", h.active_channels}});
  }
  return j.dump(2);
}

Topology Topology::from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.at("schema").get<int>() != 1)
    throw std::runtime_error("topology: unsupported schema version");
  Topology t;
  t.bs_position = point_from_json(j.at("bs_position"));
  t.bs_range = j.at("bs_range").get<double>();
  t.num_channels = j.at("num_channels").get<int>();
  t.ht_sense_radius = j.at("ht_sense_radius").get<double>();
  t.min_ht_bs_distance = j.at("min_ht_bs_distance").get<double>();
  t.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& jc : j.at("clients")) {
    t.clients.push_back({jc.at("id").get<int>(), point_from_json(jc.at("position"))});
  }
  for (const auto& jh : j.at("hts")) {
    HiddenTerminal h;
    h.id = jh.at("id").get<int>();
    h.position = point_from_json(jh.at("position"));
    h.transmit_prob = jh.at("transmit_prob").get<std::vector<double>>();
    h.impact_radius = jh.at("impact_radius").get<double>();
    h.active_channels = jh.at("active_channels").get<std::vector<int>>();
    t.hts.push_back(std::move(h));
  }
  t.validate();
  return t;
}

void Topology::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("topology: cannot open " + path + " for writing");
  out << to_json() << "\n";
}

Topology Topology::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("topology: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace airtomo
