#include "airtomo/ledger.hpp"

#include <sstream>
#include <stdexcept>

namespace airtomo {

void MeasurementLedger::record_session(int channel, const std::vector<int>& clients,
                                       long long frames,
                                       const std::map<std::uint32_t, long long>& access_counts) {
  Key key{channel, clients};
  Entry& e = entries_[key];
  e.scheduled_frames += frames;
  for (const auto& [pattern, count] : access_counts) {
    if (count < 0) throw std::invalid_argument("ledger: negative count");
    e.access_counts[pattern] += count;
  }
  sessions_ += 1;
  total_frames_ += frames;
}

long long MeasurementLedger::accessed(const Key& key, int client) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return 0;
  int bit = -1;
  for (std::size_t m = 0; m < key.clients.size(); ++m) {
    if (key.clients[m] == client) bit = static_cast<int>(m);
  }
  if (bit < 0) throw std::invalid_argument("ledger: client not in key");
  long long n = 0;
  for (const auto& [pattern, count] : it->second.access_counts) {
    if (pattern & (1u << bit)) n += count;
  }
  return n;
}

void MeasurementLedger::check_invariants() const {
  for (const auto& [key, e] : entries_) {
    long long total = 0;
    for (const auto& [pattern, count] : e.access_counts) {
      (void)pattern;
      if (count < 0) throw std::logic_error("ledger: negative count");
      total += count;
    }
    if (total > e.scheduled_frames)
      throw std::logic_error("ledger: accessed exceeds scheduled");
  }
}

std::string MeasurementLedger::to_csv() const {
  std::ostringstream out;
  out << "channel,client_set,pattern,count\n";
  for (const auto& [key, e] : entries_) {
    std::string set;
    for (std::size_t m = 0; m < key.clients.size(); ++m) {
      if (m) set += ';';
      set += std::to_string(key.clients[m]);
    }
    for (const auto& [pattern, count] : e.access_counts) {
      std::string bits;
      for (std::size_t m = 0; m < key.clients.size(); ++m)
        bits += (pattern & (1u << m)) ? '1' : '0';
      out << key.channel << ',' << set << ',' << bits << ',' << count << '\n';
    }
  }
  return out.str();
}

}  // namespace airtomo
