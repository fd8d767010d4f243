#ifndef AIRTOMO_LEDGER_HPP
#define AIRTOMO_LEDGER_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace airtomo {

// Overhead accounting for the measurement phases. One "sampling unit" is a
// scheduling session of one client set on one channel; each session also
// contributes its frame count to the total.
class MeasurementLedger {
 public:
  struct Key {
    int channel;
    std::vector<int> clients;  // ascending
    bool operator<(const Key& o) const {
      if (channel != o.channel) return channel < o.channel;
      return clients < o.clients;
    }
  };

  struct Entry {
    long long scheduled_frames = 0;
    // pattern -> count; bit m set means the m-th client (ascending order)
    // accessed the channel that frame.
    std::map<std::uint32_t, long long> access_counts;
  };

  void record_session(int channel, const std::vector<int>& clients, long long frames,
                      const std::map<std::uint32_t, long long>& access_counts);

  long long session_count() const { return sessions_; }
  long long total_measurement_frames() const { return total_frames_; }
  const std::map<Key, Entry>& entries() const { return entries_; }

  // accessed count for one client of a session (sum of patterns with its bit set)
  long long accessed(const Key& key, int client) const;

  void check_invariants() const;  // accessed <= scheduled for every key

  // CSV columns: channel, client_set, pattern, count
  std::string to_csv() const;

 private:
  std::map<Key, Entry> entries_;
  long long sessions_ = 0;
  long long total_frames_ = 0;
};

}  // namespace airtomo

#endif  // AIRTOMO_LEDGER_HPP
