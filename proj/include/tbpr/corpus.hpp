#pragma once

// Implicit-feedback corpora: ingestion of (user, item, review) records,
// activity filtering, per-user train/valid/test splits and dataset
// statistics.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace tbpr {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;

struct Interaction {
  std::string user_token;
  std::string item_token;
  std::string review_text;
};

struct ReadResult {
  std::vector<Interaction> records;
  std::size_t skipped = 0;
};

// Newline-delimited JSON objects with "reviewerID", "asin" and optionally
// "reviewText". Unknown fields are ignored; undecodable lines are skipped
// and counted.
ReadResult read_json_lines(std::istream& in);

// Tab-separated "user<TAB>item[<TAB>review]" lines.
ReadResult read_tsv(std::istream& in);

// Binary user x item feedback with the review text attached to each positive.
// Ids are dense and assigned in order of first appearance.
struct Dataset {
  std::vector<std::string> user_tokens;
  std::vector<std::string> item_tokens;
  // positives[u] is N_u, sorted ascending.
  std::vector<std::vector<ItemId>> positives;
  // reviews[u][k] belongs to the pair (u, positives[u][k]).
  std::vector<std::vector<std::string>> reviews;
  // Records rejected during ingest (empty user or item token).
  std::size_t skipped_records = 0;

  std::size_t user_count() const { return user_tokens.size(); }
  std::size_t item_count() const { return item_tokens.size(); }
  std::size_t feedback_count() const;

  bool is_positive(UserId u, ItemId i) const;
  std::vector<std::size_t> item_feedback_counts() const;

  // Token -> id lookups; linear scan, meant for CLI use only.
  std::ptrdiff_t find_user(const std::string& token) const;
  std::ptrdiff_t find_item(const std::string& token) const;
};

Dataset ingest(const std::vector<Interaction>& records);

// Drops users with fewer than k positives (one pass, users only), then
// removes items left without feedback and compacts ids preserving order.
Dataset filter_min_activity(const Dataset& d, std::size_t k);

struct UserSplit {
  std::vector<ItemId> train;
  std::vector<ItemId> valid;
  std::vector<ItemId> test;
};

// Per-user partition of N_u. All three lists are sorted ascending.
struct Split {
  std::vector<UserSplit> users;

  std::size_t user_count() const { return users.size(); }
  std::size_t train_size() const;
};

inline constexpr std::size_t kTestPerUser = 2;
inline constexpr std::size_t kValidPerUser = 2;
inline constexpr std::size_t kMinPositivesForSplit =
    kTestPerUser + kValidPerUser + 1;

// Samples two test and two validation items per user uniformly without
// replacement; the rest go to training. Requires |N_u| >= 5 for every user.
Split split(const Dataset& d, std::uint64_t seed);

struct StatsReport {
  std::size_t user_count = 0;
  std::size_t item_count = 0;
  std::size_t feedback_count = 0;
  std::size_t word_count = 0;
  std::size_t cold_user_count = 0;
  std::size_t cold_item_count = 0;
  double density = 0.0;  // fraction, not percent
};

inline constexpr std::size_t kDefaultColdThreshold = 7;

StatsReport stats(const Dataset& d,
                  std::size_t cold_threshold = kDefaultColdThreshold);

// One header line and one data row, column names as in the usual dataset
// statistics table. Density is printed in percent.
void write_stats_csv(std::ostream& out, const std::string& dataset_name,
                     const StatsReport& report);

}  // namespace tbpr
