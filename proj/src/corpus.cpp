#include "tbpr/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>

#include <nlohmann/json.hpp>

#include "tbpr/error.hpp"
#include "tbpr/textfeat.hpp"

namespace tbpr {

namespace {

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

ReadResult read_json_lines(std::istream& in) {
  ReadResult result;
  std::string line;
  while (std::getline(in, line)) {
    if (is_blank(line)) continue;
    auto obj = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (!obj.is_object()) {
      ++result.skipped;
      continue;
    }
    auto user = obj.find("reviewerID");
    auto item = obj.find("asin");
    if (user == obj.end() || item == obj.end() || !user->is_string() ||
        !item->is_string()) {
      ++result.skipped;
      continue;
    }
    Interaction rec{user->get<std::string>(), item->get<std::string>(), {}};
    if (auto text = obj.find("reviewText"); text != obj.end()) {
      if (!text->is_string()) {
        ++result.skipped;
        continue;
      }
      rec.review_text = text->get<std::string>();
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

ReadResult read_tsv(std::istream& in) {
  ReadResult result;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    auto t1 = line.find('\t');
    if (t1 == std::string::npos) {
      ++result.skipped;
      continue;
    }
    auto t2 = line.find('\t', t1 + 1);
    Interaction rec;
    rec.user_token = line.substr(0, t1);
    if (t2 == std::string::npos) {
      rec.item_token = line.substr(t1 + 1);
    } else {
      rec.item_token = line.substr(t1 + 1, t2 - t1 - 1);
      rec.review_text = line.substr(t2 + 1);
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

std::size_t Dataset::feedback_count() const {
  std::size_t n = 0;
  for (const auto& p : positives) n += p.size();
  return n;
}

bool Dataset::is_positive(UserId u, ItemId i) const {
  const auto& p = positives[u];
  return std::binary_search(p.begin(), p.end(), i);
}

std::vector<std::size_t> Dataset::item_feedback_counts() const {
  std::vector<std::size_t> counts(item_count(), 0);
  for (const auto& p : positives)
    for (ItemId i : p) ++counts[i];
  return counts;
}

std::ptrdiff_t Dataset::find_user(const std::string& token) const {
  auto it = std::find(user_tokens.begin(), user_tokens.end(), token);
  return it == user_tokens.end() ? -1 : it - user_tokens.begin();
}

std::ptrdiff_t Dataset::find_item(const std::string& token) const {
  auto it = std::find(item_tokens.begin(), item_tokens.end(), token);
  return it == item_tokens.end() ? -1 : it - item_tokens.begin();
}

Dataset ingest(const std::vector<Interaction>& records) {
  Dataset d;
  std::unordered_map<std::string, UserId> user_ids;
  std::unordered_map<std::string, ItemId> item_ids;
  // Per user: item -> review, ordered by item id.
  std::vector<std::map<ItemId, std::string>> pairs;

  for (const auto& rec : records) {
    if (rec.user_token.empty() || rec.item_token.empty()) {
      ++d.skipped_records;
      continue;
    }
    auto [uit, new_user] = user_ids.try_emplace(
        rec.user_token, static_cast<UserId>(d.user_tokens.size()));
    if (new_user) {
      d.user_tokens.push_back(rec.user_token);
      pairs.emplace_back();
    }
    auto [iit, new_item] = item_ids.try_emplace(
        rec.item_token, static_cast<ItemId>(d.item_tokens.size()));
    if (new_item) d.item_tokens.push_back(rec.item_token);

    auto [pit, fresh] = pairs[uit->second].try_emplace(iit->second,
                                                       rec.review_text);
    if (!fresh) {
      pit->second += ' ';
      pit->second += rec.review_text;
    }
  }

  d.positives.resize(pairs.size());
  d.reviews.resize(pairs.size());
  for (std::size_t u = 0; u < pairs.size(); ++u) {
    for (auto& [item, text] : pairs[u]) {
      d.positives[u].push_back(item);
      d.reviews[u].push_back(std::move(text));
    }
  }
  return d;
}

Dataset filter_min_activity(const Dataset& d, std::size_t k) {
  if (k < 1) throw ContractError("filter_min_activity: k must be >= 1");

  std::vector<UserId> kept_users;
  std::vector<bool> item_used(d.item_count(), false);
  for (UserId u = 0; u < d.user_count(); ++u) {
    if (d.positives[u].size() < k) continue;
    kept_users.push_back(u);
    for (ItemId i : d.positives[u]) item_used[i] = true;
  }

  constexpr ItemId kDropped = static_cast<ItemId>(-1);
  std::vector<ItemId> remap(d.item_count(), kDropped);
  Dataset out;
  out.skipped_records = d.skipped_records;
  for (ItemId i = 0; i < d.item_count(); ++i) {
    if (!item_used[i]) continue;
    remap[i] = static_cast<ItemId>(out.item_tokens.size());
    out.item_tokens.push_back(d.item_tokens[i]);
  }
  for (UserId u : kept_users) {
    out.user_tokens.push_back(d.user_tokens[u]);
    std::vector<ItemId> items;
    items.reserve(d.positives[u].size());
    // remap is monotone, so sorted order survives.
    for (ItemId i : d.positives[u]) items.push_back(remap[i]);
    out.positives.push_back(std::move(items));
    out.reviews.push_back(d.reviews[u]);
  }
  return out;
}

std::size_t Split::train_size() const {
  std::size_t n = 0;
  for (const auto& s : users) n += s.train.size();
  return n;
}

Split split(const Dataset& d, std::uint64_t seed) {
  Split out;
  out.users.resize(d.user_count());
  std::mt19937_64 rng(seed);
  for (UserId u = 0; u < d.user_count(); ++u) {
    std::vector<ItemId> items = d.positives[u];
    if (items.size() < kMinPositivesForSplit) {
      throw ContractError("split: user '" + d.user_tokens[u] + "' has " +
                          std::to_string(items.size()) +
                          " positives, at least " +
                          std::to_string(kMinPositivesForSplit) + " required");
    }
    // Partial Fisher-Yates: the first four slots become test, test, valid,
    // valid.
    const std::size_t held_out = kTestPerUser + kValidPerUser;
    for (std::size_t k = 0; k < held_out; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, items.size() - 1);
      std::swap(items[k], items[pick(rng)]);
    }
    auto& s = out.users[u];
    s.test.assign(items.begin(), items.begin() + kTestPerUser);
    s.valid.assign(items.begin() + kTestPerUser, items.begin() + held_out);
    s.train.assign(items.begin() + held_out, items.end());
    std::sort(s.test.begin(), s.test.end());
    std::sort(s.valid.begin(), s.valid.end());
    std::sort(s.train.begin(), s.train.end());
  }
  return out;
}

StatsReport stats(const Dataset& d, std::size_t cold_threshold) {
  if (cold_threshold < 1) throw ContractError("stats: cold_threshold must be >= 1");
  StatsReport r;
  r.user_count = d.user_count();
  r.item_count = d.item_count();
  r.feedback_count = d.feedback_count();
  for (const auto& p : d.positives)
    if (p.size() < cold_threshold) ++r.cold_user_count;
  for (std::size_t c : d.item_feedback_counts())
    if (c < cold_threshold) ++r.cold_item_count;
  for (const auto& texts : d.reviews)
    for (const auto& t : texts) r.word_count += tokenize(t).size();
  if (r.user_count > 0 && r.item_count > 0) {
    r.density = static_cast<double>(r.feedback_count) /
                (static_cast<double>(r.user_count) *
                 static_cast<double>(r.item_count));
  }
  return r;
}

void write_stats_csv(std::ostream& out, const std::string& dataset_name,
                     const StatsReport& r) {
  char density[64];
  std::snprintf(density, sizeof density, "%.6f", r.density * 100.0);
  out << "Datasets,#Users,#Items,#Feedback,#Words,#Cold Users,#Cold Items,"
         "Density (%)\n";
  out << dataset_name << ',' << r.user_count << ',' << r.item_count << ','
      << r.feedback_count << ',' << r.word_count << ',' << r.cold_user_count
      << ',' << r.cold_item_count << ',' << density << '\n';
}

}  // namespace tbpr
