#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "tbpr/corpus.hpp"
#include "tbpr/error.hpp"
#include "test_support.hpp"

using namespace tbpr;

TEST_CASE("ingest: empty stream gives an empty dataset") {
  const Dataset d = ingest({});
  CHECK(d.user_count() == 0);
  CHECK(d.item_count() == 0);
  CHECK(d.feedback_count() == 0);
}

TEST_CASE("ingest: duplicate pairs collapse and concatenate reviews") {
  const Dataset d = ingest({{"u1", "i1", "good"}, {"u1", "i1", "fits"}});
  REQUIRE(d.user_count() == 1);
  REQUIRE(d.item_count() == 1);
  CHECK(d.feedback_count() == 1);
  CHECK(d.reviews[0][0] == "good fits");
}

TEST_CASE("ingest: ids follow first appearance, bad records are tallied") {
  const Dataset d = ingest({{"bob", "x", ""},
                            {"", "y", "no user"},
                            {"amy", "z", ""},
                            {"bob", "", "no item"},
                            {"amy", "x", ""}});
  CHECK(d.user_tokens == std::vector<std::string>{"bob", "amy"});
  CHECK(d.item_tokens == std::vector<std::string>{"x", "z"});
  CHECK(d.skipped_records == 2);
  CHECK(d.positives[1] == std::vector<ItemId>{0, 1});
}

TEST_CASE("ingest: feedback count equals distinct pairs (set oracle)") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> pick(0, 4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Interaction> records;
    std::set<std::pair<std::string, std::string>> distinct;
    for (int r = 0; r < 20; ++r) {
      Interaction rec{"u" + std::to_string(pick(rng)), "i" + std::to_string(pick(rng)), "t"};
      distinct.emplace(rec.user_token, rec.item_token);
      records.push_back(rec);
    }
    const Dataset d = ingest(records);
    CHECK(d.feedback_count() == distinct.size());
    for (const auto& p : d.positives) CHECK(std::is_sorted(p.begin(), p.end()));
  }
}

TEST_CASE("read_json_lines: fields, unknown keys and malformed lines") {
  std::istringstream in(
      R"({"reviewerID": "A1", "asin": "B1", "reviewText": "Nice", "overall": 5.0})"
      "\n"
      R"({"reviewerID": "A2", "asin": "B1"})"
      "\n"
      "not json at all\n"
      "\n"
      R"({"reviewerID": "A3"})"
      "\n"
      R"({"reviewerID": 7, "asin": "B2"})"
      "\n");
  const auto rr = read_json_lines(in);
  REQUIRE(rr.records.size() == 2);
  CHECK(rr.skipped == 3);
  CHECK(rr.records[0].review_text == "Nice");
  CHECK(rr.records[1].review_text.empty());
}

TEST_CASE("read_tsv: review column optional") {
  std::istringstream in("u1\ti1\tgreat shoes\nu2\ti2\nbroken line\nu3\ti3\t\n");
  const auto rr = read_tsv(in);
  REQUIRE(rr.records.size() == 3);
  CHECK(rr.skipped == 1);
  CHECK(rr.records[0].review_text == "great shoes");
  CHECK(rr.records[1].review_text.empty());
  CHECK(rr.records[2].item_token == "i3");
}

TEST_CASE("filter_min_activity: users below k are removed") {
  std::vector<Interaction> recs;
  for (int i = 0; i < 4; ++i) recs.push_back({"light", "i" + std::to_string(i), ""});
  for (int i = 0; i < 5; ++i) recs.push_back({"heavy", "i" + std::to_string(i + 2), ""});
  const Dataset d = filter_min_activity(ingest(recs), 5);
  REQUIRE(d.user_count() == 1);
  CHECK(d.user_tokens[0] == "heavy");
  // i0, i1 only belonged to the removed user.
  CHECK(d.item_count() == 5);
  CHECK(d.item_tokens.front() == "i2");
  CHECK(d.positives[0] == std::vector<ItemId>{0, 1, 2, 3, 4});
}

TEST_CASE("filter_min_activity: nothing to drop leaves the dataset intact") {
  const Dataset d = testing::random_dataset(20, 30, 6, 10, 3);
  const Dataset kept = ingest([&] {
    std::vector<Interaction> recs;
    for (UserId u = 0; u < d.user_count(); ++u)
      for (ItemId i : d.positives[u]) recs.push_back({d.user_tokens[u], d.item_tokens[i], ""});
    return recs;
  }());
  const Dataset f = filter_min_activity(kept, 5);
  CHECK(f.user_tokens == kept.user_tokens);
  CHECK(f.item_tokens == kept.item_tokens);
  CHECK(f.positives == kept.positives);
}

TEST_CASE("filter_min_activity: scan oracle on random data") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset d = testing::random_dataset(60, 40, 1, 12, seed);
    const Dataset f = filter_min_activity(d, 5);
    std::size_t expected_users = 0;
    for (const auto& p : d.positives) expected_users += p.size() >= 5;
    CHECK(f.user_count() == expected_users);
    for (const auto& p : f.positives) CHECK(p.size() >= 5);
    for (std::size_t c : f.item_feedback_counts()) CHECK(c > 0);
    // Tokens of every surviving pair are preserved.
    for (UserId u = 0; u < f.user_count(); ++u) {
      const auto orig = d.find_user(f.user_tokens[u]);
      REQUIRE(orig >= 0);
      CHECK(d.positives[orig].size() == f.positives[u].size());
      for (ItemId i : f.positives[u]) {
        const auto oi = d.find_item(f.item_tokens[i]);
        CHECK(d.is_positive(static_cast<UserId>(orig), static_cast<ItemId>(oi)));
      }
    }
  }
}

TEST_CASE("split: five positives give sizes 1/2/2") {
  const Dataset d = testing::random_dataset(1, 10, 5, 5, 1);
  const Split s = split(d, 9);
  CHECK(s.users[0].train.size() == 1);
  CHECK(s.users[0].valid.size() == 2);
  CHECK(s.users[0].test.size() == 2);
}

TEST_CASE("split: deterministic for a fixed seed") {
  const Dataset d = testing::random_dataset(50, 80, 5, 15, 4);
  const Split a = split(d, 77);
  const Split b = split(d, 77);
  for (UserId u = 0; u < d.user_count(); ++u) {
    CHECK(a.users[u].train == b.users[u].train);
    CHECK(a.users[u].valid == b.users[u].valid);
    CHECK(a.users[u].test == b.users[u].test);
  }
  const Split c = split(d, 78);
  bool differs = false;
  for (UserId u = 0; u < d.user_count(); ++u) differs |= a.users[u].test != c.users[u].test;
  CHECK(differs);
}

TEST_CASE("split: partition oracle over 1000 users") {
  const Dataset d = testing::random_dataset(1000, 200, 5, 20, 11);
  const Split s = split(d, 5);
  for (UserId u = 0; u < d.user_count(); ++u) {
    const auto& us = s.users[u];
    REQUIRE(us.valid.size() == 2);
    REQUIRE(us.test.size() == 2);
    REQUIRE(us.train.size() >= 1);
    std::multiset<ItemId> all(us.train.begin(), us.train.end());
    all.insert(us.valid.begin(), us.valid.end());
    all.insert(us.test.begin(), us.test.end());
    std::set<ItemId> uniq(all.begin(), all.end());
    CHECK(uniq.size() == all.size());
    CHECK(std::vector<ItemId>(uniq.begin(), uniq.end()) == d.positives[u]);
  }
}

TEST_CASE("split: held-out items are uniform over N_u") {
  // One user with 6 positives; every item should land in test with
  // probability 2/6.
  Dataset d = testing::random_dataset(1, 6, 6, 6, 0);
  std::vector<int> in_test(6, 0);
  const int trials = 6000;
  for (int t = 0; t < trials; ++t) {
    const Split s = split(d, t);
    for (ItemId i : s.users[0].test) ++in_test[i];
  }
  for (int c : in_test) CHECK(std::abs(c / double(trials) - 1.0 / 3.0) < 0.03);
}

TEST_CASE("split: user with fewer than five positives is rejected by name") {
  Dataset d = testing::random_dataset(3, 20, 5, 8, 2);
  d.positives[1].resize(4);
  d.reviews[1].resize(4);
  CHECK_THROWS_WITH_AS(split(d, 1), doctest::Contains("'u1'"), ContractError);
}

TEST_CASE("stats: density of the Girls table row") {
  Dataset d;
  for (int u = 0; u < 778; ++u) d.user_tokens.push_back("u" + std::to_string(u));
  for (int i = 0; i < 3963; ++i) d.item_tokens.push_back("i" + std::to_string(i));
  std::size_t remaining = 5474;
  for (int u = 0; u < 778; ++u) {
    const std::size_t n = u < 28 ? 8 : 7;
    std::vector<ItemId> items;
    for (std::size_t k = 0; k < n; ++k) items.push_back(static_cast<ItemId>((u * 5 + k) % 3963));
    std::sort(items.begin(), items.end());
    d.positives.push_back(items);
    d.reviews.emplace_back(n, "");
    remaining -= n;
  }
  REQUIRE(remaining == 0);
  const StatsReport r = stats(d);
  CHECK(r.feedback_count == 5474);
  // The table prints percentages truncated to three decimals.
  CHECK(std::floor(r.density * 100.0 * 1000.0) / 1000.0 == doctest::Approx(0.177));
  CHECK(r.density == doctest::Approx(5474.0 / (778.0 * 3963.0)).epsilon(1e-15));
}

TEST_CASE("stats: empty dataset is all zeros") {
  const StatsReport r = stats(Dataset{});
  CHECK(r.user_count == 0);
  CHECK(r.item_count == 0);
  CHECK(r.feedback_count == 0);
  CHECK(r.cold_user_count == 0);
  CHECK(r.cold_item_count == 0);
  CHECK(r.density == 0.0);
}

TEST_CASE("stats: counts match a brute-force recount") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset d = testing::random_dataset(80, 50, 1, 15, seed);
    for (std::size_t threshold : {1u, 5u, 7u, 12u}) {
      const StatsReport r = stats(d, threshold);
      std::size_t fb = 0, cold_u = 0, cold_i = 0;
      std::map<ItemId, std::size_t> per_item;
      for (UserId u = 0; u < d.user_count(); ++u) {
        fb += d.positives[u].size();
        cold_u += d.positives[u].size() < threshold;
        for (ItemId i : d.positives[u]) ++per_item[i];
      }
      for (ItemId i = 0; i < d.item_count(); ++i) cold_i += per_item[i] < threshold;
      CHECK(r.feedback_count == fb);
      CHECK(r.cold_user_count == cold_u);
      CHECK(r.cold_item_count == cold_i);
      CHECK(r.cold_user_count <= r.user_count);
      CHECK(r.cold_item_count <= r.item_count);
    }
  }
}

TEST_CASE("stats: CSV row") {
  const Dataset d = ingest({{"u", "a", "Soft cotton, great fit"}, {"u", "b", "2 stars"}});
  std::ostringstream out;
  write_stats_csv(out, "Tiny", stats(d));
  CHECK(out.str() ==
        "Datasets,#Users,#Items,#Feedback,#Words,#Cold Users,#Cold Items,Density (%)\n"
        "Tiny,1,2,2,5,1,2,100.000000\n");
}
