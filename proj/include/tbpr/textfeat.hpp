#pragma once

// Item text features: tokenization, word2vec-format embedding tables and
// composition of per-item review documents into dense feature vectors.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tbpr/corpus.hpp"
#include "tbpr/matrix.hpp"

namespace tbpr {

// Lowercases ASCII letters and splits on every maximal run of characters
// that are not ASCII alphanumerics. Bytes >= 0x80 count as word characters
// so UTF-8 words stay whole. Tokens made only of digits are dropped.
std::vector<std::string> tokenize(std::string_view text);

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return index_.size(); }
  bool empty() const { return index_.empty(); }

  // Returns false (and leaves the table untouched) if the word is present.
  bool insert(const std::string& word, std::span<const double> vec);

  // nullptr when the word is out of vocabulary.
  const double* find(std::string_view word) const;

  // Words in insertion order.
  const std::vector<std::string>& words() const { return words_; }

  std::size_t duplicate_count = 0;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<double> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// word2vec text format: "V D" header, then V lines "word v1 ... vD".
// Repeated words keep the first vector and bump duplicate_count.
EmbeddingTable load_embeddings(std::istream& in);

// Deterministic unit-norm vectors derived from a hash of (word, seed).
// Stands in for a trained embedding file in tests and small experiments.
EmbeddingTable synth_embeddings(const std::vector<std::string>& vocab,
                                std::size_t dim, std::uint64_t seed);

using StopWords = std::unordered_set<std::string>;

// One token per line; '#' lines and blank lines ignored.
StopWords load_stopwords(std::istream& in);
const StopWords& default_stopwords();

enum class DocScope {
  kAllInteractions,   // every review attached to the item
  kTrainingOnly,      // only reviews of (u, i) with i in Train_u
};

struct FeatureMatrix {
  std::size_t dim = 0;
  Matrix rows;                        // one row per item
  std::vector<std::size_t> coverage;  // contributing token occurrences
  std::vector<std::size_t> oov;       // skipped out-of-vocabulary tokens

  std::size_t item_count() const { return rows.rows; }
  std::span<const double> row(ItemId i) const { return rows.row(i); }
};

// f_i = mean of e_w over the occurrences w of item i's document that are
// neither stop words nor out of vocabulary. Items without any such
// occurrence get the zero vector.
FeatureMatrix compose_item_features(const Dataset& d, const Split& split,
                                    const EmbeddingTable& table,
                                    const StopWords& stopwords,
                                    DocScope scope = DocScope::kAllInteractions);

// Concatenated review text of every item, in user order.
std::vector<std::string> item_documents(
    const Dataset& d, const Split& split,
    DocScope scope = DocScope::kAllInteractions);

// "N D" header, then "item_id v1 ... vD" per item.
void write_features(std::ostream& out, const FeatureMatrix& f);
FeatureMatrix read_features(std::istream& in);

}  // namespace tbpr
