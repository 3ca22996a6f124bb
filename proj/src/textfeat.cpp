#include "tbpr/textfeat.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include "tbpr/error.hpp"

namespace tbpr {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool all_digits(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return c >= '0' && c <= '9'; });
}

// Splits on runs of spaces/tabs.
std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
    out.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& value) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void append_number(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !all_digits(cur)) tokens.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                         : static_cast<char>(c));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

bool EmbeddingTable::insert(const std::string& word,
                            std::span<const double> vec) {
  if (vec.size() != dim_) {
    throw ContractError("embedding for '" + word + "' has length " +
                        std::to_string(vec.size()) + ", table dimension is " +
                        std::to_string(dim_));
  }
  auto [it, fresh] = index_.try_emplace(word, words_.size());
  if (!fresh) return false;
  words_.push_back(word);
  values_.insert(values_.end(), vec.begin(), vec.end());
  return true;
}

const double* EmbeddingTable::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? nullptr : values_.data() + it->second * dim_;
}

EmbeddingTable load_embeddings(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t declared = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (fields(line).empty()) continue;
    auto header = fields(line);
    if (header.size() != 2 || !parse_number(header[0], declared) ||
        !parse_number(header[1], dim)) {
      throw ParseError(line_no, "expected header \"<vocab size> <dimension>\"");
    }
    if (dim == 0) throw ParseError(line_no, "embedding dimension must be >= 1");
    break;
  }
  if (line_no == 0 || dim == 0) return EmbeddingTable{};

  EmbeddingTable table(dim);
  std::vector<double> vec(dim);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto parts = fields(line);
    if (parts.empty()) continue;
    if (parts.size() != dim + 1) {
      throw ParseError(line_no, "expected " + std::to_string(dim) +
                                    " components, found " +
                                    std::to_string(parts.size() - 1));
    }
    for (std::size_t k = 0; k < dim; ++k) {
      if (!parse_number(parts[k + 1], vec[k]) || !std::isfinite(vec[k])) {
        throw ParseError(line_no, "non-numeric component '" +
                                      std::string(parts[k + 1]) + "'");
      }
    }
    ++rows;
    if (!table.insert(std::string(parts[0]), vec)) ++table.duplicate_count;
  }
  if (rows != declared) {
    throw ParseError(line_no, "header declares " + std::to_string(declared) +
                                  " vectors, file has " + std::to_string(rows));
  }
  return table;
}

EmbeddingTable synth_embeddings(const std::vector<std::string>& vocab,
                                std::size_t dim, std::uint64_t seed) {
  if (dim < 1) throw ContractError("synth_embeddings: dimension must be >= 1");
  EmbeddingTable table(dim);
  std::vector<double> vec(dim);
  for (const auto& word : vocab) {
    std::uint64_t state = fnv1a(word) ^ splitmix64(seed);
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (auto& v : vec) {
        // 53 random bits mapped onto [-1, 1].
        double unit = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
        v = 2.0 * unit - 1.0;
        norm2 += v * v;
      }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& v : vec) v *= inv;
    table.insert(word, vec);
  }
  return table;
}

StopWords load_stopwords(std::istream& in) {
  StopWords words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto parts = fields(line);
    if (parts.empty() || parts[0].front() == '#') continue;
    std::string w(parts[0]);
    std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) {
      return c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                  : static_cast<char>(c);
    });
    words.insert(std::move(w));
  }
  return words;
}

const StopWords& default_stopwords() {
  // Same list as data/stopwords_en.txt.
  static const StopWords words = {
    "a", "about", "above", "after", "again", "against", "all", "also", "am",
    "among", "an", "and", "any", "are", "as", "at", "be", "because", "been",
    "before", "being", "below", "between", "both", "but", "by", "can", "could",
    "d", "did", "do", "does", "doing", "don", "down", "during", "each", "few",
    "for", "from", "further", "get", "got", "had", "has", "have", "having",
    "he", "her", "here", "hers", "herself", "him", "himself", "his", "how",
    "i", "if", "in", "into", "is", "it", "its", "itself", "just", "let", "ll",
    "m", "may", "me", "might", "more", "most", "must", "my", "myself", "no",
    "nor", "not", "now", "of", "off", "on", "once", "only", "onto", "or",
    "other", "our", "ours", "ourselves", "out", "over", "own", "per", "re",
    "s", "same", "shall", "she", "should", "so", "some", "such", "t", "than",
    "that", "the", "their", "theirs", "them", "themselves", "then", "there",
    "these", "they", "this", "those", "through", "to", "too", "under", "until",
    "up", "upon", "us", "ve", "very", "via", "was", "we", "were", "what",
    "when", "where", "which", "while", "who", "whom", "whose", "why", "will",
    "with", "within", "without", "would", "yet", "you", "your", "yours",
    "yourself", "yourselves",
  };
  return words;
}

std::vector<std::string> item_documents(const Dataset& d, const Split& split,
                                        DocScope scope) {
  if (scope == DocScope::kTrainingOnly && split.user_count() != d.user_count()) {
    throw ContractError("item_documents: split does not match dataset");
  }
  std::vector<std::string> docs(d.item_count());
  for (UserId u = 0; u < d.user_count(); ++u) {
    const auto& items = d.positives[u];
    for (std::size_t k = 0; k < items.size(); ++k) {
      const ItemId i = items[k];
      if (scope == DocScope::kTrainingOnly) {
        const auto& train = split.users[u].train;
        if (!std::binary_search(train.begin(), train.end(), i)) continue;
      }
      auto& doc = docs[i];
      if (!doc.empty()) doc += ' ';
      doc += d.reviews[u][k];
    }
  }
  return docs;
}

FeatureMatrix compose_item_features(const Dataset& d, const Split& split,
                                    const EmbeddingTable& table,
                                    const StopWords& stopwords,
                                    DocScope scope) {
  if (table.dim() < 1) {
    throw ContractError("compose_item_features: embedding dimension is 0");
  }
  const std::size_t dim = table.dim();
  FeatureMatrix f;
  f.dim = dim;
  f.rows = Matrix(d.item_count(), dim);
  f.coverage.assign(d.item_count(), 0);
  f.oov.assign(d.item_count(), 0);

  const auto docs = item_documents(d, split, scope);
  for (ItemId i = 0; i < d.item_count(); ++i) {
    auto row = f.rows.row(i);
    std::size_t count = 0;
    for (const auto& tok : tokenize(docs[i])) {
      if (stopwords.contains(tok)) continue;
      const double* e = table.find(tok);
      if (e == nullptr) {
        ++f.oov[i];
        continue;
      }
      for (std::size_t k = 0; k < dim; ++k) row[k] += e[k];
      ++count;
    }
    f.coverage[i] = count;
    if (count > 0) {
      const double n = static_cast<double>(count);
      for (auto& v : row) v /= n;
    }
  }
  return f;
}

void write_features(std::ostream& out, const FeatureMatrix& f) {
  std::string line;
  out << f.item_count() << ' ' << f.dim << '\n';
  for (std::size_t i = 0; i < f.item_count(); ++i) {
    line = std::to_string(i);
    for (double v : f.row(static_cast<ItemId>(i))) {
      line += ' ';
      append_number(line, v);
    }
    line += '\n';
    out << line;
  }
}

FeatureMatrix read_features(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t n = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto parts = fields(line);
    if (parts.empty()) continue;
    if (parts.size() != 2 || !parse_number(parts[0], n) ||
        !parse_number(parts[1], dim)) {
      throw ParseError(line_no, "expected header \"<items> <dimension>\"");
    }
    break;
  }
  FeatureMatrix f;
  f.dim = dim;
  f.rows = Matrix(n, dim);
  f.coverage.assign(n, 0);
  f.oov.assign(n, 0);
  std::vector<bool> seen(n, false);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto parts = fields(line);
    if (parts.empty()) continue;
    std::size_t id = 0;
    if (parts.size() != dim + 1 || !parse_number(parts[0], id) || id >= n ||
        seen[id]) {
      throw ParseError(line_no, "malformed feature row");
    }
    seen[id] = true;
    auto row = f.rows.row(id);
    bool nonzero = false;
    for (std::size_t k = 0; k < dim; ++k) {
      if (!parse_number(parts[k + 1], row[k])) {
        throw ParseError(line_no, "non-numeric component '" +
                                      std::string(parts[k + 1]) + "'");
      }
      nonzero = nonzero || row[k] != 0.0;
    }
    // Token counts are not persisted; mark non-zero rows as covered.
    f.coverage[id] = nonzero ? 1 : 0;
    ++rows;
  }
  if (rows != n) {
    throw ParseError(line_no, "expected " + std::to_string(n) +
                                  " feature rows, found " +
                                  std::to_string(rows));
  }
  return f;
}

}  // namespace tbpr
