#include "odlc/fog/inverted_index.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

namespace odlc::fog {

namespace {

bool alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool key_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool key_char(char c) { return alnum(c) || c == '_' || c == '.' || c == '-'; }

std::string field_key(const std::string& k, const std::string& v) {
  std::string out = k;
  out.push_back('\0');
  out.append(v);
  return out;
}

const std::vector<DocId> kEmpty;

using Limits = std::numeric_limits<std::int64_t>;

std::int64_t ms_to_us(std::int64_t ms) {
  if (ms > Limits::max() / 1000) return Limits::max();
  if (ms < Limits::min() / 1000) return Limits::min();
  return ms * 1000;
}

void erase_sorted(std::vector<DocId>& v, const std::vector<DocId>& sorted_ids) {
  std::vector<DocId> kept;
  kept.reserve(v.size());
  std::set_difference(v.begin(), v.end(), sorted_ids.begin(), sorted_ids.end(), std::back_inserter(kept));
  v.swap(kept);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (alnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::size_t osa_distance(std::string_view a, std::string_view b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1])
        d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
    }
  }
  return d[n][m];
}

Labels extract_fields(std::string_view message) {
  Labels out;
  std::size_t i = 0;
  while (i < message.size()) {
    while (i < message.size() && std::isspace(static_cast<unsigned char>(message[i]))) ++i;
    const std::size_t b = i;
    while (i < message.size() && !std::isspace(static_cast<unsigned char>(message[i]))) ++i;
    const std::string_view tok = message.substr(b, i - b);
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos || eq == 0 || eq + 1 == tok.size()) continue;
    const auto key = tok.substr(0, eq);
    if (!key_start(key.front()) || !std::all_of(key.begin(), key.end(), key_char)) continue;
    auto value = tok.substr(eq + 1);
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
      value = value.substr(1, value.size() - 2);
    if (value.empty()) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& kv) { return kv.first == key; });
    if (it != out.end()) {
      it->second = std::string(value);  // the last occurrence wins
    } else {
      out.emplace_back(std::string(key), std::string(value));
    }
  }
  return canonical_labels(std::move(out));
}

DocId InvertedIndex::add(ObservabilityRecord rec, const std::vector<std::string>& terms, const Labels& fields) {
  const DocId id = next_id_++;
  std::int64_t start_us, end_us;
  if (rec.domain() == Domain::Trace) {
    start_us = rec.span().start;
    end_us = rec.span().end();
  } else {
    start_us = end_us = rec.source_timestamp_ms() * 1000;
  }
  DocEntry entry{Doc{std::move(rec), 0, start_us, end_us}, {}, {}};
  entry.doc.time_ms = entry.doc.record.source_timestamp_ms();

  std::vector<std::string> uniq = terms;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  for (const auto& t : uniq) {
    auto& plist = terms_[t];
    if (plist.empty()) terms_by_length_[t.size()].insert(t);
    plist.push_back(id);
  }
  entry.terms = std::move(uniq);
  for (const auto& [k, v] : fields) {
    auto key = field_key(k, v);
    auto& plist = fields_[key];
    if (plist.empty() || plist.back() != id) plist.push_back(id);
    entry.field_keys.push_back(std::move(key));
  }
  by_start_us_.emplace(start_us, id);
  max_length_us_ = std::max(max_length_us_, end_us - start_us);
  docs_.emplace(id, std::move(entry));
  return id;
}

const InvertedIndex::Doc* InvertedIndex::get(DocId id) const {
  auto it = docs_.find(id);
  return it == docs_.end() ? nullptr : &it->second.doc;
}

const std::vector<DocId>& InvertedIndex::postings(const std::string& term) const {
  auto it = terms_.find(term);
  return it == terms_.end() ? kEmpty : it->second;
}

const std::vector<DocId>& InvertedIndex::field(const std::string& key, const std::string& value) const {
  auto it = fields_.find(field_key(key, value));
  return it == fields_.end() ? kEmpty : it->second;
}

std::vector<std::string> InvertedIndex::fuzzy_terms(const std::string& term) const {
  std::vector<std::string> out;
  const std::size_t lo = term.size() == 0 ? 0 : term.size() - 1;
  for (auto it = terms_by_length_.lower_bound(lo); it != terms_by_length_.end() && it->first <= term.size() + 1; ++it) {
    for (const auto& t : it->second) {
      if (osa_distance(term, t) <= 1) out.push_back(t);
    }
  }
  return out;
}

std::vector<DocId> InvertedIndex::overlapping(std::int64_t start_ms, std::int64_t end_ms) const {
  const std::int64_t ws = ms_to_us(start_ms), we = ms_to_us(end_ms);
  const std::int64_t from = ws < Limits::min() + max_length_us_ ? Limits::min() : ws - max_length_us_;
  std::vector<DocId> out;
  for (auto it = by_start_us_.lower_bound(from); it != by_start_us_.end() && it->first < we; ++it) {
    const auto& d = docs_.at(it->second).doc;
    const bool hit = d.end_us > d.start_us ? d.end_us > ws : d.start_us >= ws;
    if (hit) out.push_back(it->second);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<DocId> InvertedIndex::older_than(std::int64_t cutoff) const {
  std::vector<DocId> out;
  for (const auto& [id, e] : docs_) {
    if (e.doc.time_ms < cutoff) out.push_back(id);
  }
  return out;
}

void InvertedIndex::remove(const std::vector<DocId>& ids) {
  std::vector<DocId> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::set<std::string> touched_terms, touched_fields;
  for (DocId id : sorted) {
    auto it = docs_.find(id);
    if (it == docs_.end()) continue;
    touched_terms.insert(it->second.terms.begin(), it->second.terms.end());
    touched_fields.insert(it->second.field_keys.begin(), it->second.field_keys.end());
    auto range = by_start_us_.equal_range(it->second.doc.start_us);
    for (auto t = range.first; t != range.second; ++t) {
      if (t->second == id) {
        by_start_us_.erase(t);
        break;
      }
    }
    docs_.erase(it);
  }
  for (const auto& t : touched_terms) {
    auto& plist = terms_[t];
    erase_sorted(plist, sorted);
    if (plist.empty()) {
      terms_.erase(t);
      auto bucket = terms_by_length_.find(t.size());
      bucket->second.erase(t);
      if (bucket->second.empty()) terms_by_length_.erase(bucket);
    }
  }
  for (const auto& f : touched_fields) {
    auto& plist = fields_[f];
    erase_sorted(plist, sorted);
    if (plist.empty()) fields_.erase(f);
  }
}

void InvertedIndex::for_each(const std::function<void(DocId, const Doc&)>& fn) const {
  for (const auto& [id, e] : docs_) fn(id, e.doc);
}

}  // namespace odlc::fog
