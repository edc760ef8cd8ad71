#include "clab/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace clab {

namespace {

bool is_unicode_space(uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
    case 0x20: case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_ascii_punct(uint32_t cp) {
  return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
         (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
}

// Decodes one UTF-8 code point starting at i; invalid bytes are passed
// through as single code units so tokenization never fails.
uint32_t decode_utf8(std::string_view s, size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  size_t len = 1;
  uint32_t cp = b0;
  if ((b0 & 0xE0) == 0xC0) { len = 2; cp = b0 & 0x1F; }
  else if ((b0 & 0xF0) == 0xE0) { len = 3; cp = b0 & 0x0F; }
  else if ((b0 & 0xF8) == 0xF0) { len = 4; cp = b0 & 0x07; }
  if (len > 1) {
    if (i + len > s.size()) { ++i; return b0; }
    uint32_t acc = cp;
    for (size_t k = 1; k < len; ++k) {
      const auto bk = static_cast<unsigned char>(s[i + k]);
      if ((bk & 0xC0) != 0x80) { ++i; return b0; }
      acc = (acc << 6) | (bk & 0x3F);
    }
    i += len;
    return acc;
  }
  ++i;
  return cp;
}

void append_cp(std::string& out, std::string_view src, size_t from, size_t to) {
  out.append(src.substr(from, to - from));
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, bool lowercase) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      out.push_back(std::move(word));
      word.clear();
    }
  };
  size_t i = 0;
  while (i < text.size()) {
    const size_t start = i;
    uint32_t cp = decode_utf8(text, i);
    if (is_unicode_space(cp)) {
      flush();
    } else if (is_ascii_punct(cp)) {
      flush();
      out.emplace_back(1, static_cast<char>(cp));
    } else {
      if (lowercase && cp >= 'A' && cp <= 'Z') {
        word.push_back(static_cast<char>(cp - 'A' + 'a'));
      } else {
        append_cp(word, text, start, i);
      }
    }
  }
  flush();
  return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

Vocabulary::Vocabulary() {
  add("<unk>");
  add("<s>");
  add("</s>");
}

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] =
      token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
  if (!inserted) throw std::runtime_error("duplicate vocabulary token: " + token);
  id_to_token_.push_back(token);
  return it->second;
}

int Vocabulary::encode(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::decode(int id) const {
  return id_to_token_.at(static_cast<size_t>(id));
}

std::vector<int> Vocabulary::encode_tokens(
    const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(encode(t));
  return ids;
}

std::string Vocabulary::decode_tokens(const std::vector<int>& ids) const {
  std::vector<std::string> toks;
  toks.reserve(ids.size());
  for (int id : ids) toks.push_back(decode(id));
  return detokenize(toks);
}

uint64_t Vocabulary::content_hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto eat = [&h](char c) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  };
  for (const auto& t : id_to_token_) {
    for (char c : t) eat(c);
    eat('\0');
  }
  return h;
}

void Vocabulary::save(const std::string& path) const {
  nlohmann::json j;
  j["format"] = "clab-vocab-v1";
  j["tokens"] = id_to_token_;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write vocabulary file: " + path);
  f << j.dump() << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read vocabulary file: " + path);
  nlohmann::json j;
  f >> j;
  if (j.value("format", "") != "clab-vocab-v1")
    throw std::runtime_error("unrecognized vocabulary format in " + path);
  const auto toks = j.at("tokens").get<std::vector<std::string>>();
  if (toks.size() < 3 || toks[0] != "<unk>" || toks[1] != "<s>" ||
      toks[2] != "</s>")
    throw std::runtime_error("vocabulary file missing reserved tokens: " + path);
  Vocabulary v;
  for (size_t i = 3; i < toks.size(); ++i) v.add(toks[i]);
  return v;
}

Vocabulary build_vocab(const std::vector<Document>& docs, int min_count,
                       bool lowercase) {
  if (docs.empty()) throw std::runtime_error("build_vocab: empty corpus");
  std::unordered_map<std::string, long long> freq;
  for (const auto& d : docs)
    for (auto& t : tokenize(d.text, lowercase)) ++freq[t];

  std::vector<std::pair<std::string, long long>> kept;
  for (auto& [tok, n] : freq)
    if (n >= min_count) kept.emplace_back(tok, n);
  if (kept.empty()) throw std::runtime_error("build_vocab: empty vocabulary");

  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  for (auto& [tok, n] : kept) v.add(tok);
  return v;
}

void encode_documents(std::vector<Document>& docs, const Vocabulary& vocab,
                      bool lowercase) {
  for (auto& d : docs)
    d.tokens = vocab.encode_tokens(tokenize(d.text, lowercase));
}

std::vector<ChunkPair> chunk(const Document& doc, int m, int c) {
  if (m < 1 || c < 1) throw std::runtime_error("chunk: m and c must be >= 1");
  const size_t window = static_cast<size_t>(m) + static_cast<size_t>(c);
  std::vector<ChunkPair> out;
  for (size_t start = 0; start + window <= doc.tokens.size(); start += window) {
    ChunkPair p;
    p.context.assign(doc.tokens.begin() + start,
                     doc.tokens.begin() + start + m);
    p.continuation.assign(doc.tokens.begin() + start + m,
                          doc.tokens.begin() + start + window);
    p.source_doc = doc.id;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<ChunkPair> chunk_all(const std::vector<Document>& docs, int m,
                                 int c) {
  std::vector<ChunkPair> out;
  for (const auto& d : docs) {
    auto pairs = chunk(d, m, c);
    out.insert(out.end(), std::make_move_iterator(pairs.begin()),
               std::make_move_iterator(pairs.end()));
  }
  return out;
}

namespace {

[[noreturn]] void corpus_error(const std::string& path, size_t line,
                               const std::string& what) {
  std::ostringstream os;
  os << path << ": line " << line << ": " << what;
  throw std::runtime_error(os.str());
}

}  // namespace

std::vector<Document> load_corpus(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read corpus file: " + path);
  std::vector<Document> docs;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) corpus_error(path, lineno, "invalid JSON record");
    Document d;
    for (const char* field : {"id", "text", "origin", "generation", "score"})
      if (!j.contains(field))
        corpus_error(path, lineno, std::string("missing field '") + field + "'");
    if (!j["id"].is_string()) corpus_error(path, lineno, "bad field 'id'");
    if (!j["text"].is_string()) corpus_error(path, lineno, "bad field 'text'");
    d.id = j["id"].get<std::string>();
    d.text = j["text"].get<std::string>();
    const std::string origin = j["origin"].is_string()
                                   ? j["origin"].get<std::string>()
                                   : std::string();
    if (origin == "human") {
      d.origin = OriginKind::Human;
    } else if (origin == "synthetic") {
      d.origin = OriginKind::Synthetic;
    } else {
      corpus_error(path, lineno, "bad field 'origin'");
    }
    if (!j["generation"].is_number_integer())
      corpus_error(path, lineno, "bad field 'generation'");
    d.generation = j["generation"].get<int>();
    if (d.origin == OriginKind::Human && d.generation != -1)
      corpus_error(path, lineno, "bad field 'generation' (human must be -1)");
    if (d.origin == OriginKind::Synthetic && d.generation < 1)
      corpus_error(path, lineno, "bad field 'generation' (synthetic must be >= 1)");
    if (j["score"].is_null()) {
      d.score.reset();
    } else if (j["score"].is_number()) {
      d.score = j["score"].get<double>();
    } else {
      corpus_error(path, lineno, "bad field 'score'");
    }
    docs.push_back(std::move(d));
  }
  return docs;
}

void save_corpus(const std::vector<Document>& docs, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write corpus file: " + path);
  for (const auto& d : docs) {
    nlohmann::json j;
    j["id"] = d.id;
    j["text"] = d.text;
    j["origin"] = d.is_human() ? "human" : "synthetic";
    j["generation"] = d.generation;
    if (d.score) j["score"] = *d.score; else j["score"] = nullptr;
    f << j.dump() << "\n";
  }
}

}  // namespace clab
