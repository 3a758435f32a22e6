#include <fstream>

#include "snprex/bert.hpp"
#include "snprex/errors.hpp"
#include "snprex/utf8.hpp"

namespace snprex {

namespace {

bool is_whitespace(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == 0xA0 || (c >= 0x2000 && c <= 0x200A) ||
         c == 0x202F || c == 0x205F || c == 0x3000;
}

bool is_control(char32_t c) {
  if (c == '\t' || c == '\n' || c == '\r') return false;
  return c < 0x20 || (c >= 0x7F && c <= 0x9F) || (c >= 0x200B && c <= 0x200F) || c == 0xFEFF || c == 0xAD;
}

bool is_punctuation(char32_t c) {
  if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126)) return true;
  switch (c) {
    case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF: return true;
    default: break;
  }
  return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) || (c >= 0x3001 && c <= 0x3003) ||
         (c >= 0x3008 && c <= 0x3011) || (c >= 0xFF01 && c <= 0xFF0F);
}

bool is_cjk(char32_t c) {
  return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) || (c >= 0x20000 && c <= 0x2A6DF) ||
         (c >= 0x2A700 && c <= 0x2CEAF) || (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x2F800 && c <= 0x2FA1F);
}

bool is_combining_mark(char32_t c) { return c >= 0x300 && c <= 0x36F; }

// Lowercase plus accent stripping for ASCII, Latin-1 and basic Greek.
char32_t fold(char32_t c) {
  if (c < 0x80) return (c >= 'A' && c <= 'Z') ? c + 32 : c;
  if (c >= 0xC0 && c <= 0xFF) {
    static constexpr char32_t table[64] = {
        'a', 'a', 'a', 'a', 'a', 'a', 0xE6, 'c', 'e', 'e', 'e', 'e', 'i', 'i', 'i', 'i',
        0xF0, 'n', 'o', 'o', 'o', 'o', 'o', 0xD7, 0xF8, 'u', 'u', 'u', 'u', 'y', 0xFE, 0xDF,
        'a', 'a', 'a', 'a', 'a', 'a', 0xE6, 'c', 'e', 'e', 'e', 'e', 'i', 'i', 'i', 'i',
        0xF0, 'n', 'o', 'o', 'o', 'o', 'o', 0xF7, 0xF8, 'u', 'u', 'u', 'u', 'y', 0xFE, 'y'};
    return table[c - 0xC0];
  }
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 0x20;
  return c;
}

}  // namespace

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase)
    : vocab_(std::move(vocab)), lowercase_(lowercase) {
  for (std::size_t i = 0; i < vocab_.size(); ++i) ids_.emplace(vocab_[i], static_cast<std::int32_t>(i));
  for (const char* required : {"[UNK]", "[CLS]", "[SEP]", "[PAD]"}) {
    if (!ids_.contains(required)) throw MalformedRecord(std::string("wordpiece vocabulary lacks ") + required);
  }
  for (auto m : {kSnpOpen, kSnpClose, kPhenoOpen, kPhenoClose}) add_token(std::string(m));
}

WordPieceTokenizer WordPieceTokenizer::load(const std::filesystem::path& vocab_txt, bool lowercase) {
  std::ifstream in(vocab_txt);
  if (!in) throw ModelUnavailable("cannot open " + vocab_txt.string());
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(line);
  }
  return WordPieceTokenizer(std::move(vocab), lowercase);
}

std::int32_t WordPieceTokenizer::add_token(const std::string& token) {
  if (const auto it = ids_.find(token); it != ids_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(vocab_.size());
  vocab_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

std::int32_t WordPieceTokenizer::id_of(std::string_view token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? ids_.find("[UNK]")->second : it->second;
}

std::int32_t WordPieceTokenizer::pad_id() const { return ids_.find("[PAD]")->second; }

std::vector<std::string> WordPieceTokenizer::basic_tokenize(std::string_view text) const {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  std::size_t pos = 0;
  while (pos < text.size()) {
    char32_t c = utf8::decode(text, pos);
    if (c == 0 || c == 0xFFFD || is_control(c)) continue;
    if (is_whitespace(c)) {
      flush();
      continue;
    }
    if (lowercase_) {
      if (is_combining_mark(c)) continue;
      c = fold(c);
    }
    if (is_punctuation(c) || is_cjk(c)) {
      flush();
      utf8::append(current, c);
      flush();
      continue;
    }
    utf8::append(current, c);
  }
  flush();
  return words;
}

void WordPieceTokenizer::wordpiece(const std::string& word, std::vector<std::string>& out) const {
  const auto b = utf8::boundaries(word);
  const std::size_t n = b.size() - 1;
  if (n > 100) {
    out.emplace_back("[UNK]");
    return;
  }
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = n;
    std::string found;
    while (end > start) {
      std::string piece = word.substr(b[start], b[end] - b[start]);
      if (start > 0) piece = "##" + piece;
      if (ids_.contains(piece)) {
        found = std::move(piece);
        break;
      }
      --end;
    }
    if (found.empty()) {
      out.emplace_back("[UNK]");
      return;
    }
    pieces.push_back(std::move(found));
    start = end;
  }
  out.insert(out.end(), pieces.begin(), pieces.end());
}

std::vector<std::string> WordPieceTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> out;
  for (const auto& seg : split_on_markers(text)) {
    if (seg.is_marker) {
      out.push_back(seg.text);
      continue;
    }
    for (const auto& w : basic_tokenize(seg.text)) wordpiece(w, out);
  }
  return out;
}

std::vector<std::string> WordPieceTokenizer::tokenize(std::string_view marked_text, const PreprocessConfig& cfg) const {
  if (!cfg.normalize_before_subword) return tokenize(marked_text);
  std::string text;
  for (const auto& seg : split_on_markers(marked_text)) {
    if (seg.is_marker) {
      text += " " + seg.text + " ";
      continue;
    }
    for (const auto& tok : normalize_text(seg.text, cfg)) text += " " + tok;
  }
  return tokenize(text);
}

}  // namespace snprex
