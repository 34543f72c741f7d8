#include "progviz/corpus.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "progviz/error.hpp"
#include "progviz/hash.hpp"

namespace progviz {

namespace fs = std::filesystem;

std::string_view to_string(SourceKind kind) {
  return kind == SourceKind::Program ? "program" : "compass";
}

SourceKind source_kind_from_string(std::string_view text) {
  if (text == "program") return SourceKind::Program;
  if (text == "compass") return SourceKind::CompassResponses;
  throw Error(ErrorCode::CorpusFormat, "unknown source kind '" + std::string(text) + "'");
}

namespace {

constexpr std::array<std::string_view, 40> kAbbreviations = {
    "z.B.",  "Z.B.",  "bzw.", "ca.",   "Ca.",  "Dr.",   "Nr.",  "u.a.",  "U.a.", "etc.",
    "usw.",  "d.h.",  "D.h.", "vgl.",  "Vgl.", "ggf.",  "inkl.", "evtl.", "Str.", "Prof.",
    "Abs.",  "Art.",  "S.",   "St.",   "sog.", "z.T.",  "u.U.", "o.ä.",  "Mio.", "Mrd.",
    "bspw.", "insb.", "i.d.R.", "e.V.", "Hr.", "Fr.",   "Jh.",  "v.a.",  "z.Zt.", "gem.",
};

// Decodes one code point; returns its byte length or 0 when invalid.
std::size_t decode_utf8(std::string_view s, std::size_t i, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 0;
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return 0;
  }
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  // Overlong forms, surrogates and out-of-range values.
  if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
      (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
    return 0;
  }
  return len;
}

void validate_utf8(std::string_view s) {
  for (std::size_t i = 0; i < s.size();) {
    char32_t cp = 0;
    const std::size_t len = decode_utf8(s, i, cp);
    if (len == 0) {
      throw Error(ErrorCode::EncodingError, "invalid UTF-8 at byte " + std::to_string(i));
    }
    i += len;
  }
}

bool is_space(char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r'; }

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string nfc(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) return std::string(s);
  const auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  icu::UnicodeString dst = norm->normalize(src, status);
  if (U_FAILURE(status)) return std::string(s);
  std::string out;
  dst.toUTF8String(out);
  return out;
}

// Trailing characters allowed after a terminator: closing quotes/brackets.
std::size_t closing_len(std::string_view s, std::size_t i) {
  static constexpr std::array<std::string_view, 8> kClosers = {
      "\"", "'", ")", "]", "\xC2\xBB" /* » */, "\xE2\x80\x9C" /* “ */, "\xE2\x80\x9D" /* ” */,
      "\xE2\x80\x99" /* ’ */};
  for (auto c : kClosers) {
    if (s.substr(i, c.size()) == c) return c.size();
  }
  return 0;
}

std::size_t opening_len(std::string_view s, std::size_t i) {
  static constexpr std::array<std::string_view, 7> kOpeners = {
      "\"", "'", "(", "\xE2\x80\x9E" /* „ */, "\xE2\x80\x9C" /* “ */, "\xC2\xAB" /* « */,
      "\xC2\xBB" /* » */};
  for (auto c : kOpeners) {
    if (s.substr(i, c.size()) == c) return c.size();
  }
  return 0;
}

std::size_t terminator_len(std::string_view s, std::size_t i) {
  const char c = s[i];
  if (c == '.' || c == '!' || c == '?') return 1;
  if (s.substr(i, 3) == "\xE2\x80\xA6") return 3;  // …
  return 0;
}

bool starts_upper(std::string_view s, std::size_t i) {
  char32_t cp = 0;
  if (decode_utf8(s, i, cp) == 0) return false;
  return u_isupper(static_cast<UChar32>(cp)) || u_istitle(static_cast<UChar32>(cp));
}

bool is_abbreviation(std::string_view body, std::size_t period_pos) {
  std::size_t begin = period_pos;
  while (begin > 0 && !is_space(body[begin - 1])) --begin;
  std::string_view token = body.substr(begin, period_pos + 1 - begin);
  while (!token.empty()) {
    const std::size_t open = opening_len(token, 0);
    if (open == 0) break;
    token.remove_prefix(open);
  }
  const auto list = german_abbreviations();
  return std::find(list.begin(), list.end(), token) != list.end();
}

std::string strip_inline_markdown(std::string_view line) {
  std::string out;
  out.reserve(line.size());
  for (std::size_t i = 0; i < line.size();) {
    const char c = line[i];
    // ![alt](url) and [text](url)
    if (c == '[' || (c == '!' && i + 1 < line.size() && line[i + 1] == '[')) {
      const std::size_t open = c == '!' ? i + 1 : i;
      const std::size_t close = line.find(']', open);
      if (close != std::string_view::npos && close + 1 < line.size() && line[close + 1] == '(') {
        const std::size_t paren = line.find(')', close + 2);
        if (paren != std::string_view::npos) {
          out += strip_inline_markdown(line.substr(open + 1, close - open - 1));
          i = paren + 1;
          continue;
        }
      }
    }
    if (c == '<') {
      const std::size_t close = line.find('>', i);
      if (close != std::string_view::npos && close > i + 1 &&
          (std::isalpha(static_cast<unsigned char>(line[i + 1])) || line[i + 1] == '/')) {
        i = close + 1;
        continue;
      }
    }
    if (c == '`' || c == '*') {
      ++i;
      continue;
    }
    if (c == '_' && i + 1 < line.size() && line[i + 1] == '_') {
      i += 2;
      continue;
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

}  // namespace

std::span<const std::string_view> german_abbreviations() { return kAbbreviations; }

std::string normalize_text(std::string_view raw) {
  validate_utf8(raw);
  if (raw.substr(0, 3) == "\xEF\xBB\xBF") raw.remove_prefix(3);

  std::string text = nfc(raw);

  std::string cleaned;
  cleaned.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '\r') {
      cleaned.push_back('\n');
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
    } else if (c == '\t') {
      cleaned.push_back(' ');
    } else if (c == '\n') {
      cleaned.push_back('\n');
    } else if (c < 0x20 || c == 0x7F) {
      continue;
    } else if (c == 0xC2 && i + 1 < text.size() &&
               static_cast<unsigned char>(text[i + 1]) >= 0x80 &&
               static_cast<unsigned char>(text[i + 1]) <= 0x9F) {
      ++i;  // C1 control
    } else if (text.compare(i, 3, "\xEF\xBB\xBF") == 0) {
      i += 2;  // stray BOM / zero-width no-break space
    } else {
      cleaned.push_back(static_cast<char>(c));
    }
  }

  std::string out;
  out.reserve(cleaned.size());
  std::istringstream lines(cleaned);
  std::string line;
  bool pending_blank = false;
  while (std::getline(lines, line)) {
    while (!line.empty() && line.back() == ' ') line.pop_back();
    if (trim_view(line).empty()) {
      pending_blank = !out.empty();
      continue;
    }
    if (!out.empty()) out += pending_blank ? "\n\n" : "\n";
    pending_blank = false;
    out += line;
  }
  return std::string(trim_view(out));
}

std::string strip_markdown(std::string_view markdown) {
  std::string out;
  std::istringstream lines{std::string(markdown)};
  std::string raw;
  bool in_fence = false;
  auto paragraph_break = [&out] {
    if (!out.empty() && !out.ends_with("\n\n")) out += out.ends_with('\n') ? "\n" : "\n\n";
  };
  while (std::getline(lines, raw)) {
    std::string_view line = trim_view(raw);
    if (line.starts_with("```") || line.starts_with("~~~")) {
      in_fence = !in_fence;
      paragraph_break();
      continue;
    }
    if (in_fence) {
      out += std::string(line) + "\n";
      continue;
    }
    if (line.empty()) {
      paragraph_break();
      continue;
    }
    const bool rule = line.size() >= 3 &&
                      std::all_of(line.begin(), line.end(), [&](char c) { return c == line[0] || c == ' '; }) &&
                      (line[0] == '-' || line[0] == '*' || line[0] == '_' || line[0] == '=');
    if (rule) {
      paragraph_break();
      continue;
    }
    bool standalone = false;  // headings and list items become their own paragraphs
    if (line.starts_with('#')) {
      while (line.starts_with('#')) line.remove_prefix(1);
      standalone = true;
    }
    while (line.starts_with('>')) {
      line.remove_prefix(1);
      line = trim_view(line);
    }
    if (line.size() >= 2 && (line[0] == '-' || line[0] == '*' || line[0] == '+') && line[1] == ' ') {
      line.remove_prefix(2);
      standalone = true;
    } else {
      std::size_t digits = 0;
      while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
      if (digits > 0 && digits + 1 < line.size() && (line[digits] == '.' || line[digits] == ')') &&
          line[digits + 1] == ' ') {
        line.remove_prefix(digits + 2);
        standalone = true;
      }
    }
    std::string text;
    if (line.starts_with('|')) {
      if (line.find_first_not_of("|-: ") == std::string_view::npos) continue;
      text = std::string(line);
      std::replace(text.begin(), text.end(), '|', ' ');
      standalone = true;
    } else {
      text = std::string(line);
    }
    text = std::string(trim_view(strip_inline_markdown(trim_view(text))));
    if (text.empty()) continue;
    if (standalone) paragraph_break();
    out += text + "\n";
    if (standalone) paragraph_break();
  }
  return out;
}

Document make_document(std::string party_id, std::string party_name, SourceKind kind,
                       std::string_view raw_text) {
  Document doc;
  doc.body = normalize_text(raw_text);
  if (doc.body.empty()) {
    throw Error(ErrorCode::EmptyDocument,
                "document for '" + party_id + "' is blank after normalization");
  }
  doc.party_id = std::move(party_id);
  doc.party_name = party_name.empty() ? doc.party_id : std::move(party_name);
  doc.source_kind = kind;
  doc.content_hash = sha256_hex(doc.body);
  return doc;
}

Document load_document(const fs::path& path, std::string party_id, SourceKind kind,
                       std::string party_name) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::FileNotFound, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string raw = std::move(buf).str();

  try {
    validate_utf8(raw);
  } catch (const Error& e) {
    throw Error(ErrorCode::EncodingError, path.string() + ": " + e.what());
  }
  const auto ext = path.extension().string();
  if (ext == ".md" || ext == ".markdown") raw = strip_markdown(raw);
  try {
    return make_document(std::move(party_id), std::move(party_name), kind, raw);
  } catch (const Error& e) {
    throw Error(e.code(), path.string());
  }
}

std::vector<SentenceSpan> segment_sentences(const Document& doc) {
  return segment_sentences(doc.body);
}

std::vector<SentenceSpan> segment_sentences(std::string_view body) {
  std::vector<SentenceSpan> spans;
  const std::size_t n = body.size();

  auto skip_space = [&](std::size_t i) {
    while (i < n && is_space(body[i])) ++i;
    return i;
  };
  std::size_t start = skip_space(0);
  auto emit = [&](std::size_t end) {
    while (end > start && is_space(body[end - 1])) --end;
    if (end > start) {
      spans.push_back({spans.size(), start, end, std::string(body.substr(start, end - start))});
    }
  };

  std::size_t i = start;
  while (i < n) {
    // A blank line is a hard boundary (headings, list items).
    if (body[i] == '\n' && i + 1 < n && body[i + 1] == '\n') {
      emit(i);
      start = skip_space(i);
      i = start;
      continue;
    }
    const std::size_t tlen = terminator_len(body, i);
    if (tlen == 0) {
      ++i;
      continue;
    }
    const bool lone_period = body[i] == '.' && (i + 1 >= n || terminator_len(body, i + 1) == 0);
    std::size_t j = i + tlen;
    while (j < n) {
      const std::size_t more = terminator_len(body, j);
      if (more == 0) break;
      j += more;
    }
    while (j < n) {
      const std::size_t close = closing_len(body, j);
      if (close == 0) break;
      j += close;
    }

    bool boundary = false;
    if (j >= n) {
      boundary = true;
    } else if (is_space(body[j])) {
      std::size_t k = skip_space(j);
      if (k >= n) {
        boundary = true;
      } else {
        while (k < n) {
          const std::size_t open = opening_len(body, k);
          if (open == 0) break;
          k += open;
        }
        boundary = k < n && starts_upper(body, k);
      }
    }
    if (boundary && lone_period && is_abbreviation(body, i)) boundary = false;

    if (boundary) {
      emit(j);
      start = skip_space(j);
      i = start;
    } else {
      i = j;
    }
  }
  emit(n);
  return spans;
}

std::vector<Chunk> chunk_sentences(std::span<const SentenceSpan> spans, std::size_t chunk_size) {
  if (chunk_size == 0) throw Error(ErrorCode::InvalidChunkSize, "chunk_size must be >= 1");
  std::vector<Chunk> chunks;
  chunks.reserve((spans.size() + chunk_size - 1) / chunk_size);
  for (std::size_t pos = 0; pos < spans.size(); pos += chunk_size) {
    Chunk chunk;
    chunk.index = chunks.size();
    const std::size_t end = std::min(spans.size(), pos + chunk_size);
    chunk.sentences.assign(spans.begin() + static_cast<std::ptrdiff_t>(pos),
                           spans.begin() + static_cast<std::ptrdiff_t>(end));
    for (const auto& s : chunk.sentences) {
      if (!chunk.text.empty()) chunk.text.push_back(' ');
      chunk.text += s.text;
    }
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

CorpusDescriptor parse_corpus_descriptor(std::string_view text, const fs::path& base_dir) {
  CorpusDescriptor desc;
  desc.base_dir = base_dir;
  std::istringstream lines{std::string(text)};
  std::string raw;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::CorpusFormat, "line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(lines, raw)) {
    ++line_no;
    std::string_view line = trim_view(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      const std::string id(trim_view(line.substr(1, line.size() - 2)));
      const bool valid_id =
          !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
          });
      if (!valid_id) fail("party id must match [A-Za-z0-9_-]+");
      for (const auto& p : desc.parties) {
        if (p.party_id == id) fail("duplicate party '" + id + "'");
      }
      desc.parties.push_back({id, id, {}, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected key = value");
    if (desc.parties.empty()) fail("key outside of a [party] section");
    const std::string key(trim_view(line.substr(0, eq)));
    const std::string value(trim_view(line.substr(eq + 1)));
    auto& party = desc.parties.back();
    if (key == "name") {
      party.name = value;
    } else if (key == "program") {
      party.program_path = value;
    } else if (key == "compass") {
      party.compass_path = value;
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  for (const auto& p : desc.parties) {
    if (p.program_path.empty() && p.compass_path.empty()) {
      throw Error(ErrorCode::CorpusFormat, "party '" + p.party_id + "' names no documents");
    }
  }
  return desc;
}

CorpusDescriptor read_corpus_descriptor(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus_descriptor(buf.str(), path.parent_path());
}

std::vector<Document> load_corpus(const CorpusDescriptor& descriptor) {
  std::vector<Document> docs;
  auto resolve = [&](const fs::path& p) { return p.is_absolute() ? p : descriptor.base_dir / p; };
  for (const auto& party : descriptor.parties) {
    if (!party.program_path.empty()) {
      docs.push_back(load_document(resolve(party.program_path), party.party_id,
                                   SourceKind::Program, party.name));
    }
    if (!party.compass_path.empty()) {
      docs.push_back(load_document(resolve(party.compass_path), party.party_id,
                                   SourceKind::CompassResponses, party.name));
    }
  }
  return docs;
}

void check_unique(std::span<const Document> docs) {
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (std::size_t j = i + 1; j < docs.size(); ++j) {
      if (docs[i].party_id == docs[j].party_id && docs[i].source_kind == docs[j].source_kind) {
        throw Error(ErrorCode::DuplicateDocument,
                    docs[i].party_id + "/" + std::string(to_string(docs[i].source_kind)));
      }
    }
  }
}

std::string corpus_hash(std::span<const Document> docs) {
  std::vector<std::string> rows;
  rows.reserve(docs.size());
  for (const auto& d : docs) {
    rows.push_back(d.party_id + '\t' + std::string(to_string(d.source_kind)) + '\t' +
                   d.party_name + '\t' + d.content_hash);
  }
  std::sort(rows.begin(), rows.end());
  std::string joined;
  for (const auto& r : rows) joined += r + '\n';
  return sha256_hex(joined);
}

}  // namespace progviz
