#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace progviz {

enum class SourceKind { Program, CompassResponses };

std::string_view to_string(SourceKind kind);
/// Accepts "program" and "compass" (the serialized forms).
SourceKind source_kind_from_string(std::string_view text);

struct Document {
  std::string party_id;
  std::string party_name;
  SourceKind source_kind = SourceKind::Program;
  std::string language = "de";
  std::string body;
  std::string content_hash;
};

struct SentenceSpan {
  std::size_t index = 0;
  std::size_t start = 0;  // byte offsets into Document::body
  std::size_t end = 0;
  std::string text;

  bool operator==(const SentenceSpan&) const = default;
};

struct Chunk {
  std::size_t index = 0;
  std::vector<SentenceSpan> sentences;
  std::string text;
};

inline constexpr std::size_t kDefaultChunkSize = 10;

/// Abbreviations that never end a sentence. Matched against the token
/// immediately preceding a period, case-sensitively.
std::span<const std::string_view> german_abbreviations();

/// NFC, unified newlines, control characters stripped (tabs become spaces),
/// runs of blank lines collapsed to one, outer whitespace trimmed.
/// Throws Error(EncodingError) on invalid UTF-8.
std::string normalize_text(std::string_view raw);

/// Reduces Markdown markup to plain prose: headings, emphasis, list
/// markers, links, images, code fences and HTML tags.
std::string strip_markdown(std::string_view markdown);

/// Builds a Document from already-loaded text.
Document make_document(std::string party_id, std::string party_name, SourceKind kind,
                       std::string_view raw_text);

/// Reads `path` (.md/.markdown files are stripped to text first).
Document load_document(const std::filesystem::path& path, std::string party_id,
                       SourceKind kind, std::string party_name = {});

std::vector<SentenceSpan> segment_sentences(const Document& doc);
std::vector<SentenceSpan> segment_sentences(std::string_view body);

std::vector<Chunk> chunk_sentences(std::span<const SentenceSpan> spans,
                                   std::size_t chunk_size = kDefaultChunkSize);

// Corpus descriptor: an INI-style file, one section per party.
//
//   [cdu]
//   name = Christian Democratic Union
//   program = programs/cdu.md
//   compass = compass/cdu.txt
//
// Paths are relative to the descriptor's directory. Either path may be
// omitted, but each party needs at least one. '#' and ';' start comments.
struct PartyEntry {
  std::string party_id;
  std::string name;
  std::filesystem::path program_path;
  std::filesystem::path compass_path;
};

struct CorpusDescriptor {
  std::filesystem::path base_dir;
  std::vector<PartyEntry> parties;
};

CorpusDescriptor parse_corpus_descriptor(std::string_view text,
                                         const std::filesystem::path& base_dir);
CorpusDescriptor read_corpus_descriptor(const std::filesystem::path& path);

/// Loads every document named by the descriptor, programs before compass
/// responses per party, parties in file order.
std::vector<Document> load_corpus(const CorpusDescriptor& descriptor);

/// Throws Error(DuplicateDocument) when (party_id, source_kind) repeats.
void check_unique(std::span<const Document> docs);

/// Hash over the identity and content of every document, order-independent.
std::string corpus_hash(std::span<const Document> docs);

}  // namespace progviz
