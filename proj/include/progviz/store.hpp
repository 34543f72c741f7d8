#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace progviz {

struct StoredObject {
  std::string hash;           // sha256 of the bytes
  std::string relative_path;  // "store/<hash>.<ext>", relative to the store's root
};

// Hash-named files under <root>/store/. Writes go through a temp file and a
// rename, so concurrent puts of the same content are harmless.
class ContentStore {
 public:
  explicit ContentStore(std::filesystem::path root);

  /// Throws Error(PipelineAborted) when the file cannot be written.
  StoredObject put(std::span<const std::uint8_t> bytes, std::string_view ext);
  StoredObject put_text(std::string_view text, std::string_view ext = "txt");

  /// Throws Error(MissingArtifact) when absent.
  std::string read(std::string_view relative_path) const;
  /// True when the file exists and hashes to `hash`.
  bool verify(std::string_view relative_path, std::string_view hash) const;

  std::filesystem::path absolute(std::string_view relative_path) const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

/// Writes `bytes` to `path` through a sibling temp file and a rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace progviz
