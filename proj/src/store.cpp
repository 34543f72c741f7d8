#include "progviz/store.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "progviz/error.hpp"
#include "progviz/hash.hpp"

namespace progviz {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  static std::atomic<unsigned long> counter{0};
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ostringstream tmp_name;
  tmp_name << path.filename().string() << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id())
           << '.' << counter++;
  const fs::path tmp = path.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::PipelineAborted, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::PipelineAborted, "short write to " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::PipelineAborted, "cannot rename into " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

ContentStore::ContentStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_ / "store", ec);
  if (ec) throw Error(ErrorCode::PipelineAborted, "cannot create " + (root_ / "store").string());
}

StoredObject ContentStore::put(std::span<const std::uint8_t> bytes, std::string_view ext) {
  const std::string_view view(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  StoredObject obj;
  obj.hash = sha256_hex(view);
  obj.relative_path = "store/" + obj.hash + "." + std::string(ext);
  if (!verify(obj.relative_path, obj.hash)) write_file_atomic(absolute(obj.relative_path), view);
  return obj;
}

StoredObject ContentStore::put_text(std::string_view text, std::string_view ext) {
  return put({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()}, ext);
}

std::string ContentStore::read(std::string_view relative_path) const {
  const auto path = absolute(relative_path);
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(ErrorCode::MissingArtifact, path.string());
  return read_file(path);
}

bool ContentStore::verify(std::string_view relative_path, std::string_view hash) const {
  const auto path = absolute(relative_path);
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return false;
  return sha256_hex(read_file(path)) == hash;
}

fs::path ContentStore::absolute(std::string_view relative_path) const {
  return root_ / fs::path(relative_path);
}

}  // namespace progviz
