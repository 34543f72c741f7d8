#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace progviz {

using Seconds = std::chrono::duration<double>;

struct BackendConfig {
  std::string name;
  std::string base_url;
  std::string model_id;
  std::chrono::milliseconds timeout{120'000};
  int max_retries = 3;
  std::chrono::milliseconds retry_backoff_base{1'000};
  int max_concurrent_requests = 1;
  std::optional<std::string> api_key;  // populated from the environment only

  double temperature = 0.0;
  int max_output_tokens = 2048;
  // The summarize stage sends raw text to dedicated summarizers and an
  // instruction-prefixed prompt to chat models.
  bool dedicated_summarizer = false;
  // Image backends that honor per-request seeds get one request per variant.
  bool supports_seed = false;
  // Average draw attributed to this backend's stage, for energy accounting.
  double avg_power_w = 0.0;

  /// Throws Error(InvalidConfig).
  void validate() const;
};

/// "{NAME}_API_KEY" with the name upper-cased and non-alphanumerics mapped to '_'.
std::string api_key_env_var(std::string_view backend_name);
std::optional<std::string> api_key_from_env(std::string_view backend_name);

struct ChatRequest {
  std::string model_id;
  std::string prompt;
  double temperature = 0.0;
  int max_output_tokens = 2048;
  std::string request_id;

  void validate() const;
};

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct ChatResponse {
  std::string text;
  std::optional<TokenUsage> usage;
  Seconds latency{0};
  std::string backend_name;
  std::string model_id;
  int attempts = 1;
};

struct ImageRequest {
  std::string model_id;
  std::string prompt;
  int variant_count = 5;
  std::uint32_t width = 1024;
  std::uint32_t height = 1024;
  std::optional<std::int64_t> seed;
  std::string request_id;

  void validate() const;
};

struct GeneratedImage {
  int variant_index = 0;
  std::vector<std::uint8_t> bytes;
  std::string format = "png";
  std::optional<std::int64_t> seed;
};

struct ImageResult {
  std::vector<GeneratedImage> images;
  Seconds latency{0};
  int attempts = 1;
};

enum class BackendErrorKind {
  InvalidRequest,
  Unreachable,
  Rejected,
  ResponseMalformed,
  RetriesExhausted,
  ImageDecodeError,
};

std::string_view to_string(BackendErrorKind kind);
std::optional<BackendErrorKind> backend_error_kind_from_string(std::string_view text);

class BackendError : public std::runtime_error {
 public:
  BackendError(BackendErrorKind kind, const std::string& detail, int attempts = 0,
               int http_status = 0)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
        kind_(kind),
        attempts_(attempts),
        http_status_(http_status) {}

  BackendErrorKind kind() const noexcept { return kind_; }
  int attempts() const noexcept { return attempts_; }
  int http_status() const noexcept { return http_status_; }

 private:
  BackendErrorKind kind_;
  int attempts_;
  int http_status_;
};

// Counting admission gate shared by every handle that talks to one backend.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(int capacity);

  class Permit {
   public:
    explicit Permit(ConcurrencyLimiter& limiter) : limiter_(&limiter) { limiter_->acquire(); }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    ~Permit() { limiter_->release(); }

   private:
    ConcurrencyLimiter* limiter_;
  };

  int capacity() const { return capacity_; }
  int in_flight() const;
  /// Highest number of simultaneously admitted callers observed.
  int peak() const;

 private:
  void acquire();
  void release();

  const int capacity_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  int in_flight_ = 0;
  int peak_ = 0;
};

/// Backoff before retry number `retry` (0-based): uniform in
/// [0, min(30 s, base * 2^retry)].
std::chrono::milliseconds backoff_delay(std::chrono::milliseconds base, int retry);

class Backend {
 public:
  virtual ~Backend() = default;

  virtual const BackendConfig& config() const = 0;
  virtual ChatResponse complete_chat(const ChatRequest& req) = 0;
  virtual ImageResult generate_images(const ImageRequest& req) = 0;
  /// Number of complete_chat / generate_images invocations that reached the backend.
  virtual std::size_t call_count() const = 0;
};

// OpenAI-compatible HTTP client: POST {base_url}/v1/chat/completions and
// {base_url}/v1/images/generations.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendConfig cfg, std::shared_ptr<ConcurrencyLimiter> limiter = nullptr);

  const BackendConfig& config() const override { return cfg_; }
  ChatResponse complete_chat(const ChatRequest& req) override;
  ImageResult generate_images(const ImageRequest& req) override;
  std::size_t call_count() const override { return calls_.load(); }

  const ConcurrencyLimiter& limiter() const { return *limiter_; }

 private:
  struct Endpoint {
    std::string scheme_host_port;
    std::string path_prefix;
  };

  std::vector<GeneratedImage> request_images(const ImageRequest& req, int n,
                                             std::optional<std::int64_t> seed,
                                             int first_variant, int& attempts);

  BackendConfig cfg_;
  Endpoint endpoint_;
  std::shared_ptr<ConcurrencyLimiter> limiter_;
  std::atomic<std::size_t> calls_{0};
};

inline constexpr std::string_view kMockUnmatched = "MOCK-UNMATCHED";

// Prompt-substring script for the mock backend. The longest matching key
// wins; equal-length ties go to the lexicographically smaller key. Failure
// rules are consulted before responses. In a response, "{{after}}" expands
// to the prompt text following the matched key.
struct MockScript {
  std::map<std::string, std::string> responses;
  std::map<std::string, BackendErrorKind> failures;
  std::chrono::milliseconds delay{0};
};

class MockBackend final : public Backend {
 public:
  MockBackend(BackendConfig cfg, MockScript script,
              std::shared_ptr<ConcurrencyLimiter> limiter = nullptr);

  const BackendConfig& config() const override { return cfg_; }
  ChatResponse complete_chat(const ChatRequest& req) override;
  ImageResult generate_images(const ImageRequest& req) override;
  std::size_t call_count() const override { return calls_.load(); }

  const ConcurrencyLimiter& limiter() const { return *limiter_; }
  void set_script(MockScript script);

  /// Deterministic placeholder used for image variants.
  static std::vector<std::uint8_t> placeholder_image(std::string_view prompt, std::int64_t seed,
                                                     std::uint32_t width, std::uint32_t height);

 private:
  std::string respond(std::string_view prompt) const;
  std::chrono::milliseconds delay() const;

  BackendConfig cfg_;
  mutable std::mutex script_mutex_;
  MockScript script_;
  std::shared_ptr<ConcurrencyLimiter> limiter_;
  std::atomic<std::size_t> calls_{0};
};

/// Throws std::invalid_argument when a script key is empty.
std::shared_ptr<MockBackend> make_mock_backend(MockScript script, BackendConfig cfg = {});

}  // namespace progviz
