#include "progviz/backend.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <random>
#include <thread>

#include <json.hpp>

#include "progviz/error.hpp"
#include "progviz/hash.hpp"
#include "progviz/png.hpp"

namespace progviz {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

void BackendConfig::validate() const {
  auto fail = [this](const std::string& what) {
    throw Error(ErrorCode::InvalidConfig, "backend '" + name + "': " + what);
  };
  if (name.empty()) throw Error(ErrorCode::InvalidConfig, "backend name is empty");
  if (max_retries < 0 || max_retries > 10) fail("max_retries must be in [0, 10]");
  if (timeout.count() <= 0) fail("timeout must be positive");
  if (retry_backoff_base.count() < 0) fail("retry_backoff_base must be non-negative");
  if (max_concurrent_requests < 1) fail("max_concurrent_requests must be >= 1");
  if (temperature < 0.0 || temperature > 2.0) fail("temperature must be in [0, 2]");
  if (max_output_tokens < 1) fail("max_output_tokens must be positive");
  if (avg_power_w < 0.0) fail("avg_power_w must be non-negative");
}

std::string api_key_env_var(std::string_view backend_name) {
  std::string var;
  for (char c : backend_name) {
    var.push_back(std::isalnum(static_cast<unsigned char>(c))
                      ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
                      : '_');
  }
  return var + "_API_KEY";
}

std::optional<std::string> api_key_from_env(std::string_view backend_name) {
  const char* value = std::getenv(api_key_env_var(backend_name).c_str());
  if (value == nullptr || *value == '\0') return std::nullopt;
  return std::string(value);
}

void ChatRequest::validate() const {
  if (prompt.empty()) throw BackendError(BackendErrorKind::InvalidRequest, "empty prompt");
  if (temperature < 0.0 || temperature > 2.0) {
    throw BackendError(BackendErrorKind::InvalidRequest, "temperature out of [0, 2]");
  }
  if (max_output_tokens < 1) {
    throw BackendError(BackendErrorKind::InvalidRequest, "max_output_tokens must be positive");
  }
}

void ImageRequest::validate() const {
  if (prompt.empty()) throw BackendError(BackendErrorKind::InvalidRequest, "empty prompt");
  if (variant_count < 1) {
    throw BackendError(BackendErrorKind::InvalidRequest, "variant_count must be >= 1");
  }
  if (width == 0 || height == 0) {
    throw BackendError(BackendErrorKind::InvalidRequest, "image dimensions must be positive");
  }
}

std::string_view to_string(BackendErrorKind kind) {
  switch (kind) {
    case BackendErrorKind::InvalidRequest: return "InvalidRequest";
    case BackendErrorKind::Unreachable: return "BackendUnreachable";
    case BackendErrorKind::Rejected: return "BackendRejected";
    case BackendErrorKind::ResponseMalformed: return "ResponseMalformed";
    case BackendErrorKind::RetriesExhausted: return "RetriesExhausted";
    case BackendErrorKind::ImageDecodeError: return "ImageDecodeError";
  }
  return "Unknown";
}

std::optional<BackendErrorKind> backend_error_kind_from_string(std::string_view text) {
  for (auto kind : {BackendErrorKind::InvalidRequest, BackendErrorKind::Unreachable,
                    BackendErrorKind::Rejected, BackendErrorKind::ResponseMalformed,
                    BackendErrorKind::RetriesExhausted, BackendErrorKind::ImageDecodeError}) {
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// ConcurrencyLimiter

ConcurrencyLimiter::ConcurrencyLimiter(int capacity) : capacity_(std::max(1, capacity)) {}

int ConcurrencyLimiter::in_flight() const {
  std::lock_guard lock(mutex_);
  return in_flight_;
}

int ConcurrencyLimiter::peak() const {
  std::lock_guard lock(mutex_);
  return peak_;
}

void ConcurrencyLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return in_flight_ < capacity_; });
  ++in_flight_;
  peak_ = std::max(peak_, in_flight_);
}

void ConcurrencyLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  cv_.notify_one();
}

std::chrono::milliseconds backoff_delay(std::chrono::milliseconds base, int retry) {
  constexpr std::chrono::milliseconds kCap{30'000};
  const double scaled = static_cast<double>(base.count()) * std::pow(2.0, retry);
  const auto ceiling = static_cast<std::int64_t>(std::min(scaled, static_cast<double>(kCap.count())));
  if (ceiling <= 0) return std::chrono::milliseconds{0};
  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::uniform_int_distribution<std::int64_t> dist(0, ceiling);
  return std::chrono::milliseconds{dist(rng)};
}

// ---------------------------------------------------------------------------
// HttpBackend

namespace {

struct Attempt {
  int status = 0;            // HTTP status, 0 when the transport failed
  std::string body;
  std::string transport_error;
};

bool is_transient(const Attempt& a) {
  return a.status == 0 || a.status == 429 || (a.status >= 500 && a.status <= 599);
}

std::string trim_trailing_ws(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

// Runs `attempt_fn` until it yields a non-transient outcome or the retry
// budget is spent; returns the successful body and the attempt count.
template <typename AttemptFn>
std::string run_with_retries(const BackendConfig& cfg, ConcurrencyLimiter& limiter,
                             AttemptFn&& attempt_fn, int& attempts) {
  Attempt last;
  for (int retry = 0; retry <= cfg.max_retries; ++retry) {
    if (retry > 0) std::this_thread::sleep_for(backoff_delay(cfg.retry_backoff_base, retry - 1));
    {
      ConcurrencyLimiter::Permit permit(limiter);
      last = attempt_fn();
    }
    ++attempts;
    if (last.status >= 200 && last.status < 300) return std::move(last.body);
    if (!is_transient(last)) {
      throw BackendError(BackendErrorKind::Rejected,
                         "HTTP " + std::to_string(last.status) + " from '" + cfg.name +
                             "': " + last.body.substr(0, 200),
                         attempts, last.status);
    }
  }
  if (last.status == 0) {
    throw BackendError(BackendErrorKind::Unreachable,
                       "'" + cfg.name + "': " + last.transport_error, attempts);
  }
  throw BackendError(BackendErrorKind::RetriesExhausted,
                     "'" + cfg.name + "': last status " + std::to_string(last.status), attempts,
                     last.status);
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig cfg, std::shared_ptr<ConcurrencyLimiter> limiter)
    : cfg_(std::move(cfg)), limiter_(std::move(limiter)) {
  cfg_.validate();
  const auto scheme = cfg_.base_url.find("://");
  if (scheme == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig,
                "backend '" + cfg_.name + "': base_url needs a scheme: '" + cfg_.base_url + "'");
  }
  const auto slash = cfg_.base_url.find('/', scheme + 3);
  endpoint_.scheme_host_port = cfg_.base_url.substr(0, slash);
  if (slash != std::string::npos) endpoint_.path_prefix = cfg_.base_url.substr(slash);
  while (endpoint_.path_prefix.ends_with('/')) endpoint_.path_prefix.pop_back();
  if (!limiter_) limiter_ = std::make_shared<ConcurrencyLimiter>(cfg_.max_concurrent_requests);
}

namespace {

Attempt post_json(const BackendConfig& cfg, const std::string& scheme_host_port,
                  const std::string& path, const json& payload, const std::string& request_id) {
  httplib::Client client(scheme_host_port);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (cfg.api_key) headers.emplace("Authorization", "Bearer " + *cfg.api_key);
  if (!request_id.empty()) headers.emplace("X-Request-Id", request_id);

  Attempt attempt;
  auto res = client.Post(path, headers, payload.dump(), "application/json");
  if (!res) {
    attempt.transport_error = httplib::to_string(res.error());
    return attempt;
  }
  attempt.status = res->status;
  attempt.body = std::move(res->body);
  return attempt;
}

}  // namespace

ChatResponse HttpBackend::complete_chat(const ChatRequest& req) {
  req.validate();
  ++calls_;
  const json payload = {
      {"model", req.model_id.empty() ? cfg_.model_id : req.model_id},
      {"messages", json::array({{{"role", "user"}, {"content", req.prompt}}})},
      {"temperature", req.temperature},
      {"max_tokens", req.max_output_tokens},
      {"stream", false},
  };
  const auto path = endpoint_.path_prefix + "/v1/chat/completions";

  const auto started = Clock::now();
  int attempts = 0;
  const std::string body = run_with_retries(
      cfg_, *limiter_,
      [&] { return post_json(cfg_, endpoint_.scheme_host_port, path, payload, req.request_id); },
      attempts);

  ChatResponse out;
  out.backend_name = cfg_.name;
  out.attempts = attempts;
  try {
    const json doc = json::parse(body);
    const json& message = doc.at("choices").at(0).at("message");
    out.text = trim_trailing_ws(message.at("content").get<std::string>());
    out.model_id = doc.value("model", payload["model"].get<std::string>());
    if (doc.contains("usage") && doc["usage"].is_object()) {
      out.usage = TokenUsage{doc["usage"].value("prompt_tokens", std::int64_t{0}),
                             doc["usage"].value("completion_tokens", std::int64_t{0})};
    }
  } catch (const json::exception& e) {
    throw BackendError(BackendErrorKind::ResponseMalformed,
                       "chat completion from '" + cfg_.name + "': " + e.what(), attempts, 200);
  }
  out.latency = Clock::now() - started;
  return out;
}

std::vector<GeneratedImage> HttpBackend::request_images(const ImageRequest& req, int n,
                                                        std::optional<std::int64_t> seed,
                                                        int first_variant, int& attempts) {
  json payload = {
      {"model", req.model_id.empty() ? cfg_.model_id : req.model_id},
      {"prompt", req.prompt},
      {"n", n},
      {"size", std::to_string(req.width) + "x" + std::to_string(req.height)},
      {"response_format", "b64_json"},
  };
  if (seed) payload["seed"] = *seed;
  const auto path = endpoint_.path_prefix + "/v1/images/generations";

  const std::string body = run_with_retries(
      cfg_, *limiter_,
      [&] { return post_json(cfg_, endpoint_.scheme_host_port, path, payload, req.request_id); },
      attempts);

  std::vector<GeneratedImage> images;
  try {
    const json doc = json::parse(body);
    const json& data = doc.at("data");
    if (!data.is_array() || static_cast<int>(data.size()) != n) {
      throw BackendError(BackendErrorKind::ResponseMalformed,
                         "expected " + std::to_string(n) + " images from '" + cfg_.name + "'",
                         attempts, 200);
    }
    for (int i = 0; i < n; ++i) {
      GeneratedImage img;
      img.variant_index = first_variant + i;
      img.seed = seed;
      if (!base64_decode(data.at(i).at("b64_json").get<std::string>(), img.bytes) ||
          !png::looks_valid(img.bytes)) {
        throw BackendError(BackendErrorKind::ImageDecodeError,
                           "variant " + std::to_string(img.variant_index) + " from '" +
                               cfg_.name + "' is not a PNG",
                           attempts, 200);
      }
      images.push_back(std::move(img));
    }
  } catch (const json::exception& e) {
    throw BackendError(BackendErrorKind::ResponseMalformed,
                       "image response from '" + cfg_.name + "': " + e.what(), attempts, 200);
  }
  return images;
}

ImageResult HttpBackend::generate_images(const ImageRequest& req) {
  req.validate();
  ++calls_;
  const auto started = Clock::now();
  ImageResult out;
  out.attempts = 0;
  if (cfg_.supports_seed && req.seed) {
    for (int v = 0; v < req.variant_count; ++v) {
      auto one = request_images(req, 1, *req.seed + v, v, out.attempts);
      out.images.push_back(std::move(one.front()));
    }
  } else {
    out.images = request_images(req, req.variant_count, std::nullopt, 0, out.attempts);
  }
  out.latency = Clock::now() - started;
  return out;
}

// ---------------------------------------------------------------------------
// MockBackend

MockBackend::MockBackend(BackendConfig cfg, MockScript script,
                         std::shared_ptr<ConcurrencyLimiter> limiter)
    : cfg_(std::move(cfg)), limiter_(std::move(limiter)) {
  if (cfg_.name.empty()) cfg_.name = "mock";
  if (cfg_.model_id.empty()) cfg_.model_id = "mock-model";
  cfg_.validate();
  set_script(std::move(script));
  if (!limiter_) limiter_ = std::make_shared<ConcurrencyLimiter>(cfg_.max_concurrent_requests);
}

void MockBackend::set_script(MockScript script) {
  auto check = [](const std::string& key) {
    if (key.empty()) throw std::invalid_argument("mock script keys must be non-empty");
  };
  for (const auto& [key, value] : script.responses) check(key);
  for (const auto& [key, value] : script.failures) check(key);
  std::lock_guard lock(script_mutex_);
  script_ = std::move(script);
}

namespace {

// Longest key contained in `prompt`; std::map order breaks length ties.
template <typename Map>
typename Map::const_iterator best_match(const Map& rules, std::string_view prompt) {
  auto best = rules.end();
  for (auto it = rules.begin(); it != rules.end(); ++it) {
    if (prompt.find(it->first) == std::string_view::npos) continue;
    if (best == rules.end() || it->first.size() > best->first.size()) best = it;
  }
  return best;
}

}  // namespace

std::chrono::milliseconds MockBackend::delay() const {
  std::lock_guard lock(script_mutex_);
  return script_.delay;
}

std::string MockBackend::respond(std::string_view prompt) const {
  std::lock_guard lock(script_mutex_);
  if (auto fail = best_match(script_.failures, prompt); fail != script_.failures.end()) {
    throw BackendError(fail->second, "scripted failure on '" + fail->first + "'", 1);
  }
  auto hit = best_match(script_.responses, prompt);
  if (hit == script_.responses.end()) return std::string(kMockUnmatched);

  std::string text = hit->second;
  constexpr std::string_view kAfter = "{{after}}";
  if (const auto slot = text.find(kAfter); slot != std::string::npos) {
    std::string_view after = prompt.substr(prompt.find(hit->first) + hit->first.size());
    while (!after.empty() && std::isspace(static_cast<unsigned char>(after.front()))) after.remove_prefix(1);
    while (!after.empty() && std::isspace(static_cast<unsigned char>(after.back()))) after.remove_suffix(1);
    text.replace(slot, kAfter.size(), after);
  }
  return text;
}

ChatResponse MockBackend::complete_chat(const ChatRequest& req) {
  req.validate();
  ++calls_;
  const auto started = Clock::now();
  ConcurrencyLimiter::Permit permit(*limiter_);
  if (const auto pause = delay(); pause.count() > 0) std::this_thread::sleep_for(pause);

  ChatResponse out;
  out.text = trim_trailing_ws(respond(req.prompt));
  out.backend_name = cfg_.name;
  out.model_id = req.model_id.empty() ? cfg_.model_id : req.model_id;
  out.attempts = 1;
  out.latency = Clock::now() - started;
  return out;
}

std::vector<std::uint8_t> MockBackend::placeholder_image(std::string_view prompt, std::int64_t seed,
                                                         std::uint32_t width, std::uint32_t height) {
  const std::string digest = sha256_hex(std::string(prompt) + '\n' + std::to_string(seed));
  auto byte_at = [&](std::size_t i) {
    return static_cast<std::uint8_t>(std::stoi(digest.substr(2 * i, 2), nullptr, 16));
  };
  return png::encode_solid(width, height, {byte_at(0), byte_at(1), byte_at(2)});
}

ImageResult MockBackend::generate_images(const ImageRequest& req) {
  req.validate();
  ++calls_;
  const auto started = Clock::now();
  ConcurrencyLimiter::Permit permit(*limiter_);
  if (const auto pause = delay(); pause.count() > 0) std::this_thread::sleep_for(pause);
  {
    std::lock_guard lock(script_mutex_);
    if (auto fail = best_match(script_.failures, req.prompt); fail != script_.failures.end()) {
      throw BackendError(fail->second, "scripted failure on '" + fail->first + "'", 1);
    }
  }

  ImageResult out;
  for (int v = 0; v < req.variant_count; ++v) {
    GeneratedImage img;
    img.variant_index = v;
    const std::int64_t effective_seed = req.seed.value_or(0) + v;
    if (req.seed) img.seed = effective_seed;
    img.bytes = placeholder_image(req.prompt, effective_seed, req.width, req.height);
    out.images.push_back(std::move(img));
  }
  out.attempts = 1;
  out.latency = Clock::now() - started;
  return out;
}

std::shared_ptr<MockBackend> make_mock_backend(MockScript script, BackendConfig cfg) {
  return std::make_shared<MockBackend>(std::move(cfg), std::move(script));
}

}  // namespace progviz
