#include <doctest.h>

#include <atomic>
#include <deque>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "progviz/backend.hpp"
#include "progviz/error.hpp"
#include "progviz/hash.hpp"
#include "progviz/png.hpp"

using namespace progviz;
using json = nlohmann::json;

namespace {

// Local OpenAI-style server answering with a scripted status sequence.
class FakeServer {
 public:
  FakeServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      record(req);
      const int status = next_status();
      res.status = status;
      if (status != 200) {
        res.set_content("{\"error\":\"nope\"}", "application/json");
        return;
      }
      if (malformed_) {
        res.set_content("{\"choices\":[]}", "application/json");
        return;
      }
      const auto body = json::parse(req.body);
      const json reply = {
          {"model", body["model"]},
          {"choices", {{{"message", {{"role", "assistant"}, {"content", "echo: " + body["messages"][0]["content"].get<std::string>() + "\n"}}}}}},
          {"usage", {{"prompt_tokens", 7}, {"completion_tokens", 3}}},
      };
      res.set_content(reply.dump(), "application/json");
    });
    server_.Post("/v1/images/generations", [this](const httplib::Request& req, httplib::Response& res) {
      record(req);
      const auto body = json::parse(req.body);
      json data = json::array();
      const int n = body["n"].get<int>() + extra_images_;
      for (int i = 0; i < n; ++i) {
        if (corrupt_image_) {
          data.push_back({{"b64_json", "bm90IGEgcG5n"}});
        } else {
          const auto png = png::encode_solid(4, 4, {static_cast<std::uint8_t>(i * 40), 10, 20});
          data.push_back({{"b64_json", base64_encode(png)}});
        }
      }
      res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  void script(std::deque<int> statuses) {
    std::lock_guard lock(mutex_);
    statuses_ = std::move(statuses);
  }
  void set_malformed(bool v) { malformed_ = v; }
  void set_corrupt_image(bool v) { corrupt_image_ = v; }
  void set_extra_images(int v) { extra_images_ = v; }
  void set_delay_ms(int v) { delay_ms_ = v; }

  int hits() const { return hits_.load(); }
  int peak() const { return peak_.load(); }
  std::vector<json> bodies() const {
    std::lock_guard lock(mutex_);
    return bodies_;
  }
  std::vector<std::string> auth_headers() const {
    std::lock_guard lock(mutex_);
    return auth_;
  }

 private:
  void record(const httplib::Request& req) {
    ++hits_;
    const int now = ++active_;
    int p = peak_.load();
    while (now > p && !peak_.compare_exchange_weak(p, now)) {
    }
    if (delay_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
    {
      std::lock_guard lock(mutex_);
      bodies_.push_back(json::parse(req.body));
      auth_.push_back(req.get_header_value("Authorization"));
    }
    --active_;
  }

  int next_status() {
    std::lock_guard lock(mutex_);
    if (statuses_.empty()) return 200;
    const int s = statuses_.front();
    statuses_.pop_front();
    return s;
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mutex_;
  std::deque<int> statuses_;
  std::vector<json> bodies_;
  std::vector<std::string> auth_;
  std::atomic<bool> malformed_{false}, corrupt_image_{false};
  std::atomic<int> extra_images_{0}, delay_ms_{0};
  std::atomic<int> hits_{0}, active_{0}, peak_{0};
};

BackendConfig http_config(const std::string& url) {
  BackendConfig cfg;
  cfg.name = "local";
  cfg.base_url = url;
  cfg.model_id = "test-model";
  cfg.timeout = std::chrono::milliseconds(2000);
  cfg.max_retries = 3;
  cfg.retry_backoff_base = std::chrono::milliseconds(1);
  return cfg;
}

ChatRequest chat(std::string prompt) {
  ChatRequest req;
  req.model_id = "test-model";
  req.prompt = std::move(prompt);
  return req;
}

BackendError chat_error(Backend& b, const ChatRequest& req) {
  try {
    b.complete_chat(req);
  } catch (const BackendError& e) {
    return e;
  }
  FAIL("expected BackendError");
  return BackendError(BackendErrorKind::InvalidRequest, "unreachable");
}

}  // namespace

TEST_CASE("http chat succeeds and sends an OpenAI-style body") {
  FakeServer server;
  auto cfg = http_config(server.url());
  cfg.api_key = "sk-test";
  HttpBackend backend(cfg);
  const auto resp = backend.complete_chat(chat("Hallo"));
  CHECK(resp.text == "echo: Hallo");
  CHECK(resp.attempts == 1);
  REQUIRE(resp.usage);
  CHECK(resp.usage->completion_tokens == 3);
  const auto body = server.bodies().at(0);
  CHECK(body["model"] == "test-model");
  CHECK(body["temperature"] == 0.0);
  CHECK(body["stream"] == false);
  CHECK(server.auth_headers().at(0) == "Bearer sk-test");
  CHECK(backend.call_count() == 1);
}

TEST_CASE("transient failures are retried") {
  FakeServer server;
  HttpBackend backend(http_config(server.url()));
  server.script({500, 500, 200});
  const auto resp = backend.complete_chat(chat("x"));
  CHECK(resp.attempts == 3);
  CHECK(server.hits() == 3);

  server.script({429, 200});
  CHECK(backend.complete_chat(chat("y")).attempts == 2);
}

TEST_CASE("client errors are not retried") {
  FakeServer server;
  HttpBackend backend(http_config(server.url()));
  server.script({400});
  const auto err = chat_error(backend, chat("x"));
  CHECK(err.kind() == BackendErrorKind::Rejected);
  CHECK(err.attempts() == 1);
  CHECK(err.http_status() == 400);
  CHECK(server.hits() == 1);
}

TEST_CASE("retry budget is bounded") {
  FakeServer server;
  auto cfg = http_config(server.url());
  cfg.max_retries = 2;
  HttpBackend backend(cfg);
  server.script({503, 503, 503, 503});
  const auto err = chat_error(backend, chat("x"));
  CHECK(err.kind() == BackendErrorKind::RetriesExhausted);
  CHECK(err.attempts() == 3);
  CHECK(server.hits() == 3);
}

TEST_CASE("malformed and unreachable backends") {
  {
    FakeServer server;
    server.set_malformed(true);
    HttpBackend backend(http_config(server.url()));
    CHECK(chat_error(backend, chat("x")).kind() == BackendErrorKind::ResponseMalformed);
  }
  std::string dead_url;
  {
    FakeServer server;
    dead_url = server.url();
  }
  auto cfg = http_config(dead_url);
  cfg.max_retries = 1;
  HttpBackend backend(cfg);
  const auto err = chat_error(backend, chat("x"));
  CHECK(err.kind() == BackendErrorKind::Unreachable);
  CHECK(err.attempts() == 2);
}

TEST_CASE("empty prompt is an invalid request") {
  HttpBackend backend(http_config("http://127.0.0.1:9"));
  CHECK_THROWS_AS(backend.complete_chat(chat("")), BackendError);
}

TEST_CASE("http images decode base64 PNGs") {
  FakeServer server;
  HttpBackend backend(http_config(server.url()));
  ImageRequest req;
  req.prompt = "Dortmund city";
  req.variant_count = 3;
  req.width = req.height = 4;
  const auto result = backend.generate_images(req);
  REQUIRE(result.images.size() == 3);
  CHECK(result.images[2].variant_index == 2);
  CHECK(png::looks_valid(result.images[0].bytes));
  const auto body = server.bodies().at(0);
  CHECK(body["n"] == 3);
  CHECK(body["size"] == "4x4");
  CHECK(body["response_format"] == "b64_json");

  server.set_extra_images(1);
  CHECK_THROWS_AS(backend.generate_images(req), BackendError);
  server.set_extra_images(0);
  server.set_corrupt_image(true);
  try {
    backend.generate_images(req);
    FAIL("expected ImageDecodeError");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendErrorKind::ImageDecodeError);
  }
}

TEST_CASE("seeded image backends get one request per variant") {
  FakeServer server;
  auto cfg = http_config(server.url());
  cfg.supports_seed = true;
  HttpBackend backend(cfg);
  ImageRequest req;
  req.prompt = "p";
  req.variant_count = 3;
  req.width = req.height = 4;
  req.seed = 100;
  const auto result = backend.generate_images(req);
  REQUIRE(result.images.size() == 3);
  CHECK(result.images[1].seed == 101);
  const auto bodies = server.bodies();
  REQUIRE(bodies.size() == 3);
  CHECK(bodies[2]["seed"] == 102);
  CHECK(bodies[2]["n"] == 1);
}

TEST_CASE("concurrency limit holds under parallel callers") {
  FakeServer server;
  server.set_delay_ms(20);
  auto cfg = http_config(server.url());
  cfg.max_concurrent_requests = 2;
  auto limiter = std::make_shared<ConcurrencyLimiter>(2);
  HttpBackend a(cfg, limiter), b(cfg, limiter);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] { (i % 2 ? a : b).complete_chat(chat("p" + std::to_string(i))); });
  }
  for (auto& t : threads) t.join();
  CHECK(server.hits() == 8);
  CHECK(server.peak() <= 2);
  CHECK(limiter->peak() <= 2);
  CHECK(limiter->peak() >= 1);
  CHECK(limiter->in_flight() == 0);
}

TEST_CASE("backoff is bounded full jitter") {
  for (int retry = 0; retry < 12; ++retry) {
    const auto d = backoff_delay(std::chrono::milliseconds(1000), retry);
    CHECK(d.count() >= 0);
    CHECK(d.count() <= std::min<long long>(30'000, 1000LL << retry));
  }
}

TEST_CASE("mock backend: longest match, tie-break, sentinel, templating") {
  MockScript script;
  script.responses = {{"Stadt", "short"}, {"Stadt Dortmund", "long"}, {"abc", "A"}, {"abd", "B"},
                      {"prefix: ", "got {{after}}"}};
  auto mock = make_mock_backend(script);
  CHECK(mock->complete_chat(chat("Die Stadt Dortmund")).text == "long");
  CHECK(mock->complete_chat(chat("Die Stadt")).text == "short");
  CHECK(mock->complete_chat(chat("abc abd")).text == "A");
  CHECK(mock->complete_chat(chat("nothing here")).text == kMockUnmatched);
  CHECK(mock->complete_chat(chat("prefix: rest of it")).text == "got rest of it");
  CHECK(mock->call_count() == 5);
  CHECK(mock->config().name == "mock");

  MockScript bad;
  bad.responses = {{"", "x"}};
  CHECK_THROWS_AS(make_mock_backend(bad), std::invalid_argument);
}

TEST_CASE("mock backend: scripted failures and deterministic images") {
  MockScript script;
  script.responses = {{"fail", "never"}};
  script.failures = {{"fail", BackendErrorKind::Unreachable}};
  auto mock = make_mock_backend(script);
  const auto err = chat_error(*mock, chat("please fail"));
  CHECK(err.kind() == BackendErrorKind::Unreachable);

  ImageRequest req;
  req.prompt = "Dortmund city";
  req.variant_count = 5;
  req.width = req.height = 8;
  req.seed = 42;
  const auto a = mock->generate_images(req);
  const auto b = mock->generate_images(req);
  REQUIRE(a.images.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a.images[i].bytes == b.images[i].bytes);
    CHECK(a.images[i].seed == 42 + static_cast<int>(i));
    png::Header h;
    CHECK(png::looks_valid(a.images[i].bytes, &h));
    CHECK(h.width == 8);
  }
  CHECK(a.images[0].bytes != a.images[1].bytes);
}

TEST_CASE("api key environment variable name") {
  CHECK(api_key_env_var("tower") == "TOWER_API_KEY");
  CHECK(api_key_env_var("deep-seek.r1") == "DEEP_SEEK_R1_API_KEY");
}
