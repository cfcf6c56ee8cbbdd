// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "json.hpp"
#include "wolf/error.hpp"

#include <deque>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

namespace wolf::backends {

enum class BackendKind { kImage, kVideo, kText };

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view text);

struct Attachment {
  enum class Kind { kImage, kVideo };
  Kind kind = Kind::kImage;
  // Stable logical reference; part of the request digest.
  std::string ref;
  // Where the bytes live. Not part of the digest, so relocating a dataset
  // does not invalidate recorded transcripts.
  std::filesystem::path path;
};

struct ChatRequest {
  std::string backend_name;
  std::vector<std::string> prompt_parts;
  std::vector<Attachment> attachments;
  int max_reply_tokens = 1024;
  double temperature = 0.2;

  /// Non-empty prompt, at most one video attachment, temperature in [0, 1].
  void validate() const;
};

struct ChatResponse {
  std::string text;
  double latency = 0.0;
  int attempt_count = 1;
  std::string backend_name;
  std::string digest;
};

struct BackendConfig {
  std::string name;
  BackendKind kind = BackendKind::kText;
  // "mock" or "openai" (any OpenAI-compatible chat-completions endpoint).
  std::string provider = "mock";
  // Mock mode: echo, scripted, digest or judge.
  std::string mode = "echo";
  std::filesystem::path transcript;
  std::string endpoint;
  std::string model;
  // Name of the environment variable holding the API token.
  std::string auth_env;
  double timeout = 60.0;
  int max_retries = 3;
  std::size_t batch_capacity = 1;
  double batch_linger_ms = 20.0;
  int max_in_flight = 4;
  double temperature = 0.2;
  int max_reply_tokens = 1024;

  void validate() const;
};

BackendConfig backend_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BackendConfig& config);

/// Canonical JSON of the digest-relevant request fields.
nlohmann::json canonical_json(const ChatRequest& request);
ChatRequest request_from_json(const nlohmann::json& j);

/// SHA-256 of the canonical request JSON.
std::string request_digest(const ChatRequest& request);

/// Outcome of one attempt inside a batch.
struct Attempt {
  std::optional<std::string> text;
  std::exception_ptr error;
};

/// One chat-completion transport. `send` makes a single attempt and throws
/// Error(kTransient) for retryable failures; any other code is final.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string send(const ChatRequest& request) = 0;

  /// Default implementation loops over `send`.
  virtual std::vector<Attempt> send_batch(std::span<const ChatRequest> requests);

  /// In-process mocks report zero latency so their logs stay reproducible.
  virtual bool measures_latency() const { return true; }

  /// Latency reported for a batch when `measures_latency` is false.
  virtual double simulated_latency() const { return 0.0; }
};

/// Replies with the final prompt part.
class EchoBackend : public Backend {
 public:
  std::string send(const ChatRequest& request) override;
  bool measures_latency() const override { return false; }
};

/// Replies with a short string derived from the request digest.
class DigestBackend : public Backend {
 public:
  std::string send(const ChatRequest& request) override;
  bool measures_latency() const override { return false; }
};

/// Replays replies keyed by request digest. Each key holds a queue of
/// outcomes; the last one repeats once the queue is drained.
class ScriptedBackend : public Backend {
 public:
  struct Outcome {
    bool fail = false;
    std::string text;
  };

  ScriptedBackend() = default;

  static std::shared_ptr<ScriptedBackend> from_exchange_log(const std::filesystem::path& path);

  void add(const std::string& digest, Outcome outcome);
  void add_for(const ChatRequest& request, Outcome outcome);
  /// Outcomes not yet consumed.
  std::size_t size() const;

  std::string send(const ChatRequest& request) override;
  bool measures_latency() const override { return false; }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::deque<Outcome>> script_;
};

/// Wraps another backend and charges a fixed wall-clock latency per call,
/// one charge per batch. Stands in for an accelerator that processes a
/// batch in the same time as a single example.
class SimulatedBatchBackend : public Backend {
 public:
  SimulatedBatchBackend(std::shared_ptr<Backend> inner, double per_call_seconds);

  std::string send(const ChatRequest& request) override;
  std::vector<Attempt> send_batch(std::span<const ChatRequest> requests) override;
  bool measures_latency() const override { return true; }

 private:
  std::shared_ptr<Backend> inner_;
  double per_call_seconds_;
};

/// OpenAI-compatible chat-completions client. The wire format is described
/// in docs/wire_format.md.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendConfig config);

  std::string send(const ChatRequest& request) override;

  /// Request body exactly as sent on the wire.
  std::string request_body(const ChatRequest& request) const;

  /// Extracts choices[0].message.content; throws kTransient when malformed.
  static std::string parse_reply(const std::string& body);

 private:
  BackendConfig config_;
};

struct Exchange {
  std::string digest;
  std::string backend_name;
  ChatRequest request;
  std::optional<ChatResponse> response;
  std::string error;
};

nlohmann::json to_json(const Exchange& exchange);

/// Append-only JSONL record of every completed exchange. Thread-safe.
class ExchangeLog {
 public:
  ExchangeLog() = default;
  explicit ExchangeLog(std::filesystem::path path, bool truncate = true);

  void append(const Exchange& exchange);
  std::vector<Exchange> entries() const;

  static std::vector<Exchange> load(const std::filesystem::path& path);

 private:
  mutable std::mutex mutex_;
  std::optional<std::filesystem::path> path_;
  std::vector<Exchange> entries_;
};

struct RetryPolicy {
  double base_delay = 1.0;  // seconds
  double factor = 2.0;
  double jitter = 0.2;      // fraction, applied symmetrically
};

/// Configured access to one backend: retries with exponential backoff,
/// bounded in-flight concurrency and exchange logging.
class Client {
 public:
  using Sleeper = std::function<void(double seconds)>;

  Client(BackendConfig config, std::shared_ptr<Backend> backend,
         std::shared_ptr<ExchangeLog> log = nullptr, std::uint64_t jitter_seed = 0);

  ChatResponse complete(ChatRequest request);

  /// Single attempt over a batch without retries; used by the scheduler.
  std::vector<Attempt> attempt_batch(std::span<const ChatRequest> requests, double& latency);

  /// Records a finished exchange and returns the response view of it.
  ChatResponse record(const ChatRequest& request, std::string text, double latency, int attempts);

  ChatRequest make_request(std::vector<std::string> parts,
                           std::vector<Attachment> attachments = {}) const;

  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }
  void set_retry_policy(RetryPolicy policy) { policy_ = policy; }

  /// Delay before retry number `attempt` (1-based), jitter included.
  double backoff_delay(int attempt);

  const BackendConfig& config() const { return config_; }
  const std::shared_ptr<ExchangeLog>& log() const { return log_; }

 private:
  void check_auth() const;

  BackendConfig config_;
  std::shared_ptr<Backend> backend_;
  std::shared_ptr<ExchangeLog> log_;
  RetryPolicy policy_;
  Sleeper sleeper_;
  std::mutex rng_mutex_;
  std::mt19937_64 rng_;
  std::counting_semaphore<> in_flight_;
};

}  // namespace wolf::backends
