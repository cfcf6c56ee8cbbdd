// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#include "wolf/backends.hpp"

#include "wolf/hash.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

namespace wolf::backends {

using nlohmann::json;

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kImage: return "image";
    case BackendKind::kVideo: return "video";
    case BackendKind::kText: return "text";
  }
  return "text";
}

BackendKind backend_kind_from_string(std::string_view text) {
  if (text == "image") return BackendKind::kImage;
  if (text == "video") return BackendKind::kVideo;
  if (text == "text") return BackendKind::kText;
  throw Error(ErrorCode::kSchema, fmt::format("unknown backend kind '{}'", text));
}

void ChatRequest::validate() const {
  if (prompt_parts.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "chat request has no prompt parts");
  }
  int videos = 0;
  for (const auto& a : attachments) videos += a.kind == Attachment::Kind::kVideo;
  if (videos > 1) {
    throw Error(ErrorCode::kInvalidArgument, "chat request carries more than one video");
  }
  if (!(temperature >= 0.0 && temperature <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature outside [0, 1]");
  }
}

void BackendConfig::validate() const {
  if (name.empty()) throw Error(ErrorCode::kSchema, "backend config without name");
  if (batch_capacity < 1) {
    throw Error(ErrorCode::kSchema, fmt::format("backend '{}': batch_capacity must be >= 1", name));
  }
  if (!(timeout > 0.0)) {
    throw Error(ErrorCode::kSchema, fmt::format("backend '{}': timeout must be positive", name));
  }
  if (max_retries < 0 || max_in_flight < 1) {
    throw Error(ErrorCode::kSchema, fmt::format("backend '{}': invalid retry/concurrency limits", name));
  }
}

BackendConfig backend_config_from_json(const json& j) {
  BackendConfig c;
  try {
    c.name = j.at("name").get<std::string>();
    c.kind = backend_kind_from_string(j.value("kind", std::string("text")));
    c.provider = j.value("provider", c.provider);
    c.mode = j.value("mode", c.mode);
    c.transcript = j.value("transcript", std::string());
    c.endpoint = j.value("endpoint", std::string());
    c.model = j.value("model", c.name);
    c.auth_env = j.value("auth_env", std::string());
    c.timeout = j.value("timeout", c.timeout);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.batch_capacity = j.value("batch_capacity", c.batch_capacity);
    c.batch_linger_ms = j.value("batch_linger_ms", c.batch_linger_ms);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    c.temperature = j.value("temperature", c.temperature);
    c.max_reply_tokens = j.value("max_reply_tokens", c.max_reply_tokens);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, fmt::format("backend config: {}", e.what()));
  }
  if (j.contains("auth_token") || j.contains("api_key")) {
    throw Error(ErrorCode::kSchema,
                fmt::format("backend '{}': secrets belong in the environment, use auth_env", c.name));
  }
  c.validate();
  return c;
}

json to_json(const BackendConfig& c) {
  return {{"name", c.name},
          {"kind", to_string(c.kind)},
          {"provider", c.provider},
          {"mode", c.mode},
          {"transcript", c.transcript.string()},
          {"endpoint", c.endpoint},
          {"model", c.model},
          {"auth_env", c.auth_env},
          {"timeout", c.timeout},
          {"max_retries", c.max_retries},
          {"batch_capacity", c.batch_capacity},
          {"batch_linger_ms", c.batch_linger_ms},
          {"max_in_flight", c.max_in_flight},
          {"temperature", c.temperature},
          {"max_reply_tokens", c.max_reply_tokens}};
}

json canonical_json(const ChatRequest& request) {
  json attachments = json::array();
  for (const auto& a : request.attachments) {
    attachments.push_back(
        {{"kind", a.kind == Attachment::Kind::kImage ? "image" : "video"}, {"ref", a.ref}});
  }
  return {{"backend", request.backend_name},
          {"prompt_parts", request.prompt_parts},
          {"attachments", attachments},
          {"max_reply_tokens", request.max_reply_tokens},
          {"temperature", request.temperature}};
}

ChatRequest request_from_json(const json& j) {
  ChatRequest r;
  r.backend_name = j.at("backend").get<std::string>();
  r.prompt_parts = j.at("prompt_parts").get<std::vector<std::string>>();
  for (const auto& a : j.value("attachments", json::array())) {
    Attachment att;
    att.kind = a.at("kind").get<std::string>() == "video" ? Attachment::Kind::kVideo
                                                          : Attachment::Kind::kImage;
    att.ref = a.at("ref").get<std::string>();
    r.attachments.push_back(std::move(att));
  }
  r.max_reply_tokens = j.value("max_reply_tokens", r.max_reply_tokens);
  r.temperature = j.value("temperature", r.temperature);
  return r;
}

std::string request_digest(const ChatRequest& request) {
  return sha256_hex(canonical_json(request).dump());
}

std::vector<Attempt> Backend::send_batch(std::span<const ChatRequest> requests) {
  std::vector<Attempt> out;
  out.reserve(requests.size());
  for (const auto& r : requests) {
    Attempt a;
    try {
      a.text = send(r);
    } catch (...) {
      a.error = std::current_exception();
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::string EchoBackend::send(const ChatRequest& request) {
  request.validate();
  return request.prompt_parts.back();
}

std::string DigestBackend::send(const ChatRequest& request) {
  request.validate();
  return "digest-" + request_digest(request).substr(0, 16);
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_exchange_log(const std::filesystem::path& path) {
  auto backend = std::make_shared<ScriptedBackend>();
  for (const auto& exchange : ExchangeLog::load(path)) {
    if (!exchange.response) continue;
    std::lock_guard lock(backend->mutex_);
    auto& queue = backend->script_[exchange.digest];
    queue.push_back({false, exchange.response->text});
  }
  return backend;
}

void ScriptedBackend::add(const std::string& digest, Outcome outcome) {
  std::lock_guard lock(mutex_);
  script_[digest].push_back(std::move(outcome));
}

void ScriptedBackend::add_for(const ChatRequest& request, Outcome outcome) {
  add(request_digest(request), std::move(outcome));
}

std::size_t ScriptedBackend::size() const {
  std::lock_guard lock(mutex_);
  std::size_t pending = 0;
  for (const auto& [digest, outcomes] : script_) pending += outcomes.size();
  return pending;
}

std::string ScriptedBackend::send(const ChatRequest& request) {
  request.validate();
  const std::string digest = request_digest(request);
  Outcome outcome;
  {
    std::lock_guard lock(mutex_);
    auto it = script_.find(digest);
    if (it == script_.end() || it->second.empty()) {
      throw Error(ErrorCode::kFixtureMiss,
                  fmt::format("no scripted reply for request {} on backend '{}'", digest.substr(0, 16),
                              request.backend_name));
    }
    outcome = it->second.front();
    if (it->second.size() > 1) it->second.pop_front();
  }
  if (outcome.fail) {
    throw Error(ErrorCode::kTransient, outcome.text.empty() ? "scripted failure" : outcome.text);
  }
  return outcome.text;
}

SimulatedBatchBackend::SimulatedBatchBackend(std::shared_ptr<Backend> inner, double per_call_seconds)
    : inner_(std::move(inner)), per_call_seconds_(per_call_seconds) {}

std::string SimulatedBatchBackend::send(const ChatRequest& request) {
  std::this_thread::sleep_for(std::chrono::duration<double>(per_call_seconds_));
  return inner_->send(request);
}

std::vector<Attempt> SimulatedBatchBackend::send_batch(std::span<const ChatRequest> requests) {
  std::this_thread::sleep_for(std::chrono::duration<double>(per_call_seconds_));
  return inner_->send_batch(requests);
}

json to_json(const Exchange& exchange) {
  json j = {{"digest", exchange.digest},
            {"backend", exchange.backend_name},
            {"request", canonical_json(exchange.request)}};
  if (exchange.response) {
    j["response"] = {{"text", exchange.response->text},
                     {"attempt_count", exchange.response->attempt_count},
                     {"latency", exchange.response->latency}};
  } else {
    j["error"] = exchange.error;
  }
  return j;
}

ExchangeLog::ExchangeLog(std::filesystem::path path, bool truncate) : path_(std::move(path)) {
  if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
  std::ofstream out(*path_, truncate ? std::ios::trunc : std::ios::app);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot open exchange log '{}'", path_->string()));
}

void ExchangeLog::append(const Exchange& exchange) {
  std::lock_guard lock(mutex_);
  entries_.push_back(exchange);
  if (path_) {
    std::ofstream out(*path_, std::ios::app);
    out << to_json(exchange).dump() << '\n';
  }
}

std::vector<Exchange> ExchangeLog::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::vector<Exchange> ExchangeLog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open exchange log '{}'", path.string()));
  std::vector<Exchange> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Exchange e;
      e.digest = j.at("digest").get<std::string>();
      e.backend_name = j.at("backend").get<std::string>();
      e.request = request_from_json(j.at("request"));
      if (j.contains("response")) {
        ChatResponse r;
        r.text = j["response"].at("text").get<std::string>();
        r.attempt_count = j["response"].value("attempt_count", 1);
        r.latency = j["response"].value("latency", 0.0);
        r.backend_name = e.backend_name;
        r.digest = e.digest;
        e.response = std::move(r);
      } else {
        e.error = j.value("error", std::string());
      }
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::kSchema,
                  fmt::format("{}:{}: malformed exchange: {}", path.string(), line_no, ex.what()));
    }
  }
  return out;
}

Client::Client(BackendConfig config, std::shared_ptr<Backend> backend,
               std::shared_ptr<ExchangeLog> log, std::uint64_t jitter_seed)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      log_(std::move(log)),
      sleeper_([](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); }),
      rng_(jitter_seed),
      in_flight_(config_.max_in_flight) {
  config_.validate();
}

ChatRequest Client::make_request(std::vector<std::string> parts,
                                 std::vector<Attachment> attachments) const {
  ChatRequest r;
  r.backend_name = config_.name;
  r.prompt_parts = std::move(parts);
  r.attachments = std::move(attachments);
  r.max_reply_tokens = config_.max_reply_tokens;
  r.temperature = config_.temperature;
  return r;
}

double Client::backoff_delay(int attempt) {
  double delay = policy_.base_delay;
  for (int i = 1; i < attempt; ++i) delay *= policy_.factor;
  std::lock_guard lock(rng_mutex_);
  std::uniform_real_distribution<double> jitter(1.0 - policy_.jitter, 1.0 + policy_.jitter);
  return delay * jitter(rng_);
}

void Client::check_auth() const {
  if (config_.auth_env.empty()) return;
  const char* value = std::getenv(config_.auth_env.c_str());
  if (value == nullptr || *value == '\0') {
    throw Error(ErrorCode::kAuthMissing,
                fmt::format("backend '{}': environment variable {} is not set", config_.name,
                            config_.auth_env));
  }
}

ChatResponse Client::record(const ChatRequest& request, std::string text, double latency,
                            int attempts) {
  ChatResponse response;
  response.text = std::move(text);
  response.latency = latency;
  response.attempt_count = attempts;
  response.backend_name = config_.name;
  response.digest = request_digest(request);
  if (log_) log_->append({response.digest, config_.name, request, response, {}});
  return response;
}

ChatResponse Client::complete(ChatRequest request) {
  if (request.backend_name.empty()) request.backend_name = config_.name;
  request.validate();
  check_auth();

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  std::string last_cause;
  const int max_attempts = 1 + config_.max_retries;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    const auto start = std::chrono::steady_clock::now();
    try {
      std::string text = backend_->send(request);
      if (text.empty()) throw Error(ErrorCode::kTransient, "empty reply");
      const double latency =
          backend_->measures_latency()
              ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
              : backend_->simulated_latency();
      return record(request, std::move(text), latency, attempt);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTransient) {
        if (log_) log_->append({request_digest(request), config_.name, request, std::nullopt, e.what()});
        throw;
      }
      last_cause = e.what();
    }
    if (attempt < max_attempts) sleeper_(backoff_delay(attempt));
  }

  const std::string message =
      fmt::format("backend '{}' unavailable after {} attempts: {}", config_.name, max_attempts,
                  last_cause);
  if (log_) log_->append({request_digest(request), config_.name, request, std::nullopt, message});
  throw Error(ErrorCode::kBackendUnavailable, message);
}

std::vector<Attempt> Client::attempt_batch(std::span<const ChatRequest> requests, double& latency) {
  check_auth();
  const auto start = std::chrono::steady_clock::now();
  auto attempts = backend_->send_batch(requests);
  latency = backend_->measures_latency()
                ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
                : backend_->simulated_latency();
  return attempts;
}

}  // namespace wolf::backends
