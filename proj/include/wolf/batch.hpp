// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "wolf/backends.hpp"

#include <condition_variable>
#include <future>
#include <thread>

namespace wolf::backends {

struct BatchResult {
  std::optional<ChatResponse> response;
  ErrorCode code = ErrorCode::kBackendUnavailable;
  std::string error;

  bool ok() const { return response.has_value(); }
};

/// Single serialized queue in front of one backend. Requests are grouped
/// into batches of at most `batch_capacity`; a partial batch is flushed
/// once its oldest request has waited `batch_linger_ms`.
class BatchScheduler {
 public:
  explicit BatchScheduler(Client& client);
  ~BatchScheduler();

  BatchScheduler(const BatchScheduler&) = delete;
  BatchScheduler& operator=(const BatchScheduler&) = delete;

  std::future<ChatResponse> submit(ChatRequest request);

  /// Enqueues all requests under one lock so they batch together.
  std::vector<std::future<ChatResponse>> submit_all(std::vector<ChatRequest> requests);

  /// Sizes of every batch flushed so far, in flush order.
  std::vector<std::size_t> flush_sizes() const;

 private:
  struct Pending {
    ChatRequest request;
    std::promise<ChatResponse> promise;
    std::chrono::steady_clock::time_point enqueued;
  };

  void run();
  void dispatch(std::vector<Pending> batch);

  Client& client_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Pending> queue_;
  std::vector<std::size_t> flushes_;
  bool stopping_ = false;
  std::thread worker_;
};

/// Order-preserving batched submission. Failures are isolated per request.
std::vector<BatchResult> batch_submit(std::vector<ChatRequest> requests, Client& client,
                                      std::vector<std::size_t>* flush_sizes = nullptr);

}  // namespace wolf::backends
