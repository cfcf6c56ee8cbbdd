// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#include "wolf/batch.hpp"

#include <fmt/format.h>

namespace wolf::backends {

BatchScheduler::BatchScheduler(Client& client) : client_(client), worker_([this] { run(); }) {}

BatchScheduler::~BatchScheduler() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  worker_.join();
}

std::future<ChatResponse> BatchScheduler::submit(ChatRequest request) {
  std::vector<ChatRequest> one;
  one.push_back(std::move(request));
  return std::move(submit_all(std::move(one)).front());
}

std::vector<std::future<ChatResponse>> BatchScheduler::submit_all(std::vector<ChatRequest> requests) {
  std::vector<std::future<ChatResponse>> futures;
  futures.reserve(requests.size());
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    for (auto& r : requests) {
      if (r.backend_name.empty()) r.backend_name = client_.config().name;
      Pending p{std::move(r), {}, now};
      futures.push_back(p.promise.get_future());
      queue_.push_back(std::move(p));
    }
  }
  cv_.notify_all();
  return futures;
}

std::vector<std::size_t> BatchScheduler::flush_sizes() const {
  std::lock_guard lock(mutex_);
  return flushes_;
}

void BatchScheduler::run() {
  const std::size_t capacity = client_.config().batch_capacity;
  const auto linger = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double, std::milli>(client_.config().batch_linger_ms));

  std::unique_lock lock(mutex_);
  for (;;) {
    cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
    if (queue_.empty()) return;
    if (queue_.size() < capacity && !stopping_) {
      const auto deadline = queue_.front().enqueued + linger;
      cv_.wait_until(lock, deadline, [&] { return stopping_ || queue_.size() >= capacity; });
    }
    const std::size_t take = std::min(capacity, queue_.size());
    std::vector<Pending> batch;
    batch.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
      batch.push_back(std::move(queue_.front()));
      queue_.pop_front();
    }
    flushes_.push_back(take);
    lock.unlock();
    dispatch(std::move(batch));
    lock.lock();
  }
}

void BatchScheduler::dispatch(std::vector<Pending> batch) {
  std::vector<ChatRequest> requests;
  requests.reserve(batch.size());
  for (auto& p : batch) requests.push_back(p.request);

  std::vector<Attempt> attempts;
  double latency = 0.0;
  try {
    for (const auto& r : requests) r.validate();
    attempts = client_.attempt_batch(requests, latency);
  } catch (...) {
    for (auto& p : batch) p.promise.set_exception(std::current_exception());
    return;
  }

  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto& pending = batch[i];
    try {
      const Attempt& attempt = attempts.at(i);
      if (attempt.text && !attempt.text->empty()) {
        pending.promise.set_value(client_.record(pending.request, *attempt.text, latency, 1));
        continue;
      }
      if (attempt.error) {
        try {
          std::rethrow_exception(attempt.error);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kTransient) throw;
        }
      }
      // Retryable failure: fall back to the per-request retry path, which
      // owns backoff and the remaining attempt budget.
      ChatResponse response = client_.complete(pending.request);
      response.attempt_count += 1;
      pending.promise.set_value(std::move(response));
    } catch (...) {
      pending.promise.set_exception(std::current_exception());
    }
  }
}

std::vector<BatchResult> batch_submit(std::vector<ChatRequest> requests, Client& client,
                                      std::vector<std::size_t>* flush_sizes) {
  for (const auto& r : requests) {
    if (!r.backend_name.empty() && r.backend_name != client.config().name) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("batch for backend '{}' contains a request for '{}'",
                              client.config().name, r.backend_name));
    }
  }
  BatchScheduler scheduler(client);
  auto futures = scheduler.submit_all(std::move(requests));
  std::vector<BatchResult> results(futures.size());
  for (std::size_t i = 0; i < futures.size(); ++i) {
    try {
      results[i].response = futures[i].get();
    } catch (const Error& e) {
      results[i].code = e.code();
      results[i].error = e.what();
    } catch (const std::exception& e) {
      results[i].error = e.what();
    }
  }
  if (flush_sizes) *flush_sizes = scheduler.flush_sizes();
  return results;
}

}  // namespace wolf::backends
