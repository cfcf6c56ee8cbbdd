// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#include "httplib.h"
#include "wolf/backends.hpp"
#include "wolf/hash.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace wolf::backends {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("endpoint '{}' lacks a scheme", url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string mime_type(const std::filesystem::path& path, Attachment::Kind kind) {
  std::string ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (kind == Attachment::Kind::kVideo) return ext == ".webm" ? "video/webm" : "video/mp4";
  if (ext == ".png") return "image/png";
  if (ext == ".webp") return "image/webp";
  return "image/jpeg";
}

std::string attachment_url(const Attachment& a) {
  if (a.path.empty()) return a.ref;
  std::ifstream in(a.path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, fmt::format("cannot read attachment '{}'", a.path.string()));
  }
  std::ostringstream bytes;
  bytes << in.rdbuf();
  return fmt::format("data:{};base64,{}", mime_type(a.path, a.kind), base64_encode(bytes.str()));
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) {
    throw Error(ErrorCode::kSchema, fmt::format("backend '{}': endpoint required", config_.name));
  }
  split_endpoint(config_.endpoint);
}

std::string HttpBackend::request_body(const ChatRequest& request) const {
  json content = json::array();
  for (const auto& part : request.prompt_parts) {
    content.push_back({{"type", "text"}, {"text", part}});
  }
  for (const auto& a : request.attachments) {
    if (a.kind == Attachment::Kind::kImage) {
      content.push_back({{"type", "image_url"}, {"image_url", {{"url", attachment_url(a)}}}});
    } else {
      content.push_back({{"type", "video_url"}, {"video_url", {{"url", attachment_url(a)}}}});
    }
  }
  json body = {{"model", config_.model.empty() ? config_.name : config_.model},
               {"messages", json::array({{{"role", "user"}, {"content", content}}})},
               {"max_tokens", request.max_reply_tokens},
               {"temperature", request.temperature}};
  return body.dump();
}

std::string HttpBackend::parse_reply(const std::string& body) {
  try {
    const json j = json::parse(body);
    const json& content = j.at("choices").at(0).at("message").at("content");
    std::string text;
    if (content.is_string()) {
      text = content.get<std::string>();
    } else if (content.is_array()) {
      for (const auto& item : content) {
        if (item.value("type", std::string()) == "text") text += item.at("text").get<std::string>();
      }
    }
    if (text.empty()) throw Error(ErrorCode::kTransient, "reply has no text content");
    return text;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kTransient, fmt::format("malformed reply: {}", e.what()));
  }
}

std::string HttpBackend::send(const ChatRequest& request) {
  request.validate();
  const Endpoint ep = split_endpoint(config_.endpoint);
  httplib::Client client(ep.origin);
  const auto timeout_us = static_cast<long>(config_.timeout * 1e6);
  client.set_connection_timeout(timeout_us / 1000000, timeout_us % 1000000);
  client.set_read_timeout(timeout_us / 1000000, timeout_us % 1000000);
  client.set_write_timeout(timeout_us / 1000000, timeout_us % 1000000);

  httplib::Headers headers;
  if (!config_.auth_env.empty()) {
    const char* token = std::getenv(config_.auth_env.c_str());
    if (token == nullptr || *token == '\0') {
      throw Error(ErrorCode::kAuthMissing,
                  fmt::format("backend '{}': environment variable {} is not set", config_.name,
                              config_.auth_env));
    }
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  auto result = client.Post(ep.path, headers, request_body(request), "application/json");
  if (!result) {
    throw Error(ErrorCode::kTransient,
                fmt::format("transport error: {}", httplib::to_string(result.error())));
  }
  const int status = result->status;
  if (status == 408 || status == 429 || status >= 500) {
    throw Error(ErrorCode::kTransient, fmt::format("HTTP {}", status));
  }
  if (status != 200) {
    throw Error(ErrorCode::kBackendUnavailable,
                fmt::format("HTTP {}: {}", status, result->body.substr(0, 200)));
  }
  return parse_reply(result->body);
}

}  // namespace wolf::backends
