#pragma once

// Text embedders. The concrete sentence-embedding model sits behind the
// Embedder interface; two offline implementations ship for tests and
// reproducible runs.

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgmatch/http.hpp"
#include "kgmatch/text.hpp"

namespace kgmatch {

using EmbeddingVector = std::vector<double>;

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// One vector per text, all of dimension(). Must be deterministic.
  virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string name() const = 0;
};

/// Hashed character n-gram term-frequency vectors (n = 3 over the
/// lowercased, space-padded text), L2-normalized.
class HashedNgramEmbedder final : public Embedder {
 public:
  explicit HashedNgramEmbedder(std::size_t dimension = 512, std::size_t n = 3) : dim_(dimension), n_(n) {
    if (dim_ == 0 || n_ == 0) throw std::invalid_argument("embedding dimension and n-gram size must be positive");
  }

  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
  }

  EmbeddingVector embed(const std::string& s) const {
    EmbeddingVector v(dim_, 0.0);
    std::string padded = " " + text::collapse_spaces(text::to_lower(s)) + " ";
    if (padded.size() < n_) padded.resize(n_, ' ');
    for (std::size_t i = 0; i + n_ <= padded.size(); ++i) {
      auto h = text::fnv1a64(std::string_view(padded).substr(i, n_));
      v[h % dim_] += 1.0;
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0)
      for (double& x : v) x /= norm;
    return v;
  }

  std::size_t dimension() const override { return dim_; }
  std::string name() const override { return "hashed-ngram-" + std::to_string(n_) + "x" + std::to_string(dim_); }

 private:
  std::size_t dim_;
  std::size_t n_;
};

/// One-hot vector per distinct text (case-folded, whitespace-collapsed):
/// equal texts have cosine 1, different texts cosine 0. Thread safe.
class ExactMatchEmbedder final : public Embedder {
 public:
  explicit ExactMatchEmbedder(std::size_t capacity = 4096) : dim_(capacity) {}

  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
    std::lock_guard lock(mutex_);
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
      auto key = text::collapse_spaces(text::to_lower(t));
      auto [it, inserted] = slots_.try_emplace(key, slots_.size());
      if (it->second >= dim_) throw std::length_error("exact-match embedder capacity exceeded");
      EmbeddingVector v(dim_, 0.0);
      v[it->second] = 1.0;
      out.push_back(std::move(v));
    }
    return out;
  }

  std::size_t dimension() const override { return dim_; }
  std::string name() const override { return "exact-match"; }

 private:
  std::size_t dim_;
  std::mutex mutex_;
  std::map<std::string, std::size_t> slots_;
};

/// Client for an embedding service: POST {"texts": [...]} returns
/// {"vectors": [[...], ...], "dimension": n}.
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(std::string url, http::ClientOptions options = {}, std::size_t batch_size = 64)
      : endpoint_(http::parse_endpoint(url)), url_(std::move(url)), options_(std::move(options)), batch_size_(batch_size) {
    if (batch_size_ == 0) throw std::invalid_argument("batch size must be positive");
  }

  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
      std::vector<std::string> batch(texts.begin() + start, texts.begin() + std::min(texts.size(), start + batch_size_));
      nlohmann::json body = {{"texts", batch}};
      auto vectors = http::post_json(endpoint_, body, options_, {}, [&](const nlohmann::json& j) {
        auto vs = j.at("vectors").get<std::vector<EmbeddingVector>>();
        std::size_t dim = j.contains("dimension") ? j.at("dimension").get<std::size_t>() : (vs.empty() ? 0 : vs[0].size());
        if (vs.size() != batch.size()) throw http::MalformedResponse("embedding service returned wrong number of vectors");
        for (const auto& v : vs) {
          if (v.size() != dim) throw http::MalformedResponse("embedding dimension mismatch in response");
          for (double x : v)
            if (!std::isfinite(x)) throw http::MalformedResponse("non-finite embedding value");
        }
        return std::make_pair(std::move(vs), dim);
      });
      std::lock_guard lock(mutex_);
      if (dim_ == 0) dim_ = vectors.second;
      if (vectors.second != dim_) throw http::MalformedResponse("embedding dimension changed between batches");
      for (auto& v : vectors.first) out.push_back(std::move(v));
    }
    return out;
  }

  std::size_t dimension() const override {
    std::lock_guard lock(mutex_);
    return dim_;
  }
  std::string name() const override { return "http:" + url_; }

 private:
  http::Endpoint endpoint_;
  std::string url_;
  http::ClientOptions options_;
  std::size_t batch_size_;
  mutable std::mutex mutex_;
  std::size_t dim_ = 0;
};

}  // namespace kgmatch
