#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace discourse::endpoints {

struct GenerationParams {
  double temperature = 0.8;
  double top_p = 0.9;
  int max_new_tokens = 1024;
  std::string model_id;
  std::optional<int64_t> seed;
};
void validate(const GenerationParams& params);

struct EndpointConfig {
  std::string base_url;
  std::optional<std::string> api_key;  // falls back to DISCOURSE_API_KEY
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  int max_concurrency = 4;
};
void validate(const EndpointConfig& cfg);

struct EmbedderConfig {
  std::string model_id;
  int dimension = 1024;
  int max_input_tokens = 8192;
  int batch_size = 16;
};
void validate(const EmbedderConfig& cfg);

// POST {base_url}/chat/completions (OpenAI-compatible wire format).
// Transient failures are retried with exponential backoff and jitter, at most
// max_retries + 1 attempts in total.
std::string chat_complete(const std::string& prompt, const GenerationParams& params,
                          const EndpointConfig& cfg);

// POST {base_url}/embeddings, batched in groups of batch_size with at most
// max_concurrency requests in flight. Output order matches input order.
// Inputs are truncated to max_input_tokens whitespace tokens before sending.
std::vector<std::vector<float>> embed_texts(const std::vector<std::string>& texts,
                                            const EmbedderConfig& ecfg, const EndpointConfig& cfg);

// --- offline stubs ------------------------------------------------------

// Lexical registers the stub generator writes in. The register is a pure
// function of the seed, so tests can recover the ground truth.
enum class Register { overcoming = 0, mythic = 1, introspective = 2, mixed = 3 };
const char* register_name(Register r) noexcept;
Register stub_register(int64_t seed);

// Pure function of (prompt, seed): echoes the skin-tone and name slots parsed
// from the prompt and fills the body from one lexical register.
std::string stub_generate(const std::string& prompt, int64_t seed);

// Signed feature hashing of lowercased word unigrams+bigrams into d buckets,
// L2-normalized. Rejects an empty token stream (zero vectors break cosine
// geometry downstream).
std::vector<float> stub_embed(std::string_view text, int dimension);

// --- pluggable backends --------------------------------------------------

class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  virtual std::string generate(const std::string& prompt, int64_t seed) = 0;
  virtual std::string model_id() const = 0;
};

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) = 0;
  virtual int dimension() const = 0;
  virtual std::string model_id() const = 0;
};

std::unique_ptr<TextGenerator> make_stub_generator();
std::unique_ptr<TextGenerator> make_http_generator(GenerationParams params, EndpointConfig cfg);
std::unique_ptr<TextEmbedder> make_stub_embedder(EmbedderConfig ecfg);
std::unique_ptr<TextEmbedder> make_http_embedder(EmbedderConfig ecfg, EndpointConfig cfg);

// Whitespace-token truncation used before embedding (tokenizer-exact parity
// with the remote model is out of scope).
std::string truncate_tokens(const std::string& text, int max_tokens);

}  // namespace discourse::endpoints
