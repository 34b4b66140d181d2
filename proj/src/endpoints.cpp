#include "discourse/endpoints.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "discourse/errors.hpp"
#include "discourse/hashing.hpp"
#include "discourse/lexical.hpp"
#include "discourse/parallel.hpp"
#include "discourse/rng.hpp"

namespace discourse::endpoints {

using nlohmann::json;

void validate(const GenerationParams& params) {
  if (params.temperature < 0.0 || params.temperature > 2.0)
    raise(Errc::InvalidConfig, "temperature must be in [0,2]");
  if (params.top_p <= 0.0 || params.top_p > 1.0)
    raise(Errc::InvalidConfig, "top_p must be in (0,1]");
  if (params.max_new_tokens <= 0) raise(Errc::InvalidConfig, "max_new_tokens must be positive");
}

void validate(const EndpointConfig& cfg) {
  if (cfg.max_retries < 0) raise(Errc::InvalidConfig, "max_retries must be non-negative");
  if (cfg.max_concurrency < 1) raise(Errc::InvalidConfig, "max_concurrency must be >= 1");
  if (cfg.timeout.count() <= 0) raise(Errc::InvalidConfig, "timeout must be positive");
}

void validate(const EmbedderConfig& cfg) {
  if (cfg.dimension <= 0) raise(Errc::InvalidConfig, "embedder dimension must be positive");
  if (cfg.max_input_tokens <= 0) raise(Errc::InvalidConfig, "max_input_tokens must be positive");
  if (cfg.batch_size <= 0) raise(Errc::InvalidConfig, "batch_size must be positive");
}

std::string truncate_tokens(const std::string& text, int max_tokens) {
  int count = 0;
  bool in_token = false;
  for (size_t i = 0; i < text.size(); ++i) {
    bool ws = std::isspace(static_cast<unsigned char>(text[i])) != 0;
    if (!ws && !in_token) {
      ++count;
      if (count > max_tokens) return text.substr(0, i);
    }
    in_token = !ws;
  }
  return text;
}

// --- HTTP plumbing --------------------------------------------------------

namespace {

struct ParsedUrl {
  std::string host;    // scheme://host[:port]
  std::string prefix;  // path prefix, possibly empty
};

ParsedUrl parse_base_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos)
    raise(Errc::InvalidConfig, "base_url must include a scheme: " + base_url);
  auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

std::optional<std::string> resolve_api_key(const EndpointConfig& cfg) {
  if (cfg.api_key && !cfg.api_key->empty()) return cfg.api_key;
  if (const char* env = std::getenv("DISCOURSE_API_KEY"); env && *env) return std::string(env);
  return std::nullopt;
}

struct HttpFailure {
  Errc code;
  bool retryable;
  std::string detail;
};

// POSTs JSON with retries. At most max_retries + 1 attempts; every attempt
// is logged. 401/403 abort immediately, 429/408/5xx/transport retry.
std::string post_json_with_retries(const EndpointConfig& cfg, const std::string& path,
                                   const std::string& body, uint64_t jitter_seed) {
  ParsedUrl url = parse_base_url(cfg.base_url);
  httplib::Client client(url.host);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
  auto rem = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - secs);
  client.set_connection_timeout(secs.count(), rem.count());
  client.set_read_timeout(secs.count(), rem.count());
  client.set_write_timeout(secs.count(), rem.count());

  httplib::Headers headers;
  if (auto key = resolve_api_key(cfg)) headers.emplace("Authorization", "Bearer " + *key);

  SplitMix64 jitter(jitter_seed);
  const int total_attempts = cfg.max_retries + 1;
  HttpFailure last{Errc::TransportError, true, "no attempt made"};

  for (int attempt = 1; attempt <= total_attempts; ++attempt) {
    auto res = client.Post(url.prefix + path, headers, body, "application/json");
    if (res) {
      if (res->status == 200) {
        if (attempt > 1)
          std::cerr << "[endpoints] POST " << path << " succeeded on attempt " << attempt << "/"
                    << total_attempts << "\n";
        return res->body;
      }
      if (res->status == 401 || res->status == 403)
        raise(Errc::AuthError, "HTTP " + std::to_string(res->status) + " from " + path);
      bool retryable = res->status == 429 || res->status == 408 || res->status >= 500;
      last = {res->status == 429 ? Errc::RateLimited : Errc::TransportError, retryable,
              "HTTP " + std::to_string(res->status)};
      if (!retryable) raise(last.code, last.detail + " from " + path);
    } else {
      last = {Errc::TransportError, true, httplib::to_string(res.error())};
    }
    std::cerr << "[endpoints] POST " << path << " attempt " << attempt << "/" << total_attempts
              << " failed: " << last.detail << "\n";
    if (attempt < total_attempts) {
      double scale = 0.75 + 0.5 * jitter.unit();
      auto delay = std::chrono::milliseconds(
          static_cast<int64_t>(200.0 * static_cast<double>(1 << (attempt - 1)) * scale));
      std::this_thread::sleep_for(delay);
    }
  }
  raise(last.code,
        "giving up on " + path + " after " + std::to_string(total_attempts) + " attempts: " +
            last.detail);
}

}  // namespace

std::string chat_complete(const std::string& prompt, const GenerationParams& params,
                          const EndpointConfig& cfg) {
  if (prompt.empty()) raise(Errc::InvalidArgument, "prompt must be non-empty");
  validate(params);
  validate(cfg);

  json req = {
      {"model", params.model_id},
      {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
      {"temperature", params.temperature},
      {"top_p", params.top_p},
      {"max_tokens", params.max_new_tokens},
  };
  if (params.seed) req["seed"] = *params.seed;

  std::string body = post_json_with_retries(cfg, "/chat/completions", req.dump(), fnv1a64(prompt));

  json res = json::parse(body, nullptr, false);
  if (res.is_discarded() || !res.contains("choices") || res["choices"].empty())
    raise(Errc::TransportError, "malformed chat completion response");
  const auto& choice = res["choices"][0];
  if (!choice.contains("message") || !choice["message"].contains("content"))
    raise(Errc::TransportError, "chat completion response missing message content");
  std::string text = choice["message"]["content"].get<std::string>();
  if (text.empty()) raise(Errc::EmptyCompletion, "service returned zero-length completion");
  return text;
}

std::vector<std::vector<float>> embed_texts(const std::vector<std::string>& texts,
                                            const EmbedderConfig& ecfg, const EndpointConfig& cfg) {
  validate(ecfg);
  validate(cfg);
  for (const auto& t : texts)
    if (t.empty()) raise(Errc::InvalidArgument, "embedding inputs must be non-empty");
  if (texts.empty()) return {};

  const size_t batch = static_cast<size_t>(ecfg.batch_size);
  const size_t n_batches = (texts.size() + batch - 1) / batch;
  std::vector<std::vector<float>> out(texts.size());

  parallel_for(
      n_batches,
      [&](size_t b) {
        const size_t begin = b * batch;
        const size_t end = std::min(texts.size(), begin + batch);
        json inputs = json::array();
        for (size_t i = begin; i < end; ++i)
          inputs.push_back(truncate_tokens(texts[i], ecfg.max_input_tokens));
        json req = {{"model", ecfg.model_id}, {"input", std::move(inputs)}};

        std::string body =
            post_json_with_retries(cfg, "/embeddings", req.dump(), fnv1a64(req.dump()));
        json res = json::parse(body, nullptr, false);
        if (res.is_discarded() || !res.contains("data") || !res["data"].is_array())
          raise(Errc::TransportError, "malformed embeddings response");
        const auto& data = res["data"];
        if (data.size() != end - begin)
          raise(Errc::TransportError, "embeddings response count mismatch");
        for (size_t k = 0; k < data.size(); ++k) {
          const auto& item = data[k];
          size_t pos = item.contains("index") ? item["index"].get<size_t>() : k;
          if (pos >= end - begin) raise(Errc::TransportError, "embedding index out of range");
          const auto& vec = item["embedding"];
          if (!vec.is_array() || vec.size() != static_cast<size_t>(ecfg.dimension))
            raise(Errc::DimensionMismatch,
                  "service returned width " + std::to_string(vec.size()) + ", expected " +
                      std::to_string(ecfg.dimension));
          std::vector<float> row(vec.size());
          for (size_t j = 0; j < vec.size(); ++j) row[j] = vec[j].get<float>();
          out[begin + pos] = std::move(row);
        }
      },
      static_cast<unsigned>(cfg.max_concurrency));

  return out;
}

// --- deterministic stubs ---------------------------------------------------

namespace {

constexpr uint64_t kRegisterStream = 0xA17E57;
constexpr uint64_t kTextStream = 0xB0D7E0;

struct RegisterStyle {
  const char* const* fixed;
  size_t n_fixed;
  const char* const* pool;
  size_t n_pool;
  const char* const* templates;  // sentences with {0} {1} {2} slots
  size_t n_templates;
};

const char* kOvercomingFixed[] = {
    "Desde cedo enfrentou a pobreza do bairro e trabalhou sem descanso pela família.",
    "Na comunidade, tornou-se professora dedicada, enfrentando a discriminação com coragem e "
    "dignidade.",
    "Sua determinação abriu caminhos de justiça, educação e esperança, e ela nunca desistiu.",
};
const char* kOvercomingPool[] = {
    "luta",         "esforço",      "superação",    "conquista",   "resistência",
    "mérito",       "estudo",       "escola",       "hospital",    "consultório",
    "liderança",    "transformação", "oportunidade", "salário",     "madrugada",
    "faculdade",    "diploma",      "bolsa",        "emprego",     "fábrica",
    "feira",        "mercado",      "vizinhança",   "mutirão",     "creche",
    "enfermagem",   "advocacia",    "sindicato",    "assembleia",  "direito",
    "igualdade",    "respeito",     "orgulho",      "vitória",     "obstáculo",
    "barreira",     "preconceito",  "racismo",      "pobreza",     "aluguel",
    "plantação",    "colheita",     "alfabetização", "merenda",     "posto",
    "clínica",      "voluntariado", "campanha",     "projeto",     "associação",
    "moradia",      "reforma",      "documento",    "matrícula",   "formatura",
    "heroína",
};
const char* kOvercomingTemplates[] = {
    "A {0} de cada dia trazia {1} e {2} para toda a vizinhança.",
    "Entre {0} e {1}, ela conquistou {2} com muito esforço.",
    "Houve {0}, houve {1}, mas a {2} falou mais alto.",
    "O {0} virou {1}, e a {2} chegou para quem mais precisava.",
    "Com {0} e {1}, ergueu uma vida de {2}.",
    "Nenhuma {0} apagou sua {1} diante da {2}.",
};

const char* kMythicFixed[] = {
    "As anciãs contavam que ela guardava segredos ancestrais sob a lua cheia.",
    "Com rituais sagrados e cantos antigos, invocava os espíritos da floresta.",
    "A profecia anunciava tempestades, serpentes douradas e a magia dos antepassados.",
};
const char* kMythicPool[] = {
    "deusa",       "orixá",       "amuleto",     "feitiço",      "oráculo",
    "tambor",      "máscara",     "lenda",       "mito",         "encantamento",
    "caverna",     "correnteza",  "névoa",       "relâmpago",    "trovão",
    "fogueira",    "cinzas",      "ervas",       "benzedeira",   "vidente",
    "pacto",       "guardiã",     "altar",       "oferenda",     "colar",
    "búzios",      "cristal",     "eclipse",     "constelação",  "abismo",
    "portal",      "reino",       "trono",       "coroa",        "guerreira",
    "lança",       "escudo",      "batalha",     "serpente",     "pantera",
    "coruja",      "falcão",      "raiz",        "seiva",        "presságio",
    "cântico",     "sombra",      "brasa",       "relicário",    "pergaminho",
    "talismã",     "vigília",     "augúrio",     "penumbra",     "labirinto",
    "rainha",
};
const char* kMythicTemplates[] = {
    "Sob o signo de {0}, a {1} despertava o poder de {2}.",
    "Do {0} vinha a força da {1}, guardada pela {2}.",
    "Quando a {0} cantava, {1} e {2} se curvavam.",
    "O segredo de {0} vivia entre {1} e {2}.",
    "Nas noites de {0}, ela invocava {1} contra {2}.",
    "A {0} antiga selou o destino de {1} e {2}.",
};

const char* kIntrospectiveFixed[] = {
    "Apesar da rotina tranquila, sentia uma inquietude silenciosa dentro de si.",
    "Numa viagem ao litoral, descobriu na pintura um propósito inesperado.",
    "A arte tornou-se espelho da alma, revelando sonhos e inquietudes guardadas.",
};
const char* kIntrospectivePool[] = {
    "ateliê",      "tela",        "pincel",      "aquarela",    "galeria",
    "exposição",   "museu",       "poesia",      "caderno",     "diário",
    "café",        "janela",      "chuva",       "entardecer",  "horizonte",
    "ondas",       "areia",       "trem",        "estação",     "bilhete",
    "mala",        "livraria",    "romance",     "melodia",     "piano",
    "violino",     "concerto",    "sinfonia",    "solidão",     "saudade",
    "memória",     "lembrança",   "reflexão",    "liberdade",   "leveza",
    "plenitude",   "serenidade",  "encontro",    "despedida",   "carta",
    "destino",     "acaso",       "instante",    "eternidade",  "vazio",
    "descoberta",  "jornada",     "alma",        "criatividade", "pausa",
    "silêncio",    "aurora",      "brisa",       "caminho",     "sonho",
    "propósito",
};
const char* kIntrospectiveTemplates[] = {
    "No silêncio do {0}, ela encontrava {1} e {2}.",
    "Um {0} bastava para despertar {1} e {2}.",
    "Entre {0} e {1}, restava uma doce {2}.",
    "A {0} guardava lembranças de {1} e de {2}.",
    "Cada {0} trazia um convite à {1} e à {2}.",
    "Era no {0} que sua {1} virava {2}.",
};

const RegisterStyle kStyles[3] = {
    {kOvercomingFixed, 3, kOvercomingPool, std::size(kOvercomingPool), kOvercomingTemplates, 6},
    {kMythicFixed, 3, kMythicPool, std::size(kMythicPool), kMythicTemplates, 6},
    {kIntrospectiveFixed, 3, kIntrospectivePool, std::size(kIntrospectivePool),
     kIntrospectiveTemplates, 6},
};

std::string fill_template(const std::string& tmpl, const std::vector<std::string>& slots) {
  std::string out;
  out.reserve(tmpl.size() + 32);
  for (size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{' && i + 2 < tmpl.size() && tmpl[i + 2] == '}' && tmpl[i + 1] >= '0' &&
        tmpl[i + 1] <= '9') {
      size_t idx = static_cast<size_t>(tmpl[i + 1] - '0');
      if (idx < slots.size()) out += slots[idx];
      i += 2;
    } else {
      out.push_back(tmpl[i]);
    }
  }
  return out;
}

std::string parse_tone(const std::string& prompt) {
  if (prompt.find("negra") != std::string::npos) return "negra";
  if (prompt.find("branca") != std::string::npos) return "branca";
  return "";
}

std::string parse_name(const std::string& prompt) {
  const std::string marker = "chamada ";
  auto pos = prompt.find(marker);
  if (pos == std::string::npos) return "";
  std::string name = prompt.substr(pos + marker.size());
  while (!name.empty() &&
         (name.back() == '.' || name.back() == ' ' || name.back() == '\n' || name.back() == '"'))
    name.pop_back();
  return name;
}

std::string body_sentence(const RegisterStyle& style, SplitMix64& rng) {
  const std::string tmpl = style.templates[rng.below(style.n_templates)];
  std::vector<std::string> slots;
  for (int s = 0; s < 3; ++s) slots.emplace_back(style.pool[rng.below(style.n_pool)]);
  return fill_template(tmpl, slots);
}

}  // namespace

const char* register_name(Register r) noexcept {
  switch (r) {
    case Register::overcoming: return "overcoming";
    case Register::mythic: return "mythic";
    case Register::introspective: return "introspective";
    case Register::mixed: return "mixed";
  }
  return "unknown";
}

Register stub_register(int64_t seed) {
  SplitMix64 rng(mix_seed(static_cast<uint64_t>(seed), kRegisterStream));
  uint64_t roll = rng.below(100);
  if (roll < 32) return Register::overcoming;
  if (roll < 64) return Register::mythic;
  if (roll < 96) return Register::introspective;
  return Register::mixed;
}

std::string stub_generate(const std::string& prompt, int64_t seed) {
  const std::string tone = parse_tone(prompt);
  const std::string name = parse_name(prompt);
  const Register reg = stub_register(seed);
  SplitMix64 rng(mix_seed(static_cast<uint64_t>(seed), kTextStream));

  std::ostringstream out;
  out << "Este é um conto sobre uma mulher";
  if (!tone.empty()) out << " " << tone;
  if (!name.empty()) out << " chamada " << name;
  out << ".";

  if (tone == "negra") {
    out << " Era uma mulher negra de pele escura e cabelos crespos, herdeira de memórias "
           "profundas.";
  } else if (tone == "branca") {
    out << " Era uma mulher branca de olhos claros e cabelos lisos, criada entre jardins "
           "serenos.";
  }

  if (reg == Register::mixed) {
    // No fixed block: mixed stories scatter across all three vocabularies.
    for (int s = 0; s < 11; ++s) {
      const RegisterStyle& style = kStyles[rng.below(3)];
      out << " " << body_sentence(style, rng);
    }
  } else {
    const RegisterStyle& style = kStyles[static_cast<size_t>(reg)];
    for (size_t f = 0; f < style.n_fixed; ++f) out << " " << style.fixed[f];
    for (int s = 0; s < 8; ++s) out << " " << body_sentence(style, rng);
  }
  return out.str();
}

std::vector<float> stub_embed(std::string_view text, int dimension) {
  if (dimension < 8) raise(Errc::InvalidArgument, "stub embedder requires dimension >= 8");
  const auto tokens = lexical::tokenize(text);
  if (tokens.empty())
    raise(Errc::DegenerateVector, "text has no tokens; refusing to emit a zero vector");

  std::vector<float> vec(static_cast<size_t>(dimension), 0.0f);
  auto add = [&](uint64_t h) {
    size_t bucket = h % static_cast<uint64_t>(dimension);
    vec[bucket] += (h >> 63) ? 1.0f : -1.0f;
  };
  for (size_t i = 0; i < tokens.size(); ++i) {
    add(fnv1a64(tokens[i]));
    if (i + 1 < tokens.size()) {
      std::string bigram = tokens[i] + '\x1f' + tokens[i + 1];
      add(fnv1a64(bigram));
    }
  }

  double norm_sq = 0.0;
  for (float v : vec) norm_sq += static_cast<double>(v) * v;
  if (norm_sq < 1e-24)
    raise(Errc::DegenerateVector, "hashed features cancelled to a zero vector");
  const float inv = static_cast<float>(1.0 / std::sqrt(norm_sq));
  for (float& v : vec) v *= inv;
  return vec;
}

// --- backend adapters ------------------------------------------------------

namespace {

class StubGenerator final : public TextGenerator {
 public:
  std::string generate(const std::string& prompt, int64_t seed) override {
    return stub_generate(prompt, seed);
  }
  std::string model_id() const override { return "stub"; }
};

class HttpGenerator final : public TextGenerator {
 public:
  HttpGenerator(GenerationParams params, EndpointConfig cfg)
      : params_(std::move(params)), cfg_(std::move(cfg)) {}

  std::string generate(const std::string& prompt, int64_t seed) override {
    GenerationParams p = params_;
    p.seed = seed;
    return chat_complete(prompt, p, cfg_);
  }
  std::string model_id() const override { return params_.model_id; }

 private:
  GenerationParams params_;
  EndpointConfig cfg_;
};

class StubEmbedder final : public TextEmbedder {
 public:
  explicit StubEmbedder(EmbedderConfig ecfg) : ecfg_(std::move(ecfg)) { validate(ecfg_); }

  std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override {
    std::vector<std::vector<float>> out(texts.size());
    for (size_t i = 0; i < texts.size(); ++i)
      out[i] = stub_embed(truncate_tokens(texts[i], ecfg_.max_input_tokens), ecfg_.dimension);
    return out;
  }
  int dimension() const override { return ecfg_.dimension; }
  std::string model_id() const override { return "stub"; }

 private:
  EmbedderConfig ecfg_;
};

class HttpEmbedder final : public TextEmbedder {
 public:
  HttpEmbedder(EmbedderConfig ecfg, EndpointConfig cfg)
      : ecfg_(std::move(ecfg)), cfg_(std::move(cfg)) {}

  std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override {
    return embed_texts(texts, ecfg_, cfg_);
  }
  int dimension() const override { return ecfg_.dimension; }
  std::string model_id() const override { return ecfg_.model_id; }

 private:
  EmbedderConfig ecfg_;
  EndpointConfig cfg_;
};

}  // namespace

std::unique_ptr<TextGenerator> make_stub_generator() { return std::make_unique<StubGenerator>(); }

std::unique_ptr<TextGenerator> make_http_generator(GenerationParams params, EndpointConfig cfg) {
  return std::make_unique<HttpGenerator>(std::move(params), std::move(cfg));
}

std::unique_ptr<TextEmbedder> make_stub_embedder(EmbedderConfig ecfg) {
  return std::make_unique<StubEmbedder>(std::move(ecfg));
}

std::unique_ptr<TextEmbedder> make_http_embedder(EmbedderConfig ecfg, EndpointConfig cfg) {
  return std::make_unique<HttpEmbedder>(std::move(ecfg), std::move(cfg));
}

}  // namespace discourse::endpoints
