#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "discourse/endpoints.hpp"

namespace discourse::embedstore {

// Row-major n×d float matrix with aligned story ids. Immutable by convention
// after construction; safe to share read-only across threads.
struct EmbeddingMatrix {
  std::vector<std::string> ids;
  std::vector<float> data;  // n*d, row-major
  size_t n = 0;
  size_t d = 0;
  bool normalized = false;

  float* row(size_t i) { return data.data() + i * d; }
  const float* row(size_t i) const { return data.data() + i * d; }
};

// Embeds corpus records in file order. Row i corresponds to record i.
EmbeddingMatrix encode_corpus(const std::filesystem::path& corpus_path,
                              endpoints::TextEmbedder& embedder, bool normalize);

// Binary layout: magic "EMB1", u32 n, u32 d, u8 normalized, n*d little-endian
// f32, then per id: u32 length + UTF-8 bytes, then CRC32 of everything prior.
void save_matrix(const EmbeddingMatrix& m, const std::filesystem::path& path);
EmbeddingMatrix load_matrix(const std::filesystem::path& path);

}  // namespace discourse::embedstore
