#include "discourse/embedstore.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include <zlib.h>

#include "discourse/corpus.hpp"
#include "discourse/errors.hpp"

namespace discourse::embedstore {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};

void put_u32(std::string& buf, uint32_t v) {
  buf.push_back(static_cast<char>(v & 0xFF));
  buf.push_back(static_cast<char>((v >> 8) & 0xFF));
  buf.push_back(static_cast<char>((v >> 16) & 0xFF));
  buf.push_back(static_cast<char>((v >> 24) & 0xFF));
}

uint32_t get_u32(const std::string& buf, size_t& pos) {
  if (pos + 4 > buf.size()) raise(Errc::TruncatedFile, "unexpected end of file");
  uint32_t v = static_cast<uint8_t>(buf[pos]) | (static_cast<uint8_t>(buf[pos + 1]) << 8) |
               (static_cast<uint8_t>(buf[pos + 2]) << 16) |
               (static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + 3])) << 24);
  pos += 4;
  return v;
}

}  // namespace

EmbeddingMatrix encode_corpus(const std::filesystem::path& corpus_path,
                              endpoints::TextEmbedder& embedder, bool normalize) {
  auto records = corpus::load_corpus(corpus_path);
  if (records.empty()) raise(Errc::EmptyTable, "corpus has no records: " + corpus_path.string());

  std::vector<std::string> texts;
  texts.reserve(records.size());
  EmbeddingMatrix m;
  m.ids.reserve(records.size());
  std::set<std::string> seen;
  for (const auto& rec : records) {
    if (!seen.insert(rec.id).second)
      raise(Errc::ParseError, "duplicate story id in corpus: " + rec.id);
    m.ids.push_back(rec.id);
    texts.push_back(rec.text);
  }

  auto vectors = embedder.embed(texts);
  m.n = vectors.size();
  m.d = static_cast<size_t>(embedder.dimension());
  m.data.resize(m.n * m.d);
  for (size_t i = 0; i < m.n; ++i) {
    if (vectors[i].size() != m.d)
      raise(Errc::DimensionMismatch, "embedding " + std::to_string(i) + " has width " +
                                         std::to_string(vectors[i].size()) + ", expected " +
                                         std::to_string(m.d));
    double norm_sq = 0.0;
    for (float v : vectors[i]) norm_sq += static_cast<double>(v) * v;
    if (norm_sq < 1e-24)
      raise(Errc::DegenerateVector, "embedding for story " + m.ids[i] + " has near-zero norm");
    float scale = normalize ? static_cast<float>(1.0 / std::sqrt(norm_sq)) : 1.0f;
    float* dst = m.row(i);
    for (size_t j = 0; j < m.d; ++j) dst[j] = vectors[i][j] * scale;
  }
  m.normalized = normalize;
  return m;
}

void save_matrix(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  if (m.ids.size() != m.n) raise(Errc::InvalidArgument, "ids/rows mismatch");
  std::string buf;
  buf.reserve(16 + m.data.size() * 4 + m.ids.size() * 24);
  buf.append(kMagic, 4);
  put_u32(buf, static_cast<uint32_t>(m.n));
  put_u32(buf, static_cast<uint32_t>(m.d));
  buf.push_back(m.normalized ? 1 : 0);
  for (float v : m.data) put_u32(buf, std::bit_cast<uint32_t>(v));
  for (const auto& id : m.ids) {
    put_u32(buf, static_cast<uint32_t>(id.size()));
    buf.append(id);
  }
  uint32_t crc = static_cast<uint32_t>(
      ::crc32(0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
  put_u32(buf, crc);

  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::WriteError, "cannot open " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) raise(Errc::WriteError, "write failed: " + path.string());
}

EmbeddingMatrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::TruncatedFile, "cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
    raise(Errc::BadMagic, "not an EMB1 file: " + path.string());
  if (buf.size() < 4 + 4)
    raise(Errc::TruncatedFile, "file shorter than the trailing checksum");

  // Checksum first: covers everything before the final 4 bytes.
  size_t crc_pos = buf.size() - 4;
  uint32_t stored_crc = get_u32(buf, crc_pos);
  uint32_t actual_crc = static_cast<uint32_t>(
      ::crc32(0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4)));

  size_t pos = 4;
  EmbeddingMatrix m;
  m.n = get_u32(buf, pos);
  m.d = get_u32(buf, pos);
  if (pos >= buf.size() - 4) raise(Errc::TruncatedFile, "missing normalized flag");
  m.normalized = buf[pos++] != 0;

  const size_t payload = m.n * m.d * 4;
  if (pos + payload > buf.size() - 4)
    raise(Errc::TruncatedFile, "file truncated mid-row");
  m.data.resize(m.n * m.d);
  for (size_t i = 0; i < m.data.size(); ++i) {
    uint32_t bits = get_u32(buf, pos);
    m.data[i] = std::bit_cast<float>(bits);
  }

  m.ids.reserve(m.n);
  for (size_t i = 0; i < m.n; ++i) {
    if (pos + 4 > buf.size() - 4) raise(Errc::TruncatedFile, "file truncated in ids block");
    uint32_t len = get_u32(buf, pos);
    if (pos + len > buf.size() - 4) raise(Errc::TruncatedFile, "file truncated inside an id");
    m.ids.emplace_back(buf.substr(pos, len));
    pos += len;
  }
  if (pos != buf.size() - 4)
    raise(Errc::TruncatedFile, "trailing bytes after ids block");

  if (stored_crc != actual_crc)
    raise(Errc::ChecksumMismatch, "stored CRC32 does not match file contents");
  return m;
}

}  // namespace discourse::embedstore
