#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "swprobe/tokenizer.hpp"

namespace swprobe {

// Binary layout (all integers and floats little-endian):
//   "EMBS" u32 version=1 u32 num_layers_total u32 hidden u64 sentence_count
//   u16 name_len, name bytes (UTF-8)
//   per record: u64 sentence_id u32 num_words u32 num_subwords
//               num_words x (u32 start, u32 end)
//               f32 tensor[num_layers_total][num_subwords][hidden]
inline constexpr std::array<unsigned char, 4> kStoreMagic = {0x45, 0x4D, 0x42, 0x53};
inline constexpr std::uint32_t kStoreVersion = 1;

struct StoreHeader {
  std::uint32_t version = kStoreVersion;
  std::uint32_t num_layers_total = 0;  // transformer layers + embedding layer
  std::uint32_t hidden = 0;
  std::uint64_t sentence_count = 0;
  std::string model_name;
  friend bool operator==(const StoreHeader&, const StoreHeader&) = default;
};

struct EmbeddingRecord {
  std::uint64_t sentence_id = 0;
  std::uint32_t num_subwords = 0;  // includes CLS and SEP
  std::vector<Span> spans;         // one per word
  std::vector<float> tensor;       // [layer][subword][hidden]

  std::uint32_t num_words() const { return static_cast<std::uint32_t>(spans.size()); }
  std::span<const float> row(std::uint32_t layer, std::uint32_t subword, std::uint32_t hidden) const {
    return {tensor.data() + (std::size_t(layer) * num_subwords + subword) * hidden, hidden};
  }
  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

// Throws Error("store") unless spans start at 1, are contiguous and
// non-empty, and end at num_subwords - 1 (CLS and SEP excluded), the tensor
// has the header's shape, and (when check_finite) every value is finite.
void validate_record(const StoreHeader& header, const EmbeddingRecord& record, bool check_finite = true);

// Streams records after the header. The writer checks that exactly
// header.sentence_count records are written before finish().
class StoreWriter {
 public:
  StoreWriter(std::ostream& out, StoreHeader header);
  void write(const EmbeddingRecord& record);
  void finish();

 private:
  std::ostream& out_;
  StoreHeader header_;
  std::uint64_t written_ = 0;
};

class StoreReader {
 public:
  explicit StoreReader(std::istream& in);
  const StoreHeader& header() const { return header_; }
  // False once all header.sentence_count records have been read.
  bool next(EmbeddingRecord& record);
  // Byte offset of the next unread byte.
  std::uint64_t offset() const { return offset_; }

 private:
  void read_bytes(void* dst, std::size_t n, const char* what);
  template <class T>
  T read_le(const char* what);

  std::istream& in_;
  StoreHeader header_;
  std::uint64_t offset_ = 0;
  std::uint64_t read_ = 0;
};

struct EmbeddingStore {
  StoreHeader header;
  std::vector<EmbeddingRecord> records;

  // Index of the record with this sentence id, or -1.
  std::int64_t find(std::uint64_t sentence_id) const;
};

void write_store(std::ostream& out, const StoreHeader& header, std::span<const EmbeddingRecord> records);
EmbeddingStore read_store(std::istream& in);
EmbeddingStore read_store_file(const std::string& path);

enum class Pooling { First, Last, Max, Sum };
Pooling parse_pooling(const std::string& name);
std::string to_string(Pooling p);

std::vector<float> pool_subwords(const StoreHeader& header, const EmbeddingRecord& record,
                                 std::uint32_t word_index, std::uint32_t layer_index, Pooling strategy);
// Writes the pooled vector into `out` (size hidden).
void pool_subwords_into(const StoreHeader& header, const EmbeddingRecord& record, std::uint32_t word_index,
                        std::uint32_t layer_index, Pooling strategy, std::span<float> out);

enum class LayerKind { Embedding, First, Middle, Highest };
std::uint32_t layer_index_for(LayerKind kind, std::uint32_t num_layers_total);
LayerKind parse_layer_kind(const std::string& name);
std::string to_string(LayerKind kind);

}  // namespace swprobe
