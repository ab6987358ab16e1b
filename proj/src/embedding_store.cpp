#include "swprobe/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "swprobe/error.hpp"
#include "swprobe/kernels.hpp"

namespace swprobe {
namespace {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return v;
  }
}

template <class T>
void put(std::string& buf, T v) {
  v = to_little(v);
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

void put_f32(std::string& buf, float f) { put(buf, std::bit_cast<std::uint32_t>(f)); }

// Upper bound on a record's subword count, far above any model's context
// window; a larger value means a corrupt record, not a big one.
constexpr std::uint32_t kMaxSubwords = 1u << 16;

std::string store_error(std::uint64_t offset, const std::string& what) {
  return "at byte offset " + std::to_string(offset) + ": " + what;
}

}  // namespace

void validate_record(const StoreHeader& header, const EmbeddingRecord& r, bool check_finite) {
  auto fail = [&](const std::string& what) {
    throw Error("store", "sentence " + std::to_string(r.sentence_id) + ": " + what);
  };
  if (r.num_subwords < 2) fail("fewer than 2 subwords (CLS and SEP are required)");
  std::uint32_t expected = 1;
  for (std::size_t w = 0; w < r.spans.size(); ++w) {
    const Span& s = r.spans[w];
    if (s.start != expected || s.end <= s.start) {
      fail("span of word " + std::to_string(w) + " [" + std::to_string(s.start) + "," +
           std::to_string(s.end) + ") breaks the partition of subwords [1," +
           std::to_string(r.num_subwords - 1) + ")");
    }
    expected = s.end;
  }
  if (expected != r.num_subwords - 1) {
    fail("spans cover [1," + std::to_string(expected) + ") but must cover [1," +
         std::to_string(r.num_subwords - 1) + ")");
  }
  const std::size_t size = std::size_t(header.num_layers_total) * r.num_subwords * header.hidden;
  if (r.tensor.size() != size) {
    fail("tensor has " + std::to_string(r.tensor.size()) + " values, expected " + std::to_string(size));
  }
  if (check_finite) {
    for (std::size_t i = 0; i < r.tensor.size(); ++i) {
      if (!std::isfinite(r.tensor[i])) fail("non-finite value at flat index " + std::to_string(i));
    }
  }
}

StoreWriter::StoreWriter(std::ostream& out, StoreHeader header) : out_(out), header_(std::move(header)) {
  if (header_.version != kStoreVersion) throw Error("store", "unsupported store version");
  if (header_.hidden == 0) throw Error("store", "hidden size must be positive");
  if (header_.num_layers_total == 0) throw Error("store", "layer count must be positive");
  if (header_.model_name.size() > 0xFFFF) throw Error("store", "model name longer than 65535 bytes");
  std::string buf(reinterpret_cast<const char*>(kStoreMagic.data()), kStoreMagic.size());
  put<std::uint32_t>(buf, header_.version);
  put<std::uint32_t>(buf, header_.num_layers_total);
  put<std::uint32_t>(buf, header_.hidden);
  put<std::uint64_t>(buf, header_.sentence_count);
  put<std::uint16_t>(buf, static_cast<std::uint16_t>(header_.model_name.size()));
  buf += header_.model_name;
  out_.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out_) throw Error("io", "failed to write store header");
}

void StoreWriter::write(const EmbeddingRecord& r) {
  if (written_ >= header_.sentence_count) {
    throw Error("store", "more records than the header's sentence count " +
                             std::to_string(header_.sentence_count));
  }
  validate_record(header_, r, true);
  std::string buf;
  buf.reserve(16 + r.spans.size() * 8 + r.tensor.size() * 4);
  put<std::uint64_t>(buf, r.sentence_id);
  put<std::uint32_t>(buf, r.num_words());
  put<std::uint32_t>(buf, r.num_subwords);
  for (const Span& s : r.spans) {
    put<std::uint32_t>(buf, s.start);
    put<std::uint32_t>(buf, s.end);
  }
  for (float f : r.tensor) put_f32(buf, f);
  out_.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out_) throw Error("io", "failed to write record " + std::to_string(r.sentence_id));
  ++written_;
}

void StoreWriter::finish() {
  if (written_ != header_.sentence_count) {
    throw Error("store", "wrote " + std::to_string(written_) + " records but the header declares " +
                             std::to_string(header_.sentence_count));
  }
  out_.flush();
}

void StoreReader::read_bytes(void* dst, std::size_t n, const char* what) {
  in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  const auto got = static_cast<std::size_t>(in_.gcount());
  if (got != n) {
    throw Error("store", store_error(offset_ + got, std::string("truncated while reading ") + what));
  }
  offset_ += n;
}

template <class T>
T StoreReader::read_le(const char* what) {
  T v;
  read_bytes(&v, sizeof(T), what);
  return to_little(v);
}

StoreReader::StoreReader(std::istream& in) : in_(in) {
  std::array<unsigned char, 4> magic{};
  read_bytes(magic.data(), magic.size(), "magic");
  if (magic != kStoreMagic) throw Error("store", store_error(0, "bad magic, not an EMBS store"));
  header_.version = read_le<std::uint32_t>("version");
  if (header_.version != kStoreVersion) {
    throw Error("store", store_error(4, "unsupported version " + std::to_string(header_.version)));
  }
  header_.num_layers_total = read_le<std::uint32_t>("layer count");
  if (header_.num_layers_total == 0) throw Error("store", store_error(8, "layer count is zero"));
  header_.hidden = read_le<std::uint32_t>("hidden size");
  if (header_.hidden == 0 || header_.hidden > (1u << 20)) {
    throw Error("store", store_error(12, "implausible hidden size " + std::to_string(header_.hidden)));
  }
  if (header_.num_layers_total > 4096) {
    throw Error("store", store_error(8, "implausible layer count " + std::to_string(header_.num_layers_total)));
  }
  header_.sentence_count = read_le<std::uint64_t>("sentence count");
  const auto name_len = read_le<std::uint16_t>("model name length");
  header_.model_name.resize(name_len);
  if (name_len > 0) read_bytes(header_.model_name.data(), name_len, "model name");
}

bool StoreReader::next(EmbeddingRecord& r) {
  if (read_ == header_.sentence_count) {
    if (in_.peek() != std::char_traits<char>::eof()) {
      throw Error("store", store_error(offset_, "trailing bytes after the last declared record"));
    }
    return false;
  }
  const std::uint64_t record_offset = offset_;
  r.sentence_id = read_le<std::uint64_t>("sentence id");
  const auto num_words = read_le<std::uint32_t>("word count");
  r.num_subwords = read_le<std::uint32_t>("subword count");
  if (r.num_subwords > kMaxSubwords || num_words > r.num_subwords) {
    throw Error("store", store_error(record_offset, "record claims " + std::to_string(num_words) +
                                                        " words over " + std::to_string(r.num_subwords) +
                                                        " subwords"));
  }
  r.spans.resize(num_words);
  for (auto& s : r.spans) {
    s.start = read_le<std::uint32_t>("span start");
    s.end = read_le<std::uint32_t>("span end");
  }
  const std::size_t count = std::size_t(header_.num_layers_total) * r.num_subwords * header_.hidden;
  r.tensor.resize(count);
  read_bytes(r.tensor.data(), count * sizeof(float), "tensor");
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& f : r.tensor) f = to_little(f);
  }
  try {
    validate_record(header_, r, true);
  } catch (const Error& e) {
    throw Error("store", store_error(record_offset, e.what()));
  }
  ++read_;
  return true;
}

std::int64_t EmbeddingStore::find(std::uint64_t sentence_id) const {
  // Records are usually written in id order; fall back to a scan otherwise.
  if (sentence_id < records.size() && records[sentence_id].sentence_id == sentence_id) {
    return static_cast<std::int64_t>(sentence_id);
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].sentence_id == sentence_id) return static_cast<std::int64_t>(i);
  }
  return -1;
}

void write_store(std::ostream& out, const StoreHeader& header, std::span<const EmbeddingRecord> records) {
  StoreHeader h = header;
  h.sentence_count = records.size();
  StoreWriter writer(out, h);
  for (const auto& r : records) writer.write(r);
  writer.finish();
}

EmbeddingStore read_store(std::istream& in) {
  StoreReader reader(in);
  EmbeddingStore store;
  store.header = reader.header();
  EmbeddingRecord r;
  while (reader.next(r)) store.records.push_back(std::move(r));
  return store;
}

EmbeddingStore read_store_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open store " + path);
  try {
    return read_store(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

Pooling parse_pooling(const std::string& name) {
  if (name == "first") return Pooling::First;
  if (name == "last") return Pooling::Last;
  if (name == "max") return Pooling::Max;
  if (name == "sum") return Pooling::Sum;
  throw Error("config", "unknown pooling '" + name + "' (first|last|max|sum)");
}

std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::First: return "first";
    case Pooling::Last: return "last";
    case Pooling::Max: return "max";
    case Pooling::Sum: return "sum";
  }
  return "?";
}

void pool_subwords_into(const StoreHeader& header, const EmbeddingRecord& record, std::uint32_t word_index,
                        std::uint32_t layer_index, Pooling strategy, std::span<float> out) {
  if (word_index >= record.num_words()) {
    throw Error("range", "word index " + std::to_string(word_index) + " out of range for sentence " +
                             std::to_string(record.sentence_id) + " with " +
                             std::to_string(record.num_words()) + " words");
  }
  if (layer_index >= header.num_layers_total) {
    throw Error("range", "layer index " + std::to_string(layer_index) + " out of range (" +
                             std::to_string(header.num_layers_total) + " layers)");
  }
  if (out.size() != header.hidden) throw Error("range", "pooling output has the wrong size");
  const Span span = record.spans[word_index];
  const std::uint32_t h = header.hidden;
  auto row = [&](std::uint32_t sub) { return record.row(layer_index, sub, h); };
  switch (strategy) {
    case Pooling::First: std::ranges::copy(row(span.start), out.begin()); return;
    case Pooling::Last: std::ranges::copy(row(span.end - 1), out.begin()); return;
    case Pooling::Max:
    case Pooling::Sum: {
      std::ranges::copy(row(span.start), out.begin());
      const auto& k = kernels::active();
      for (std::uint32_t s = span.start + 1; s < span.end; ++s) {
        if (strategy == Pooling::Max) k.max_f32(out.data(), row(s).data(), h);
        else k.add_f32(out.data(), row(s).data(), h);
      }
      return;
    }
  }
}

std::vector<float> pool_subwords(const StoreHeader& header, const EmbeddingRecord& record,
                                 std::uint32_t word_index, std::uint32_t layer_index, Pooling strategy) {
  std::vector<float> out(header.hidden);
  pool_subwords_into(header, record, word_index, layer_index, strategy, out);
  return out;
}

std::uint32_t layer_index_for(LayerKind kind, std::uint32_t num_layers_total) {
  if (num_layers_total < 2) {
    throw Error("range", "layer selection needs at least 2 layers, store has " +
                             std::to_string(num_layers_total));
  }
  switch (kind) {
    case LayerKind::Embedding: return 0;
    case LayerKind::First: return 1;
    // round((L - 1) / 2) with halves rounded up
    case LayerKind::Middle: return num_layers_total / 2;
    case LayerKind::Highest: return num_layers_total - 1;
  }
  return 0;
}

LayerKind parse_layer_kind(const std::string& name) {
  if (name == "embedding") return LayerKind::Embedding;
  if (name == "first") return LayerKind::First;
  if (name == "middle") return LayerKind::Middle;
  if (name == "highest") return LayerKind::Highest;
  throw Error("config", "unknown layer kind '" + name + "' (embedding|first|middle|highest)");
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Embedding: return "embedding";
    case LayerKind::First: return "first";
    case LayerKind::Middle: return "middle";
    case LayerKind::Highest: return "highest";
  }
  return "?";
}

}  // namespace swprobe
