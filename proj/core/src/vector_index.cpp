// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/vector_index.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <fmt/format.h>

#include "edgepipe/error.hpp"
#include "edgepipe/model_graph.hpp"
#include "edgepipe/prng.hpp"

namespace edgepipe {

static_assert(std::endian::native == std::endian::little, "embdb rows assume a little-endian host");

VectorIndex::VectorIndex(std::size_t dim, std::vector<float> rows, std::vector<std::string> texts)
    : dim_(dim), rows_(std::move(rows)), texts_(std::move(texts)) {
  if (dim_ == 0) fail(Errc::kInvalidArgument, "index dimension must be >= 1");
  if (rows_.size() != dim_ * texts_.size()) {
    fail(Errc::kShapeMismatch, fmt::format("index has {} values for {} texts of dimension {}",
                                           rows_.size(), texts_.size(), dim_));
  }
}

std::span<const float> VectorIndex::row(std::size_t i) const {
  if (i >= size()) fail(Errc::kInvalidArgument, fmt::format("row {} out of range", i));
  return std::span<const float>(rows_).subspan(i * dim_, dim_);
}

Tensor VectorIndex::matrix() const { return Tensor::from<float>({size(), dim_}, rows_); }

std::vector<SearchHit> vector_search(const VectorIndex& index, std::span<const float> query,
                                     std::size_t k) {
  const std::size_t n = index.size();
  if (k < 1 || k > n) {
    fail(Errc::kInvalidArgument, fmt::format("k={} outside [1, {}]", k, n));
  }
  if (query.size() != index.dim()) {
    fail(Errc::kShapeMismatch,
         fmt::format("query has dimension {}, index has {}", query.size(), index.dim()));
  }
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = index.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      s += static_cast<double>(r[j]) * static_cast<double>(query[j]);
    }
    scores[i] = s;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto better = [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    better);
  std::vector<SearchHit> hits;
  hits.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    hits.push_back({order[i], scores[order[i]], index.text(order[i])});
  }
  return hits;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

std::vector<float> embed_text(std::string_view text, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) fail(Errc::kInvalidArgument, "embedding dimension must be >= 1");
  std::vector<double> acc(dim, 0.0);
  std::vector<double> v(dim);
  for (const auto& tok : tokenize(text)) {
    Prng rng(mix64(seed ^ fnv1a(tok)));
    double norm = 0.0;
    for (auto& x : v) {
      x = rng.next_normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < dim; ++j) acc[j] += v[j] / norm;
  }
  double norm = 0.0;
  for (double x : acc) norm += x * x;
  norm = std::sqrt(norm);
  std::vector<float> out(dim, 0.0f);
  if (norm > 0.0) {
    for (std::size_t j = 0; j < dim; ++j) out[j] = static_cast<float>(acc[j] / norm);
  }
  return out;
}

VectorIndex build_index(const std::vector<std::string>& texts, std::size_t dim,
                        std::uint64_t seed) {
  std::vector<float> rows;
  rows.reserve(texts.size() * dim);
  for (const auto& t : texts) {
    const auto e = embed_text(t, dim, seed);
    rows.insert(rows.end(), e.begin(), e.end());
  }
  return VectorIndex(dim, std::move(rows), texts);
}

VectorIndex default_index(std::size_t dim) {
  static const std::vector<std::string> kTexts = {
      "Central bank holds interest rates steady as inflation cools",
      "Oil prices climb after pipeline outage in the north sea",
      "Tech shares rally on strong quarterly chip earnings",
      "Retail sales slip for a second month amid weak consumer demand",
      "Airline merger approved by regulators with conditions on routes",
      "Startup raises funding to build battery recycling plants",
      "Home team wins the championship in extra time",
      "Star striker signs a three year contract extension",
      "Marathon record falls on a cool morning in the capital",
      "Tennis veteran announces retirement after final season",
      "Cycling team withdraws from the tour after crash injuries",
      "Underdog club knocks the holders out of the cup",
      "Researchers train a language model on a single phone",
      "New smartphone chip doubles neural engine throughput",
      "Space agency delays lunar lander launch over sensor fault",
      "Open source database adds vector search support",
      "Security flaw found in popular wireless router firmware",
      "Quantum computing lab reports longer qubit coherence",
      "Peace talks resume as ceasefire holds along the border",
      "Election results delayed after recount in key district",
      "Floods force thousands to evacuate coastal towns",
      "Summit leaders agree on a new climate finance pledge",
      "Parliament passes reform of the national pension system",
      "Drought threatens harvest across the southern plains",
      "Chipmaker opens a new fabrication plant overseas",
      "Electric car sales overtake diesel for the first time",
      "Shipping rates fall as port congestion eases",
      "Phone makers battle over thermal throttling in new models",
      "Study links sleep quality to memory in older adults",
      "Telescope captures images of a distant forming galaxy",
      "Football league extends season after weather postponements",
      "Olympic committee confirms host city for the winter games",
  };
  return build_index(kTexts, dim);
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<const std::uint8_t*, 6, 8>>;
  std::string out(It(bytes.data()), It(bytes.data() + bytes.size()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

Bytes base64_decode(std::string_view text) {
  using namespace boost::archive::iterators;
  if (text.size() % 4 != 0) fail(Errc::kParse, "base64 length is not a multiple of 4");
  std::size_t pad = 0;
  while (pad < 2 && pad < text.size() && text[text.size() - 1 - pad] == '=') ++pad;
  std::string body(text.substr(0, text.size() - pad));
  body.append(pad, 'A');
  using It = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
  try {
    Bytes out(It(body.cbegin()), It(body.cend()));
    out.resize(text.size() / 4 * 3 - pad);
    return out;
  } catch (const std::exception&) {
    fail(Errc::kParse, "invalid base64 character");
  }
}

std::string format_embdb(const VectorIndex& index) {
  std::string s = fmt::format("embdb {} {}\n", index.size(), index.dim());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto r = index.row(i);
    const std::span<const std::uint8_t> raw(reinterpret_cast<const std::uint8_t*>(r.data()),
                                            r.size_bytes());
    if (index.text(i).find_first_of("\n\t") != std::string::npos) {
      fail(Errc::kInvalidArgument, fmt::format("text of row {} contains a tab or newline", i));
    }
    s += base64_encode(raw);
    s += '\t';
    s += index.text(i);
    s += '\n';
  }
  return s;
}

VectorIndex parse_embdb(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) fail(Errc::kParse, "embdb: empty file");
  std::istringstream header(line);
  std::string magic;
  std::size_t n = 0, d = 0;
  if (!(header >> magic >> n >> d) || magic != "embdb" || d == 0) {
    fail(Errc::kParse, "embdb: header must be 'embdb <N> <d>'");
  }
  std::vector<float> rows;
  rows.reserve(n * d);
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) {
      fail(Errc::kParse, fmt::format("embdb: expected {} rows, found {}", n, i));
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail(Errc::kParse, fmt::format("embdb line {}: missing tab", i + 2));
    Bytes raw;
    try {
      raw = base64_decode(std::string_view(line).substr(0, tab));
    } catch (const Error& e) {
      fail(Errc::kParse, fmt::format("embdb line {}: {}", i + 2, e.what()));
    }
    if (raw.size() != d * sizeof(float)) {
      fail(Errc::kParse, fmt::format("embdb line {}: {} bytes, expected {}", i + 2, raw.size(),
                                     d * sizeof(float)));
    }
    const std::size_t at = rows.size();
    rows.resize(at + d);
    std::memcpy(rows.data() + at, raw.data(), raw.size());
    texts.push_back(line.substr(tab + 1));
  }
  return VectorIndex(d, std::move(rows), std::move(texts));
}

VectorIndex load_embdb(const std::filesystem::path& path) {
  return parse_embdb(read_text_file(path));
}

void save_embdb(const std::filesystem::path& path, const VectorIndex& index) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::kIo, fmt::format("cannot write {}", path.string()));
  out << format_embdb(index);
  if (!out) fail(Errc::kIo, fmt::format("write failed: {}", path.string()));
}

Bytes SearchArgs::encode() const {
  ByteWriter w;
  w.u32(k);
  w.long_str(query);
  return w.take();
}

SearchArgs SearchArgs::decode(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  SearchArgs a;
  a.k = r.u32();
  a.query = r.long_str();
  r.expect_end("vector_search args");
  return a;
}

Bytes encode_hits(const std::vector<SearchHit>& hits) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(hits.size()));
  for (const auto& h : hits) {
    w.u32(static_cast<std::uint32_t>(h.index));
    w.f64(h.score);
    w.long_str(h.text);
  }
  return w.take();
}

std::vector<SearchHit> decode_hits(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto n = r.u32();
  std::vector<SearchHit> hits;
  for (std::uint32_t i = 0; i < n; ++i) {
    SearchHit h;
    h.index = r.u32();
    h.score = r.f64();
    h.text = r.long_str();
    hits.push_back(std::move(h));
  }
  r.expect_end("vector_search result");
  return hits;
}

}  // namespace edgepipe
