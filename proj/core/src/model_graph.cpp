// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/model_graph.hpp"

#include <charconv>
#include <optional>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "edgepipe/prng.hpp"

namespace edgepipe {

std::vector<SkipEdge> ModelGraph::skip_edges() const {
  std::vector<SkipEdge> edges;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::kResidualAdd) edges.push_back({layers[i].skip, i});
  }
  return edges;
}

const Shape& ModelGraph::input_of(std::size_t i) const {
  if (i == 0) return input_shape;
  if (i > output_shapes.size()) {
    fail(Errc::kInvalidArgument, fmt::format("layer {} outside a graph of {} layers", i,
                                             output_shapes.size()));
  }
  return output_shapes[i - 1];
}

// The activation crossing cut c is the output of layer c-1. An edge s -> a
// needs the output of s at a, so it stays local when both ends sit on the same
// side, or when s == c-1 (the crossing activation itself).
bool ModelGraph::is_legal_cut(std::size_t cut) const {
  if (cut == 0 || cut >= layers.size()) return false;
  for (const auto& e : skip_edges()) {
    if (e.add >= cut && e.source + 1 < cut) return false;
  }
  return true;
}

std::vector<std::size_t> ModelGraph::legal_cuts() const {
  std::vector<std::size_t> cuts;
  for (std::size_t c = 1; c < layers.size(); ++c) {
    if (is_legal_cut(c)) cuts.push_back(c);
  }
  return cuts;
}

std::size_t ModelGraph::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.param_count();
  return n;
}

bool ModelGraph::ends_with_loss() const {
  return !layers.empty() && layers.back().kind == LayerKind::kSoftmaxXent;
}

void ModelGraph::propagate_shapes() {
  if (input_shape.empty()) fail(Errc::kInvalidArgument, "model input shape is missing");
  output_shapes.clear();
  Shape cur = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    try {
      l.validate();
      if (l.kind == LayerKind::kSoftmaxXent && i + 1 != layers.size()) {
        fail(Errc::kInvalidArgument, "SoftmaxXent must be the last layer");
      }
      if (l.kind == LayerKind::kResidualAdd) {
        if (l.skip >= i) {
          fail(Errc::kInvalidArgument,
               fmt::format("skip source {} does not precede the add", l.skip));
        }
        if (output_shapes[l.skip] != cur) {
          fail(Errc::kShapeMismatch,
               fmt::format("skip source {} has shape {}, input has {}", l.skip,
                           shape_str(output_shapes[l.skip]), shape_str(cur)));
        }
      }
      cur = l.output_shape(cur);
    } catch (const Error& e) {
      fail(e.code(), fmt::format("layer {} ({}): {}", i, l.to_string(), e.what()));
    }
    output_shapes.push_back(cur);
  }
}

ModelGraph ModelGraph::with_batch(std::size_t n) const {
  ModelGraph g = *this;
  if (g.input_shape.empty()) fail(Errc::kInvalidArgument, "model input shape is missing");
  g.input_shape[0] = n;
  g.propagate_shapes();
  return g;
}

std::string ModelGraph::to_config() const {
  std::ostringstream os;
  if (!name.empty()) os << "name " << name << "\n";
  os << "input ";
  for (std::size_t i = 0; i < input_shape.size(); ++i) os << (i ? "x" : "") << input_shape[i];
  os << "\n";
  for (std::size_t i = 0; i < layers.size(); ++i) os << i << ": " << layers[i].to_string() << "\n";
  return os.str();
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(std::string_view s, const char* what) {
  s = trim(s);
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    fail(Errc::kParse, fmt::format("{} '{}' is not a non-negative integer", what, s));
  }
  return v;
}

double parse_real(std::string_view s, const char* what) {
  s = trim(s);
  const std::string str(s);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(str, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (str.empty() || used != str.size()) {
    fail(Errc::kParse, fmt::format("{} '{}' is not a number", what, s));
  }
  return v;
}

std::vector<std::string_view> split_args(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

LayerSpec parse_layer(std::string_view body) {
  // Kind(args) [skip=<j>]
  std::optional<std::size_t> skip;
  if (const auto sp = body.find("skip="); sp != std::string_view::npos) {
    skip = parse_size(body.substr(sp + 5), "skip index");
    body = trim(body.substr(0, sp));
  }
  std::string_view kind = body;
  std::vector<std::string_view> args;
  if (const auto open = body.find('('); open != std::string_view::npos) {
    const auto close = body.rfind(')');
    if (close == std::string_view::npos || close < open || !trim(body.substr(close + 1)).empty()) {
      fail(Errc::kParse, fmt::format("malformed layer '{}'", body));
    }
    kind = trim(body.substr(0, open));
    args = split_args(body.substr(open + 1, close - open - 1));
  }
  const auto want = [&](std::size_t lo, std::size_t hi) {
    if (args.size() < lo || args.size() > hi) {
      fail(Errc::kParse, fmt::format("{} takes {}{} arguments, got {}", kind, lo,
                                     hi == lo ? "" : fmt::format("-{}", hi), args.size()));
    }
  };
  const auto no_skip = [&] {
    if (skip) fail(Errc::kParse, fmt::format("{} does not take skip=", kind));
  };

  LayerSpec l;
  if (kind == "Linear") {
    want(2, 2);
    no_skip();
    l = LayerSpec::linear(parse_size(args[0], "in"), parse_size(args[1], "out"));
  } else if (kind == "Conv2d") {
    want(3, 5);
    no_skip();
    l = LayerSpec::conv2d(parse_size(args[0], "in_ch"), parse_size(args[1], "out_ch"),
                          parse_size(args[2], "kernel"),
                          args.size() > 3 ? parse_size(args[3], "stride") : 1,
                          args.size() > 4 ? parse_size(args[4], "pad") : 0);
  } else if (kind == "ReLU") {
    want(0, 0);
    no_skip();
    l = LayerSpec::relu();
  } else if (kind == "Dropout") {
    want(1, 1);
    no_skip();
    l = LayerSpec::dropout(parse_real(args[0], "rate"));
  } else if (kind == "ResidualAdd") {
    want(0, 1);
    if (args.size() == 1) {
      if (skip) fail(Errc::kParse, "ResidualAdd skip given twice");
      skip = parse_size(args[0], "skip index");
    }
    if (!skip) fail(Errc::kParse, "ResidualAdd needs skip=<index>");
    l = LayerSpec::residual_add(*skip);
  } else if (kind == "GlobalAvgPool") {
    want(0, 0);
    no_skip();
    l = LayerSpec::global_avg_pool();
  } else if (kind == "SoftmaxXent") {
    want(0, 0);
    no_skip();
    l = LayerSpec::softmax_xent();
  } else {
    fail(Errc::kParse, fmt::format("unknown layer kind '{}'", kind));
  }
  l.validate();
  return l;
}

Shape parse_dims(std::string_view s) {
  Shape dims;
  std::size_t start = 0;
  for (;;) {
    const auto x = s.find('x', start);
    dims.push_back(parse_size(s.substr(start, x - start), "input extent"));
    if (x == std::string_view::npos) break;
    start = x + 1;
  }
  for (auto d : dims) {
    if (d == 0) fail(Errc::kParse, "input extents must be positive");
  }
  return dims;
}

}  // namespace

ModelGraph parse_model_config(std::string_view text) {
  ModelGraph g;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      if (line.starts_with("name ") || line == "name") {
        g.name = std::string(trim(line.substr(4)));
        if (g.name.empty()) fail(Errc::kParse, "name is empty");
      } else if (line.starts_with("input ")) {
        g.input_shape = parse_dims(trim(line.substr(6)));
      } else {
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) {
          fail(Errc::kParse, fmt::format("expected '<index>: <Kind>(...)', got '{}'", line));
        }
        const auto index = parse_size(line.substr(0, colon), "layer index");
        if (index != g.layers.size()) {
          fail(Errc::kParse,
               fmt::format("layer index {} out of sequence, expected {}", index, g.layers.size()));
        }
        g.layers.push_back(parse_layer(trim(line.substr(colon + 1))));
      }
    } catch (const Error& e) {
      fail(Errc::kParse, fmt::format("line {}: {}", line_no, e.what()));
    }
  }
  if (g.input_shape.empty()) fail(Errc::kParse, "missing 'input' line");
  if (g.layers.empty()) fail(Errc::kParse, "model has no layers");
  g.propagate_shapes();
  return g;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::kIo, fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ModelGraph load_model_config(const std::filesystem::path& path) {
  try {
    return parse_model_config(read_text_file(path));
  } catch (const Error& e) {
    if (e.code() == Errc::kIo) throw;
    fail(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

ModelWeights init_weights(const ModelGraph& graph, std::uint64_t seed, DType dtype) {
  ModelWeights w;
  w.reserve(graph.size());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    Prng p = Prng::for_stream(seed, 0, 0, Prng::kInitStream ^ i);
    w.push_back(init_params(graph.layers[i], dtype, p));
  }
  return w;
}

}  // namespace edgepipe
