#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pixsub/image.hpp"
#include "pixsub/nn.hpp"
#include "pixsub/tensor.hpp"

namespace pixsub {

inline constexpr double kResidualScale = 0.1;

// Small EDSR-style residual network. The upsampler tail (conv + pixel
// shuffle) is only present when the net consumes the LR observation itself;
// later refinement passes work at full resolution and omit it.
struct ToyNet {
  int features = 0;
  int blocks = 0;
  bool upsampler = false;
  int scale = 1;

  Conv2d head;  // 3 -> F
  struct ResBlock {
    Conv2d conv1, conv2;  // F -> F each
  };
  std::vector<ResBlock> body;
  Conv2d tail;     // F -> F
  Conv2d up_conv;  // F -> F*s^2 (upsampler only)
  Conv2d out_conv;  // F -> 3, zero-initialized so training starts from "no edit"

  std::vector<std::vector<double>*> parameters() {
    std::vector<std::vector<double>*> ps{&head.w, &head.b};
    for (auto& blk : body) {
      ps.push_back(&blk.conv1.w);
      ps.push_back(&blk.conv1.b);
      ps.push_back(&blk.conv2.w);
      ps.push_back(&blk.conv2.b);
    }
    ps.push_back(&tail.w);
    ps.push_back(&tail.b);
    if (upsampler) {
      ps.push_back(&up_conv.w);
      ps.push_back(&up_conv.b);
    }
    ps.push_back(&out_conv.w);
    ps.push_back(&out_conv.b);
    return ps;
  }

  std::vector<const std::vector<double>*> parameters() const {
    std::vector<const std::vector<double>*> ps{&head.w, &head.b};
    for (const auto& blk : body) {
      ps.push_back(&blk.conv1.w);
      ps.push_back(&blk.conv1.b);
      ps.push_back(&blk.conv2.w);
      ps.push_back(&blk.conv2.b);
    }
    ps.push_back(&tail.w);
    ps.push_back(&tail.b);
    if (upsampler) {
      ps.push_back(&up_conv.w);
      ps.push_back(&up_conv.b);
    }
    ps.push_back(&out_conv.w);
    ps.push_back(&out_conv.b);
    return ps;
  }

  std::vector<const std::vector<double>*> gradients() const {
    std::vector<const std::vector<double>*> gs{&head.gw, &head.gb};
    for (const auto& blk : body) {
      gs.push_back(&blk.conv1.gw);
      gs.push_back(&blk.conv1.gb);
      gs.push_back(&blk.conv2.gw);
      gs.push_back(&blk.conv2.gb);
    }
    gs.push_back(&tail.gw);
    gs.push_back(&tail.gb);
    if (upsampler) {
      gs.push_back(&up_conv.gw);
      gs.push_back(&up_conv.gb);
    }
    gs.push_back(&out_conv.gw);
    gs.push_back(&out_conv.gb);
    return gs;
  }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> ns{"head.w", "head.b"};
    for (size_t i = 0; i < body.size(); ++i) {
      const std::string p = "body." + std::to_string(i) + ".";
      ns.push_back(p + "conv1.w");
      ns.push_back(p + "conv1.b");
      ns.push_back(p + "conv2.w");
      ns.push_back(p + "conv2.b");
    }
    ns.push_back("tail.w");
    ns.push_back("tail.b");
    if (upsampler) {
      ns.push_back("up.w");
      ns.push_back("up.b");
    }
    ns.push_back("out.w");
    ns.push_back("out.b");
    return ns;
  }

  void zero_grad() {
    head.zero_grad();
    for (auto& blk : body) {
      blk.conv1.zero_grad();
      blk.conv2.zero_grad();
    }
    tail.zero_grad();
    if (upsampler) up_conv.zero_grad();
    out_conv.zero_grad();
  }

  static ToyNet create(int features, int blocks, bool upsampler, int scale, std::uint64_t seed) {
    if (features < 1 || blocks < 0) throw ConfigError("toynet: features must be >=1, blocks >=0");
    if (upsampler && (scale < 1 || scale > 4)) throw ConfigError("toynet: bad upsampler scale");
    ToyNet net;
    net.features = features;
    net.blocks = blocks;
    net.upsampler = upsampler;
    net.scale = upsampler ? scale : 1;

    std::mt19937_64 rng(seed);
    auto init = [&rng](Conv2d& layer) {
      const double limit = std::sqrt(6.0 / (layer.in_c * 9.0 + layer.out_c * 9.0));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (double& v : layer.w) v = dist(rng);
    };

    net.head = Conv2d(3, features);
    init(net.head);
    net.body.resize(static_cast<size_t>(blocks));
    for (auto& blk : net.body) {
      blk.conv1 = Conv2d(features, features);
      init(blk.conv1);
      blk.conv2 = Conv2d(features, features);
      init(blk.conv2);
    }
    net.tail = Conv2d(features, features);
    init(net.tail);
    if (upsampler) {
      net.up_conv = Conv2d(features, features * scale * scale);
      init(net.up_conv);
    }
    net.out_conv = Conv2d(features, 3);  // stays zero
    return net;
  }
};

// Everything the backward pass needs to replay the forward graph.
struct ToyNetTrace {
  Tensor input;
  Tensor head_out;
  struct BlockTrace {
    Tensor conv1_out;  // pre-ReLU
    Tensor relu_out;
    Tensor block_out;
  };
  std::vector<BlockTrace> blocks;
  Tensor tail_out;
  Tensor skip_out;
  Tensor up_shuffled;  // upsampler only
  Tensor output;
};

inline Tensor toynet_forward(const ToyNet& net, const Tensor& x, ToyNetTrace* trace = nullptr) {
  if (trace) trace->input = x;
  Tensor head_out = conv2d_forward(net.head, x);
  if (trace) trace->head_out = head_out;

  Tensor cur = head_out;
  if (trace) trace->blocks.assign(net.body.size(), {});
  for (size_t i = 0; i < net.body.size(); ++i) {
    Tensor t1 = conv2d_forward(net.body[i].conv1, cur);
    Tensor a = relu_forward(t1);
    Tensor o = conv2d_forward(net.body[i].conv2, a);
    for (size_t j = 0; j < o.data.size(); ++j) o.data[j] = cur.data[j] + kResidualScale * o.data[j];
    if (trace) {
      trace->blocks[i].conv1_out = std::move(t1);
      trace->blocks[i].relu_out = std::move(a);
      trace->blocks[i].block_out = o;
    }
    cur = std::move(o);
  }

  Tensor skip = conv2d_forward(net.tail, cur);
  if (trace) trace->tail_out = skip;
  for (size_t j = 0; j < skip.data.size(); ++j) skip.data[j] += head_out.data[j];
  if (trace) trace->skip_out = skip;

  Tensor pre_out;
  if (net.upsampler) {
    pre_out = pixel_shuffle(conv2d_forward(net.up_conv, skip), net.scale);
    if (trace) trace->up_shuffled = pre_out;
  } else {
    pre_out = std::move(skip);
  }
  Tensor y = conv2d_forward(net.out_conv, pre_out);
  if (trace) trace->output = y;
  return y;
}

// Accumulates parameter grads from one forward trace; optionally returns the
// grad w.r.t. the input.
inline void toynet_backward(ToyNet& net, const ToyNetTrace& trace, const Tensor& gy,
                            Tensor* gx = nullptr) {
  const Tensor& pre_out = net.upsampler ? trace.up_shuffled : trace.skip_out;
  Tensor g_pre;
  conv2d_backward(net.out_conv, pre_out, gy, &g_pre);

  Tensor g_skip;
  if (net.upsampler) {
    Tensor g_up = pixel_unshuffle(g_pre, net.scale);
    conv2d_backward(net.up_conv, trace.skip_out, g_up, &g_skip);
  } else {
    g_skip = std::move(g_pre);
  }

  // long skip: skip_out = tail_out + head_out
  Tensor g_head_out = g_skip;

  const Tensor& tail_in =
      net.body.empty() ? trace.head_out : trace.blocks.back().block_out;
  Tensor g_cur;
  conv2d_backward(net.tail, tail_in, g_skip, &g_cur);

  for (size_t ri = net.body.size(); ri-- > 0;) {
    const Tensor& block_in = ri == 0 ? trace.head_out : trace.blocks[ri - 1].block_out;
    Tensor g_o = g_cur;
    for (double& v : g_o.data) v *= kResidualScale;
    Tensor g_a;
    conv2d_backward(net.body[ri].conv2, trace.blocks[ri].relu_out, g_o, &g_a);
    Tensor g_t1 = relu_backward(trace.blocks[ri].conv1_out, g_a);
    Tensor g_in;
    conv2d_backward(net.body[ri].conv1, block_in, g_t1, &g_in);
    for (size_t j = 0; j < g_cur.data.size(); ++j) g_cur.data[j] += g_in.data[j];
  }

  for (size_t j = 0; j < g_head_out.data.size(); ++j) g_head_out.data[j] += g_cur.data[j];
  conv2d_backward(net.head, trace.input, g_head_out, gx);
}

// ---- weight files ------------------------------------------------------
//
// Binary container: 6-byte magic "PXSBW1", then one record per tensor:
//   u64 name length, name bytes, u64 rank, rank x u64 dims, dims-product
//   f64 payload. All integers and doubles little-endian. Records run to EOF.

static_assert(std::endian::native == std::endian::little,
              "weight file I/O assumes a little-endian host");

namespace detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline bool read_u64(std::istream& is, std::uint64_t& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return static_cast<bool>(is);
}

inline void write_record(std::ostream& os, const std::string& name,
                         const std::vector<std::uint64_t>& dims, const std::vector<double>& vals) {
  write_u64(os, name.size());
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u64(os, dims.size());
  for (std::uint64_t d : dims) write_u64(os, d);
  os.write(reinterpret_cast<const char*>(vals.data()),
           static_cast<std::streamsize>(vals.size() * sizeof(double)));
}

struct WeightRecord {
  std::vector<std::uint64_t> dims;
  std::vector<double> vals;
};

}  // namespace detail

inline void save_weights(const ToyNet& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open weight file for writing: " + path);
  os.write("PXSBW1", 6);

  const auto names = net.parameter_names();
  const auto params = net.parameters();
  const std::uint64_t f = static_cast<std::uint64_t>(net.features);
  for (size_t i = 0; i < names.size(); ++i) {
    const std::string& n = names[i];
    std::vector<std::uint64_t> dims;
    if (n == "head.w")
      dims = {f, 3, 3, 3};
    else if (n == "up.w")
      dims = {f * net.scale * net.scale, f, 3, 3};
    else if (n == "out.w")
      dims = {3, f, 3, 3};
    else if (n.size() >= 2 && n.compare(n.size() - 2, 2, ".w") == 0)
      dims = {f, f, 3, 3};
    else
      dims = {static_cast<std::uint64_t>(params[i]->size())};
    detail::write_record(os, n, dims, *params[i]);
  }
  if (!os) throw IoError("failed writing weight file: " + path);
}

inline ToyNet load_weights(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open weight file: " + path);
  char magic[6];
  is.read(magic, 6);
  if (!is || std::memcmp(magic, "PXSBW1", 6) != 0)
    throw FormatError("not a weight file (bad magic): " + path);

  std::map<std::string, detail::WeightRecord> records;
  for (;;) {
    std::uint64_t name_len;
    if (!detail::read_u64(is, name_len)) break;  // clean EOF
    if (name_len > 4096) throw FormatError("weight file: implausible name length");
    std::string name(name_len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(name_len));
    std::uint64_t rank;
    if (!is || !detail::read_u64(is, rank) || rank > 8)
      throw FormatError("weight file: truncated or corrupt record header");
    detail::WeightRecord rec;
    std::uint64_t count = 1;
    for (std::uint64_t r = 0; r < rank; ++r) {
      std::uint64_t d;
      if (!detail::read_u64(is, d) || d == 0 || d > (1u << 24))
        throw FormatError("weight file: bad dimension");
      rec.dims.push_back(d);
      count *= d;
    }
    rec.vals.resize(count);
    is.read(reinterpret_cast<char*>(rec.vals.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw FormatError("weight file: truncated payload");
    records[name] = std::move(rec);
  }

  auto need = [&records, &path](const std::string& n) -> detail::WeightRecord& {
    auto it = records.find(n);
    if (it == records.end()) throw FormatError("weight file missing tensor '" + n + "': " + path);
    return it->second;
  };

  const auto& head_w = need("head.w");
  if (head_w.dims.size() != 4 || head_w.dims[1] != 3)
    throw FormatError("weight file: head.w has unexpected shape");
  const int features = static_cast<int>(head_w.dims[0]);

  int blocks = 0;
  while (records.count("body." + std::to_string(blocks) + ".conv1.w")) ++blocks;

  const bool upsampler = records.count("up.w") != 0;
  int scale = 1;
  if (upsampler) {
    const auto& up_w = need("up.w");
    const int out_c = static_cast<int>(up_w.dims.at(0));
    if (out_c % features != 0) throw FormatError("weight file: up.w shape inconsistent");
    const int s2 = out_c / features;
    scale = static_cast<int>(std::lround(std::sqrt(static_cast<double>(s2))));
    if (scale * scale != s2) throw FormatError("weight file: upsampler scale is not square");
  }

  ToyNet net = ToyNet::create(features, blocks, upsampler, scale, 0);
  const auto names = net.parameter_names();
  const auto params = net.parameters();
  for (size_t i = 0; i < names.size(); ++i) {
    detail::WeightRecord& rec = need(names[i]);
    if (rec.vals.size() != params[i]->size())
      throw FormatError("weight file: tensor '" + names[i] + "' has wrong element count");
    *params[i] = std::move(rec.vals);
  }
  return net;
}

}  // namespace pixsub
