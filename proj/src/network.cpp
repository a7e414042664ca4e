#include "roinet/network.hpp"

#include <sstream>

namespace roinet {

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::Pool: return "pool";
    case LayerKind::TConv: return "tconv";
    case LayerKind::Crop: return "crop";
    case LayerKind::Add: return "add";
    case LayerKind::Concat: return "concat";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Fc: return "fc";
    case LayerKind::Softmax: return "softmax";
  }
  throw ContractError("unknown layer kind");
}

LayerKind kind_from_name(const std::string& s) {
  if (s == "conv") return LayerKind::Conv;
  if (s == "relu") return LayerKind::Relu;
  if (s == "pool") return LayerKind::Pool;
  if (s == "tconv") return LayerKind::TConv;
  if (s == "crop") return LayerKind::Crop;
  if (s == "add") return LayerKind::Add;
  if (s == "concat") return LayerKind::Concat;
  if (s == "flatten") return LayerKind::Flatten;
  if (s == "fc") return LayerKind::Fc;
  if (s == "softmax") return LayerKind::Softmax;
  throw FormatError("unknown layer kind '" + s + "' in network spec");
}

int resolve(int in, int layer_index) { return in < 0 ? layer_index : in; }

void check_node(int node, int layer_index, int total) {
  if (node < 0 || node > layer_index || node >= total)
    throw ConfigError("layer " + std::to_string(layer_index) +
                      " references node " + std::to_string(node) +
                      " which is not an earlier node");
}

}  // namespace

std::string spec_to_text(const NetworkSpec& spec) {
  std::ostringstream os;
  os << "in_channels " << spec.in_channels << "\n";
  os << "num_classes " << spec.num_classes << "\n";
  os << "input_hw " << spec.input_hw << "\n";
  os << "feature_node " << spec.feature_node << "\n";
  os << "layers " << spec.layers.size() << "\n";
  for (const LayerDesc& l : spec.layers) {
    os << kind_name(l.kind) << " " << l.in0 << " " << l.in1 << " " << l.channels
       << " " << l.k << " " << l.stride << " " << l.pad << " "
       << (l.bilinear_init ? 1 : 0) << "\n";
  }
  return os.str();
}

NetworkSpec spec_from_text(const std::string& text) {
  std::istringstream is(text);
  NetworkSpec spec;
  std::string key;
  std::size_t n_layers = 0;
  auto want = [&](const char* expect) {
    if (!(is >> key) || key != expect)
      throw FormatError(std::string("network spec: expected '") + expect + "'");
  };
  want("in_channels");
  if (!(is >> spec.in_channels)) throw FormatError("network spec: bad in_channels");
  want("num_classes");
  if (!(is >> spec.num_classes)) throw FormatError("network spec: bad num_classes");
  want("input_hw");
  if (!(is >> spec.input_hw)) throw FormatError("network spec: bad input_hw");
  want("feature_node");
  if (!(is >> spec.feature_node)) throw FormatError("network spec: bad feature_node");
  want("layers");
  if (!(is >> n_layers)) throw FormatError("network spec: bad layer count");
  spec.layers.reserve(n_layers);
  for (std::size_t i = 0; i < n_layers; ++i) {
    std::string kind;
    LayerDesc l;
    int bil = 0;
    if (!(is >> kind >> l.in0 >> l.in1 >> l.channels >> l.k >> l.stride >> l.pad >> bil))
      throw FormatError("network spec: truncated layer " + std::to_string(i));
    l.kind = kind_from_name(kind);
    l.bilinear_init = bil != 0;
    spec.layers.push_back(l);
  }
  return spec;
}

std::vector<Shape> infer_shapes(const NetworkSpec& spec, const Shape& input) {
  if (input.size() != 4)
    throw DimensionError("network input must be NCHW, got " + shape_str(input));
  if (input[1] != spec.in_channels)
    throw DimensionError("network expects " + std::to_string(spec.in_channels) +
                         " input channels, got " + std::to_string(input[1]));
  std::vector<Shape> nodes;
  nodes.reserve(spec.layers.size() + 1);
  nodes.push_back(input);
  const int total = static_cast<int>(spec.layers.size()) + 1;
  for (int i = 0; i < static_cast<int>(spec.layers.size()); ++i) {
    const LayerDesc& l = spec.layers[static_cast<std::size_t>(i)];
    const int a = resolve(l.in0, i);
    check_node(a, i, total);
    const Shape& sa = nodes[static_cast<std::size_t>(a)];
    Shape out;
    switch (l.kind) {
      case LayerKind::Conv: {
        const int hn = sa[2] + 2 * l.pad - l.k, wn = sa[3] + 2 * l.pad - l.k;
        if (hn < 0 || wn < 0 || hn % l.stride || wn % l.stride)
          throw ConfigError("conv layer " + std::to_string(i) +
                            " output extent not integral at " + shape_str(sa));
        out = {sa[0], l.channels, hn / l.stride + 1, wn / l.stride + 1};
        break;
      }
      case LayerKind::Relu:
        out = sa;
        break;
      case LayerKind::Pool:
        if (sa[2] % 2 || sa[3] % 2)
          throw ConfigError("pool layer " + std::to_string(i) +
                            " needs even extents at " + shape_str(sa));
        out = {sa[0], sa[1], sa[2] / 2, sa[3] / 2};
        break;
      case LayerKind::TConv:
        out = {sa[0], l.channels, (sa[2] - 1) * l.stride + l.k,
               (sa[3] - 1) * l.stride + l.k};
        break;
      case LayerKind::Crop: {
        check_node(l.in1, i, total);
        const Shape& sr = nodes[static_cast<std::size_t>(l.in1)];
        if (sr[2] > sa[2] || sr[3] > sa[3])
          throw ConfigError("crop layer " + std::to_string(i) +
                            " reference larger than input");
        out = {sa[0], sa[1], sr[2], sr[3]};
        break;
      }
      case LayerKind::Add: {
        check_node(l.in1, i, total);
        const Shape& sb = nodes[static_cast<std::size_t>(l.in1)];
        if (sa != sb)
          throw ConfigError("add layer " + std::to_string(i) + " joins " +
                            shape_str(sa) + " with " + shape_str(sb));
        out = sa;
        break;
      }
      case LayerKind::Concat: {
        check_node(l.in1, i, total);
        const Shape& sb = nodes[static_cast<std::size_t>(l.in1)];
        if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3])
          throw ConfigError("concat layer " + std::to_string(i) + " joins " +
                            shape_str(sa) + " with " + shape_str(sb));
        out = {sa[0], sa[1] + sb[1], sa[2], sa[3]};
        break;
      }
      case LayerKind::Flatten: {
        long long rest = 1;
        for (std::size_t d = 1; d < sa.size(); ++d) rest *= sa[d];
        out = {sa[0], static_cast<int>(rest)};
        break;
      }
      case LayerKind::Fc:
        if (sa.size() != 2)
          throw ConfigError("fc layer " + std::to_string(i) +
                            " needs a flattened input, got " + shape_str(sa));
        out = {sa[0], l.channels};
        break;
      case LayerKind::Softmax:
        out = sa;
        break;
    }
    nodes.push_back(std::move(out));
  }
  return nodes;
}

Network::Network(NetworkSpec spec, Rng& rng) : spec_(std::move(spec)) {
  init_params(rng);
}

Network::Network(NetworkSpec spec, std::vector<ParamEntry> params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  validate_params();
}

void Network::init_params(Rng& rng) {
  const Shape in{1, spec_.in_channels, spec_.input_hw, spec_.input_hw};
  std::vector<Shape> nodes = infer_shapes(spec_, in);
  for (int i = 0; i < static_cast<int>(spec_.layers.size()); ++i) {
    const LayerDesc& l = spec_.layers[static_cast<std::size_t>(i)];
    const Shape& sa = nodes[static_cast<std::size_t>(resolve(l.in0, i))];
    const std::string prefix = "L" + std::to_string(i);
    switch (l.kind) {
      case LayerKind::Conv: {
        Tensor k({l.channels, sa[1], l.k, l.k});
        he_init(k, static_cast<long long>(sa[1]) * l.k * l.k, rng);
        params_.push_back({prefix + ".kernel", std::move(k)});
        params_.push_back({prefix + ".bias", Tensor({l.channels})});
        break;
      }
      case LayerKind::TConv: {
        Tensor k;
        if (l.bilinear_init) {
          if (sa[1] != l.channels)
            throw ConfigError("bilinear tconv layer " + std::to_string(i) +
                              " needs matching channel counts");
          k = bilinear_tconv_kernel(l.channels, l.k);
        } else {
          k = Tensor({sa[1], l.channels, l.k, l.k});
          he_init(k, static_cast<long long>(sa[1]) * l.k * l.k, rng);
        }
        params_.push_back({prefix + ".kernel", std::move(k)});
        break;
      }
      case LayerKind::Fc: {
        Tensor w({l.channels, sa[1]});
        he_init(w, sa[1], rng);
        params_.push_back({prefix + ".weight", std::move(w)});
        params_.push_back({prefix + ".bias", Tensor({l.channels})});
        break;
      }
      default:
        break;
    }
  }
}

void Network::validate_params() const {
  Rng probe(0);
  Network fresh(spec_, probe);
  if (fresh.params_.size() != params_.size())
    throw ConfigError("network has " + std::to_string(params_.size()) +
                      " parameters, spec wants " + std::to_string(fresh.params_.size()));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != fresh.params_[i].name)
      throw ConfigError("parameter " + std::to_string(i) + " named '" +
                        params_[i].name + "', spec wants '" + fresh.params_[i].name + "'");
    if (params_[i].tensor.shape() != fresh.params_[i].tensor.shape())
      throw DimensionError("parameter " + params_[i].name + " has shape " +
                           shape_str(params_[i].tensor.shape()) + ", spec wants " +
                           shape_str(fresh.params_[i].tensor.shape()));
  }
}

Network::ForwardResult Network::forward(Tape& tape, Var input, bool trainable,
                                        int last_layer) const {
  const int n_layers = static_cast<int>(spec_.layers.size());
  if (last_layer < 0) last_layer = n_layers - 1;
  if (last_layer >= n_layers)
    throw ContractError("forward truncation past layer " + std::to_string(n_layers - 1));

  ForwardResult r;
  r.nodes.reserve(static_cast<std::size_t>(last_layer) + 2);
  r.nodes.push_back(input);
  r.params.reserve(params_.size());

  std::size_t pi = 0;
  for (int i = 0; i <= last_layer; ++i) {
    const LayerDesc& l = spec_.layers[static_cast<std::size_t>(i)];
    Var a = r.nodes[static_cast<std::size_t>(resolve(l.in0, i))];
    Var out;
    switch (l.kind) {
      case LayerKind::Conv: {
        Var k = tape.leaf(params_[pi].tensor, trainable);
        Var b = tape.leaf(params_[pi + 1].tensor, trainable);
        r.params.push_back(k);
        r.params.push_back(b);
        pi += 2;
        out = conv2d(a, k, b, l.stride, l.pad);
        break;
      }
      case LayerKind::Relu:
        out = relu(a);
        break;
      case LayerKind::Pool:
        out = maxpool2(a);
        break;
      case LayerKind::TConv: {
        Var k = tape.leaf(params_[pi].tensor, trainable);
        r.params.push_back(k);
        pi += 1;
        out = tconv2d(a, k, l.stride);
        break;
      }
      case LayerKind::Crop:
        out = center_crop(a, r.nodes[static_cast<std::size_t>(l.in1)]);
        break;
      case LayerKind::Add:
        out = add_elementwise(a, r.nodes[static_cast<std::size_t>(l.in1)]);
        break;
      case LayerKind::Concat:
        out = concat_channels(a, r.nodes[static_cast<std::size_t>(l.in1)]);
        break;
      case LayerKind::Flatten:
        out = flatten(a);
        break;
      case LayerKind::Fc: {
        Var w = tape.leaf(params_[pi].tensor, trainable);
        Var b = tape.leaf(params_[pi + 1].tensor, trainable);
        r.params.push_back(w);
        r.params.push_back(b);
        pi += 2;
        out = fully_connected(a, w, b);
        break;
      }
      case LayerKind::Softmax:
        out = softmax(a);
        break;
    }
    r.nodes.push_back(out);
  }
  return r;
}

Tensor Network::infer(const Tensor& batch) const {
  return infer_node(batch, static_cast<int>(spec_.layers.size()));
}

Tensor Network::infer_node(const Tensor& batch, int node) const {
  if (node < 1 || node > static_cast<int>(spec_.layers.size()))
    throw ContractError("inference node " + std::to_string(node) + " out of range");
  Tape tape;
  Var x = tape.leaf(batch, false);
  ForwardResult r = forward(tape, x, false, node - 1);
  return tape.value(r.nodes.back());
}

namespace {

// Shared encoder: per block two padded 3x3 convs with ReLU, then a pool.
void append_encoder(NetworkSpec& spec, const std::vector<int>& block_channels) {
  for (int ch : block_channels) {
    spec.layers.push_back({LayerKind::Conv, -1, -1, ch, 3, 1, 1, false});
    spec.layers.push_back({LayerKind::Relu, -1, -1, 0, 0, 1, 0, false});
    spec.layers.push_back({LayerKind::Conv, -1, -1, ch, 3, 1, 1, false});
    spec.layers.push_back({LayerKind::Relu, -1, -1, 0, 0, 1, 0, false});
    spec.layers.push_back({LayerKind::Pool, -1, -1, 0, 0, 1, 0, false});
  }
}

}  // namespace

NetworkSpec build_classifier_spec(int in_channels, int num_classes, int input_hw,
                                  const std::vector<int>& block_channels) {
  if (block_channels.size() != 4)
    throw ConfigError("classifier wants four conv blocks");
  NetworkSpec spec;
  spec.in_channels = in_channels;
  spec.num_classes = num_classes;
  spec.input_hw = input_hw;
  append_encoder(spec, block_channels);
  // Descriptor tap: last encoder activation before the final pool (stride 8).
  spec.feature_node = 19;
  spec.layers.push_back({LayerKind::Flatten, -1, -1, 0, 0, 1, 0, false});
  spec.layers.push_back({LayerKind::Fc, -1, -1, 128, 0, 1, 0, false});
  spec.layers.push_back({LayerKind::Relu, -1, -1, 0, 0, 1, 0, false});
  spec.layers.push_back({LayerKind::Fc, -1, -1, num_classes, 0, 1, 0, false});
  spec.layers.push_back({LayerKind::Softmax, -1, -1, 0, 0, 1, 0, false});
  infer_shapes(spec, {1, in_channels, input_hw, input_hw});
  return spec;
}

NetworkSpec build_roi_spec(int num_classes, int input_hw,
                           const std::vector<int>& block_channels) {
  if (block_channels.size() != 4)
    throw ConfigError("segmentation subnet wants four conv blocks");
  NetworkSpec spec;
  spec.in_channels = 3;
  spec.num_classes = num_classes;
  spec.input_hw = input_hw;
  append_encoder(spec, block_channels);
  const int K = num_classes;
  // Pool outputs: node 10 (stride 4), node 15 (stride 8), node 20 (stride 16).
  spec.layers.push_back({LayerKind::Conv, 20, -1, K, 1, 1, 0, false});  // n21
  spec.layers.push_back({LayerKind::Conv, 15, -1, K, 1, 1, 0, false});  // n22
  spec.layers.push_back({LayerKind::Conv, 10, -1, K, 1, 1, 0, false});  // n23
  spec.layers.push_back({LayerKind::TConv, 21, -1, K, 4, 2, 0, true});  // n24
  spec.layers.push_back({LayerKind::Crop, 24, 22, 0, 0, 1, 0, false});  // n25
  spec.layers.push_back({LayerKind::Add, 25, 22, 0, 0, 1, 0, false});   // n26
  spec.layers.push_back({LayerKind::TConv, 26, -1, K, 4, 2, 0, true});  // n27
  spec.layers.push_back({LayerKind::Crop, 27, 23, 0, 0, 1, 0, false});  // n28
  spec.layers.push_back({LayerKind::Add, 28, 23, 0, 0, 1, 0, false});   // n29
  spec.layers.push_back({LayerKind::TConv, 29, -1, K, 8, 4, 0, true});  // n30
  spec.layers.push_back({LayerKind::Crop, 30, 0, 0, 0, 1, 0, false});   // n31
  infer_shapes(spec, {1, 3, input_hw, input_hw});
  return spec;
}

NetworkSpec fuse_specs(const NetworkSpec& roi, const NetworkSpec& cls) {
  if (cls.in_channels != roi.in_channels + roi.num_classes)
    throw ConfigError("fusion needs a classifier taking " +
                      std::to_string(roi.in_channels + roi.num_classes) +
                      " channels, got " + std::to_string(cls.in_channels));
  if (roi.input_hw != cls.input_hw)
    throw ConfigError("fusion needs matching input extents");
  NetworkSpec spec;
  spec.in_channels = roi.in_channels;
  spec.num_classes = cls.num_classes;
  spec.input_hw = roi.input_hw;
  spec.layers = roi.layers;
  const int n_roi = static_cast<int>(roi.layers.size());
  // Scores -> probabilities -> concat with the input image.
  spec.layers.push_back({LayerKind::Softmax, n_roi, -1, 0, 0, 1, 0, false});
  spec.layers.push_back({LayerKind::Concat, 0, n_roi + 1, 0, 0, 1, 0, false});
  const int base = n_roi + 2;  // classifier's node 0 maps to node `base`
  for (const LayerDesc& l : cls.layers) {
    LayerDesc f = l;
    if (l.in0 >= 0) f.in0 = l.in0 == 0 ? base : base + l.in0;
    if (l.kind == LayerKind::Crop || l.kind == LayerKind::Add ||
        l.kind == LayerKind::Concat)
      f.in1 = l.in1 == 0 ? base : base + l.in1;
    spec.layers.push_back(f);
  }
  spec.feature_node = cls.feature_node < 0 ? -1 : base + cls.feature_node;
  infer_shapes(spec, {1, spec.in_channels, spec.input_hw, spec.input_hw});
  return spec;
}

Network fuse_networks(const Network& roi, const Network& cls) {
  NetworkSpec spec = fuse_specs(roi.spec(), cls.spec());
  std::vector<ParamEntry> params;
  params.reserve(roi.params().size() + cls.params().size());
  for (const ParamEntry& p : roi.params()) params.push_back(p);
  const int base_layer = static_cast<int>(roi.spec().layers.size()) + 2;
  for (const ParamEntry& p : cls.params()) {
    // Rename L<i>.x to the fused layer index.
    const std::size_t dot = p.name.find('.');
    const int li = std::stoi(p.name.substr(1, dot - 1));
    params.push_back({"L" + std::to_string(li + base_layer) + p.name.substr(dot),
                      p.tensor});
  }
  return Network(std::move(spec), std::move(params));
}

}  // namespace roinet
