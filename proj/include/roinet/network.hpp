#ifndef ROINET_NETWORK_HPP
#define ROINET_NETWORK_HPP

#include <string>
#include <utility>
#include <vector>

#include "roinet/ops.hpp"

namespace roinet {

enum class LayerKind { Conv, Relu, Pool, TConv, Crop, Add, Concat, Flatten, Fc, Softmax };

// One layer of a feed-forward DAG. Nodes are numbered 0 (network input),
// then 1 + layer index for each layer's output. in0 = -1 means "previous
// layer's output" (node index == this layer's index).
struct LayerDesc {
  LayerKind kind = LayerKind::Relu;
  int in0 = -1;
  int in1 = -1;        // second operand (Add, Concat) or crop reference node
  int channels = 0;    // Conv/TConv output channels, Fc output width
  int k = 0;           // spatial kernel extent
  int stride = 1;
  int pad = 0;
  bool bilinear_init = false;  // TConv only: fixed interpolation weights
};

struct NetworkSpec {
  int in_channels = 3;
  int num_classes = 3;
  int input_hw = 96;       // extent the spec is shape-checked against
  int feature_node = -1;   // mid-network descriptor tap, -1 if none
  std::vector<LayerDesc> layers;
};

// Round-trippable textual form (also embedded in checkpoints).
std::string spec_to_text(const NetworkSpec& spec);
NetworkSpec spec_from_text(const std::string& text);

// Shapes of every node for a given input shape; throws on invalid geometry.
std::vector<Shape> infer_shapes(const NetworkSpec& spec, const Shape& input);

struct ParamEntry {
  std::string name;  // L<layer>.kernel / L<layer>.bias / L<layer>.weight
  Tensor tensor;
};

// A spec plus its parameter tensors. Forward passes record onto a caller
// tape; parameters live here between steps and are updated in place.
class Network {
 public:
  Network(NetworkSpec spec, Rng& rng);                       // fresh init
  Network(NetworkSpec spec, std::vector<ParamEntry> params); // from checkpoint

  const NetworkSpec& spec() const { return spec_; }
  std::vector<ParamEntry>& params() { return params_; }
  const std::vector<ParamEntry>& params() const { return params_; }

  struct ForwardResult {
    std::vector<Var> nodes;   // nodes[0] = input, nodes[i+1] = layer i output
    std::vector<Var> params;  // aligned with params()
  };

  // Records the graph up to and including layer `last_layer` (-1 = all).
  // With trainable=false parameters are emitted as constants.
  ForwardResult forward(Tape& tape, Var input, bool trainable,
                        int last_layer = -1) const;

  // Convenience inference: full forward, returns the final node's value.
  Tensor infer(const Tensor& batch) const;
  // Truncated inference up to a node id (1 + layer index).
  Tensor infer_node(const Tensor& batch, int node) const;

 private:
  void init_params(Rng& rng);
  void validate_params() const;

  NetworkSpec spec_;
  std::vector<ParamEntry> params_;
};

// VGG-style classifier: four conv blocks (two 3x3 convs + pool each), then
// flatten, a 128-wide hidden layer, and a softmax head.
NetworkSpec build_classifier_spec(int in_channels, int num_classes, int input_hw,
                                  const std::vector<int>& block_channels);

// Segmentation subnet: the same encoder, 1x1 score convs on the last three
// pool outputs, and a stride-2,2,4 transposed-conv decoder with skip
// connections. Output is an unnormalized [N,K,H,W] score map.
NetworkSpec build_roi_spec(int num_classes, int input_hw,
                           const std::vector<int>& block_channels);

// Stitches the segmentation subnet and a (3 + K)-channel classifier into one
// graph: image and per-pixel class probabilities are concatenated along
// channels and fed to the classifier.
NetworkSpec fuse_specs(const NetworkSpec& roi, const NetworkSpec& cls);
Network fuse_networks(const Network& roi, const Network& cls);

}  // namespace roinet

#endif  // ROINET_NETWORK_HPP
