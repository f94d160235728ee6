#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace microseg::nn {

enum class LayerKind { dense, lstm };
enum class Activation { linear, tanh, sigmoid };

struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    std::size_t in = 0, out = 0;
    Activation activation = Activation::linear;  // dense layers only
};

/// dense: in*out + out; lstm: 4 * (in*out + out*out + out).
std::size_t param_count(const LayerSpec& spec);
std::size_t param_count(std::span<const LayerSpec> layers);

/// Row-major matrix; sequences are stored as one row per timestep.
struct Matrix {
    std::vector<double> v;
    std::size_t rows = 0, cols = 0;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : v(r * c, fill), rows(r), cols(c) {}
    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {v.data() + r * cols, cols}; }
    std::span<double> row(std::size_t r) { return {v.data() + r * cols, cols}; }
    bool operator==(const Matrix&) const = default;
};

struct TrainMeta {
    std::size_t epochs = 0;
    double final_train_loss = 0.0;
    double final_val_loss = 0.0;
};

/// A network as an ordered layer list over one flat weight array.
///
/// Forward semantics: the input is a matrix whose rows are timesteps (a
/// single row for feed-forward data). Dense layers apply per row. An lstm
/// layer consumes the rows as a sequence and emits its hidden state per
/// step. An lstm directly following another lstm receives the previous
/// lstm's final hidden state repeated for every step (the encoder/decoder
/// wiring of the recurrent autoencoder).
struct ModelBundle {
    std::vector<LayerSpec> layers;
    std::vector<double> weights;
    std::vector<std::uint8_t> trainable;  // 1 = updated by the optimizer
    std::uint64_t seed = 0;
    TrainMeta train_meta;

    std::size_t layer_offset(std::size_t index) const;
    std::size_t n_trainable() const;
    std::size_t output_dim() const { return layers.back().out; }
};

/// Fresh bundle with seeded initialization: dense weights uniform in
/// +-sqrt(6/(in+out)), lstm matrices uniform in +-sqrt(1/out), biases zero
/// except the lstm forget gate bias, which starts at 1.
ModelBundle make_bundle(std::vector<LayerSpec> layers, std::uint64_t seed);

struct LayerTrace {
    Matrix input;  // rows consumed by this layer
    Matrix z;      // dense pre-activation
    Matrix out;
    Matrix gate_i, gate_f, gate_g, gate_o, cell, tanh_cell;  // lstm only
    bool broadcast = false;  // input was the previous lstm's broadcast final state
};

struct ForwardTrace {
    std::vector<LayerTrace> layers;
};

Matrix forward(const ModelBundle& model, const Matrix& input, ForwardTrace* trace = nullptr);

/// MSE over all compared elements. A single-row target against a multi-row
/// output compares the final row only (sequence-to-one prediction).
double mse_loss(const Matrix& pred, const Matrix& target);

/// Mean loss over the batch and its gradient with respect to every weight;
/// gradient entries for frozen weights are forced to zero.
double loss_and_gradient(const ModelBundle& model, std::span<const Matrix> inputs,
                         std::span<const Matrix> targets, std::vector<double>& grad);

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m, v;
    std::size_t t = 0;
};

/// Standard bias-corrected Adam update. Frozen weights are not touched.
void adam_step(std::vector<double>& weights, std::span<const double> grad, AdamState& state,
               const AdamHyper& hyper, std::span<const std::uint8_t> trainable);

/// Max relative error between analytic gradients and central finite
/// differences over all trainable weights.
double gradient_check(const ModelBundle& model, std::span<const Matrix> inputs,
                      std::span<const Matrix> targets, double step = 1e-5);

std::string model_to_json(const ModelBundle& model);
ModelBundle model_from_json(const std::string& text);
void save_model(const ModelBundle& model, const std::string& path);
ModelBundle load_model(const std::string& path);

}  // namespace microseg::nn
