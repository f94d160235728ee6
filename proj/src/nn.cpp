#include "microseg/nn.hpp"

#include <cmath>
#include <cstring>

#include <json.hpp>

#include "microseg/errors.hpp"
#include "microseg/rng.hpp"
#include "microseg/util.hpp"

using nlohmann::json;

namespace microseg::nn {

std::size_t param_count(const LayerSpec& spec) {
    if (spec.in < 1 || spec.out < 1) throw ConfigError("layer dims must be >= 1");
    if (spec.kind == LayerKind::dense) return spec.in * spec.out + spec.out;
    return 4 * (spec.in * spec.out + spec.out * spec.out + spec.out);
}

std::size_t param_count(std::span<const LayerSpec> layers) {
    std::size_t total = 0;
    for (const auto& spec : layers) total += param_count(spec);
    return total;
}

std::size_t ModelBundle::layer_offset(std::size_t index) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < index; ++i) off += param_count(layers[i]);
    return off;
}

std::size_t ModelBundle::n_trainable() const {
    std::size_t n = 0;
    for (auto f : trainable) n += f;
    return n;
}

// lstm block layout: W_i W_f W_g W_o (out x in each) | U_i U_f U_g U_o
// (out x out each) | b_i b_f b_g b_o (out each)
namespace {
struct LstmView {
    const double *Wi, *Wf, *Wg, *Wo, *Ui, *Uf, *Ug, *Uo, *bi, *bf, *bg, *bo;
    std::size_t in, out;
};

LstmView lstm_view(const double* base, const LayerSpec& spec) {
    std::size_t wi = spec.in * spec.out, uu = spec.out * spec.out;
    LstmView v{};
    v.in = spec.in;
    v.out = spec.out;
    v.Wi = base;
    v.Wf = v.Wi + wi;
    v.Wg = v.Wf + wi;
    v.Wo = v.Wg + wi;
    v.Ui = v.Wo + wi;
    v.Uf = v.Ui + uu;
    v.Ug = v.Uf + uu;
    v.Uo = v.Ug + uu;
    v.bi = v.Uo + uu;
    v.bf = v.bi + spec.out;
    v.bg = v.bf + spec.out;
    v.bo = v.bg + spec.out;
    return v;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y = W x + b with W row-major out x in
void affine(const double* W, const double* b, std::span<const double> x, std::size_t in,
            std::size_t out, double* y) {
    for (std::size_t r = 0; r < out; ++r) {
        double s = b ? b[r] : 0.0;
        const double* wr = W + r * in;
        for (std::size_t c = 0; c < in; ++c) s += wr[c] * x[c];
        y[r] = s;
    }
}

// y += W^T d  (accumulate input-side gradient)
void add_wt_times(const double* W, const double* d, std::size_t in, std::size_t out, double* y) {
    for (std::size_t r = 0; r < out; ++r) {
        const double* wr = W + r * in;
        for (std::size_t c = 0; c < in; ++c) y[c] += wr[c] * d[r];
    }
}

// dW += d (x) x outer product, db += d
void add_outer(double* dW, double* db, const double* d, std::span<const double> x, std::size_t in,
               std::size_t out) {
    for (std::size_t r = 0; r < out; ++r) {
        double* wr = dW + r * in;
        for (std::size_t c = 0; c < in; ++c) wr[c] += d[r] * x[c];
        db[r] += d[r];
    }
}
}  // namespace

ModelBundle make_bundle(std::vector<LayerSpec> layers, std::uint64_t seed) {
    if (layers.empty()) throw ConfigError("model needs at least one layer");
    for (std::size_t i = 1; i < layers.size(); ++i) {
        if (layers[i].in != layers[i - 1].out)
            throw ConfigError("layer " + std::to_string(i) + " input dim " +
                              std::to_string(layers[i].in) + " does not match previous output " +
                              std::to_string(layers[i - 1].out));
    }
    ModelBundle model;
    model.layers = std::move(layers);
    model.seed = seed;
    model.weights.assign(param_count(std::span<const LayerSpec>(model.layers)), 0.0);
    model.trainable.assign(model.weights.size(), 1);

    Rng rng(seed);
    std::size_t off = 0;
    for (const auto& spec : model.layers) {
        if (spec.kind == LayerKind::dense) {
            double bound = std::sqrt(6.0 / static_cast<double>(spec.in + spec.out));
            for (std::size_t i = 0; i < spec.in * spec.out; ++i)
                model.weights[off + i] = rng.uniform_range(-bound, bound);
            // biases stay zero
        } else {
            double bound = std::sqrt(1.0 / static_cast<double>(spec.out));
            std::size_t mats = 4 * (spec.in * spec.out + spec.out * spec.out);
            for (std::size_t i = 0; i < mats; ++i)
                model.weights[off + i] = rng.uniform_range(-bound, bound);
            // forget gate bias 1, the rest zero
            for (std::size_t i = 0; i < spec.out; ++i)
                model.weights[off + mats + spec.out + i] = 1.0;
        }
        off += param_count(spec);
    }
    return model;
}

static Matrix lstm_forward(const LstmView& p, const Matrix& input, LayerTrace* trace) {
    std::size_t T = input.rows, H = p.out;
    Matrix hs(T, H);
    std::vector<double> h(H, 0.0), c(H, 0.0);
    std::vector<double> ai(H), af(H), ag(H), ao(H);
    if (trace) {
        trace->gate_i = Matrix(T, H);
        trace->gate_f = Matrix(T, H);
        trace->gate_g = Matrix(T, H);
        trace->gate_o = Matrix(T, H);
        trace->cell = Matrix(T, H);
        trace->tanh_cell = Matrix(T, H);
    }
    for (std::size_t t = 0; t < T; ++t) {
        auto x = input.row(t);
        affine(p.Wi, p.bi, x, p.in, H, ai.data());
        affine(p.Wf, p.bf, x, p.in, H, af.data());
        affine(p.Wg, p.bg, x, p.in, H, ag.data());
        affine(p.Wo, p.bo, x, p.in, H, ao.data());
        for (std::size_t r = 0; r < H; ++r) {
            const double* ur_i = p.Ui + r * H;
            const double* ur_f = p.Uf + r * H;
            const double* ur_g = p.Ug + r * H;
            const double* ur_o = p.Uo + r * H;
            double si = ai[r], sf = af[r], sg = ag[r], so = ao[r];
            for (std::size_t k = 0; k < H; ++k) {
                si += ur_i[k] * h[k];
                sf += ur_f[k] * h[k];
                sg += ur_g[k] * h[k];
                so += ur_o[k] * h[k];
            }
            ai[r] = si;
            af[r] = sf;
            ag[r] = sg;
            ao[r] = so;
        }
        for (std::size_t r = 0; r < H; ++r) {
            double gi = sigmoid(ai[r]);
            double gf = sigmoid(af[r]);
            double gg = std::tanh(ag[r]);
            double go = sigmoid(ao[r]);
            double cc = gf * c[r] + gi * gg;
            double tc = std::tanh(cc);
            c[r] = cc;
            h[r] = go * tc;
            hs.at(t, r) = h[r];
            if (trace) {
                trace->gate_i.at(t, r) = gi;
                trace->gate_f.at(t, r) = gf;
                trace->gate_g.at(t, r) = gg;
                trace->gate_o.at(t, r) = go;
                trace->cell.at(t, r) = cc;
                trace->tanh_cell.at(t, r) = tc;
            }
        }
    }
    return hs;
}

Matrix forward(const ModelBundle& model, const Matrix& input, ForwardTrace* trace) {
    if (model.layers.empty()) throw ConfigError("forward: empty model");
    if (input.cols != model.layers.front().in)
        throw ConfigError("forward: input dim " + std::to_string(input.cols) + " does not match " +
                          std::to_string(model.layers.front().in));
    if (input.rows == 0) throw ConfigError("forward: empty input");
    if (trace) trace->layers.assign(model.layers.size(), {});

    Matrix cur = input;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const auto& spec = model.layers[li];
        const double* base = model.weights.data() + model.layer_offset(li);
        bool broadcast = spec.kind == LayerKind::lstm && li > 0 &&
                         model.layers[li - 1].kind == LayerKind::lstm;
        if (broadcast) {
            // decoder wiring: previous lstm's final state, repeated each step
            Matrix rep(cur.rows, cur.cols);
            for (std::size_t t = 0; t < cur.rows; ++t)
                for (std::size_t c = 0; c < cur.cols; ++c) rep.at(t, c) = cur.at(cur.rows - 1, c);
            cur = std::move(rep);
        }
        LayerTrace* lt = trace ? &trace->layers[li] : nullptr;
        if (lt) {
            lt->input = cur;
            lt->broadcast = broadcast;
        }
        if (spec.kind == LayerKind::dense) {
            Matrix out(cur.rows, spec.out);
            for (std::size_t t = 0; t < cur.rows; ++t)
                affine(base, base + spec.in * spec.out, cur.row(t), spec.in, spec.out,
                       out.row(t).data());
            if (lt) lt->z = out;
            for (double& v : out.v) {
                if (spec.activation == Activation::tanh)
                    v = std::tanh(v);
                else if (spec.activation == Activation::sigmoid)
                    v = sigmoid(v);
            }
            if (lt) lt->out = out;
            cur = std::move(out);
        } else {
            Matrix out = lstm_forward(lstm_view(base, spec), cur, lt);
            if (lt) lt->out = out;
            cur = std::move(out);
        }
    }
    return cur;
}

double mse_loss(const Matrix& pred, const Matrix& target) {
    if (target.cols != pred.cols) throw ConfigError("mse: output dim mismatch");
    std::size_t t0 = 0;
    if (target.rows != pred.rows) {
        if (target.rows != 1) throw ConfigError("mse: row count mismatch");
        t0 = pred.rows - 1;  // sequence-to-one: compare the final row
    }
    double s = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < target.rows; ++r)
        for (std::size_t c = 0; c < target.cols; ++c) {
            double d = pred.at(t0 + r, c) - target.at(r, c);
            s += d * d;
            ++count;
        }
    return s / static_cast<double>(count);
}

namespace {

// backprop through one lstm layer; returns input-side gradient rows and the
// gradient of the final hidden state w.r.t. a broadcast consumer
void lstm_backward(const LstmView& p, const LayerTrace& lt, const Matrix& d_out,
                   double extra_final_grad_scale, std::span<const double> d_final, double* dbase,
                   Matrix& d_input) {
    std::size_t T = lt.input.rows, H = p.out, I = p.in;
    std::size_t wi = I * H, uu = H * H;
    double* dWi = dbase;
    double* dWf = dWi + wi;
    double* dWg = dWf + wi;
    double* dWo = dWg + wi;
    double* dUi = dWo + wi;
    double* dUf = dUi + uu;
    double* dUg = dUf + uu;
    double* dUo = dUg + uu;
    double* dbi = dUo + uu;
    double* dbf = dbi + H;
    double* dbg = dbf + H;
    double* dbo = dbg + H;

    d_input = Matrix(T, I);
    std::vector<double> dh(H, 0.0), dc(H, 0.0);
    std::vector<double> dai(H), daf(H), dag(H), dao(H);
    std::vector<double> zero(H, 0.0);
    for (std::size_t t = T; t-- > 0;) {
        for (std::size_t r = 0; r < H; ++r) dh[r] += d_out.at(t, r);
        if (t == T - 1 && !d_final.empty())
            for (std::size_t r = 0; r < H; ++r) dh[r] += extra_final_grad_scale * d_final[r];

        std::span<const double> c_prev =
            t > 0 ? lt.cell.row(t - 1) : std::span<const double>(zero.data(), H);
        std::span<const double> h_prev =
            t > 0 ? lt.out.row(t - 1) : std::span<const double>(zero.data(), H);
        for (std::size_t r = 0; r < H; ++r) {
            double gi = lt.gate_i.at(t, r), gf = lt.gate_f.at(t, r);
            double gg = lt.gate_g.at(t, r), go = lt.gate_o.at(t, r);
            double tc = lt.tanh_cell.at(t, r);
            dao[r] = dh[r] * tc * go * (1.0 - go);
            dc[r] += dh[r] * go * (1.0 - tc * tc);
            dai[r] = dc[r] * gg * gi * (1.0 - gi);
            dag[r] = dc[r] * gi * (1.0 - gg * gg);
            daf[r] = dc[r] * c_prev[r] * gf * (1.0 - gf);
        }
        auto x = lt.input.row(t);
        add_outer(dWi, dbi, dai.data(), x, I, H);
        add_outer(dWf, dbf, daf.data(), x, I, H);
        add_outer(dWg, dbg, dag.data(), x, I, H);
        add_outer(dWo, dbo, dao.data(), x, I, H);
        add_outer(dUi, zero.data(), dai.data(), h_prev, H, H);  // bias dummy
        add_outer(dUf, zero.data(), daf.data(), h_prev, H, H);
        add_outer(dUg, zero.data(), dag.data(), h_prev, H, H);
        add_outer(dUo, zero.data(), dao.data(), h_prev, H, H);
        std::fill(zero.begin(), zero.end(), 0.0);

        auto dx = d_input.row(t);
        add_wt_times(p.Wi, dai.data(), I, H, dx.data());
        add_wt_times(p.Wf, daf.data(), I, H, dx.data());
        add_wt_times(p.Wg, dag.data(), I, H, dx.data());
        add_wt_times(p.Wo, dao.data(), I, H, dx.data());

        std::fill(dh.begin(), dh.end(), 0.0);
        add_wt_times(p.Ui, dai.data(), H, H, dh.data());
        add_wt_times(p.Uf, daf.data(), H, H, dh.data());
        add_wt_times(p.Ug, dag.data(), H, H, dh.data());
        add_wt_times(p.Uo, dao.data(), H, H, dh.data());
        for (std::size_t r = 0; r < H; ++r) dc[r] *= lt.gate_f.at(t, r);
    }
}

}  // namespace

double loss_and_gradient(const ModelBundle& model, std::span<const Matrix> inputs,
                         std::span<const Matrix> targets, std::vector<double>& grad) {
    if (inputs.empty()) throw ConfigError("loss_and_gradient: empty batch");
    if (inputs.size() != targets.size()) throw ConfigError("loss_and_gradient: batch size mismatch");
    grad.assign(model.weights.size(), 0.0);

    // total compared element count, for mean normalization
    std::size_t total = 0;
    for (const auto& t : targets) total += t.rows * t.cols;

    double loss_sum = 0.0;
    ForwardTrace trace;
    for (std::size_t s = 0; s < inputs.size(); ++s) {
        const Matrix& target = targets[s];
        Matrix pred = forward(model, inputs[s], &trace);
        if (target.cols != pred.cols || (target.rows != pred.rows && target.rows != 1))
            throw ConfigError("loss_and_gradient: target shape mismatch at sample " +
                              std::to_string(s));
        std::size_t t0 = target.rows == pred.rows ? 0 : pred.rows - 1;
        Matrix d_out(pred.rows, pred.cols);
        for (std::size_t r = 0; r < target.rows; ++r)
            for (std::size_t c = 0; c < target.cols; ++c) {
                double d = pred.at(t0 + r, c) - target.at(r, c);
                loss_sum += d * d;
                d_out.at(t0 + r, c) = 2.0 * d / static_cast<double>(total);
            }

        // backward through the layer stack
        std::vector<double> d_final;  // gradient flowing into a broadcast producer
        for (std::size_t li = model.layers.size(); li-- > 0;) {
            const auto& spec = model.layers[li];
            const LayerTrace& lt = trace.layers[li];
            double* dbase = grad.data() + model.layer_offset(li);
            const double* base = model.weights.data() + model.layer_offset(li);
            Matrix d_input;
            if (spec.kind == LayerKind::dense) {
                std::size_t in = spec.in, out = spec.out;
                d_input = Matrix(lt.input.rows, in);
                std::vector<double> dz(out);
                for (std::size_t t = 0; t < lt.input.rows; ++t) {
                    for (std::size_t r = 0; r < out; ++r) {
                        double g = d_out.at(t, r);
                        double y = lt.out.at(t, r);
                        if (spec.activation == Activation::tanh)
                            g *= 1.0 - y * y;
                        else if (spec.activation == Activation::sigmoid)
                            g *= y * (1.0 - y);
                        dz[r] = g;
                    }
                    add_outer(dbase, dbase + in * out, dz.data(), lt.input.row(t), in, out);
                    add_wt_times(base, dz.data(), in, out, d_input.row(t).data());
                }
            } else {
                lstm_backward(lstm_view(base, spec), lt, d_out, 1.0,
                              d_final.empty() ? std::span<const double>{}
                                              : std::span<const double>(d_final),
                              dbase, d_input);
                d_final.clear();
            }
            if (lt.broadcast) {
                // fold the repeated-input gradient into the producer's final state
                d_final.assign(spec.in, 0.0);
                for (std::size_t t = 0; t < d_input.rows; ++t)
                    for (std::size_t c = 0; c < spec.in; ++c) d_final[c] += d_input.at(t, c);
                d_out = Matrix(lt.input.rows, spec.in);  // zero rows; producer sees only d_final
            } else {
                d_out = std::move(d_input);
            }
        }
    }
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!model.trainable[i]) grad[i] = 0.0;
    return loss_sum / static_cast<double>(total);
}

void adam_step(std::vector<double>& weights, std::span<const double> grad, AdamState& state,
               const AdamHyper& hyper, std::span<const std::uint8_t> trainable) {
    if (grad.size() != weights.size() || trainable.size() != weights.size())
        throw ConfigError("adam_step: size mismatch");
    if (hyper.lr <= 0.0) throw ConfigError("adam_step: lr must be > 0");
    if (state.m.size() != weights.size()) {
        state.m.assign(weights.size(), 0.0);
        state.v.assign(weights.size(), 0.0);
        state.t = 0;
    }
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!std::isfinite(grad[i]))
            throw NumericError("adam_step: non-finite gradient at weight " + std::to_string(i));
    ++state.t;
    double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
    double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!trainable[i]) continue;
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grad[i];
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
        double mhat = state.m[i] / c1;
        double vhat = state.v[i] / c2;
        weights[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
}

double gradient_check(const ModelBundle& model, std::span<const Matrix> inputs,
                      std::span<const Matrix> targets, double step) {
    std::vector<double> analytic;
    loss_and_gradient(model, inputs, targets, analytic);
    ModelBundle probe = model;
    double worst = 0.0;
    for (std::size_t i = 0; i < probe.weights.size(); ++i) {
        if (!probe.trainable[i]) continue;
        double saved = probe.weights[i];
        probe.weights[i] = saved + step;
        double up = 0.0, down = 0.0;
        {
            double s = 0.0;
            std::size_t total = 0;
            for (std::size_t k = 0; k < inputs.size(); ++k) {
                Matrix pred = forward(probe, inputs[k]);
                const Matrix& t = targets[k];
                std::size_t t0 = t.rows == pred.rows ? 0 : pred.rows - 1;
                for (std::size_t r = 0; r < t.rows; ++r)
                    for (std::size_t c = 0; c < t.cols; ++c) {
                        double d = pred.at(t0 + r, c) - t.at(r, c);
                        s += d * d;
                    }
                total += t.rows * t.cols;
            }
            up = s / static_cast<double>(total);
        }
        probe.weights[i] = saved - step;
        {
            double s = 0.0;
            std::size_t total = 0;
            for (std::size_t k = 0; k < inputs.size(); ++k) {
                Matrix pred = forward(probe, inputs[k]);
                const Matrix& t = targets[k];
                std::size_t t0 = t.rows == pred.rows ? 0 : pred.rows - 1;
                for (std::size_t r = 0; r < t.rows; ++r)
                    for (std::size_t c = 0; c < t.cols; ++c) {
                        double d = pred.at(t0 + r, c) - t.at(r, c);
                        s += d * d;
                    }
                total += t.rows * t.cols;
            }
            down = s / static_cast<double>(total);
        }
        probe.weights[i] = saved;
        double numeric = (up - down) / (2.0 * step);
        double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-3});
        worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
    }
    return worst;
}

static const char* kind_name(LayerKind k) { return k == LayerKind::dense ? "dense" : "lstm"; }
static const char* act_name(Activation a) {
    switch (a) {
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
        default: return "linear";
    }
}

std::string model_to_json(const ModelBundle& model) {
    json doc;
    doc["format_version"] = 1;
    json layers = json::array();
    for (const auto& spec : model.layers) {
        json l;
        l["kind"] = kind_name(spec.kind);
        l["in"] = spec.in;
        l["out"] = spec.out;
        if (spec.kind == LayerKind::dense) l["activation"] = act_name(spec.activation);
        layers.push_back(std::move(l));
    }
    doc["layers"] = std::move(layers);
    doc["weights"] = model.weights;
    json mask = json::array();
    for (auto f : model.trainable) mask.push_back(static_cast<int>(f));
    doc["trainable_mask"] = std::move(mask);
    doc["seed"] = model.seed;
    doc["train_meta"] = {{"epochs", model.train_meta.epochs},
                         {"final_train_loss", model.train_meta.final_train_loss},
                         {"final_val_loss", model.train_meta.final_val_loss}};
    doc["checksum"] = to_hex(fnv1a64(std::span<const double>(model.weights)));
    return doc.dump();
}

ModelBundle model_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("model json: ") + e.what());
    }
    if (!doc.contains("format_version") || doc["format_version"].get<int>() != 1)
        throw SchemaError("model json: unsupported format_version");
    ModelBundle model;
    for (const auto& l : doc.at("layers")) {
        LayerSpec spec;
        std::string kind = l.at("kind").get<std::string>();
        if (kind == "dense")
            spec.kind = LayerKind::dense;
        else if (kind == "lstm")
            spec.kind = LayerKind::lstm;
        else
            throw SchemaError("model json: unknown layer kind '" + kind + "'");
        spec.in = l.at("in").get<std::size_t>();
        spec.out = l.at("out").get<std::size_t>();
        if (spec.kind == LayerKind::dense) {
            std::string act = l.value("activation", "linear");
            if (act == "tanh")
                spec.activation = Activation::tanh;
            else if (act == "sigmoid")
                spec.activation = Activation::sigmoid;
            else if (act == "linear")
                spec.activation = Activation::linear;
            else
                throw SchemaError("model json: unknown activation '" + act + "'");
        }
        model.layers.push_back(spec);
    }
    model.weights = doc.at("weights").get<std::vector<double>>();
    std::size_t expect = param_count(std::span<const LayerSpec>(model.layers));
    if (model.weights.size() != expect)
        throw SchemaError("model json: weight array length " + std::to_string(model.weights.size()) +
                          " does not match layer specs (" + std::to_string(expect) + ")");
    for (const auto& f : doc.at("trainable_mask")) model.trainable.push_back(f.get<int>() ? 1 : 0);
    if (model.trainable.size() != model.weights.size())
        throw SchemaError("model json: trainable_mask length mismatch");
    model.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("train_meta")) {
        const auto& tm = doc["train_meta"];
        model.train_meta.epochs = tm.value("epochs", std::size_t{0});
        model.train_meta.final_train_loss = tm.value("final_train_loss", 0.0);
        model.train_meta.final_val_loss = tm.value("final_val_loss", 0.0);
    }
    std::string sum = doc.value("checksum", "");
    if (sum != to_hex(fnv1a64(std::span<const double>(model.weights))))
        throw SchemaError("model json: checksum mismatch");
    return model;
}

void save_model(const ModelBundle& model, const std::string& path) {
    atomic_write_file(path, model_to_json(model));
}

ModelBundle load_model(const std::string& path) { return model_from_json(read_file(path)); }

}  // namespace microseg::nn
