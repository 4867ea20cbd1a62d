#include "anlg/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "anlg/kernels.hpp"
#include "anlg/rng.hpp"

namespace anlg::lm {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

inline double gelu(double x) {
    return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

inline double gelu_grad(double x) {
    const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

// y (T x out) = x (T x in) @ w (in x out) + b
void linear_forward(const Mat& x, const Mat& w, const Vec& b, Mat& y) {
    const int T = x.rows, in = x.cols, out = w.cols;
    y = Mat(T, out);
    for (int t = 0; t < T; ++t) {
        double* yt = y.row(t);
        std::memcpy(yt, b.data(), sizeof(double) * out);
        const double* xt = x.row(t);
        for (int k = 0; k < in; ++k) {
            if (xt[k] != 0.0) kern::axpy(out, xt[k], w.row(k), yt);
        }
    }
}

// dx += dy @ w^T ; dw += x^T @ dy ; db += column sums of dy
void linear_backward(const Mat& x, const Mat& w, const Mat& dy, Mat& dx, Mat* dw, Vec* db) {
    const int T = x.rows, in = x.cols, out = w.cols;
    for (int t = 0; t < T; ++t) {
        const double* dyt = dy.row(t);
        double* dxt = dx.row(t);
        const double* xt = x.row(t);
        for (int k = 0; k < in; ++k) {
            dxt[k] += kern::dot(out, w.row(k), dyt);
            if (dw && xt[k] != 0.0) kern::axpy(out, xt[k], dyt, dw->row(k));
        }
        if (db) kern::add(out, dyt, db->data());
    }
}

void layernorm_forward(const Mat& x, const Vec& g, const Vec& b, LnCache& c) {
    const int T = x.rows, d = x.cols;
    c.out = Mat(T, d);
    c.mean.assign(T, 0.0);
    c.rstd.assign(T, 0.0);
    for (int t = 0; t < T; ++t) {
        const double* xt = x.row(t);
        const double m = kern::sum(d, xt) / d;
        double var = 0.0;
        for (int i = 0; i < d; ++i) var += (xt[i] - m) * (xt[i] - m);
        var /= d;
        const double rstd = 1.0 / std::sqrt(var + kLnEps);
        c.mean[t] = m;
        c.rstd[t] = rstd;
        double* ot = c.out.row(t);
        for (int i = 0; i < d; ++i) ot[i] = g[i] * (xt[i] - m) * rstd + b[i];
    }
}

void layernorm_backward(const Mat& x, const Vec& g, const LnCache& c, const Mat& dy, Mat& dx,
                        Vec* dg, Vec* db) {
    const int T = x.rows, d = x.cols;
    std::vector<double> xhat(d), dxhat(d);
    for (int t = 0; t < T; ++t) {
        const double* xt = x.row(t);
        const double* dyt = dy.row(t);
        double* dxt = dx.row(t);
        const double m = c.mean[t], rstd = c.rstd[t];
        double m1 = 0.0, m2 = 0.0;
        for (int i = 0; i < d; ++i) {
            xhat[i] = (xt[i] - m) * rstd;
            dxhat[i] = dyt[i] * g[i];
            m1 += dxhat[i];
            m2 += dxhat[i] * xhat[i];
            if (dg) (*dg)[i] += dyt[i] * xhat[i];
            if (db) (*db)[i] += dyt[i];
        }
        m1 /= d;
        m2 /= d;
        for (int i = 0; i < d; ++i) dxt[i] += rstd * (dxhat[i] - m1 - xhat[i] * m2);
    }
}

void validate_input(const ModelConfig& cfg, const Input& in) {
    if (in.empty()) throw std::invalid_argument("empty input sequence");
    if (static_cast<int>(in.size()) > cfg.max_len) {
        throw std::length_error("input length " + std::to_string(in.size()) +
                                " exceeds max_len " + std::to_string(cfg.max_len));
    }
    for (const auto& item : in) {
        switch (item.kind) {
            case InputItem::Kind::Token:
                if (item.token < 0 || item.token >= cfg.vocab_size) {
                    throw std::invalid_argument("token id out of range: " + std::to_string(item.token));
                }
                break;
            case InputItem::Kind::Soft: {
                if (static_cast<int>(item.dist.size()) != cfg.vocab_size) {
                    throw std::invalid_argument("soft input row has wrong vocabulary size");
                }
                double s = 0.0;
                for (double x : item.dist) {
                    if (!std::isfinite(x) || x < -1e-4 || x > 1.0 + 1e-4) {
                        throw std::invalid_argument("soft input entry outside [0,1]");
                    }
                    s += x;
                }
                if (std::fabs(s - 1.0) > 1e-4) {
                    throw std::invalid_argument("soft input row is not a probability simplex");
                }
                break;
            }
            case InputItem::Kind::Vector:
                if (static_cast<int>(item.vec.size()) != cfg.d_model) {
                    throw std::invalid_argument("vector input has wrong dimension");
                }
                break;
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameters

void ModelConfig::validate() const {
    if (vocab_size <= 0 || d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0 ||
        max_len <= 0) {
        throw std::invalid_argument("model config dimensions must be positive");
    }
    if (d_model % n_heads != 0) {
        throw std::invalid_argument("d_model must be divisible by n_heads");
    }
}

Parameters zero_params(const ModelConfig& config) {
    config.validate();
    Parameters p;
    p.config = config;
    const int d = config.d_model;
    p.tok_emb = Mat(config.vocab_size, d);
    p.pos_emb = Mat(config.max_len, d);
    p.blocks.resize(config.n_layers);
    for (auto& b : p.blocks) {
        b.ln1_g.assign(d, 0.0);
        b.ln1_b.assign(d, 0.0);
        b.w_qkv = Mat(d, 3 * d);
        b.b_qkv.assign(3 * d, 0.0);
        b.w_attn = Mat(d, d);
        b.b_attn.assign(d, 0.0);
        b.ln2_g.assign(d, 0.0);
        b.ln2_b.assign(d, 0.0);
        b.w_ff1 = Mat(d, config.d_ff);
        b.b_ff1.assign(config.d_ff, 0.0);
        b.w_ff2 = Mat(config.d_ff, d);
        b.b_ff2.assign(d, 0.0);
    }
    p.lnf_g.assign(d, 0.0);
    p.lnf_b.assign(d, 0.0);
    return p;
}

void Parameters::set_zero() {
    for (auto& a : param_arrays(*this)) std::fill(a.data, a.data + a.count, 0.0);
}

Parameters init_params(const ModelConfig& config, std::uint64_t seed) {
    Parameters p = zero_params(config);
    p.seed = seed;
    Rng rng(seed);
    auto fill_normal = [&](Mat& m) {
        for (auto& x : m.v) x = 0.02 * rng.normal();
    };
    // tok_emb stays zero: it doubles as the output projection, which starts
    // zeroed so a fresh model scores every token uniformly.
    fill_normal(p.pos_emb);
    for (auto& b : p.blocks) {
        std::fill(b.ln1_g.begin(), b.ln1_g.end(), 1.0);
        fill_normal(b.w_qkv);
        fill_normal(b.w_attn);
        std::fill(b.ln2_g.begin(), b.ln2_g.end(), 1.0);
        fill_normal(b.w_ff1);
        fill_normal(b.w_ff2);
    }
    std::fill(p.lnf_g.begin(), p.lnf_g.end(), 1.0);
    return p;
}

std::vector<ArrayRef> param_arrays(Parameters& p) {
    std::vector<ArrayRef> out;
    auto mat = [&](const std::string& name, Mat& m) {
        out.push_back({name, {m.rows, m.cols}, m.v.data(), m.v.size()});
    };
    auto vec = [&](const std::string& name, Vec& v) {
        out.push_back({name, {static_cast<int>(v.size())}, v.data(), v.size()});
    };
    mat("tok_emb", p.tok_emb);
    mat("pos_emb", p.pos_emb);
    for (std::size_t i = 0; i < p.blocks.size(); ++i) {
        const std::string pre = "blocks." + std::to_string(i) + ".";
        auto& b = p.blocks[i];
        vec(pre + "ln1_g", b.ln1_g);
        vec(pre + "ln1_b", b.ln1_b);
        mat(pre + "w_qkv", b.w_qkv);
        vec(pre + "b_qkv", b.b_qkv);
        mat(pre + "w_attn", b.w_attn);
        vec(pre + "b_attn", b.b_attn);
        vec(pre + "ln2_g", b.ln2_g);
        vec(pre + "ln2_b", b.ln2_b);
        mat(pre + "w_ff1", b.w_ff1);
        vec(pre + "b_ff1", b.b_ff1);
        mat(pre + "w_ff2", b.w_ff2);
        vec(pre + "b_ff2", b.b_ff2);
    }
    vec("lnf_g", p.lnf_g);
    vec("lnf_b", p.lnf_b);
    return out;
}

bool all_finite(const Parameters& p) {
    for (const auto& a : param_arrays(const_cast<Parameters&>(p))) {
        for (std::size_t i = 0; i < a.count; ++i) {
            if (!std::isfinite(a.data[i])) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Inputs

InputItem InputItem::tok(int id) {
    InputItem it;
    it.kind = Kind::Token;
    it.token = id;
    return it;
}

InputItem InputItem::soft(Vec dist) {
    InputItem it;
    it.kind = Kind::Soft;
    it.dist = std::move(dist);
    return it;
}

InputItem InputItem::vector(Vec v) {
    InputItem it;
    it.kind = Kind::Vector;
    it.vec = std::move(v);
    return it;
}

Input to_input(const TokenSeq& s) {
    Input in;
    append_tokens(in, s);
    return in;
}

void append_tokens(Input& in, const TokenSeq& s) {
    in.reserve(in.size() + s.size());
    for (int id : s) in.push_back(InputItem::tok(id));
}

void append_soft(Input& in, const SoftSeq& s) {
    in.reserve(in.size() + s.length());
    for (int t = 0; t < s.length(); ++t) {
        in.push_back(InputItem::soft(Vec(s.row(t), s.row(t) + s.vocab)));
    }
}

// ---------------------------------------------------------------------------
// Forward

Forward forward(const Parameters& p, const Input& in) {
    const ModelConfig& cfg = p.config;
    cfg.validate();
    validate_input(cfg, in);

    const int T = static_cast<int>(in.size());
    const int d = cfg.d_model;
    const int H = cfg.n_heads;
    const int dh = d / H;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Forward f;
    f.T = T;
    f.x0 = Mat(T, d);
    for (int t = 0; t < T; ++t) {
        double* xt = f.x0.row(t);
        const InputItem& item = in[t];
        switch (item.kind) {
            case InputItem::Kind::Token:
                kern::add(d, p.tok_emb.row(item.token), xt);
                break;
            case InputItem::Kind::Soft:
                for (int i = 0; i < cfg.vocab_size; ++i) {
                    if (item.dist[i] != 0.0) kern::axpy(d, item.dist[i], p.tok_emb.row(i), xt);
                }
                break;
            case InputItem::Kind::Vector:
                kern::add(d, item.vec.data(), xt);
                break;
        }
        kern::add(d, p.pos_emb.row(t), xt);
    }

    Mat x = f.x0;
    f.layers.resize(cfg.n_layers);
    for (int l = 0; l < cfg.n_layers; ++l) {
        const BlockParams& bp = p.blocks[l];
        LayerCache& c = f.layers[l];
        c.x_in = x;

        layernorm_forward(c.x_in, bp.ln1_g, bp.ln1_b, c.ln1);
        linear_forward(c.ln1.out, bp.w_qkv, bp.b_qkv, c.qkv);

        c.att = Mat(H * T, T);
        c.ctx = Mat(T, d);
        for (int h = 0; h < H; ++h) {
            const int off_q = h * dh, off_k = d + h * dh, off_v = 2 * d + h * dh;
            for (int i = 0; i < T; ++i) {
                double* arow = c.att.row(h * T + i);
                const double* qi = c.qkv.row(i) + off_q;
                double mx = -1e300;
                for (int j = 0; j <= i; ++j) {
                    arow[j] = att_scale * kern::dot(dh, qi, c.qkv.row(j) + off_k);
                    mx = arow[j] > mx ? arow[j] : mx;
                }
                double denom = 0.0;
                for (int j = 0; j <= i; ++j) {
                    arow[j] = std::exp(arow[j] - mx);
                    denom += arow[j];
                }
                kern::scale(i + 1, 1.0 / denom, arow);
                double* ci = c.ctx.row(i) + off_q;
                for (int j = 0; j <= i; ++j) {
                    kern::axpy(dh, arow[j], c.qkv.row(j) + off_v, ci);
                }
            }
        }

        Mat att_out;
        linear_forward(c.ctx, bp.w_attn, bp.b_attn, att_out);
        c.x_mid = c.x_in;
        kern::add(c.x_mid.v.size(), att_out.v.data(), c.x_mid.v.data());

        layernorm_forward(c.x_mid, bp.ln2_g, bp.ln2_b, c.ln2);
        linear_forward(c.ln2.out, bp.w_ff1, bp.b_ff1, c.ff1);
        c.act = Mat(T, cfg.d_ff);
        for (std::size_t i = 0; i < c.ff1.v.size(); ++i) c.act.v[i] = gelu(c.ff1.v[i]);
        Mat ff_out;
        linear_forward(c.act, bp.w_ff2, bp.b_ff2, ff_out);

        x = c.x_mid;
        kern::add(x.v.size(), ff_out.v.data(), x.v.data());
    }

    f.x_final = x;
    layernorm_forward(f.x_final, p.lnf_g, p.lnf_b, f.lnf);

    f.logits = Mat(T, cfg.vocab_size);
    for (int t = 0; t < T; ++t) {
        const double* ht = f.lnf.out.row(t);
        double* lt = f.logits.row(t);
        for (int v = 0; v < cfg.vocab_size; ++v) lt[v] = kern::dot(d, ht, p.tok_emb.row(v));
    }
    return f;
}

// ---------------------------------------------------------------------------
// Backward

void backward(const Parameters& p, const Input& in, const Forward& f, const Mat& dlogits,
              Parameters* param_grads, InputGrads* input_grads) {
    const ModelConfig& cfg = p.config;
    const int T = f.T;
    const int d = cfg.d_model;
    const int H = cfg.n_heads;
    const int dh = d / H;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    if (dlogits.rows != T || dlogits.cols != cfg.vocab_size) {
        throw std::invalid_argument("dlogits shape mismatch");
    }

    // output projection (tied): dlnf = dlogits @ tok_emb, dtok += dlogits^T @ lnf
    Mat dlnf(T, d);
    for (int t = 0; t < T; ++t) {
        const double* dlt = dlogits.row(t);
        double* dht = dlnf.row(t);
        const double* ht = f.lnf.out.row(t);
        for (int v = 0; v < cfg.vocab_size; ++v) {
            if (dlt[v] == 0.0) continue;
            kern::axpy(d, dlt[v], p.tok_emb.row(v), dht);
            if (param_grads) kern::axpy(d, dlt[v], ht, param_grads->tok_emb.row(v));
        }
    }

    Mat dx(T, d);
    layernorm_backward(f.x_final, p.lnf_g, f.lnf, dlnf, dx,
                       param_grads ? &param_grads->lnf_g : nullptr,
                       param_grads ? &param_grads->lnf_b : nullptr);

    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        const BlockParams& bp = p.blocks[l];
        const LayerCache& c = f.layers[l];
        BlockParams* bg = param_grads ? &param_grads->blocks[l] : nullptr;

        // MLP: x_out = x_mid + act @ w_ff2 + b_ff2
        Mat dact(T, cfg.d_ff);
        linear_backward(c.act, bp.w_ff2, dx, dact, bg ? &bg->w_ff2 : nullptr,
                        bg ? &bg->b_ff2 : nullptr);
        Mat dff1(T, cfg.d_ff);
        for (std::size_t i = 0; i < dff1.v.size(); ++i) {
            dff1.v[i] = dact.v[i] * gelu_grad(c.ff1.v[i]);
        }
        Mat dln2(T, d);
        linear_backward(c.ln2.out, bp.w_ff1, dff1, dln2, bg ? &bg->w_ff1 : nullptr,
                        bg ? &bg->b_ff1 : nullptr);
        // dx currently holds dL/dx_out; residual passes it straight through to
        // x_mid, plus the layernorm path.
        layernorm_backward(c.x_mid, bp.ln2_g, c.ln2, dln2, dx, bg ? &bg->ln2_g : nullptr,
                           bg ? &bg->ln2_b : nullptr);

        // attention: x_mid = x_in + ctx @ w_attn + b_attn
        Mat dctx(T, d);
        linear_backward(c.ctx, bp.w_attn, dx, dctx, bg ? &bg->w_attn : nullptr,
                        bg ? &bg->b_attn : nullptr);

        Mat dqkv(T, 3 * d);
        std::vector<double> datt(T), dscore(T);
        for (int h = 0; h < H; ++h) {
            const int off_q = h * dh, off_k = d + h * dh, off_v = 2 * d + h * dh;
            for (int i = 0; i < T; ++i) {
                const double* arow = c.att.row(h * T + i);
                const double* dci = dctx.row(i) + off_q;
                for (int j = 0; j <= i; ++j) {
                    datt[j] = kern::dot(dh, dci, c.qkv.row(j) + off_v);
                    kern::axpy(dh, arow[j], dci, dqkv.row(j) + off_v);
                }
                double s = 0.0;
                for (int j = 0; j <= i; ++j) s += datt[j] * arow[j];
                double* dqi = dqkv.row(i) + off_q;
                const double* qi = c.qkv.row(i) + off_q;
                for (int j = 0; j <= i; ++j) {
                    dscore[j] = arow[j] * (datt[j] - s);
                    kern::axpy(dh, att_scale * dscore[j], c.qkv.row(j) + off_k, dqi);
                    kern::axpy(dh, att_scale * dscore[j], qi, dqkv.row(j) + off_k);
                }
            }
        }

        Mat dln1(T, d);
        linear_backward(c.ln1.out, bp.w_qkv, dqkv, dln1, bg ? &bg->w_qkv : nullptr,
                        bg ? &bg->b_qkv : nullptr);
        layernorm_backward(c.x_in, bp.ln1_g, c.ln1, dln1, dx, bg ? &bg->ln1_g : nullptr,
                           bg ? &bg->ln1_b : nullptr);
    }

    // embeddings
    if (input_grads) input_grads->items.assign(T, Vec{});
    for (int t = 0; t < T; ++t) {
        const double* dxt = dx.row(t);
        if (param_grads) kern::add(d, dxt, param_grads->pos_emb.row(t));
        const InputItem& item = in[t];
        switch (item.kind) {
            case InputItem::Kind::Token:
                if (param_grads) kern::add(d, dxt, param_grads->tok_emb.row(item.token));
                break;
            case InputItem::Kind::Soft: {
                if (input_grads) {
                    Vec& g = input_grads->items[t];
                    g.assign(cfg.vocab_size, 0.0);
                    for (int i = 0; i < cfg.vocab_size; ++i) {
                        g[i] = kern::dot(d, p.tok_emb.row(i), dxt);
                    }
                }
                if (param_grads) {
                    for (int i = 0; i < cfg.vocab_size; ++i) {
                        if (item.dist[i] != 0.0) {
                            kern::axpy(d, item.dist[i], dxt, param_grads->tok_emb.row(i));
                        }
                    }
                }
                break;
            }
            case InputItem::Kind::Vector:
                if (input_grads) input_grads->items[t].assign(dxt, dxt + d);
                break;
        }
    }
}

// ---------------------------------------------------------------------------
// Public entry points

Vec log_softmax_row(const double* logits, int v) {
    const double m = kern::vmax(v, logits);
    double denom = 0.0;
    for (int i = 0; i < v; ++i) denom += std::exp(logits[i] - m);
    const double lse = m + std::log(denom);
    Vec out(v);
    for (int i = 0; i < v; ++i) out[i] = logits[i] - lse;
    return out;
}

Vec softmax_row(const double* logits, int v) {
    const double m = kern::vmax(v, logits);
    Vec out(v);
    double denom = 0.0;
    for (int i = 0; i < v; ++i) {
        out[i] = std::exp(logits[i] - m);
        denom += out[i];
    }
    kern::scale(v, 1.0 / denom, out.data());
    return out;
}

Mat forward_logits(const Parameters& p, const TokenSeq& prefix,
                   const std::vector<Vec>* extra_embeddings) {
    if (prefix.empty()) throw std::invalid_argument("forward_logits: empty prefix");
    Input in;
    if (extra_embeddings) {
        for (const auto& v : *extra_embeddings) in.push_back(InputItem::vector(v));
    }
    append_tokens(in, prefix);
    Forward f = forward(p, in);
    const int skip = extra_embeddings ? static_cast<int>(extra_embeddings->size()) : 0;
    Mat out(static_cast<int>(prefix.size()), p.config.vocab_size);
    for (int t = 0; t < out.rows; ++t) {
        std::memcpy(out.row(t), f.logits.row(skip + t), sizeof(double) * out.cols);
    }
    return out;
}

Mat forward_soft(const Parameters& p, const SoftSeq& soft, const TokenSeq* hard_prefix) {
    Input in;
    if (hard_prefix) append_tokens(in, *hard_prefix);
    append_soft(in, soft);
    return forward(p, in).logits;
}

double log_prob(const Parameters& p, const TokenSeq& target, const Input& conditioning) {
    return log_prob_grad(p, target, conditioning, nullptr, nullptr);
}

double log_prob(const Parameters& p, const TokenSeq& target, const TokenSeq& conditioning) {
    return log_prob(p, target, to_input(conditioning));
}

double log_prob(const Parameters& p, const TokenSeq& target, const SoftSeq& conditioning) {
    Input in;
    append_soft(in, conditioning);
    return log_prob(p, target, in);
}

double log_prob_grad(const Parameters& p, const TokenSeq& target, const Input& conditioning,
                     Parameters* param_grads, InputGrads* input_grads) {
    if (target.empty()) throw std::invalid_argument("log_prob: empty target");
    if (conditioning.empty()) throw std::invalid_argument("log_prob: empty conditioning");
    Input full = conditioning;
    append_tokens(full, target);
    Forward f = forward(p, full);
    const int c = static_cast<int>(conditioning.size());
    double lp = 0.0;
    Mat dlogits;
    if (param_grads || input_grads) dlogits = Mat(f.T, p.config.vocab_size);
    for (std::size_t j = 0; j < target.size(); ++j) {
        const int row = c - 1 + static_cast<int>(j);
        const Vec lsm = log_softmax_row(f.logits.row(row), p.config.vocab_size);
        lp += lsm[target[j]];
        if (param_grads || input_grads) {
            // d logP / dlogit = onehot - softmax
            double* dl = dlogits.row(row);
            for (int v = 0; v < p.config.vocab_size; ++v) dl[v] = -std::exp(lsm[v]);
            dl[target[j]] += 1.0;
        }
    }
    if (param_grads || input_grads) backward(p, full, f, dlogits, param_grads, input_grads);
    return lp;
}

Mat hidden_states(const Parameters& p, const TokenSeq& tokens) {
    return forward(p, to_input(tokens)).x_final;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr char kMagic[8] = {'A', 'N', 'L', 'G', 'C', 'K', 'P', '1'};
}

void save_checkpoint(const std::string& path, const Parameters& p) {
    auto arrays = param_arrays(const_cast<Parameters&>(p));
    nlohmann::json header;
    header["version"] = p.version;
    header["seed"] = p.seed;
    header["config"] = {{"vocab_size", p.config.vocab_size}, {"d_model", p.config.d_model},
                        {"n_layers", p.config.n_layers},     {"n_heads", p.config.n_heads},
                        {"d_ff", p.config.d_ff},             {"max_len", p.config.max_len}};
    std::uint64_t offset = 0;
    nlohmann::json table = nlohmann::json::array();
    for (const auto& a : arrays) {
        table.push_back({{"name", a.name},
                         {"shape", a.shape},
                         {"dtype", "f64"},
                         {"offset", offset},
                         {"count", a.count}});
        offset += a.count;
    }
    header["arrays"] = table;
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& a : arrays) {
        out.write(reinterpret_cast<const char*>(a.data),
                  static_cast<std::streamsize>(a.count * sizeof(double)));
    }
    if (!out) throw std::runtime_error("short write while saving checkpoint: " + path);
}

Parameters load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("not a checkpoint file: " + path);
    }
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error("truncated checkpoint header: " + path);
    const nlohmann::json header = nlohmann::json::parse(hs);

    ModelConfig cfg;
    const auto& jc = header.at("config");
    cfg.vocab_size = jc.at("vocab_size").get<int>();
    cfg.d_model = jc.at("d_model").get<int>();
    cfg.n_layers = jc.at("n_layers").get<int>();
    cfg.n_heads = jc.at("n_heads").get<int>();
    cfg.d_ff = jc.at("d_ff").get<int>();
    cfg.max_len = jc.at("max_len").get<int>();

    Parameters p = zero_params(cfg);
    p.version = header.at("version").get<std::uint32_t>();
    p.seed = header.at("seed").get<std::uint64_t>();

    auto arrays = param_arrays(p);
    const auto& table = header.at("arrays");
    if (table.size() != arrays.size()) {
        throw std::runtime_error("checkpoint array table does not match config: " + path);
    }
    for (std::size_t i = 0; i < arrays.size(); ++i) {
        const auto& e = table.at(i);
        if (e.at("name").get<std::string>() != arrays[i].name ||
            e.at("count").get<std::size_t>() != arrays[i].count ||
            e.at("dtype").get<std::string>() != "f64") {
            throw std::runtime_error("checkpoint array mismatch at " + arrays[i].name);
        }
    }
    for (const auto& a : arrays) {
        in.read(reinterpret_cast<char*>(a.data), static_cast<std::streamsize>(a.count * sizeof(double)));
    }
    if (!in) throw std::runtime_error("truncated checkpoint payload: " + path);
    if (!all_finite(p)) throw std::runtime_error("checkpoint contains non-finite values: " + path);
    return p;
}

}  // namespace anlg::lm
