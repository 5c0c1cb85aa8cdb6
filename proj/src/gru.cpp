#include "steerid/gru.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "steerid/errors.hpp"

namespace steerid {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double activate(double x, Activation act) {
    return act == Activation::Sigmoid ? sigmoid(x) : std::tanh(x);
}

// derivative from the activated value
double activate_grad(double y, Activation act) {
    return act == Activation::Sigmoid ? y * (1.0 - y) : 1.0 - y * y;
}

GruCellParams make_cell(std::size_t hidden, std::size_t input_dim) {
    GruCellParams c;
    c.w_z = Matrix(hidden, input_dim);
    c.u_z = Matrix(hidden, hidden);
    c.w_r = Matrix(hidden, input_dim);
    c.u_r = Matrix(hidden, hidden);
    c.w_c = Matrix(hidden, input_dim);
    c.u_c = Matrix(hidden, hidden);
    return c;
}

template <typename P1, typename P2, typename Fn>
void visit_pairs(P1& a, P2& b, Fn&& fn) {
    auto cell = [&fn](auto& ca, auto& cb) {
        fn(std::span(ca.w_z.data), std::span(cb.w_z.data), true);
        fn(std::span(ca.u_z.data), std::span(cb.u_z.data), true);
        fn(std::span(ca.w_r.data), std::span(cb.w_r.data), true);
        fn(std::span(ca.u_r.data), std::span(cb.u_r.data), true);
        fn(std::span(ca.w_c.data), std::span(cb.w_c.data), true);
        fn(std::span(ca.u_c.data), std::span(cb.u_c.data), true);
    };
    cell(a.l1_fwd, b.l1_fwd);
    cell(a.l1_bwd, b.l1_bwd);
    cell(a.l2_fwd, b.l2_fwd);
    cell(a.l2_bwd, b.l2_bwd);
    fn(std::span(a.vote_w.data), std::span(b.vote_w.data), true);
    fn(std::span(a.vote_b), std::span(b.vote_b), false);
}

template <typename P1, typename P2, typename P3, typename Fn>
void visit_triples(P1& a, P2& b, P3& c, Fn&& fn) {
    auto cell = [&fn](auto& ca, auto& cb, auto& cc) {
        fn(std::span(ca.w_z.data), std::span(cb.w_z.data), std::span(cc.w_z.data));
        fn(std::span(ca.u_z.data), std::span(cb.u_z.data), std::span(cc.u_z.data));
        fn(std::span(ca.w_r.data), std::span(cb.w_r.data), std::span(cc.w_r.data));
        fn(std::span(ca.u_r.data), std::span(cb.u_r.data), std::span(cc.u_r.data));
        fn(std::span(ca.w_c.data), std::span(cb.w_c.data), std::span(cc.w_c.data));
        fn(std::span(ca.u_c.data), std::span(cb.u_c.data), std::span(cc.u_c.data));
    };
    cell(a.l1_fwd, b.l1_fwd, c.l1_fwd);
    cell(a.l1_bwd, b.l1_bwd, c.l1_bwd);
    cell(a.l2_fwd, b.l2_fwd, c.l2_fwd);
    cell(a.l2_bwd, b.l2_bwd, c.l2_bwd);
    fn(std::span(a.vote_w.data), std::span(b.vote_w.data), std::span(c.vote_w.data));
    fn(std::span(a.vote_b), std::span(b.vote_b), std::span(c.vote_b));
}

struct CellTrace {
    Matrix z, r, c, h;  // F x hidden, in processing order
};

void run_cell_forward(const GruCellParams& p, const Matrix& inputs, Activation act, CellTrace& tr) {
    const std::size_t steps = inputs.rows;
    const std::size_t hidden = p.hidden();
    tr.z = Matrix(steps, hidden);
    tr.r = Matrix(steps, hidden);
    tr.c = Matrix(steps, hidden);
    tr.h = Matrix(steps, hidden);

    std::vector<double> az(hidden), ar(hidden), ac(hidden), rh(hidden);
    const std::vector<double> zeros(hidden, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
        std::span<const double> x(inputs[t], inputs.cols);
        std::span<const double> h_prev = t == 0 ? std::span<const double>(zeros)
                                                : std::span<const double>(tr.h[t - 1], hidden);
        kernels::matvec(p.w_z, x, az);
        kernels::matvec_acc(p.u_z, h_prev, az);
        kernels::matvec(p.w_r, x, ar);
        kernels::matvec_acc(p.u_r, h_prev, ar);
        double* zt = tr.z[t];
        double* rt = tr.r[t];
        for (std::size_t j = 0; j < hidden; ++j) {
            zt[j] = sigmoid(az[j]);
            rt[j] = sigmoid(ar[j]);
        }
        for (std::size_t j = 0; j < hidden; ++j) rh[j] = rt[j] * h_prev[j];
        kernels::matvec(p.w_c, x, ac);
        kernels::matvec_acc(p.u_c, rh, ac);
        double* ct = tr.c[t];
        double* ht = tr.h[t];
        for (std::size_t j = 0; j < hidden; ++j) {
            ct[j] = activate(ac[j], act);
            ht[j] = zt[j] * h_prev[j] + (1.0 - zt[j]) * ct[j];
        }
    }
}

// dstates holds the externally injected dL/dh at every step (processing
// order). dinputs, when non-null, receives dL/dx.
void run_cell_backward(const GruCellParams& p, const Matrix& inputs, const CellTrace& tr,
                       Activation act, const Matrix& dstates, Matrix* dinputs, GruCellParams& grads) {
    const std::size_t steps = inputs.rows;
    const std::size_t hidden = p.hidden();
    const std::vector<double> zeros(hidden, 0.0);

    std::vector<double> carry(hidden, 0.0), dh(hidden), dc(hidden), dz(hidden), dr(hidden),
        da_c(hidden), da_z(hidden), da_r(hidden), tmp(hidden), rh(hidden);

    for (std::size_t ti = steps; ti-- > 0;) {
        std::span<const double> x(inputs[ti], inputs.cols);
        std::span<const double> h_prev = ti == 0 ? std::span<const double>(zeros)
                                                 : std::span<const double>(tr.h[ti - 1], hidden);
        const double* z = tr.z[ti];
        const double* r = tr.r[ti];
        const double* c = tr.c[ti];
        const double* dht_ext = dstates[ti];

        for (std::size_t j = 0; j < hidden; ++j) {
            dh[j] = dht_ext[j] + carry[j];
            dc[j] = dh[j] * (1.0 - z[j]);
            dz[j] = dh[j] * (h_prev[j] - c[j]);
            carry[j] = dh[j] * z[j];  // contribution through the copy gate
            da_c[j] = dc[j] * activate_grad(c[j], act);
            rh[j] = r[j] * h_prev[j];
        }

        kernels::add_outer(grads.w_c, da_c, x);
        kernels::add_outer(grads.u_c, da_c, rh);
        kernels::matvec_t(p.u_c, da_c, tmp);
        for (std::size_t j = 0; j < hidden; ++j) {
            dr[j] = tmp[j] * h_prev[j];
            carry[j] += tmp[j] * r[j];
            da_z[j] = dz[j] * z[j] * (1.0 - z[j]);
            da_r[j] = dr[j] * r[j] * (1.0 - r[j]);
        }

        kernels::add_outer(grads.w_z, da_z, x);
        kernels::add_outer(grads.u_z, da_z, h_prev);
        kernels::matvec_t(p.u_z, da_z, tmp);
        for (std::size_t j = 0; j < hidden; ++j) carry[j] += tmp[j];

        kernels::add_outer(grads.w_r, da_r, x);
        kernels::add_outer(grads.u_r, da_r, h_prev);
        kernels::matvec_t(p.u_r, da_r, tmp);
        for (std::size_t j = 0; j < hidden; ++j) carry[j] += tmp[j];

        if (dinputs) {
            std::span<double> dx((*dinputs)[ti], dinputs->cols);
            std::vector<double> acc(dinputs->cols, 0.0);
            kernels::matvec_t(p.w_z, da_z, dx);
            kernels::matvec_t(p.w_r, da_r, acc);
            for (std::size_t j = 0; j < dx.size(); ++j) dx[j] += acc[j];
            kernels::matvec_t(p.w_c, da_c, acc);
            for (std::size_t j = 0; j < dx.size(); ++j) dx[j] += acc[j];
        }
    }
}

Matrix reversed_rows(const Matrix& m) {
    Matrix out(m.rows, m.cols);
    for (std::size_t r = 0; r < m.rows; ++r)
        std::copy(m[m.rows - 1 - r], m[m.rows - 1 - r] + m.cols, out[r]);
    return out;
}

void apply_mask_rows(const Matrix& h, std::span<const double> mask, Matrix& out) {
    out = Matrix(h.rows, h.cols);
    for (std::size_t r = 0; r < h.rows; ++r)
        for (std::size_t c = 0; c < h.cols; ++c) out.at(r, c) = h.at(r, c) * mask[c];
}

struct EncodeTrace {
    Matrix xs, xs_rev;                // standardized inputs (window / reversed order)
    CellTrace l1f, l1b, l2f, l2b;
    std::vector<double> m1f, m1b, m2f, m2b;  // inverted-dropout masks
    Matrix y1f, y1b, y2f, y2b;               // masked layer outputs
    Matrix logits, votes;                    // M x n_classes
    std::size_t n_votes = 0;
};

std::vector<double> draw_mask(std::size_t n, double keep, Mode mode, Rng& rng) {
    std::vector<double> mask(n, 1.0);
    if (mode == Mode::Train && keep < 1.0) {
        for (double& m : mask) m = rng.uniform01() < keep ? 1.0 / keep : 0.0;
    }
    return mask;
}

void forward_full(const ModelParams& params, const SegmentMatrix& seg, Mode mode, Rng& rng,
                  EncodeTrace& et) {
    if (!params.standardized()) throw config_error("model has no feature statistics");
    if (seg.dim() != params.input_dim)
        throw config_error("segment dim " + std::to_string(seg.dim()) + " != model input dim " +
                           std::to_string(params.input_dim));
    const std::size_t f = seg.n_windows();
    if (f == 0 || f % kVoteEvery != 0)
        throw config_error("window count must be a positive multiple of 6, got " + std::to_string(f));

    const std::size_t dim = params.input_dim;
    const std::size_t hidden = params.hyper.hidden;

    et.xs = Matrix(f, dim);
    for (std::size_t t = 0; t < f; ++t)
        for (std::size_t d = 0; d < dim; ++d)
            et.xs.at(t, d) = (seg.features.at(t, d) - params.feat_mean[d]) / params.feat_scale[d];
    et.xs_rev = reversed_rows(et.xs);

    const double keep = params.hyper.keep_prob;
    et.m1f = draw_mask(hidden, keep, mode, rng);
    et.m1b = draw_mask(hidden, keep, mode, rng);
    et.m2f = draw_mask(hidden, keep, mode, rng);
    et.m2b = draw_mask(hidden, keep, mode, rng);

    run_cell_forward(params.l1_fwd, et.xs, params.hyper.candidate, et.l1f);
    run_cell_forward(params.l1_bwd, et.xs_rev, params.hyper.candidate, et.l1b);
    apply_mask_rows(et.l1f.h, et.m1f, et.y1f);
    apply_mask_rows(et.l1b.h, et.m1b, et.y1b);
    run_cell_forward(params.l2_fwd, et.y1f, params.hyper.candidate, et.l2f);
    run_cell_forward(params.l2_bwd, et.y1b, params.hyper.candidate, et.l2b);
    apply_mask_rows(et.l2f.h, et.m2f, et.y2f);
    apply_mask_rows(et.l2b.h, et.m2b, et.y2b);

    const std::size_t n_votes = f / kVoteEvery;
    const std::size_t n_classes = params.n_classes;
    et.n_votes = n_votes;
    et.logits = Matrix(n_votes, n_classes);
    et.votes = Matrix(n_votes, n_classes);

    std::vector<double> cat(2 * hidden);
    for (std::size_t m = 0; m < n_votes; ++m) {
        const std::size_t t_fwd = kVoteEvery * (m + 1) - 1;  // 0-based forward window index
        const std::size_t p_bwd = f - 1 - t_fwd;             // processing index of the same window
        std::copy(et.y2f[t_fwd], et.y2f[t_fwd] + hidden, cat.begin());
        std::copy(et.y2b[p_bwd], et.y2b[p_bwd] + hidden, cat.begin() + static_cast<std::ptrdiff_t>(hidden));

        double* logit = et.logits[m];
        kernels::matvec(params.vote_w, cat, std::span<double>(logit, n_classes));
        for (std::size_t k = 0; k < n_classes; ++k) logit[k] += params.vote_b[k];

        double max_logit = logit[0];
        for (std::size_t k = 1; k < n_classes; ++k) max_logit = std::max(max_logit, logit[k]);
        double denom = 0.0;
        double* vote = et.votes[m];
        for (std::size_t k = 0; k < n_classes; ++k) {
            vote[k] = std::exp(logit[k] - max_logit);
            denom += vote[k];
        }
        for (std::size_t k = 0; k < n_classes; ++k) vote[k] /= denom;
    }
}

// gradients of one element's mean-over-votes cross entropy
double element_backward(const ModelParams& params, const SegmentMatrix& seg, std::size_t label,
                        Rng& rng, Gradients& grads) {
    EncodeTrace et;
    forward_full(params, seg, Mode::Train, rng, et);

    const std::size_t f = seg.n_windows();
    const std::size_t hidden = params.hyper.hidden;
    const std::size_t n_classes = params.n_classes;
    const double inv_votes = 1.0 / static_cast<double>(et.n_votes);

    Matrix dy2f(f, hidden), dy2b(f, hidden);
    std::vector<double> cat(2 * hidden), dlogit(n_classes), dcat(2 * hidden);

    double ce = 0.0;
    for (std::size_t m = 0; m < et.n_votes; ++m) {
        const std::size_t t_fwd = kVoteEvery * (m + 1) - 1;
        const std::size_t p_bwd = f - 1 - t_fwd;
        std::copy(et.y2f[t_fwd], et.y2f[t_fwd] + hidden, cat.begin());
        std::copy(et.y2b[p_bwd], et.y2b[p_bwd] + hidden, cat.begin() + static_cast<std::ptrdiff_t>(hidden));

        // stable cross entropy straight from the logits
        const double* logit = et.logits[m];
        double max_logit = logit[0];
        for (std::size_t k = 1; k < n_classes; ++k) max_logit = std::max(max_logit, logit[k]);
        double lse = 0.0;
        for (std::size_t k = 0; k < n_classes; ++k) lse += std::exp(logit[k] - max_logit);
        ce += (std::log(lse) + max_logit - logit[label]) * inv_votes;

        const double* vote = et.votes[m];
        for (std::size_t k = 0; k < n_classes; ++k)
            dlogit[k] = (vote[k] - (k == label ? 1.0 : 0.0)) * inv_votes;

        kernels::add_outer(grads.vote_w, dlogit, cat);
        for (std::size_t k = 0; k < n_classes; ++k) grads.vote_b[k] += dlogit[k];
        kernels::matvec_t(params.vote_w, dlogit, dcat);
        double* df = dy2f[t_fwd];
        double* db = dy2b[p_bwd];
        for (std::size_t j = 0; j < hidden; ++j) {
            df[j] += dcat[j];
            db[j] += dcat[hidden + j];
        }
    }

    // dropout backprop, layer 2
    for (std::size_t t = 0; t < f; ++t)
        for (std::size_t j = 0; j < hidden; ++j) {
            dy2f.at(t, j) *= et.m2f[j];
            dy2b.at(t, j) *= et.m2b[j];
        }

    Matrix dy1f(f, hidden), dy1b(f, hidden);
    run_cell_backward(params.l2_fwd, et.y1f, et.l2f, params.hyper.candidate, dy2f, &dy1f, grads.l2_fwd);
    run_cell_backward(params.l2_bwd, et.y1b, et.l2b, params.hyper.candidate, dy2b, &dy1b, grads.l2_bwd);

    for (std::size_t t = 0; t < f; ++t)
        for (std::size_t j = 0; j < hidden; ++j) {
            dy1f.at(t, j) *= et.m1f[j];
            dy1b.at(t, j) *= et.m1b[j];
        }

    run_cell_backward(params.l1_fwd, et.xs, et.l1f, params.hyper.candidate, dy1f, nullptr, grads.l1_fwd);
    run_cell_backward(params.l1_bwd, et.xs_rev, et.l1b, params.hyper.candidate, dy1b, nullptr,
                      grads.l1_bwd);
    return ce;
}

void zero_gradients(Gradients& g) {
    visit_tensors(g, [](auto span, bool) {
        for (double& v : span) v = 0.0;
    });
}

}  // namespace

Gradients make_gradients_like(const ModelParams& params) {
    Gradients g;
    const std::size_t hidden = params.hyper.hidden;
    g.l1_fwd = make_cell(hidden, params.input_dim);
    g.l1_bwd = make_cell(hidden, params.input_dim);
    g.l2_fwd = make_cell(hidden, hidden);
    g.l2_bwd = make_cell(hidden, hidden);
    g.vote_w = Matrix(params.n_classes, 2 * hidden);
    g.vote_b.assign(params.n_classes, 0.0);
    return g;
}

OptimizerState make_optimizer_state(const ModelParams& params) {
    OptimizerState s;
    s.acc = make_gradients_like(params);
    return s;
}

std::vector<double> gru_cell_step(const GruCellParams& params, std::span<const double> x,
                                  std::span<const double> h_prev, Activation activation) {
    if (x.size() != params.input_dim() || h_prev.size() != params.hidden())
        throw config_error("gru_cell_step shape mismatch");
    Matrix inputs(1, x.size());
    std::copy(x.begin(), x.end(), inputs[0]);

    // seed the recurrence with h_prev by running a single step manually
    const std::size_t hidden = params.hidden();
    std::vector<double> az(hidden), ar(hidden), ac(hidden), rh(hidden), h_new(hidden);
    kernels::matvec(params.w_z, x, az);
    kernels::matvec_acc(params.u_z, h_prev, az);
    kernels::matvec(params.w_r, x, ar);
    kernels::matvec_acc(params.u_r, h_prev, ar);
    for (std::size_t j = 0; j < hidden; ++j) rh[j] = sigmoid(ar[j]) * h_prev[j];
    kernels::matvec(params.w_c, x, ac);
    kernels::matvec_acc(params.u_c, rh, ac);
    for (std::size_t j = 0; j < hidden; ++j) {
        const double z = sigmoid(az[j]);
        h_new[j] = z * h_prev[j] + (1.0 - z) * activate(ac[j], activation);
    }
    return h_new;
}

std::vector<VoteVector> encode_segment(const ModelParams& params, const SegmentMatrix& segment,
                                       Mode mode, Rng& rng) {
    EncodeTrace et;
    forward_full(params, segment, mode, rng, et);
    std::vector<VoteVector> votes(et.n_votes);
    for (std::size_t m = 0; m < et.n_votes; ++m)
        votes[m].assign(et.votes[m], et.votes[m] + params.n_classes);
    return votes;
}

double l2_penalty(const ModelParams& params) {
    double sum = 0.0;
    visit_tensors(params, [&sum](auto span, bool is_weight) {
        if (!is_weight) return;
        for (double v : span) sum += v * v;
    });
    return params.hyper.l2_lambda * sum;
}

double loss(const std::vector<VoteVector>& votes, std::size_t label, const ModelParams& params) {
    if (votes.empty()) throw config_error("loss needs at least one vote");
    if (label >= params.n_classes) throw config_error("label out of range");
    double ce = 0.0;
    for (const auto& vote : votes) ce += -std::log(std::max(vote[label], 1e-300));
    return ce / static_cast<double>(votes.size()) + l2_penalty(params);
}

BackwardResult backward(const Batch& batch, const ModelParams& params, const Rng& rng, long step) {
    if (batch.segments.empty()) throw config_error("empty batch");
    const std::size_t b = batch.segments.size();

    // chunked so memory stays bounded by the worker count
    const std::size_t chunk = std::min<std::size_t>(b, static_cast<std::size_t>(std::max(1, kernels::max_threads())));
    std::vector<Gradients> partial;
    partial.reserve(chunk);
    for (std::size_t i = 0; i < chunk; ++i) partial.push_back(make_gradients_like(params));
    std::vector<double> ce(b, 0.0);

    BackwardResult result;
    result.grads = make_gradients_like(params);

    for (std::size_t base = 0; base < b; base += chunk) {
        const std::size_t count = std::min(chunk, b - base);
        const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(static) num_threads(kernels::max_threads())
        for (std::int64_t i = 0; i < n; ++i) {
            const auto elem = base + static_cast<std::size_t>(i);
            Rng elem_rng = rng.child(elem);
            zero_gradients(partial[static_cast<std::size_t>(i)]);
            ce[elem] = element_backward(params, *batch.segments[elem], batch.labels[elem], elem_rng,
                                        partial[static_cast<std::size_t>(i)]);
        }
        // reduce in element order: results do not depend on the worker count
        for (std::size_t i = 0; i < count; ++i)
            visit_pairs(result.grads, partial[i], [](auto dst, auto src, bool) {
                for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
            });
    }

    const double inv_b = 1.0 / static_cast<double>(b);
    visit_tensors(result.grads, [inv_b](auto span, bool) {
        for (double& v : span) v *= inv_b;
    });

    // L2 term, weight matrices only
    const double lambda = params.hyper.l2_lambda;
    if (lambda != 0.0)
        visit_pairs(result.grads, const_cast<ModelParams&>(params), [lambda](auto g, auto theta, bool is_weight) {
            if (!is_weight) return;
            for (std::size_t k = 0; k < g.size(); ++k) g[k] += 2.0 * lambda * theta[k];
        });

    double mean_ce = 0.0;
    for (double v : ce) mean_ce += v;
    result.loss = mean_ce * inv_b + l2_penalty(params);
    if (!std::isfinite(result.loss)) throw divergence_error("non-finite training loss", step);
    return result;
}

void rmsprop_step(OptimizerState& state, ModelParams& params, const Gradients& grads) {
    const double lr = params.hyper.learning_rate;
    const double decay = state.decay;
    const double eps = state.epsilon;
    visit_triples(params, const_cast<Gradients&>(grads), state.acc,
                  [lr, decay, eps](auto theta, auto g, auto acc) {
                      for (std::size_t k = 0; k < theta.size(); ++k) {
                          acc[k] = decay * acc[k] + (1.0 - decay) * g[k] * g[k];
                          theta[k] -= lr * g[k] / std::sqrt(acc[k] + eps);
                      }
                  });
    ++state.step;
}

namespace {
void glorot_fill(Matrix& m, Rng& rng) {
    // fan_in = cols, fan_out = rows
    const double s = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
    for (double& v : m.data) v = static_cast<double>(static_cast<float>(rng.uniform(-s, s)));
}
}  // namespace

ModelParams init_params(Rng& rng, std::size_t n_classes, std::size_t input_dim, const Hyper& hyper) {
    if (n_classes < 2) throw config_error("need at least 2 classes");
    ModelParams p;
    p.n_classes = n_classes;
    p.input_dim = input_dim;
    p.hyper = hyper;
    p.l1_fwd = make_cell(hyper.hidden, input_dim);
    p.l1_bwd = make_cell(hyper.hidden, input_dim);
    p.l2_fwd = make_cell(hyper.hidden, hyper.hidden);
    p.l2_bwd = make_cell(hyper.hidden, hyper.hidden);
    p.vote_w = Matrix(n_classes, 2 * hyper.hidden);
    p.vote_b.assign(n_classes, 0.0);

    auto cell = [&rng](GruCellParams& c) {
        glorot_fill(c.w_z, rng);
        glorot_fill(c.u_z, rng);
        glorot_fill(c.w_r, rng);
        glorot_fill(c.u_r, rng);
        glorot_fill(c.w_c, rng);
        glorot_fill(c.u_c, rng);
    };
    cell(p.l1_fwd);
    cell(p.l1_bwd);
    cell(p.l2_fwd);
    cell(p.l2_bwd);
    glorot_fill(p.vote_w, rng);
    return p;
}

void set_feature_stats(ModelParams& params, const SegmentPool& train_pool) {
    const std::size_t dim = params.input_dim;
    std::vector<double> mean(dim, 0.0), sq(dim, 0.0);
    std::size_t count = 0;
    for (const auto& cls : train_pool.per_class)
        for (const auto& seg : cls) {
            if (seg.dim() != dim) throw config_error("segment dim mismatch while fitting stats");
            for (std::size_t t = 0; t < seg.n_windows(); ++t) {
                const double* row = seg.features[t];
                for (std::size_t d = 0; d < dim; ++d) {
                    mean[d] += row[d];
                    sq[d] += row[d] * row[d];
                }
                ++count;
            }
        }
    if (count == 0) throw config_error("empty training pool");
    params.feat_mean.resize(dim);
    params.feat_scale.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        const double mu = mean[d] / static_cast<double>(count);
        const double var = std::max(sq[d] / static_cast<double>(count) - mu * mu, 0.0);
        params.feat_mean[d] = mu;
        params.feat_scale[d] = std::max(std::sqrt(var), 1e-8);
    }
}

// ---- checkpoint I/O ----

namespace {
constexpr std::uint32_t kCheckpointMagic = 0x47444953;  // "SIDG"
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw checkpoint_error("truncated checkpoint");
    return v;
}

void put_f32(std::ofstream& out, std::span<const double> values) {
    for (double v : values) put(out, static_cast<float>(v));
}

void get_f32(std::ifstream& in, std::span<double> values) {
    for (double& v : values) v = static_cast<double>(get<float>(in));
}
}  // namespace

void save_checkpoint(const ModelParams& params, const OptimizerState* state,
                     const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write checkpoint " + path.string());

    put(out, kCheckpointMagic);
    put(out, kCheckpointVersion);
    put(out, static_cast<std::uint32_t>(params.n_classes));
    put(out, static_cast<std::uint32_t>(params.input_dim));
    put(out, static_cast<std::uint32_t>(params.hyper.hidden));
    put(out, static_cast<std::uint8_t>(params.hyper.candidate));
    put(out, static_cast<std::uint8_t>(params.standardized() ? 1 : 0));
    put(out, static_cast<std::uint8_t>(state ? 1 : 0));
    put(out, std::uint8_t{0});
    put(out, params.hyper.keep_prob);
    put(out, params.hyper.l2_lambda);
    put(out, params.hyper.learning_rate);

    if (params.standardized()) {
        put_f32(out, params.feat_mean);
        put_f32(out, params.feat_scale);
    }
    visit_tensors(const_cast<ModelParams&>(params), [&out](auto span, bool) {
        put_f32(out, std::span<const double>(span.data(), span.size()));
    });
    if (state) {
        visit_tensors(const_cast<Gradients&>(state->acc), [&out](auto span, bool) {
            put_f32(out, std::span<const double>(span.data(), span.size()));
        });
        put(out, state->decay);
        put(out, state->epsilon);
        put(out, static_cast<std::int64_t>(state->step));
    }
    if (!out) throw io_error("write failed for " + path.string());

    // human-readable sidecar
    nlohmann::json side;
    side["n_classes"] = params.n_classes;
    side["input_dim"] = params.input_dim;
    side["hidden"] = params.hyper.hidden;
    side["candidate_activation"] = params.hyper.candidate == Activation::Sigmoid ? "sigmoid" : "tanh";
    side["keep_prob"] = params.hyper.keep_prob;
    side["l2_lambda"] = params.hyper.l2_lambda;
    side["learning_rate"] = params.hyper.learning_rate;
    side["feature_mean"] = params.feat_mean;
    side["feature_scale"] = params.feat_scale;
    std::ofstream js(path.string() + ".json");
    js << side.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open checkpoint " + path.string());
    if (get<std::uint32_t>(in) != kCheckpointMagic)
        throw checkpoint_error("not a checkpoint: " + path.string());
    const auto version = get<std::uint32_t>(in);
    if (version != kCheckpointVersion)
        throw checkpoint_error("unsupported checkpoint version " + std::to_string(version));

    Checkpoint ck;
    ck.params.n_classes = get<std::uint32_t>(in);
    ck.params.input_dim = get<std::uint32_t>(in);
    ck.params.hyper.hidden = get<std::uint32_t>(in);
    ck.params.hyper.candidate = static_cast<Activation>(get<std::uint8_t>(in));
    const bool has_stats = get<std::uint8_t>(in) != 0;
    const bool has_opt = get<std::uint8_t>(in) != 0;
    get<std::uint8_t>(in);
    ck.params.hyper.keep_prob = get<double>(in);
    ck.params.hyper.l2_lambda = get<double>(in);
    ck.params.hyper.learning_rate = get<double>(in);

    const std::size_t hidden = ck.params.hyper.hidden;
    ck.params.l1_fwd = make_cell(hidden, ck.params.input_dim);
    ck.params.l1_bwd = make_cell(hidden, ck.params.input_dim);
    ck.params.l2_fwd = make_cell(hidden, hidden);
    ck.params.l2_bwd = make_cell(hidden, hidden);
    ck.params.vote_w = Matrix(ck.params.n_classes, 2 * hidden);
    ck.params.vote_b.assign(ck.params.n_classes, 0.0);

    if (has_stats) {
        ck.params.feat_mean.resize(ck.params.input_dim);
        ck.params.feat_scale.resize(ck.params.input_dim);
        get_f32(in, ck.params.feat_mean);
        get_f32(in, ck.params.feat_scale);
    }
    visit_tensors(ck.params, [&in](auto span, bool) { get_f32(in, span); });
    if (has_opt) {
        ck.has_optimizer = true;
        ck.state.acc = make_gradients_like(ck.params);
        visit_tensors(ck.state.acc, [&in](auto span, bool) { get_f32(in, span); });
        ck.state.decay = get<double>(in);
        ck.state.epsilon = get<double>(in);
        ck.state.step = static_cast<long>(get<std::int64_t>(in));
    }
    return ck;
}

// ---- training ----

double final_vote_accuracy(const ModelParams& params, const SegmentPool& pool) {
    std::vector<const SegmentMatrix*> segments;
    std::vector<std::size_t> labels;
    for (std::size_t c = 0; c < pool.n_classes(); ++c)
        for (const auto& seg : pool.per_class[c]) {
            segments.push_back(&seg);
            labels.push_back(c);
        }
    if (segments.empty()) throw config_error("empty evaluation pool");

    std::vector<int> correct(segments.size(), 0);
    const auto n = static_cast<std::int64_t>(segments.size());
#pragma omp parallel for schedule(dynamic) num_threads(kernels::max_threads())
    for (std::int64_t i = 0; i < n; ++i) {
        Rng unused(0);
        const auto votes = encode_segment(params, *segments[static_cast<std::size_t>(i)], Mode::Eval, unused);
        std::vector<double> sum(params.n_classes, 0.0);
        for (const auto& vote : votes)
            for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += vote[k];
        std::size_t best = 0;
        for (std::size_t k = 1; k < sum.size(); ++k)
            if (sum[k] > sum[best]) best = k;
        correct[static_cast<std::size_t>(i)] = best == labels[static_cast<std::size_t>(i)] ? 1 : 0;
    }
    double acc = 0.0;
    for (int c : correct) acc += c;
    return acc / static_cast<double>(segments.size());
}

TrainedModel train_model(const SegmentPool& train_pool, const SegmentPool& eval_pool,
                         const TrainOptions& opts) {
    if (train_pool.classes.empty() || train_pool.per_class.empty())
        throw config_error("empty training pool");
    const std::size_t input_dim = train_pool.per_class.front().front().dim();

    Rng root(opts.seed);
    Rng init_rng = root.child(0x1);
    Rng batch_rng = root.child(0x2);
    Rng dropout_root = root.child(0x3);

    TrainedModel out;
    out.params = init_params(init_rng, train_pool.n_classes(), input_dim, opts.hyper);
    set_feature_stats(out.params, train_pool);

    OptimizerState state = make_optimizer_state(out.params);

    ModelParams best = out.params;
    double best_acc = -1.0;
    long best_step = 0;
    std::size_t stale_evals = 0;

    for (std::size_t step = 1; step <= opts.steps; ++step) {
        const Batch batch = assemble_batch(train_pool, batch_rng, opts.batch_size);
        const auto result = backward(batch, out.params, dropout_root.child(step), static_cast<long>(step));
        rmsprop_step(state, out.params, result.grads);
        out.metrics.loss_curve.emplace_back(static_cast<long>(step), result.loss);

        if (step % opts.eval_every == 0 || step == opts.steps) {
            const double acc = final_vote_accuracy(out.params, eval_pool);
            out.metrics.eval_curve.emplace_back(static_cast<long>(step), acc);
            if (acc > best_acc) {
                best_acc = acc;
                best = out.params;
                best_step = static_cast<long>(step);
                stale_evals = 0;
            } else {
                ++stale_evals;
            }
            if (opts.early_stop && stale_evals >= opts.patience) {
                out.metrics.steps_run = static_cast<long>(step);
                break;
            }
        }
        out.metrics.steps_run = static_cast<long>(step);
    }

    if (best_acc >= 0.0) {
        out.params = best;
        out.metrics.best_eval_acc = best_acc;
        out.metrics.best_step = best_step;
    }
    return out;
}

}  // namespace steerid
