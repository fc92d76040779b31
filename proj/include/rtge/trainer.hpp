#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "rtge/dataset.hpp"
#include "rtge/error.hpp"
#include "rtge/model.hpp"
#include "rtge/sampler.hpp"

namespace rtge {

enum class Mode {
    RTGE,    // smoothness + relation negatives
    RTGE_s,  // smoothness only (beta = 0)
    RTGE_n,  // relation negatives only (alpha = 0)
    HyTE,    // alpha = 0, beta = 0
    TransE,  // one identity hyperplane, all bins merged
};

inline std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::RTGE: return "RTGE";
        case Mode::RTGE_s: return "RTGE-s";
        case Mode::RTGE_n: return "RTGE-n";
        case Mode::HyTE: return "HyTE";
        case Mode::TransE: return "TransE";
    }
    return "?";
}

inline Mode parse_mode(std::string_view s) {
    if (s == "RTGE" || s == "rtge") return Mode::RTGE;
    if (s == "RTGE-s" || s == "rtge-s") return Mode::RTGE_s;
    if (s == "RTGE-n" || s == "rtge-n") return Mode::RTGE_n;
    if (s == "HyTE" || s == "hyte" || s == "HyTE-baseline") return Mode::HyTE;
    if (s == "TransE" || s == "transe" || s == "TransE-baseline") return Mode::TransE;
    throw ConfigError("unknown mode '" + std::string(s) + "'");
}

// Hyperparameters with the mode's ablations applied.
inline HyperParams effective_params(HyperParams hp, Mode mode) {
    switch (mode) {
        case Mode::RTGE: break;
        case Mode::RTGE_s: hp.beta = 0; break;
        case Mode::RTGE_n: hp.alpha = 0; break;
        case Mode::HyTE:
        case Mode::TransE:
            hp.alpha = 0;
            hp.beta = 0;
            break;
    }
    return hp;
}

struct ObjectiveBreakdown {
    double task = 0;     // sum of hinge terms
    double smooth = 0;   // alpha * smoothness
    double penalty = 0;  // xi * unit-norm penalties

    double total() const { return task + smooth + penalty; }
};

struct ObjectiveOptions {
    // False for the static baseline, whose hyperplane is a frozen zero vector.
    bool train_hyperplanes = true;
    unsigned threads = 1;
    // Weight of the smoothness and norm-penalty gradients. A mini-batch of k
    // out of n pairs uses k / n so that one pass adds up to the full gradient.
    double regularizer_scale = 1.0;
};

inline double smoothness_loss(const Matrix& W) {
    double s = 0.0;
    for (std::size_t t = 0; t + 1 < W.rows(); ++t) {
        auto a = W.row(t + 1);
        auto b = W.row(t);
        double q = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) q += (a[i] - b[i]) * (a[i] - b[i]);
        s += std::sqrt(q);
    }
    return s;
}

// max(2 L(s+) + gamma - L(s-_e) - beta L(s-_r), 0) with the raw hyperplane.
inline double hinge_term(const ConstraintPair& p, const ModelState& s, const HyperParams& hp) {
    const auto w = s.hyperplanes.row(p.bin);
    const auto loss = [&](const Triple& t) {
        return triple_loss(s.entities.row(static_cast<std::size_t>(t.head)),
                           s.relations.row(static_cast<std::size_t>(t.relation)),
                           s.entities.row(static_cast<std::size_t>(t.tail)), w, hp.norm);
    };
    double v = 2.0 * loss(p.positive) + hp.gamma - loss(p.entity_negative);
    if (p.relation_negative && hp.beta != 0.0) v -= hp.beta * loss(*p.relation_negative);
    return std::max(v, 0.0);
}

struct Gradient {
    Matrix entities;
    Matrix relations;
    Matrix hyperplanes;

    explicit Gradient(const ModelState& s)
        : entities(s.entities.rows(), s.d), relations(s.relations.rows(), s.d), hyperplanes(s.hyperplanes.rows(), s.d) {}

    void add(const Gradient& o) {
        for (auto [dst, src] : {std::pair{&entities, &o.entities}, std::pair{&relations, &o.relations},
                                std::pair{&hyperplanes, &o.hyperplanes}}) {
            auto& a = dst->data();
            const auto& b = src->data();
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
        }
    }
};

enum class GradientPart { All, Hyperplanes, Embeddings };

namespace detail {

// Loss of one triple and, optionally, its gradients with respect to the
// residual v = h + l - z and the hyperplane normal w.
struct TripleGrad {
    std::vector<double> v, u, gv, gw;
    double loss = 0;

    explicit TripleGrad(std::size_t d) : v(d), u(d), gv(d), gw(d) {}

    void eval(const ModelState& s, const Triple& t, VecView w, Norm norm, bool want_grad) {
        const std::size_t d = s.d;
        auto h = s.entities.row(static_cast<std::size_t>(t.head));
        auto l = s.relations.row(static_cast<std::size_t>(t.relation));
        auto z = s.entities.row(static_cast<std::size_t>(t.tail));
        double c = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            v[i] = h[i] + l[i] - z[i];
            c += w[i] * v[i];
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            u[i] = v[i] - c * w[i];
            acc += norm == Norm::L2 ? u[i] * u[i] : std::abs(u[i]);
        }
        loss = norm == Norm::L2 ? std::sqrt(acc) : acc;
        if (!want_grad) return;
        // a = dL/du; zero at the non-differentiable points.
        std::vector<double>& a = gv;
        if (norm == Norm::L2) {
            if (loss == 0.0) {
                std::fill(gv.begin(), gv.end(), 0.0);
                std::fill(gw.begin(), gw.end(), 0.0);
                return;
            }
            for (std::size_t i = 0; i < d; ++i) a[i] = u[i] / loss;
        } else {
            for (std::size_t i = 0; i < d; ++i) a[i] = u[i] > 0 ? 1.0 : (u[i] < 0 ? -1.0 : 0.0);
        }
        // u = (I - w w^T) v  =>  dL/dv = a - (w.a) w,  dL/dw = -((a.w) v + (w.v) a)
        double aw = 0.0;
        for (std::size_t i = 0; i < d; ++i) aw += a[i] * w[i];
        for (std::size_t i = 0; i < d; ++i) {
            gw[i] = -(aw * v[i] + c * a[i]);
            gv[i] = a[i] - aw * w[i];
        }
    }
};

inline void scatter(const TripleGrad& g, const Triple& t, std::size_t bin, double coef, Gradient& out, GradientPart part) {
    if (part != GradientPart::Hyperplanes) {
        auto gh = out.entities.row(static_cast<std::size_t>(t.head));
        auto gl = out.relations.row(static_cast<std::size_t>(t.relation));
        auto gz = out.entities.row(static_cast<std::size_t>(t.tail));
        for (std::size_t i = 0; i < g.gv.size(); ++i) {
            const double x = coef * g.gv[i];
            gh[i] += x;
            gl[i] += x;
            gz[i] -= x;
        }
    }
    if (part != GradientPart::Embeddings) {
        auto gw = out.hyperplanes.row(bin);
        for (std::size_t i = 0; i < g.gw.size(); ++i) gw[i] += coef * g.gw[i];
    }
}

// Sum of hinge terms over [begin, end) and, if grad != nullptr, their
// subgradients. The hinge is active when strictly positive.
inline double accumulate_hinges(const ModelState& s, std::span<const ConstraintPair> pairs, const HyperParams& hp,
                                Gradient* grad, GradientPart part) {
    TripleGrad pos(s.d), ent(s.d), rel(s.d);
    const bool want = grad != nullptr;
    double total = 0.0;
    for (const auto& p : pairs) {
        const auto w = s.hyperplanes.row(p.bin);
        pos.eval(s, p.positive, w, hp.norm, want);
        ent.eval(s, p.entity_negative, w, hp.norm, want);
        const bool use_rel = p.relation_negative && hp.beta != 0.0;
        double v = 2.0 * pos.loss + hp.gamma - ent.loss;
        if (use_rel) {
            rel.eval(s, *p.relation_negative, w, hp.norm, want);
            v -= hp.beta * rel.loss;
        }
        if (v <= 0.0) continue;
        total += v;
        if (!want) continue;
        scatter(pos, p.positive, p.bin, 2.0, *grad, part);
        scatter(ent, p.entity_negative, p.bin, -1.0, *grad, part);
        if (use_rel) scatter(rel, *p.relation_negative, p.bin, -hp.beta, *grad, part);
    }
    return total;
}

inline double row_penalty(const Matrix& m, double xi, double grad_scale, Matrix* grad) {
    double total = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto x = m.row(r);
        const double n = l2(x);
        total += (n - 1.0) * (n - 1.0);
        if (grad && n > 0.0) {
            auto g = grad->row(r);
            const double k = grad_scale * 2.0 * xi * (n - 1.0) / n;
            for (std::size_t i = 0; i < x.size(); ++i) g[i] += k * x[i];
        }
    }
    return xi * total;
}

// Splits pairs into contiguous per-thread ranges; partial results are
// reduced in range order so a fixed thread count is reproducible.
template <typename Fn>
void for_each_range(std::size_t n, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        fn(0u, std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned k = 0; k < threads; ++k) {
        const std::size_t b = std::min(n, k * chunk), e = std::min(n, b + chunk);
        pool.emplace_back([&fn, k, b, e] { fn(k, b, e); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

// Objective value and, when grad != nullptr, its analytic (sub)gradient for
// the requested part. Coordinates outside the part are left at zero.
inline ObjectiveBreakdown evaluate_objective(const ModelState& s, std::span<const ConstraintPair> pairs,
                                             const HyperParams& hp, const ObjectiveOptions& opt, Gradient* grad,
                                             GradientPart part = GradientPart::All) {
    ObjectiveBreakdown out;
    const unsigned threads = std::max(1u, opt.threads);
    if (threads == 1) {
        out.task = detail::accumulate_hinges(s, pairs, hp, grad, part);
    } else {
        std::vector<double> partial(threads, 0.0);
        std::vector<Gradient> partial_grad;
        if (grad) partial_grad.assign(threads, Gradient(s));
        detail::for_each_range(pairs.size(), threads, [&](unsigned k, std::size_t b, std::size_t e) {
            partial[k] = detail::accumulate_hinges(s, pairs.subspan(b, e - b), hp, grad ? &partial_grad[k] : nullptr, part);
        });
        for (unsigned k = 0; k < threads; ++k) {
            out.task += partial[k];
            if (grad) grad->add(partial_grad[k]);
        }
    }

    const Matrix& W = s.hyperplanes;
    out.smooth = hp.alpha * smoothness_loss(W);
    const bool want_w = grad && part != GradientPart::Embeddings && opt.train_hyperplanes;
    const bool want_e = grad && part != GradientPart::Hyperplanes;
    const double rs = opt.regularizer_scale;
    if (want_w && hp.alpha != 0.0) {
        for (std::size_t t = 0; t < W.rows(); ++t) {
            auto gw = grad->hyperplanes.row(t);
            for (std::size_t nb : {t + 1, t - 1}) {
                if (nb >= W.rows()) continue;  // t - 1 wraps for t == 0
                auto a = W.row(t);
                auto b = W.row(nb);
                double n = 0.0;
                for (std::size_t i = 0; i < a.size(); ++i) n += (a[i] - b[i]) * (a[i] - b[i]);
                n = std::sqrt(n);
                if (n == 0.0) continue;
                for (std::size_t i = 0; i < a.size(); ++i) gw[i] += rs * hp.alpha * (a[i] - b[i]) / n;
            }
        }
    }
    if (grad && !opt.train_hyperplanes) std::fill(grad->hyperplanes.data().begin(), grad->hyperplanes.data().end(), 0.0);
    const double xi = hp.xi;
    out.penalty = detail::row_penalty(s.entities, xi, rs, want_e ? &grad->entities : nullptr) +
                  detail::row_penalty(s.relations, xi, rs, want_e ? &grad->relations : nullptr);
    if (opt.train_hyperplanes) out.penalty += detail::row_penalty(W, xi, rs, want_w ? &grad->hyperplanes : nullptr);
    return out;
}

inline ObjectiveBreakdown objective(const ModelState& s, std::span<const ConstraintPair> pairs, const HyperParams& hp,
                                    const ObjectiveOptions& opt = {}) {
    return evaluate_objective(s, pairs, hp, opt, nullptr);
}

inline Gradient gradients(const ModelState& s, std::span<const ConstraintPair> pairs, const HyperParams& hp,
                          const ObjectiveOptions& opt = {}, GradientPart part = GradientPart::All) {
    Gradient g(s);
    evaluate_objective(s, pairs, hp, opt, &g, part);
    return g;
}

struct TrainOptions {
    Mode mode = Mode::RTGE;
    std::uint64_t seed = 1;
    NegFilter filter = NegFilter::Bin;
    std::size_t batch_size = 0;  // 0 = full batch
    unsigned threads = 1;
    bool resample_each_epoch = false;
    // Called with (iteration, objective, state) for the initial state as
    // iteration 0 and after every iteration.
    std::function<void(std::size_t, const ObjectiveBreakdown&, const ModelState&)> on_iteration;
};

struct TrainReport {
    std::vector<ObjectiveBreakdown> history;  // history[0] is the initial objective
    std::size_t iterations = 0;
    bool converged = false;
    std::size_t relaxations = 0;
    std::size_t constraints = 0;
};

struct FitResult {
    ModelState state;
    TrainReport report;
};

// Alternating gradient descent: one step on every hyperplane with embeddings
// fixed, then one step on every embedding row with W fixed. With batch_size
// set, each iteration makes that pair of steps once per mini-batch.
// Negatives are sampled once before the loop unless resample_each_epoch.
inline FitResult fit(const TemporalGraph& input, const HyperParams& base, const TrainOptions& opt) {
    base.validate();
    const HyperParams hp = effective_params(base, opt.mode);
    const bool static_model = opt.mode == Mode::TransE;
    const TemporalGraph collapsed = static_model ? collapse_bins(input) : TemporalGraph();
    const TemporalGraph& graph = static_model ? collapsed : input;

    FitResult res;
    res.state = init_model(static_cast<std::size_t>(graph.num_entities()), static_cast<std::size_t>(graph.num_relations()),
                           graph.num_bins(), hp, opt.seed);
    ModelState& s = res.state;
    if (static_model) std::fill(s.hyperplanes.data().begin(), s.hyperplanes.data().end(), 0.0);

    SamplingOptions so;
    so.m = hp.m;
    so.filter = opt.filter;
    so.relation_negatives = hp.beta > 0.0;
    ConstraintSet cs = build_constraints(graph, opt.seed, so);
    res.report.relaxations = cs.relaxations;
    res.report.constraints = cs.pairs.size();

    ObjectiveOptions oo;
    oo.train_hyperplanes = !static_model;
    oo.threads = opt.threads;

    const auto step = [&](Matrix& m, const Matrix& g) {
        auto& x = m.data();
        const auto& gx = g.data();
        for (std::size_t i = 0; i < x.size(); ++i) x[i] -= hp.psi * gx[i];
    };
    const auto step_embeddings = [&](const Gradient& g) {
        step(s.entities, g.entities);
        step(s.relations, g.relations);
    };

    // Full batch: the objective after one iteration and the first gradient
    // of the next are taken at the same state, so they share one pass.
    const GradientPart first_part = static_model ? GradientPart::Embeddings : GradientPart::Hyperplanes;
    const bool full_batch = opt.batch_size == 0 || opt.batch_size >= cs.pairs.size();
    Gradient pending(s);
    bool have_pending = full_batch && hp.kappa > 0 && !opt.resample_each_epoch;
    auto j = have_pending ? evaluate_objective(s, cs.pairs, hp, oo, &pending, first_part)
                          : objective(s, cs.pairs, hp, oo);
    if (!std::isfinite(j.total())) throw DivergenceError(0);
    res.report.history.push_back(j);
    if (opt.on_iteration) opt.on_iteration(0, j, s);

    std::mt19937_64 batch_rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order;
    std::vector<ConstraintPair> batch;

    for (std::size_t it = 1; it <= hp.kappa; ++it) {
        if (opt.resample_each_epoch && it > 1) {
            cs = build_constraints(graph, opt.seed + it - 1, so);
            res.report.relaxations += cs.relaxations;
        }
        if (full_batch) {
            if (!have_pending) pending = gradients(s, cs.pairs, hp, oo, first_part);
            if (!static_model) {
                step(s.hyperplanes, pending.hyperplanes);
                step_embeddings(gradients(s, cs.pairs, hp, oo, GradientPart::Embeddings));
            } else {
                step_embeddings(pending);
            }
        } else {
            // One iteration is one shuffled pass over the constraints.
            order.resize(cs.pairs.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::shuffle(order.begin(), order.end(), batch_rng);
            ObjectiveOptions bo = oo;
            for (std::size_t b = 0; b < order.size(); b += opt.batch_size) {
                const std::size_t e = std::min(order.size(), b + opt.batch_size);
                batch.clear();
                for (std::size_t k = b; k < e; ++k) batch.push_back(cs.pairs[order[k]]);
                bo.regularizer_scale = static_cast<double>(e - b) / static_cast<double>(order.size());
                if (!static_model) step(s.hyperplanes, gradients(s, batch, hp, bo, GradientPart::Hyperplanes).hyperplanes);
                step_embeddings(gradients(s, batch, hp, bo, GradientPart::Embeddings));
            }
        }

        have_pending = full_batch && it < hp.kappa && !opt.resample_each_epoch;
        if (have_pending) {
            pending = Gradient(s);
            j = evaluate_objective(s, cs.pairs, hp, oo, &pending, first_part);
        } else {
            j = objective(s, cs.pairs, hp, oo);
        }
        if (!std::isfinite(j.total())) throw DivergenceError(it);
        const double prev = res.report.history.back().total();
        res.report.history.push_back(j);
        res.report.iterations = it;
        if (opt.on_iteration) opt.on_iteration(it, j, s);
        if (std::abs(j.total() - prev) < hp.epsilon) {
            res.report.converged = true;
            break;
        }
    }
    return res;
}

}  // namespace rtge
