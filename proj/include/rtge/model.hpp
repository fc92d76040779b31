#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtge/dataset.hpp"
#include "rtge/error.hpp"

namespace rtge {

using Vec = std::vector<double>;
using VecView = std::span<const double>;

// Row-major dense matrix; rows are the embedding vectors.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

enum class Norm { L2, L1 };

struct HyperParams {
    double gamma = 10.0;    // margin
    double alpha = 0.1;     // temporal smoothness weight
    double beta = 0.01;     // relation-negative weight
    double xi = 1.0;        // unit-norm penalty weight
    double psi = 1e-4;      // learning rate
    std::size_t kappa = 1000;
    double epsilon = 1e-4;  // convergence threshold on |dJ|
    std::size_t m = 5;      // negatives per group
    std::size_t d = 128;
    Norm norm = Norm::L2;

    void validate() const {
        if (!(gamma > 0)) throw ConfigError("gamma must be > 0");
        if (!(psi > 0)) throw ConfigError("psi must be > 0");
        if (m < 1) throw ConfigError("m must be >= 1");
        if (d < 1) throw ConfigError("d must be >= 1");
        if (!(alpha >= 0)) throw ConfigError("alpha must be >= 0");
        if (!(beta >= 0)) throw ConfigError("beta must be >= 0");
        if (!(xi >= 0)) throw ConfigError("xi must be >= 0");
    }
};

namespace detail {

inline double dot(VecView a, VecView b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l2(VecView a) { return std::sqrt(dot(a, a)); }

inline void require_same_size(std::size_t a, std::size_t b) {
    if (a != b) throw std::invalid_argument("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace detail

// x - (w.x) w, with w used exactly as given.
inline Vec project(VecView x, VecView w) {
    detail::require_same_size(x.size(), w.size());
    const double c = detail::dot(w, x);
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - c * w[i];
    return out;
}

inline double norm_of(VecView v, Norm norm) {
    if (norm == Norm::L2) return detail::l2(v);
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

// || Q(h) + Q(l) - Q(z) ||, computed through the residual h + l - z since the
// projection is linear.
inline double triple_loss(VecView h, VecView l, VecView z, VecView w, Norm norm = Norm::L2) {
    detail::require_same_size(h.size(), w.size());
    detail::require_same_size(l.size(), w.size());
    detail::require_same_size(z.size(), w.size());
    const std::size_t d = w.size();
    double c = 0.0;
    for (std::size_t i = 0; i < d; ++i) c += w[i] * (h[i] + l[i] - z[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double u = h[i] + l[i] - z[i] - c * w[i];
        s += norm == Norm::L2 ? u * u : std::abs(u);
    }
    return norm == Norm::L2 ? std::sqrt(s) : s;
}

struct ModelState {
    std::size_t d = 0;
    Matrix entities;     // shared by head and tail roles
    Matrix relations;
    Matrix hyperplanes;  // one normal per time bin

    std::size_t num_bins() const { return hyperplanes.rows(); }

    // Unit normals for scoring; a zero normal (identity projection) stays zero.
    Matrix normalized_hyperplanes() const {
        Matrix out = hyperplanes;
        for (std::size_t t = 0; t < out.rows(); ++t) {
            auto w = out.row(t);
            const double n = detail::l2(w);
            if (n > 0) {
                for (double& x : w) x /= n;
            }
        }
        return out;
    }

    friend bool operator==(const ModelState&, const ModelState&) = default;
};

// Uniform(-6/sqrt(d), 6/sqrt(d)) entries, each row rescaled to unit L2 norm.
inline ModelState init_model(std::size_t num_entities, std::size_t num_relations, std::size_t num_bins,
                             const HyperParams& hp, std::uint64_t seed) {
    if (num_entities < 1 || num_relations < 1 || num_bins < 1) throw ConfigError("model counts must be >= 1");
    hp.validate();
    ModelState s;
    s.d = hp.d;
    s.entities = Matrix(num_entities, hp.d);
    s.relations = Matrix(num_relations, hp.d);
    s.hyperplanes = Matrix(num_bins, hp.d);
    std::mt19937_64 rng(seed);
    const double bound = 6.0 / std::sqrt(static_cast<double>(hp.d));
    std::uniform_real_distribution<double> unif(-bound, bound);
    for (Matrix* m : {&s.entities, &s.relations, &s.hyperplanes}) {
        for (std::size_t r = 0; r < m->rows(); ++r) {
            auto row = m->row(r);
            for (double& x : row) x = unif(rng);
            const double n = detail::l2(row);
            if (n > 0) {
                for (double& x : row) x /= n;
            }
        }
    }
    return s;
}

enum class Slot { Head, Relation, Tail, Time };

// A triple with one slot missing. For Slot::Time the bin is ignored and the
// candidates are bin indices.
struct Query {
    Slot missing = Slot::Tail;
    Triple triple;
    std::size_t bin = 0;
};

// Scores candidates against a read-only model snapshot using unit-normalized
// hyperplanes. A model with one bin answers queries for any bin (static
// baseline).
class Scorer {
public:
    explicit Scorer(const ModelState& state, Norm norm = Norm::L2)
        : state_(&state), normals_(state.normalized_hyperplanes()), norm_(norm) {}

    std::size_t num_bins() const { return normals_.rows(); }
    const ModelState& state() const { return *state_; }

    VecView normal(std::size_t bin) const {
        if (normals_.rows() == 1) return normals_.row(0);
        if (bin >= normals_.rows()) {
            throw std::out_of_range("bin " + std::to_string(bin) + " outside [0, " + std::to_string(normals_.rows()) + ")");
        }
        return normals_.row(bin);
    }

    double loss(const Triple& t, std::size_t bin) const {
        return triple_loss(state_->entities.row(static_cast<std::size_t>(t.head)),
                           state_->relations.row(static_cast<std::size_t>(t.relation)),
                           state_->entities.row(static_cast<std::size_t>(t.tail)), normal(bin), norm_);
    }

    std::vector<double> score(const Query& q, std::span<const std::int32_t> candidates) const {
        std::vector<double> out;
        out.reserve(candidates.size());
        Triple t = q.triple;
        for (auto c : candidates) {
            switch (q.missing) {
                case Slot::Head: t.head = c; break;
                case Slot::Tail: t.tail = c; break;
                case Slot::Relation: t.relation = c; break;
                case Slot::Time: break;
            }
            const std::size_t bin = q.missing == Slot::Time ? static_cast<std::size_t>(c) : q.bin;
            out.push_back(loss(t, bin));
        }
        return out;
    }

private:
    const ModelState* state_;
    Matrix normals_;
    Norm norm_;
};

inline std::vector<double> score_candidates(const ModelState& state, const Query& q,
                                            std::span<const std::int32_t> candidates, Norm norm = Norm::L2) {
    return Scorer(state, norm).score(q, candidates);
}

// ---------------------------------------------------------------------------
// Checkpoints: a line-oriented text format with 17 significant digits so
// binary64 values survive a round trip.

inline constexpr const char* kCheckpointMagic = "RTGE-CKPT";
inline constexpr const char* kCheckpointVersion = "v1";

namespace detail {

inline void write_row(std::ostream& out, char kind, std::size_t id, VecView row) {
    out << kind << ' ' << id;
    char buf[64];
    for (double x : row) {
        auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
        out << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
}

inline std::size_t parse_meta_field(const std::string& tok, const std::string& key) {
    if (tok.rfind(key + "=", 0) != 0) throw CheckpointError("malformed meta field '" + tok + "', expected " + key);
    std::size_t v = 0;
    const char* first = tok.data() + key.size() + 1;
    const char* last = tok.data() + tok.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) throw CheckpointError("malformed meta value '" + tok + "'");
    return v;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const ModelState& s) {
    out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
    out << "meta d=" << s.d << " T=" << s.num_bins() << " ne=" << s.entities.rows() << " nr=" << s.relations.rows()
        << '\n';
    for (std::size_t i = 0; i < s.entities.rows(); ++i) detail::write_row(out, 'E', i, s.entities.row(i));
    for (std::size_t i = 0; i < s.relations.rows(); ++i) detail::write_row(out, 'R', i, s.relations.row(i));
    for (std::size_t i = 0; i < s.hyperplanes.rows(); ++i) detail::write_row(out, 'W', i, s.hyperplanes.row(i));
}

inline ModelState read_checkpoint(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw CheckpointTruncatedError("checkpoint is empty");
    {
        std::istringstream hs(line);
        std::string magic, version, extra;
        hs >> magic >> version;
        if (magic != kCheckpointMagic) throw CheckpointError("not a checkpoint: bad magic '" + magic + "'");
        if (version != kCheckpointVersion || (hs >> extra)) {
            throw CheckpointVersionError("unsupported checkpoint version '" + version + "'");
        }
    }
    if (!std::getline(in, line)) throw CheckpointTruncatedError("checkpoint is missing its meta line");
    ModelState s;
    std::size_t T = 0, ne = 0, nr = 0;
    {
        std::istringstream ms(line);
        std::string tag, fd, ft, fe, fr;
        if (!(ms >> tag >> fd >> ft >> fe >> fr) || tag != "meta") throw CheckpointError("malformed meta line");
        s.d = detail::parse_meta_field(fd, "d");
        T = detail::parse_meta_field(ft, "T");
        ne = detail::parse_meta_field(fe, "ne");
        nr = detail::parse_meta_field(fr, "nr");
    }
    if (s.d == 0) throw CheckpointDimensionError("checkpoint declares d=0");
    s.entities = Matrix(ne, s.d);
    s.relations = Matrix(nr, s.d);
    s.hyperplanes = Matrix(T, s.d);

    const auto read_block = [&](char kind, Matrix& m) {
        for (std::size_t i = 0; i < m.rows(); ++i) {
            if (!std::getline(in, line)) {
                throw CheckpointTruncatedError(std::string("checkpoint ends before row ") + kind + " " + std::to_string(i));
            }
            std::istringstream rs(line);
            std::string k;
            std::size_t id = 0;
            if (!(rs >> k >> id) || k.size() != 1 || k[0] != kind || id != i) {
                throw CheckpointError(std::string("expected row ") + kind + " " + std::to_string(i) + ", got '" +
                                      line.substr(0, 32) + "'");
            }
            auto row = m.row(i);
            std::size_t n = 0;
            std::string tok;
            while (rs >> tok) {
                if (n == s.d) throw CheckpointDimensionError("row " + std::string(1, kind) + " " + std::to_string(i) +
                                                             " has more than d=" + std::to_string(s.d) + " values");
                double v = 0;
                auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
                if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || !std::isfinite(v)) {
                    throw CheckpointError("bad number '" + tok + "'");
                }
                row[n++] = v;
            }
            if (n != s.d) {
                throw CheckpointDimensionError("row " + std::string(1, kind) + " " + std::to_string(i) + " has " +
                                               std::to_string(n) + " values, expected d=" + std::to_string(s.d));
            }
        }
    };
    read_block('E', s.entities);
    read_block('R', s.relations);
    read_block('W', s.hyperplanes);
    return s;
}

inline void save_checkpoint(const ModelState& s, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + path.string());
    write_checkpoint(out, s);
    if (!out) throw Error("failed writing checkpoint " + path.string());
}

inline ModelState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

}  // namespace rtge
