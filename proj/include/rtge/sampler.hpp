#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "rtge/dataset.hpp"
#include "rtge/error.hpp"

namespace rtge {

// Which triples count as "observed" when rejecting a corruption.
enum class NegFilter {
    Bin,     // present in the positive's own bin
    Global,  // present in any bin
};

enum class CorruptSlot { Head, Tail };

struct ConstraintPair {
    std::size_t bin = 0;
    Triple positive;
    Triple entity_negative;
    std::optional<Triple> relation_negative;  // empty when relation negatives are off

    friend bool operator==(const ConstraintPair&, const ConstraintPair&) = default;
};

// Derives an independent generator for (seed, bin, stream).
inline std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t bin, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(bin), static_cast<std::uint32_t>(bin >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

// Uniform corruption with rejection of observed triples. After max_retries
// rejected draws it falls back to any replacement that differs from the
// original id, and counts that as a relaxation event.
class NegativeSampler {
public:
    explicit NegativeSampler(const TemporalGraph& graph, NegFilter filter = NegFilter::Bin, int max_retries = 100)
        : graph_(&graph), filter_(filter), max_retries_(max_retries) {}

    Triple entity_negative(const Triple& positive, std::size_t bin, std::mt19937_64& rng) {
        std::bernoulli_distribution coin(0.5);
        return entity_negative(positive, bin, coin(rng) ? CorruptSlot::Head : CorruptSlot::Tail, rng);
    }

    Triple entity_negative(const Triple& positive, std::size_t bin, CorruptSlot slot, std::mt19937_64& rng) {
        if (graph_->num_entities() < 2) throw SamplerUnavailable("entity negatives need at least 2 entities");
        std::uniform_int_distribution<EntityId> pick(0, graph_->num_entities() - 1);
        const EntityId original = slot == CorruptSlot::Head ? positive.head : positive.tail;
        const auto with = [&](EntityId e) {
            Triple t = positive;
            (slot == CorruptSlot::Head ? t.head : t.tail) = e;
            return t;
        };
        for (int attempt = 0; attempt < max_retries_; ++attempt) {
            const EntityId e = pick(rng);
            if (e == original) continue;
            const Triple t = with(e);
            if (!observed(t, bin)) return t;
        }
        ++relaxations_;
        return with(draw_other(original, graph_->num_entities(), rng));
    }

    Triple relation_negative(const Triple& positive, std::size_t bin, std::mt19937_64& rng) {
        if (graph_->num_relations() < 2) {
            throw SamplerUnavailable("relation negatives need at least 2 relations; run with beta=0");
        }
        std::uniform_int_distribution<RelationId> pick(0, graph_->num_relations() - 1);
        for (int attempt = 0; attempt < max_retries_; ++attempt) {
            const RelationId r = pick(rng);
            if (r == positive.relation) continue;
            const Triple t{positive.head, r, positive.tail};
            if (!observed(t, bin)) return t;
        }
        ++relaxations_;
        return {positive.head, draw_other(positive.relation, graph_->num_relations(), rng), positive.tail};
    }

    std::size_t relaxations() const { return relaxations_; }
    NegFilter filter() const { return filter_; }

    bool observed(const Triple& t, std::size_t bin) const {
        return filter_ == NegFilter::Bin ? graph_->contains(t, bin) : graph_->contains_any(t);
    }

private:
    static std::int32_t draw_other(std::int32_t original, std::int32_t n, std::mt19937_64& rng) {
        std::uniform_int_distribution<std::int32_t> pick(0, n - 2);
        const std::int32_t v = pick(rng);
        return v >= original ? v + 1 : v;
    }

    const TemporalGraph* graph_;
    NegFilter filter_;
    int max_retries_;
    std::size_t relaxations_ = 0;
};

struct ConstraintSet {
    std::vector<ConstraintPair> pairs;  // grouped by bin, bins ascending
    std::size_t relaxations = 0;
};

struct SamplingOptions {
    std::size_t m = 5;
    NegFilter filter = NegFilter::Bin;
    bool relation_negatives = true;
    int max_retries = 100;
};

// For every positive: m head-corrupted and m tail-corrupted entity negatives,
// each paired with one of m relation negatives (cycled), giving 2m pairs.
// Entity and relation negatives come from separate per-bin streams so that
// switching relation negatives off leaves the entity negatives unchanged.
inline ConstraintSet build_constraints(const TemporalGraph& graph, std::uint64_t seed, const SamplingOptions& opt) {
    if (opt.m < 1) throw ConfigError("negatives per group must be >= 1");
    if (opt.relation_negatives && graph.num_relations() < 2) {
        throw SamplerUnavailable("relation negatives need at least 2 relations; run with beta=0");
    }
    ConstraintSet out;
    NegativeSampler sampler(graph, opt.filter, opt.max_retries);
    std::vector<Triple> heads(opt.m), tails(opt.m), rels(opt.m);
    for (std::size_t t = 0; t < graph.num_bins(); ++t) {
        auto entity_rng = derived_rng(seed, t, 0);
        auto relation_rng = derived_rng(seed, t, 1);
        for (const auto& pos : graph.bin(t)) {
            for (std::size_t j = 0; j < opt.m; ++j) heads[j] = sampler.entity_negative(pos, t, CorruptSlot::Head, entity_rng);
            for (std::size_t j = 0; j < opt.m; ++j) tails[j] = sampler.entity_negative(pos, t, CorruptSlot::Tail, entity_rng);
            if (opt.relation_negatives) {
                for (std::size_t j = 0; j < opt.m; ++j) rels[j] = sampler.relation_negative(pos, t, relation_rng);
            }
            for (std::size_t k = 0; k < 2 * opt.m; ++k) {
                ConstraintPair p;
                p.bin = t;
                p.positive = pos;
                p.entity_negative = k < opt.m ? heads[k] : tails[k - opt.m];
                if (opt.relation_negatives) p.relation_negative = rels[k % opt.m];
                out.pairs.push_back(p);
            }
        }
    }
    out.relaxations = sampler.relaxations();
    return out;
}

}  // namespace rtge
