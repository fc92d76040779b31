#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "rtge/dataset.hpp"
#include "rtge/error.hpp"

namespace rtge {

// A planted temporal pattern. Entities are split into communities laid out
// on a line; in bin t relation r sends community c to community
// c + offset(r) + step * t, so the gold tail of an (h, r) pair drifts one
// community per bin. Heads are only used where the target exists in at
// least two bins. step = 0 gives a static graph.
struct SyntheticSpec {
    int entities = 50;
    int relations = 5;
    int bins = 8;
    int step = 1;
    int community_size = 2;
    int tails_per_query = 1;
    int base_year = 2000;
    // Relations come in pairs sharing one mapping; the even member only holds
    // in even bins and the odd member in odd bins.
    bool confusable = false;
    std::uint64_t seed = 0;
};

struct SyntheticCorpus {
    Vocabulary entities;
    Vocabulary relations;
    std::vector<Fact> train, valid, test;
    std::vector<int> community;  // by entity id
};

inline int synthetic_communities(const SyntheticSpec& spec) { return std::max(2, spec.entities / spec.community_size); }

inline int synthetic_offset(const SyntheticSpec& spec, int relation) {
    return 1 + (spec.confusable ? relation / 2 : relation);
}

// Target community, or -1 when the shifted community falls off the line.
inline int synthetic_target(const SyntheticSpec& spec, int community, int relation, int bin) {
    const int t = community + synthetic_offset(spec, relation) + spec.step * bin;
    return t < synthetic_communities(spec) ? t : -1;
}

inline SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
    if (spec.entities < 10) throw ConfigError("synthetic graphs need at least 10 entities");
    if (spec.bins < 2) throw ConfigError("synthetic graphs need at least 2 bins");
    if (spec.relations < 1 || spec.community_size < 1 || spec.tails_per_query < 1) {
        throw ConfigError("synthetic relations, community size and tails per query must be >= 1");
    }
    SyntheticCorpus out;
    const int C = synthetic_communities(spec);
    std::mt19937_64 rng(spec.seed);

    // Random community assignment of equal sizes (up to remainder).
    std::vector<int> perm(static_cast<std::size_t>(spec.entities));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    out.community.assign(static_cast<std::size_t>(spec.entities), 0);
    std::vector<std::vector<int>> members(static_cast<std::size_t>(C));
    for (int i = 0; i < spec.entities; ++i) {
        const int c = i % C;
        out.community[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = c;
        members[static_cast<std::size_t>(c)].push_back(perm[static_cast<std::size_t>(i)]);
    }
    for (auto& m : members) std::sort(m.begin(), m.end());
    for (int e = 0; e < spec.entities; ++e) out.entities.intern("e" + std::to_string(e));
    for (int r = 0; r < spec.relations; ++r) out.relations.intern("r" + std::to_string(r));

    const auto holds = [&](int r, int t) { return !spec.confusable || r % 2 == t % 2; };
    std::vector<Fact> all;
    for (int t = 0; t < spec.bins; ++t) {
        const int year = spec.base_year + t;
        for (int r = 0; r < spec.relations; ++r) {
            if (!holds(r, t)) continue;
            for (int h = 0; h < spec.entities; ++h) {
                const int c = out.community[static_cast<std::size_t>(h)];
                const int target = synthetic_target(spec, c, r, t);
                if (target < 0) continue;
                int live_bins = 0;
                for (int b = 0; b < spec.bins; ++b) live_bins += holds(r, b) && synthetic_target(spec, c, r, b) >= 0;
                if (live_bins < 2) continue;
                auto pool = members[static_cast<std::size_t>(target)];
                std::shuffle(pool.begin(), pool.end(), rng);
                const auto k = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(spec.tails_per_query));
                for (std::size_t j = 0; j < k; ++j) all.push_back(Fact{h, r, pool[j], year, year});
            }
        }
    }
    std::shuffle(all.begin(), all.end(), rng);
    const std::size_t n_test = all.size() / 10;
    const std::size_t n_valid = all.size() / 10;
    const std::size_t n_train = all.size() - n_test - n_valid;
    out.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.valid.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train),
                     all.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
    out.test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), all.end());
    return out;
}

// Writes train.txt, valid.txt and test.txt into dir.
inline void write_synthetic(const SyntheticCorpus& c, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto put = [&](const char* name, const std::vector<Fact>& facts) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw Error("cannot write " + (dir / name).string());
        serialize_facts(out, facts, c.entities, c.relations);
    };
    put("train.txt", c.train);
    put("valid.txt", c.valid);
    put("test.txt", c.test);
}

}  // namespace rtge
