#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "rtge/dataset.hpp"
#include "rtge/error.hpp"
#include "rtge/model.hpp"

namespace rtge {

enum class Task { Head, Tail, Relation, Time };

inline std::string_view to_string(Task t) {
    switch (t) {
        case Task::Head: return "head";
        case Task::Tail: return "tail";
        case Task::Relation: return "relation";
        case Task::Time: return "time";
    }
    return "?";
}

inline Task parse_task(std::string_view s) {
    if (s == "head") return Task::Head;
    if (s == "tail") return Task::Tail;
    if (s == "relation") return Task::Relation;
    if (s == "time") return Task::Time;
    throw ConfigError("unknown task '" + std::string(s) + "'");
}

inline constexpr int kMaxHitsK = 10;

// Mid-rank of losses[gold]: 1 + #strictly smaller + half the other ties,
// rounded half up. `keep` masks out filtered candidates (gold is always kept).
inline std::int64_t mid_rank(std::span<const double> losses, std::size_t gold, std::span<const std::uint8_t> keep = {}) {
    const double g = losses[gold];
    std::int64_t smaller = 0, ties = 0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        if (i == gold || (!keep.empty() && !keep[i])) continue;
        if (losses[i] < g) ++smaller;
        else if (losses[i] == g) ++ties;
    }
    return 1 + smaller + (ties + 1) / 2;
}

struct RankReport {
    Task task = Task::Tail;
    std::vector<std::int64_t> ranks;
    double mean_rank = 0;
    std::array<double, kMaxHitsK + 1> hits{};  // hits[k] for k in 1..10
    bool filtered = false;

    static RankReport from_ranks(Task task, std::vector<std::int64_t> ranks, bool filtered) {
        RankReport r;
        r.task = task;
        r.filtered = filtered;
        r.ranks = std::move(ranks);
        if (r.ranks.empty()) return r;
        // integer sum keeps the mean independent of aggregation order
        const std::int64_t sum = std::accumulate(r.ranks.begin(), r.ranks.end(), std::int64_t{0});
        const double n = static_cast<double>(r.ranks.size());
        r.mean_rank = static_cast<double>(sum) / n;
        for (int k = 1; k <= kMaxHitsK; ++k) {
            const auto c = std::count_if(r.ranks.begin(), r.ranks.end(), [k](std::int64_t x) { return x <= k; });
            r.hits[static_cast<std::size_t>(k)] = static_cast<double>(c) / n;
        }
        return r;
    }
};

namespace detail {

inline void check_ids(const Triple& t, const ModelState& s) {
    if (t.head < 0 || static_cast<std::size_t>(t.head) >= s.entities.rows() || t.tail < 0 ||
        static_cast<std::size_t>(t.tail) >= s.entities.rows()) {
        throw VocabularyError("entity id outside the model vocabulary");
    }
    if (t.relation < 0 || static_cast<std::size_t>(t.relation) >= s.relations.rows()) {
        throw VocabularyError("relation id outside the model vocabulary");
    }
}

inline std::vector<std::int32_t> iota_ids(std::size_t n) {
    std::vector<std::int32_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
}

}  // namespace detail

// Rank of the gold answer for one test triple. Entity and relation tasks
// rank under `bin`; the time task ranks every bin and reports the best rank
// over the gold span [first_bin, last_bin]. With `filtered`, candidates that
// form an observed triple in `known` (other than the gold) are dropped.
inline std::int64_t rank_query(const Scorer& scorer, const TemporalGraph& known, const Triple& t, Task task,
                               bool filtered, std::size_t first_bin, std::size_t last_bin) {
    detail::check_ids(t, scorer.state());
    const ModelState& s = scorer.state();
    Query q;
    q.triple = t;
    q.bin = first_bin;
    std::size_t n = 0;
    std::size_t gold = 0;
    switch (task) {
        case Task::Head: q.missing = Slot::Head; n = s.entities.rows(); gold = static_cast<std::size_t>(t.head); break;
        case Task::Tail: q.missing = Slot::Tail; n = s.entities.rows(); gold = static_cast<std::size_t>(t.tail); break;
        case Task::Relation: q.missing = Slot::Relation; n = s.relations.rows(); gold = static_cast<std::size_t>(t.relation); break;
        case Task::Time: q.missing = Slot::Time; n = known.num_bins(); break;
    }
    if (task == Task::Time && (last_bin < first_bin || last_bin >= n)) {
        throw VocabularyError("time query needs a nonempty gold bin span inside the binning");
    }
    const auto ids = detail::iota_ids(n);
    const auto losses = scorer.score(q, ids);

    std::vector<std::uint8_t> keep_storage;
    const auto make_keep = [&](std::size_t gold_idx) {
        keep_storage.assign(n, 1);
        for (std::size_t i = 0; i < n; ++i) {
            if (i == gold_idx) continue;
            Triple c = t;
            std::size_t bin = first_bin;
            switch (task) {
                case Task::Head: c.head = static_cast<EntityId>(i); break;
                case Task::Tail: c.tail = static_cast<EntityId>(i); break;
                case Task::Relation: c.relation = static_cast<RelationId>(i); break;
                case Task::Time: bin = i; break;
            }
            if (task == Task::Time) {
                if (i >= first_bin && i <= last_bin) continue;  // other gold bins are ranked on their own
                if (known.contains(c, bin)) keep_storage[i] = 0;
            } else if (bin < known.num_bins() && known.contains(c, bin)) {
                keep_storage[i] = 0;
            }
        }
    };
    const auto rank_at = [&](std::size_t gold_idx) {
        if (!filtered) return mid_rank(losses, gold_idx);
        make_keep(gold_idx);
        return mid_rank(losses, gold_idx, keep_storage);
    };

    if (task != Task::Time) return rank_at(gold);
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (std::size_t b = first_bin; b <= last_bin; ++b) best = std::min(best, rank_at(b));
    return best;
}

struct EvalOptions {
    bool filtered = false;
    unsigned threads = 1;
};

// Entity and relation tasks issue one query per (fact, bin) in the fact's
// span; the time task issues one query per fact.
inline std::vector<RankReport> evaluate(const ModelState& state, const TemporalGraph& known,
                                        const std::vector<Fact>& test, std::span<const Task> tasks,
                                        const EvalOptions& opt = {}, Norm norm = Norm::L2) {
    if (test.empty()) throw ConfigError("evaluation needs a nonempty test set");
    if (state.num_bins() != 1 && state.num_bins() != known.num_bins()) {
        throw CheckpointDimensionError("model has " + std::to_string(state.num_bins()) + " bins, graph has " +
                                       std::to_string(known.num_bins()));
    }
    const Scorer scorer(state, norm);
    const TimeBinning& binning = known.binning();

    struct Item {
        Triple triple;
        std::size_t first, last;
    };
    std::vector<RankReport> out;
    for (Task task : tasks) {
        std::vector<Item> items;
        for (const auto& f : test) {
            auto [first, last] = binning.span_of(f);
            if (task == Task::Time) {
                items.push_back({f.triple(), first, last});
            } else {
                for (std::size_t b = first; b <= last; ++b) items.push_back({f.triple(), b, b});
            }
        }
        std::vector<std::int64_t> ranks(items.size());
        const unsigned threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(items.size())));
        const auto work = [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                ranks[i] = rank_query(scorer, known, items[i].triple, task, opt.filtered, items[i].first, items[i].last);
            }
        };
        if (threads == 1) {
            work(0, items.size());
        } else {
            std::vector<std::thread> pool;
            const std::size_t chunk = (items.size() + threads - 1) / threads;
            for (unsigned k = 0; k < threads; ++k) {
                const std::size_t b = std::min(items.size(), k * chunk), e = std::min(items.size(), b + chunk);
                pool.emplace_back(work, b, e);
            }
            for (auto& th : pool) th.join();
        }
        out.push_back(RankReport::from_ranks(task, std::move(ranks), opt.filtered));
    }
    return out;
}

inline void write_metrics_csv(std::ostream& out, std::span<const RankReport> reports) {
    out << "task,metric,value\n";
    for (const auto& r : reports) {
        out << to_string(r.task) << ",mean_rank," << r.mean_rank << '\n';
        for (int k = 1; k <= kMaxHitsK; ++k) out << to_string(r.task) << ",hits@" << k << ',' << r.hits[static_cast<std::size_t>(k)] << '\n';
    }
}

// "kind,id,v1..vd" rows for external plotting (e.g. PCA of the hyperplanes).
inline void write_embeddings_csv(std::ostream& out, const ModelState& s) {
    out << "kind,id";
    for (std::size_t i = 1; i <= s.d; ++i) out << ",v" << i;
    out << '\n';
    const auto block = [&](std::string_view kind, const Matrix& m) {
        for (std::size_t r = 0; r < m.rows(); ++r) {
            out << kind << ',' << r;
            for (double x : m.row(r)) out << ',' << x;
            out << '\n';
        }
    };
    block("entity", s.entities);
    block("relation", s.relations);
    block("hyperplane", s.hyperplanes);
}

}  // namespace rtge
