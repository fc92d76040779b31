#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rtge/error.hpp"

namespace rtge {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

// A year bound; std::nullopt is an open bound ("-" in dataset files).
using Year = std::optional<int>;

struct Triple {
    EntityId head = 0;
    RelationId relation = 0;
    EntityId tail = 0;

    friend bool operator==(const Triple&, const Triple&) = default;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct Fact {
    EntityId head = 0;
    RelationId relation = 0;
    EntityId tail = 0;
    Year start;
    Year end;

    Triple triple() const { return {head, relation, tail}; }

    friend bool operator==(const Fact&, const Fact&) = default;
};

class DatasetNotFound : public InputError {
public:
    explicit DatasetNotFound(const std::string& path) : InputError("dataset not found: " + path) {}
};

// Dense label <-> id table; ids are handed out in first-appearance order.
class Vocabulary {
public:
    std::int32_t intern(std::string_view label) {
        auto it = index_.find(std::string(label));
        if (it != index_.end()) return it->second;
        auto id = static_cast<std::int32_t>(labels_.size());
        labels_.emplace_back(label);
        index_.emplace(labels_.back(), id);
        return id;
    }

    std::optional<std::int32_t> find(std::string_view label) const {
        auto it = index_.find(std::string(label));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& label(std::int32_t id) const { return labels_.at(static_cast<std::size_t>(id)); }
    std::int32_t size() const { return static_cast<std::int32_t>(labels_.size()); }
    const std::vector<std::string>& labels() const { return labels_; }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.labels_ == b.labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::int32_t> index_;
};

struct Corpus {
    std::vector<Fact> facts;
    Vocabulary entities;
    Vocabulary relations;
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        auto next = line.find('\t', pos);
        if (next == std::string_view::npos) {
            out.push_back(line.substr(pos));
            return out;
        }
        out.push_back(line.substr(pos, next - pos));
        pos = next + 1;
    }
}

inline Year parse_year(std::string_view tok, std::size_t line_no) {
    if (tok == "-") return std::nullopt;
    if (tok.empty() || tok.size() > 4 ||
        !std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        throw ParseError(line_no, "expected a 1-4 digit year or '-', got '" + std::string(tok) + "'");
    }
    int year = 0;
    for (char c : tok) year = year * 10 + (c - '0');
    return year;
}

inline std::string format_year(const Year& y) { return y ? std::to_string(*y) : std::string("-"); }

}  // namespace detail

// Reads "head \t relation \t tail \t start \t end" lines. Blank lines and
// lines starting with '#' are skipped. Labels are interned into the given
// vocabularies, so several files can share one id space.
inline std::vector<Fact> parse_facts(std::istream& in, Vocabulary& entities, Vocabulary& relations) {
    std::vector<Fact> facts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        auto fields = detail::split_tabs(line);
        if (fields.size() != 5) {
            throw ParseError(line_no, "expected 5 tab-separated fields, got " + std::to_string(fields.size()));
        }
        for (std::size_t i = 0; i < 3; ++i) {
            if (fields[i].empty()) throw ParseError(line_no, "empty label in field " + std::to_string(i + 1));
        }
        Fact f;
        f.start = detail::parse_year(fields[3], line_no);
        f.end = detail::parse_year(fields[4], line_no);
        if (f.start && f.end && *f.start > *f.end) {
            throw ValidationError(line_no, "start year " + std::to_string(*f.start) + " is after end year " +
                                               std::to_string(*f.end));
        }
        f.head = entities.intern(fields[0]);
        f.relation = relations.intern(fields[1]);
        f.tail = entities.intern(fields[2]);
        facts.push_back(f);
    }
    return facts;
}

inline Corpus parse_facts(std::istream& in) {
    Corpus c;
    c.facts = parse_facts(in, c.entities, c.relations);
    return c;
}

inline std::vector<Fact> read_fact_file(const std::filesystem::path& path, Vocabulary& entities,
                                        Vocabulary& relations) {
    std::ifstream in(path);
    if (!in) throw DatasetNotFound(path.string());
    return parse_facts(in, entities, relations);
}

inline void serialize_facts(std::ostream& out, const std::vector<Fact>& facts, const Vocabulary& entities,
                            const Vocabulary& relations) {
    for (const auto& f : facts) {
        out << entities.label(f.head) << '\t' << relations.label(f.relation) << '\t' << entities.label(f.tail)
            << '\t' << detail::format_year(f.start) << '\t' << detail::format_year(f.end) << '\n';
    }
}

// Year intervals [boundaries[i], boundaries[i+1]); the first interval also
// absorbs earlier years and the last one is open to the right.
struct TimeBinning {
    std::vector<int> boundaries;
    int min_triples = 1;

    std::size_t size() const { return boundaries.size(); }

    std::size_t bin_of(int year) const {
        auto it = std::upper_bound(boundaries.begin(), boundaries.end(), year);
        if (it == boundaries.begin()) return 0;
        return static_cast<std::size_t>(it - boundaries.begin()) - 1;
    }

    // Inclusive range of bins a fact's validity interval touches.
    std::pair<std::size_t, std::size_t> span_of(const Fact& f) const {
        std::size_t first = f.start ? bin_of(*f.start) : 0;
        std::size_t last = f.end ? bin_of(*f.end) : size() - 1;
        return {first, last};
    }

    friend bool operator==(const TimeBinning&, const TimeBinning&) = default;
};

// Greedy year clubbing over fact-year mentions (each bounded start and end
// counts once). A year whose own count reaches min_triples becomes a
// singleton interval and closes any pending run; a trailing run below the
// threshold merges into its predecessor.
inline TimeBinning compute_binning(const std::vector<Fact>& facts, int min_triples) {
    if (min_triples < 1) throw ConfigError("min_triples must be >= 1");
    std::map<int, std::int64_t> counts;
    for (const auto& f : facts) {
        if (f.start) ++counts[*f.start];
        if (f.end) ++counts[*f.end];
    }
    if (counts.empty()) throw EmptyDomainError("no bounded years in the fact set");

    TimeBinning b;
    b.min_triples = min_triples;
    std::optional<int> pending_start;
    std::int64_t pending = 0;
    for (const auto& [year, count] : counts) {
        if (count >= min_triples) {
            if (pending_start) b.boundaries.push_back(*pending_start);
            b.boundaries.push_back(year);
            pending_start.reset();
            pending = 0;
            continue;
        }
        if (!pending_start) pending_start = year;
        pending += count;
        if (pending >= min_triples) {
            b.boundaries.push_back(*pending_start);
            pending_start.reset();
            pending = 0;
        }
    }
    if (pending_start && b.boundaries.empty()) b.boundaries.push_back(*pending_start);
    return b;
}

// Per-bin static subgraphs plus a global membership set.
class TemporalGraph {
public:
    TemporalGraph() = default;

    TemporalGraph(std::int32_t num_entities, std::int32_t num_relations, TimeBinning binning)
        : num_entities_(num_entities),
          num_relations_(num_relations),
          binning_(std::move(binning)),
          bins_(binning_.size()),
          bin_sets_(binning_.size()) {}

    // Adds a triple to one bin; duplicates within a bin are ignored.
    void add(const Triple& t, std::size_t bin) {
        if (t.head < 0 || t.head >= num_entities_ || t.tail < 0 || t.tail >= num_entities_ || t.relation < 0 ||
            t.relation >= num_relations_) {
            throw VocabularyError("triple id outside vocabulary");
        }
        if (bin_sets_.at(bin).insert(key(t)).second) {
            bins_[bin].push_back(t);
            global_.insert(key(t));
        }
    }

    bool contains(const Triple& t, std::size_t bin) const { return bin_sets_.at(bin).count(key(t)) != 0; }
    bool contains_any(const Triple& t) const { return global_.count(key(t)) != 0; }

    std::int32_t num_entities() const { return num_entities_; }
    std::int32_t num_relations() const { return num_relations_; }
    std::size_t num_bins() const { return bins_.size(); }
    const TimeBinning& binning() const { return binning_; }
    const std::vector<Triple>& bin(std::size_t t) const { return bins_.at(t); }
    std::size_t global_size() const { return global_.size(); }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& b : bins_) n += b.size();
        return n;
    }

private:
    std::uint64_t key(const Triple& t) const {
        return (static_cast<std::uint64_t>(t.head) * static_cast<std::uint64_t>(num_relations_) +
                static_cast<std::uint64_t>(t.relation)) *
                   static_cast<std::uint64_t>(num_entities_) +
               static_cast<std::uint64_t>(t.tail);
    }

    std::int32_t num_entities_ = 0;
    std::int32_t num_relations_ = 0;
    TimeBinning binning_;
    std::vector<std::vector<Triple>> bins_;
    std::vector<std::unordered_set<std::uint64_t>> bin_sets_;
    std::unordered_set<std::uint64_t> global_;
};

// Places each fact into every bin its [start, end] span intersects.
inline TemporalGraph materialize(const std::vector<Fact>& facts, const TimeBinning& binning,
                                 std::int32_t num_entities, std::int32_t num_relations) {
    if (binning.size() == 0) throw ConfigError("binning has no intervals");
    TemporalGraph g(num_entities, num_relations, binning);
    for (const auto& f : facts) {
        auto [first, last] = binning.span_of(f);
        for (std::size_t t = first; t <= last; ++t) g.add(f.triple(), t);
    }
    return g;
}

inline TemporalGraph materialize(const Corpus& corpus, const TimeBinning& binning) {
    return materialize(corpus.facts, binning, corpus.entities.size(), corpus.relations.size());
}

// Merges every bin into one; used by the static (time-agnostic) baseline.
inline TemporalGraph collapse_bins(const TemporalGraph& g) {
    TimeBinning single;
    single.min_triples = g.binning().min_triples;
    single.boundaries = {g.binning().boundaries.empty() ? 0 : g.binning().boundaries.front()};
    TemporalGraph out(g.num_entities(), g.num_relations(), single);
    for (std::size_t t = 0; t < g.num_bins(); ++t) {
        for (const auto& tr : g.bin(t)) out.add(tr, 0);
    }
    return out;
}

}  // namespace rtge
