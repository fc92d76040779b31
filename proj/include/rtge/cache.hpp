#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rtge/dataset.hpp"
#include "rtge/error.hpp"

namespace rtge {

// Training facts with their vocabularies and binning, as produced by
// preprocess. Later stages reuse it so ids and bins line up with the model.
struct PreparedData {
    Vocabulary entities;
    Vocabulary relations;
    TimeBinning binning;
    std::vector<Fact> train;

    TemporalGraph graph() const {
        return materialize(train, binning, entities.size(), relations.size());
    }
};

inline PreparedData prepare(const std::filesystem::path& train_file, int min_triples) {
    PreparedData p;
    p.train = read_fact_file(train_file, p.entities, p.relations);
    p.binning = compute_binning(p.train, min_triples);
    return p;
}

inline constexpr const char* kCacheHeader = "RTGE-GRAPH v1";

inline void write_cache(std::ostream& out, const PreparedData& p) {
    out << kCacheHeader << '\n';
    out << "min_triples " << p.binning.min_triples << '\n';
    out << "boundaries " << p.binning.size();
    for (int b : p.binning.boundaries) out << ' ' << b;
    out << '\n';
    out << "entities " << p.entities.size() << '\n';
    for (const auto& l : p.entities.labels()) out << l << '\n';
    out << "relations " << p.relations.size() << '\n';
    for (const auto& l : p.relations.labels()) out << l << '\n';
    out << "facts " << p.train.size() << '\n';
    for (const auto& f : p.train) {
        out << f.head << ' ' << f.relation << ' ' << f.tail << ' ' << detail::format_year(f.start) << ' '
            << detail::format_year(f.end) << '\n';
    }
}

inline PreparedData read_cache(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCacheHeader) throw InputError("not a graph cache file");
    PreparedData p;
    const auto expect = [&](const std::string& key) {
        std::string word;
        if (!(in >> word) || word != key) throw InputError("graph cache: expected '" + key + "'");
    };
    const auto count = [&]() {
        long long n = -1;
        if (!(in >> n) || n < 0) throw InputError("graph cache: bad count");
        return static_cast<std::size_t>(n);
    };
    expect("min_triples");
    if (!(in >> p.binning.min_triples)) throw InputError("graph cache: bad min_triples");
    expect("boundaries");
    p.binning.boundaries.resize(count());
    for (auto& b : p.binning.boundaries) {
        if (!(in >> b)) throw InputError("graph cache: truncated boundaries");
    }
    const auto labels = [&](const char* key, Vocabulary& v) {
        expect(key);
        const std::size_t n = count();
        std::getline(in, line);
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::getline(in, line)) throw InputError("graph cache: truncated " + std::string(key));
            v.intern(line);
        }
        if (static_cast<std::size_t>(v.size()) != n) throw InputError("graph cache: duplicate " + std::string(key) + " label");
    };
    labels("entities", p.entities);
    labels("relations", p.relations);
    expect("facts");
    const std::size_t n = count();
    p.train.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Fact f;
        std::string s, e;
        if (!(in >> f.head >> f.relation >> f.tail >> s >> e)) throw InputError("graph cache: truncated facts");
        f.start = detail::parse_year(s, i + 1);
        f.end = detail::parse_year(e, i + 1);
        if (f.head < 0 || f.tail < 0 || f.relation < 0 || f.head >= p.entities.size() || f.tail >= p.entities.size() ||
            f.relation >= p.relations.size()) {
            throw VocabularyError("graph cache: fact id outside the vocabulary");
        }
        p.train.push_back(f);
    }
    return p;
}

inline void save_cache(const PreparedData& p, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    write_cache(out, p);
}

inline PreparedData load_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetNotFound(path.string());
    return read_cache(in);
}

// Reads a held-out file against the training vocabularies; labels unseen in
// training are rejected since the model has no rows for them.
inline std::vector<Fact> read_heldout(const std::filesystem::path& path, const PreparedData& p) {
    Vocabulary ents = p.entities, rels = p.relations;
    auto facts = read_fact_file(path, ents, rels);
    if (ents.size() != p.entities.size()) {
        throw VocabularyError(path.string() + ": entity '" + ents.label(p.entities.size()) +
                              "' does not occur in the training data");
    }
    if (rels.size() != p.relations.size()) {
        throw VocabularyError(path.string() + ": relation '" +
                              rels.label(p.relations.size()) +
                              "' does not occur in the training data");
    }
    return facts;
}

}  // namespace rtge
