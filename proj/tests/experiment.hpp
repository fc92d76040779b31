#pragma once

// Shared setup for the learning tests: a synthetic corpus binned per year,
// trained on the train split and ranked on the test split.

#include <vector>

#include "rtge/dataset.hpp"
#include "rtge/eval.hpp"
#include "rtge/synthetic.hpp"
#include "rtge/trainer.hpp"

namespace experiment {

struct Data {
    rtge::SyntheticCorpus corpus;
    rtge::TemporalGraph train;
    rtge::TemporalGraph known;
};

inline Data make_data(const rtge::SyntheticSpec& spec) {
    Data d;
    d.corpus = rtge::generate_synthetic(spec);
    const auto& c = d.corpus;
    const auto binning = rtge::compute_binning(c.train, 1);
    d.train = rtge::materialize(c.train, binning, c.entities.size(), c.relations.size());
    std::vector<rtge::Fact> all = c.train;
    all.insert(all.end(), c.valid.begin(), c.valid.end());
    all.insert(all.end(), c.test.begin(), c.test.end());
    d.known = rtge::materialize(all, binning, c.entities.size(), c.relations.size());
    return d;
}

inline rtge::HyperParams learning_params(double gamma, std::size_t iterations) {
    rtge::HyperParams hp;
    hp.d = 32;
    hp.psi = 1e-4;
    hp.gamma = gamma;
    hp.m = 5;
    hp.kappa = iterations;
    hp.epsilon = 0;
    return hp;
}

inline double mean_rank(const rtge::ModelState& s, const Data& d, rtge::Task task) {
    const rtge::Task tasks[] = {task};
    return rtge::evaluate(s, d.known, d.corpus.test, tasks).front().mean_rank;
}

}  // namespace experiment
