#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "rtge/cache.hpp"
#include "rtge/config.hpp"
#include "rtge/dataset.hpp"
#include "rtge/eval.hpp"
#include "rtge/model.hpp"
#include "rtge/synthetic.hpp"
#include "rtge/trainer.hpp"

namespace fs = std::filesystem;
using namespace rtge;

namespace {

struct UsageError : InputError {
    using InputError::InputError;
};

// Flags shared by every subcommand: one per RunConfig key plus --config.
struct ConfigFlags {
    std::string config_file;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App* app) {
        app->add_option("--config", config_file, "key=value config file");
        for (const auto& key : config_keys()) {
            auto& slot = values[key];
            const std::string name = "--" + kebab(key);
            if (key == "filtered" || key == "resample") {
                options[key] = app->add_flag(name + "{true}", slot, "boolean; bare flag means true");
            } else {
                options[key] = app->add_option(name, slot);
            }
            options[key]->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        }
    }

    // defaults < config file < TKGE_* environment < command-line flags
    RunConfig resolve() const {
        RunConfig c;
        if (!config_file.empty()) apply_config_file(c, config_file);
        apply_env(c);
        for (const auto& [key, opt] : options) {
            if (opt->count() > 0) set_config_value(c, key, values.at(key));
        }
        return c;
    }
};

fs::path out_path(const RunConfig& c, const char* name) { return fs::path(c.output_dir) / name; }

fs::path default_cache(const RunConfig& c) { return c.cache.empty() ? out_path(c, "graph.cache") : fs::path(c.cache); }

PreparedData load_inputs(const RunConfig& c) {
    if (!c.cache.empty()) return load_cache(c.cache);
    if (c.train.empty()) throw UsageError("need --train or --cache");
    return prepare(c.train, c.min_triples);
}

fs::path checkpoint_path(const RunConfig& c) {
    return c.checkpoint.empty() ? out_path(c, "model.ckpt") : fs::path(c.checkpoint);
}

void check_model_fits(const ModelState& s, const PreparedData& p) {
    if (s.entities.rows() != static_cast<std::size_t>(p.entities.size()) ||
        s.relations.rows() != static_cast<std::size_t>(p.relations.size())) {
        throw CheckpointDimensionError("checkpoint has " + std::to_string(s.entities.rows()) + " entities and " +
                                       std::to_string(s.relations.rows()) + " relations, data has " +
                                       std::to_string(p.entities.size()) + " and " +
                                       std::to_string(p.relations.size()));
    }
    if (s.num_bins() != 1 && s.num_bins() != p.binning.size()) {
        throw CheckpointDimensionError("checkpoint has " + std::to_string(s.num_bins()) + " bins, data has " +
                                       std::to_string(p.binning.size()));
    }
}

std::string bin_label(const TimeBinning& b, std::size_t i) {
    std::string s = "bin" + std::to_string(i) + "[" + std::to_string(b.boundaries[i]) + ",";
    s += i + 1 < b.size() ? std::to_string(b.boundaries[i + 1]) + ")" : std::string("+inf)");
    return s;
}

int cmd_preprocess(const RunConfig& c) {
    if (c.train.empty()) throw UsageError("preprocess needs --train");
    const PreparedData p = prepare(c.train, c.min_triples);
    const TemporalGraph g = p.graph();
    std::cout << "T=" << g.num_bins() << '\n';
    std::cout << "entities=" << p.entities.size() << " relations=" << p.relations.size() << " facts=" << p.train.size()
              << '\n';
    for (std::size_t t = 0; t < g.num_bins(); ++t) {
        std::cout << bin_label(p.binning, t) << '\t' << g.bin(t).size() << '\n';
    }
    const fs::path cache = default_cache(c);
    if (cache.has_parent_path()) fs::create_directories(cache.parent_path());
    save_cache(p, cache);
    std::cout << "cache=" << cache.string() << '\n';
    return 0;
}

int cmd_train(const RunConfig& c) {
    const PreparedData p = load_inputs(c);
    const TemporalGraph g = p.graph();
    fs::create_directories(c.output_dir);
    const fs::path log_path = out_path(c, "train_log.csv");
    std::ofstream log(log_path);
    if (!log) throw Error("cannot write " + log_path.string());
    log.precision(17);
    log << "iter,J,task,smooth,penalty\n";
    const auto log_row = [&](std::size_t it, const ObjectiveBreakdown& j) {
        log << it << ',' << j.total() << ',' << j.task << ',' << j.smooth << ',' << j.penalty << '\n';
    };

    TrainOptions opt;
    opt.mode = c.mode;
    opt.seed = c.seed;
    opt.filter = c.neg_filter;
    opt.batch_size = c.batch_size;
    opt.threads = c.threads;
    opt.resample_each_epoch = c.resample;
    opt.on_iteration = [&](std::size_t it, const ObjectiveBreakdown& j, const ModelState&) {
        log_row(it, j);
        if (it > 0 && it % 100 == 0) std::cerr << "iter " << it << " J=" << j.total() << '\n';
    };
    const FitResult res = fit(g, c.hp, opt);
    const fs::path ckpt = checkpoint_path(c);
    if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
    save_checkpoint(res.state, ckpt);

    std::cout << "mode=" << to_string(c.mode) << " T=" << res.state.num_bins() << " constraints="
              << res.report.constraints << " relaxations=" << res.report.relaxations << '\n';
    std::cout << "iterations=" << res.report.iterations << " converged=" << (res.report.converged ? "true" : "false")
              << " J0=" << res.report.history.front().total() << " J=" << res.report.history.back().total() << '\n';
    std::cout << "checkpoint=" << ckpt.string() << " log=" << log_path.string() << '\n';

    if (!c.valid.empty()) {
        const auto valid = read_heldout(c.valid, p);
        std::vector<Fact> all = p.train;
        all.insert(all.end(), valid.begin(), valid.end());
        const TemporalGraph known = materialize(all, p.binning, p.entities.size(), p.relations.size());
        const auto reports = evaluate(res.state, known, valid, c.tasks, {c.filtered, c.threads}, c.hp.norm);
        std::ofstream vm(out_path(c, "valid_metrics.csv"));
        write_metrics_csv(vm, reports);
        for (const auto& r : reports) std::cout << "valid " << to_string(r.task) << " mean_rank=" << r.mean_rank << '\n';
    }
    return 0;
}

int cmd_eval(const RunConfig& c) {
    if (c.test.empty()) throw UsageError("eval needs --test");
    const PreparedData p = load_inputs(c);
    const ModelState s = load_checkpoint(checkpoint_path(c));
    check_model_fits(s, p);
    const auto test = read_heldout(c.test, p);
    std::vector<Fact> all = p.train;
    if (!c.valid.empty()) {
        const auto valid = read_heldout(c.valid, p);
        all.insert(all.end(), valid.begin(), valid.end());
    }
    all.insert(all.end(), test.begin(), test.end());
    const TemporalGraph known = materialize(all, p.binning, p.entities.size(), p.relations.size());
    const auto reports = evaluate(s, known, test, c.tasks, {c.filtered, c.threads}, c.hp.norm);
    write_metrics_csv(std::cout, reports);
    fs::create_directories(c.output_dir);
    std::ofstream out(out_path(c, "metrics.csv"));
    write_metrics_csv(out, reports);
    return 0;
}

struct ParsedQuery {
    std::string head, relation, tail;
    std::string time;  // "" when omitted, "?" when asked for
};

ParsedQuery parse_query(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> tokens;
    for (std::string t; in >> t;) tokens.push_back(t);
    ParsedQuery q;
    if (!tokens.empty() && tokens.back().starts_with('@')) {
        q.time = tokens.back().substr(1);
        if (q.time.empty()) throw UsageError("empty time after '@'");
        tokens.pop_back();
    }
    if (tokens.size() != 3) throw UsageError("query needs 'head relation tail [@binK|@YYYY|@?]'");
    q.head = tokens[0];
    q.relation = tokens[1];
    q.tail = tokens[2];
    const int missing = (q.head == "?") + (q.relation == "?") + (q.tail == "?") + (q.time == "?");
    if (missing != 1) throw UsageError("query must have exactly one '?' slot, found " + std::to_string(missing));
    return q;
}

int cmd_predict(const RunConfig& c, const std::string& query_text) {
    const ParsedQuery pq = parse_query(query_text);
    const PreparedData p = load_inputs(c);
    const ModelState s = load_checkpoint(checkpoint_path(c));
    check_model_fits(s, p);
    const Scorer scorer(s, c.hp.norm);

    const auto entity = [&](const std::string& label) -> EntityId {
        if (label == "?") return 0;
        if (auto id = p.entities.find(label)) return *id;
        throw VocabularyError("unknown entity '" + label + "'");
    };
    Query q;
    q.triple.head = entity(pq.head);
    q.triple.tail = entity(pq.tail);
    if (pq.relation != "?") {
        auto id = p.relations.find(pq.relation);
        if (!id) throw VocabularyError("unknown relation '" + pq.relation + "'");
        q.triple.relation = *id;
    }
    q.missing = pq.head == "?" ? Slot::Head : pq.tail == "?" ? Slot::Tail : pq.relation == "?" ? Slot::Relation : Slot::Time;

    std::vector<std::size_t> bins;
    if (pq.time.empty() || pq.time == "?") {
        bins.resize(p.binning.size());
        std::iota(bins.begin(), bins.end(), std::size_t{0});
    } else if (pq.time.starts_with("bin")) {
        const std::size_t b = detail::parse_number<std::size_t>("bin", std::string_view(pq.time).substr(3));
        if (b >= p.binning.size()) {
            throw UsageError("bin " + std::to_string(b) + " out of range [0," + std::to_string(p.binning.size()) + ")");
        }
        bins.push_back(b);
    } else {
        bins.push_back(p.binning.bin_of(detail::parse_number<int>("year", pq.time)));
    }

    std::vector<std::int32_t> cands;
    std::vector<double> losses;
    std::vector<std::string> labels;
    if (q.missing == Slot::Time) {
        cands.resize(p.binning.size());
        std::iota(cands.begin(), cands.end(), 0);
        losses = scorer.score(q, cands);
        for (auto b : cands) labels.push_back(bin_label(p.binning, static_cast<std::size_t>(b)));
    } else {
        const Vocabulary& vocab = q.missing == Slot::Relation ? p.relations : p.entities;
        cands.resize(static_cast<std::size_t>(vocab.size()));
        std::iota(cands.begin(), cands.end(), 0);
        losses.assign(cands.size(), std::numeric_limits<double>::infinity());
        // Without a time the loss of a candidate is its best loss over bins.
        for (std::size_t b : bins) {
            q.bin = b;
            const auto l = scorer.score(q, cands);
            for (std::size_t i = 0; i < l.size(); ++i) losses[i] = std::min(losses[i], l[i]);
        }
        for (auto id : cands) labels.push_back(vocab.label(id));
    }

    std::vector<std::size_t> order(cands.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
    const std::size_t k = std::min(c.top_k, order.size());
    std::cout << "rank\tcandidate\tloss\n";
    char buf[64];
    for (std::size_t i = 0; i < k; ++i) {
        std::snprintf(buf, sizeof buf, "%.6f", losses[order[i]]);
        std::cout << i + 1 << '\t' << labels[order[i]] << '\t' << buf << '\n';
    }
    return 0;
}

int cmd_export(const RunConfig& c) {
    const ModelState s = load_checkpoint(checkpoint_path(c));
    fs::create_directories(c.output_dir);
    const fs::path path = out_path(c, "embeddings.csv");
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    write_embeddings_csv(out, s);
    std::cout << "embeddings=" << path.string() << '\n';
    return 0;
}

int cmd_gen_synthetic(const RunConfig& c, SyntheticSpec spec) {
    spec.seed = c.seed;
    const SyntheticCorpus corpus = generate_synthetic(spec);
    write_synthetic(corpus, c.output_dir);
    std::cout << "train=" << corpus.train.size() << " valid=" << corpus.valid.size() << " test=" << corpus.test.size()
              << " entities=" << corpus.entities.size() << " relations=" << corpus.relations.size()
              << " bins=" << spec.bins << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Temporal knowledge graph embedding with time-aware hyperplanes"};
    app.require_subcommand(1);

    std::map<std::string, ConfigFlags> flags;
    const auto sub = [&](const char* name, const char* help) {
        CLI::App* s = app.add_subcommand(name, help);
        flags[name].attach(s);
        return s;
    };
    sub("preprocess", "bin the training years and write the graph cache");
    sub("train", "fit a model and write a checkpoint plus training log");
    sub("eval", "rank test facts and print metrics CSV");
    CLI::App* predict = sub("predict", "top-k completions for a query such as '? livesIn Beijing @bin3'");
    std::string query;
    predict->add_option("query", query, "query with exactly one '?' slot")->required();
    sub("export-embeddings", "write embeddings CSV from a checkpoint");
    CLI::App* gen = sub("gen-synthetic", "write a synthetic drifting-community corpus");
    SyntheticSpec spec;
    gen->add_option("--entities", spec.entities);
    gen->add_option("--relations", spec.relations);
    gen->add_option("--bins", spec.bins);
    gen->add_option("--step", spec.step, "community drift per bin (0 = static)");
    gen->add_option("--community-size", spec.community_size);
    gen->add_option("--tails-per-query", spec.tails_per_query);
    gen->add_option("--base-year", spec.base_year);
    gen->add_flag("--confusable", spec.confusable, "relations in parity-split pairs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        for (auto& [name, f] : flags) {
            CLI::App* s = app.get_subcommand(name);
            if (!s->parsed()) continue;
            const RunConfig c = f.resolve();
            c.hp.validate();
            if (name == "preprocess") return cmd_preprocess(c);
            if (name == "train") return cmd_train(c);
            if (name == "eval") return cmd_eval(c);
            if (name == "predict") return cmd_predict(c, query);
            if (name == "export-embeddings") return cmd_export(c);
            if (name == "gen-synthetic") return cmd_gen_synthetic(c, spec);
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
