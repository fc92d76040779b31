#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "rtge/cache.hpp"
#include "rtge/model.hpp"

using namespace rtge;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int rc = -1;
    std::string out;  // stdout and stderr
};

Outcome run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" + RTGE_CLI_PATH + "' " + args + " 2>&1";
    Outcome r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf;
    while (std::size_t n = fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
    const int status = pclose(p);
    r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

class Cli : public ::testing::Test {
protected:
    static fs::path root;
    static fs::path data;

    static void SetUpTestSuite() {
        root = fs::temp_directory_path() / "rtge_cli_test";
        fs::remove_all(root);
        data = root / "data";
        const Outcome r = run("gen-synthetic --entities 20 --relations 3 --bins 4 --seed 7 --output-dir '" + data.string() + "'");
        ASSERT_EQ(r.rc, 0) << r.out;
    }

    static void TearDownTestSuite() { fs::remove_all(root); }

    static std::string train_flags() {
        return "--train '" + (data / "train.txt").string() + "' --min-triples 1 --d 8 --kappa 20 --psi 0.001";
    }

    static fs::path dir(const std::string& name) { return root / name; }
};

fs::path Cli::root;
fs::path Cli::data;

}  // namespace

TEST_F(Cli, PreprocessRecoversTheGeneratorBins) {
    const Outcome r = run("preprocess --train '" + (data / "train.txt").string() + "' --min-triples 1 --output-dir '" +
                      dir("pre").string() + "'");
    ASSERT_EQ(r.rc, 0) << r.out;
    EXPECT_NE(r.out.find("T=4\n"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("bin0[2000,2001)"), std::string::npos) << r.out;
    const PreparedData p = load_cache(dir("pre") / "graph.cache");
    EXPECT_EQ(p.binning.size(), 4u);
    EXPECT_EQ(p.entities.size(), 20);
}

TEST_F(Cli, MissingDatasetIsAnInputError) {
    const Outcome r = run("preprocess --train /nonexistent/train.txt");
    EXPECT_EQ(r.rc, 2);
    EXPECT_NE(r.out.find("dataset not found"), std::string::npos) << r.out;
}

TEST_F(Cli, MalformedInputNamesTheLine) {
    fs::create_directories(dir("bad"));
    std::ofstream(dir("bad") / "train.txt") << "a\tr\tb\t2000\t2001\nc\tr\td\t2002\n";
    const Outcome r = run("preprocess --train '" + (dir("bad") / "train.txt").string() + "'");
    EXPECT_EQ(r.rc, 2);
    EXPECT_NE(r.out.find("2"), std::string::npos) << r.out;
}

TEST_F(Cli, UsageErrorsExitWithTwo) {
    EXPECT_EQ(run("").rc, 2);
    EXPECT_EQ(run("frobnicate").rc, 2);
    EXPECT_EQ(run("train --no-such-flag 1").rc, 2);
    EXPECT_EQ(run("train " + train_flags() + " --gamma -1").rc, 2);
    EXPECT_EQ(run("train " + train_flags() + " --mode TransH").rc, 2);
    EXPECT_EQ(run("train").rc, 2);
    EXPECT_EQ(run("--help").rc, 0);
}

TEST_F(Cli, HyteTrainingLogsNoSmoothness) {
    const Outcome r = run("train " + train_flags() + " --mode HyTE --output-dir '" + dir("hyte").string() + "'");
    ASSERT_EQ(r.rc, 0) << r.out;
    const auto log = lines(slurp(dir("hyte") / "train_log.csv"));
    ASSERT_EQ(log.size(), 22u);
    EXPECT_EQ(log[0], "iter,J,task,smooth,penalty");
    for (std::size_t i = 1; i < log.size(); ++i) {
        std::vector<std::string> cols;
        std::istringstream row(log[i]);
        for (std::string c; std::getline(row, c, ',');) cols.push_back(c);
        ASSERT_EQ(cols.size(), 5u);
        EXPECT_EQ(cols[0], std::to_string(i - 1));
        EXPECT_EQ(std::stod(cols[3]), 0.0) << log[i];
    }
}

TEST_F(Cli, SameSeedSameCheckpoint) {
    for (const char* name : {"det_a", "det_b"}) {
        ASSERT_EQ(run("train " + train_flags() + " --seed 3 --output-dir '" + dir(name).string() + "'").rc, 0);
    }
    const std::string a = slurp(dir("det_a") / "model.ckpt");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(dir("det_b") / "model.ckpt"));
    EXPECT_EQ(slurp(dir("det_a") / "train_log.csv"), slurp(dir("det_b") / "train_log.csv"));
}

TEST_F(Cli, ZeroIterationsWritesTheInitialModel) {
    const Outcome r = run("train " + train_flags() + " --kappa 0 --seed 11 --output-dir '" + dir("init").string() + "'");
    ASSERT_EQ(r.rc, 0) << r.out;
    const PreparedData p = prepare(data / "train.txt", 1);
    HyperParams hp;
    hp.d = 8;
    const ModelState want = init_model(20, static_cast<std::size_t>(p.relations.size()), p.binning.size(), hp, 11);
    EXPECT_EQ(load_checkpoint(dir("init") / "model.ckpt"), want);
}

TEST_F(Cli, SettingsPrecedence) {
    fs::create_directories(dir("prec"));
    const fs::path conf = dir("prec") / "run.conf";
    std::ofstream(conf) << "d=4\nkappa=0\n";
    const std::string base = "train --train '" + (data / "train.txt").string() + "' --min-triples 1 --config '" +
                             conf.string() + "' --output-dir '" + dir("prec").string() + "'";
    const auto d_of = [&](const std::string& extra, const std::string& env) {
        const Outcome r = run(base + extra, env);
        EXPECT_EQ(r.rc, 0) << r.out;
        return load_checkpoint(dir("prec") / "model.ckpt").d;
    };
    EXPECT_EQ(d_of("", ""), 4u);
    EXPECT_EQ(d_of("", "TKGE_D=6"), 6u);
    EXPECT_EQ(d_of(" --d 8", "TKGE_D=6"), 8u);
}

TEST_F(Cli, DivergenceExitsWithOne) {
    const Outcome r = run("train " + train_flags() + " --psi 1000 --kappa 500 --output-dir '" + dir("div").string() + "'");
    EXPECT_EQ(r.rc, 1);
    EXPECT_NE(r.out.find("non-finite at iteration"), std::string::npos) << r.out;
}

TEST_F(Cli, EvalOfAPerfectCheckpoint) {
    const fs::path d = dir("perfect");
    fs::create_directories(d);
    std::ofstream(d / "train.txt") << "a\tr0\tb\t2000\t2000\nc\tr1\td\t2000\t2000\ne\tr2\ta\t2000\t2000\n";
    fs::copy_file(d / "train.txt", d / "test.txt");
    const PreparedData p = prepare(d / "train.txt", 1);
    const std::size_t ne = static_cast<std::size_t>(p.entities.size());
    ModelState s;
    s.d = ne + 1;
    s.entities = Matrix(ne, s.d);
    s.relations = Matrix(3, s.d);
    s.hyperplanes = Matrix(1, s.d);
    s.hyperplanes.row(0)[ne] = 1;
    for (std::size_t e = 0; e < ne; ++e) s.entities.row(e)[e] = 1;
    for (const auto& f : p.train) {
        s.relations.row(f.relation)[f.head] = -1;
        s.relations.row(f.relation)[f.tail] = 1;
    }
    save_checkpoint(s, d / "model.ckpt");

    const std::string common = "--train '" + (d / "train.txt").string() + "' --test '" + (d / "test.txt").string() +
                               "' --min-triples 1 --checkpoint '" + (d / "model.ckpt").string() + "' --output-dir '" +
                               d.string() + "'";
    const Outcome r = run("eval " + common);
    ASSERT_EQ(r.rc, 0) << r.out;
    const auto rows = lines(r.out);
    ASSERT_EQ(rows.size(), 1u + 4 * 11);
    EXPECT_EQ(rows[0], "task,metric,value");
    for (const char* task : {"head", "tail", "relation", "time"}) {
        EXPECT_NE(r.out.find(std::string(task) + ",mean_rank,1\n"), std::string::npos) << r.out;
        EXPECT_NE(r.out.find(std::string(task) + ",hits@1,1\n"), std::string::npos) << r.out;
    }
    EXPECT_EQ(slurp(d / "metrics.csv"), r.out);

    const Outcome rel = run("eval " + common + " --tasks relation");
    ASSERT_EQ(rel.rc, 0) << rel.out;
    const auto rel_rows = lines(rel.out);
    ASSERT_EQ(rel_rows.size(), 12u);
    for (std::size_t i = 1; i < rel_rows.size(); ++i) EXPECT_EQ(rel_rows[i].rfind("relation,", 0), 0u) << rel_rows[i];

    const Outcome predict = run("predict 'a r0 ?' --top-k 3 " + common);
    ASSERT_EQ(predict.rc, 0) << predict.out;
    const auto pr = lines(predict.out);
    ASSERT_EQ(pr.size(), 4u);
    EXPECT_EQ(pr[0], "rank\tcandidate\tloss");
    EXPECT_EQ(pr[1], "1\tb\t0.000000");
}

TEST_F(Cli, EvalRejectsAMismatchedCheckpoint) {
    ASSERT_EQ(run("train " + train_flags() + " --kappa 0 --output-dir '" + dir("mismatch").string() + "'").rc, 0);
    const fs::path other = dir("mismatch") / "other";
    ASSERT_EQ(run("gen-synthetic --entities 30 --relations 3 --bins 4 --output-dir '" + other.string() + "'").rc, 0);
    const Outcome r = run("eval --train '" + (other / "train.txt").string() + "' --test '" + (other / "test.txt").string() +
                      "' --min-triples 1 --checkpoint '" + (dir("mismatch") / "model.ckpt").string() + "'");
    EXPECT_NE(r.rc, 0);
    EXPECT_NE(r.out.find("checkpoint has 20 entities"), std::string::npos) << r.out;
}

TEST_F(Cli, PredictQueries) {
    const fs::path d = dir("predict");
    ASSERT_EQ(run("train " + train_flags() + " --output-dir '" + d.string() + "'").rc, 0);
    const std::string common = "--train '" + (data / "train.txt").string() + "' --min-triples 1 --checkpoint '" +
                               (d / "model.ckpt").string() + "'";

    const Outcome heads = run("predict '? r0 e5 @bin3' --top-k 5 " + common);
    ASSERT_EQ(heads.rc, 0) << heads.out;
    const auto hr = lines(heads.out);
    ASSERT_EQ(hr.size(), 6u);
    double prev = -1;
    for (std::size_t i = 1; i < hr.size(); ++i) {
        const double loss = std::stod(hr[i].substr(hr[i].rfind('\t') + 1));
        EXPECT_GE(loss, prev);
        prev = loss;
    }

    const Outcome times = run("predict 'e1 r0 e5 @?' " + common);
    ASSERT_EQ(times.rc, 0) << times.out;
    const auto tr = lines(times.out);
    ASSERT_EQ(tr.size(), 5u);
    EXPECT_NE(tr[1].find("bin"), std::string::npos);

    EXPECT_EQ(run("predict 'e1 ? e5 @2001' " + common).rc, 0);
    EXPECT_EQ(run("predict '? ? e5' " + common).rc, 2);
    EXPECT_EQ(run("predict 'e1 r0 e5' " + common).rc, 2);
    EXPECT_EQ(run("predict '? r0 nobody' " + common).rc, 2);
    EXPECT_EQ(run("predict '? r0 e5 @bin9' " + common).rc, 2);
}

TEST_F(Cli, ExportEmbeddings) {
    const fs::path d = dir("export");
    ASSERT_EQ(run("train " + train_flags() + " --kappa 0 --output-dir '" + d.string() + "'").rc, 0);
    const Outcome r = run("export-embeddings --checkpoint '" + (d / "model.ckpt").string() + "' --output-dir '" +
                      d.string() + "'");
    ASSERT_EQ(r.rc, 0) << r.out;
    const auto rows = lines(slurp(d / "embeddings.csv"));
    ASSERT_FALSE(rows.empty());
    EXPECT_EQ(rows[0], "kind,id,v1,v2,v3,v4,v5,v6,v7,v8");
    EXPECT_EQ(rows.size(), 1u + 20 + 3 + 4);
}

TEST_F(Cli, TrainFromCacheWithValidation) {
    const fs::path d = dir("cache");
    ASSERT_EQ(run("preprocess --train '" + (data / "train.txt").string() + "' --min-triples 1 --output-dir '" +
                  d.string() + "'")
                  .rc,
              0);
    const Outcome r = run("train --cache '" + (d / "graph.cache").string() + "' --valid '" + (data / "valid.txt").string() +
                      "' --d 8 --kappa 5 --output-dir '" + d.string() + "'");
    ASSERT_EQ(r.rc, 0) << r.out;
    EXPECT_NE(r.out.find("valid tail mean_rank="), std::string::npos) << r.out;
    EXPECT_TRUE(fs::exists(d / "valid_metrics.csv"));
}
