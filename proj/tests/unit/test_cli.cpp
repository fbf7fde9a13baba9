#include <gsopt/densify/split_table.hpp>
#include <gsopt/io/records.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sys/wait.h>
#include <unistd.h>

using namespace gsopt;
namespace fs = std::filesystem;

namespace {

int run(const std::string &args) {
    const std::string cmd = std::string(GSOPT_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("gsopt_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string path(const std::string &name) const { return (dir / name).string(); }

    fs::path dir;
};

} // namespace

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("synth --out " + path("s") + " --n 0"), 2);
    EXPECT_EQ(run("eval --ply /nonexistent.ply --scene /nonexistent.json"), 2);
}

TEST_F(Cli, SynthIsDeterministicAndEvalScoresGroundTruth) {
    ASSERT_EQ(run("synth --n 12 --cameras 5 --size 24 --seed 3 --out " + path("a")), 0);
    ASSERT_EQ(run("synth --n 12 --cameras 5 --size 24 --seed 3 --out " + path("b")), 0);
    EXPECT_EQ(slurp(path("a/scene.json")), slurp(path("b/scene.json")));
    EXPECT_EQ(slurp(path("a/init.ply")), slurp(path("b/init.ply")));
    EXPECT_EQ(slurp(path("a/images/0.png")), slurp(path("b/images/0.png")));

    ASSERT_EQ(run("eval --ply " + path("a/gt.ply") + " --scene " + path("a/scene.json") + " --out " + path("e")), 0);
    const auto metrics = read_json(path("e/metrics.json"));
    EXPECT_EQ(metrics["mean_psnr"].get<double>(), 100.0);
}

TEST_F(Cli, TrainWritesArtifacts) {
    ASSERT_EQ(run("synth --n 12 --cameras 5 --size 24 --seed 3 --init 4 --out " + path("s")), 0);
    const std::string scene = " --scene " + path("s/scene.json");
    EXPECT_EQ(run("train" + scene + " --iters 1200 --budget-fraction 2 --out " + path("t")), 0);
    for (const char *f : {"model.ply", "metrics.csv", "metrics.json", "config.json"}) {
        EXPECT_TRUE(fs::exists(dir / "t" / f)) << f;
    }
    EXPECT_EQ(read_json(path("t/config.json"))["budget"].get<std::size_t>(), 8u);
    EXPECT_EQ(read_json(path("t/metrics.json"))["gaussians"].get<std::size_t>(), 8u);

    EXPECT_EQ(run("train" + scene + " --iters 900 --budget 4 --budget-fraction 1 --out " + path("u")), 2);
    EXPECT_EQ(run("train" + scene + " --iters 900 --budget 2 --out " + path("u")), 1);
    EXPECT_EQ(run("train" + scene + " --iters 900 --ablate cloning --out " + path("u")), 1);
    EXPECT_EQ(run("train" + scene + " --iters 900 --baseline --exposure on --out " + path("u")), 0);
    EXPECT_EQ(run("render --ply " + path("u/model.ply") + scene + " --view 0 --out " + path("v.png")), 0);
    EXPECT_TRUE(fs::exists(dir / "v.png"));
}

TEST_F(Cli, SplitTableRoundTrip) {
    ASSERT_EQ(run("split-table --out " + path("t.csv")), 0);
    EXPECT_EQ(load_split_table_csv(path("t.csv")), learn_split_table());
}
