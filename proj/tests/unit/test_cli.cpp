#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "forms.hpp"
#include "symgrad/dataset.hpp"
#include "symgrad/symsearch.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("symgrad_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs the CLI with `args` and captures its streams; `env` is prepended to the command line.
Run cli(const std::string& args, const std::string& env = "") {
    static int counter = 0;
    const auto tmp = fs::temp_directory_path() / ("symgrad_test_cli_io_" + std::to_string(counter++));
    const std::string cmd = env + " \"" SYMGRAD_CLI_PATH "\" " + args + " >\"" + tmp.string() + ".out\" 2>\"" + tmp.string() + ".err\"";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(tmp.string() + ".out");
    r.err = slurp(tmp.string() + ".err");
    return r;
}

std::string in(const fs::path& dir) { return "-q --dir \"" + dir.string() + "\" "; }

}  // namespace

TEST_CASE("gen writes the requested rows and is byte-stable") {
    const auto a = scratch("gen_a");
    const auto b = scratch("gen_b");
    REQUIRE(cli(in(a) + "gen --exp 1 --n 10000 --seed 42").code == 0);
    REQUIRE(cli(in(b) + "gen --exp 1 --n 10000 --seed 42").code == 0);
    CHECK(symgrad::read_dataset(a / "exp1.csv").size() == 10000);
    CHECK(slurp(a / "exp1.csv") == slurp(b / "exp1.csv"));
    CHECK(slurp(a / "exp1.meta") == slurp(b / "exp1.meta"));
}

TEST_CASE("usage errors exit with 1") {
    const auto d = scratch("usage");
    CHECK(cli(in(d) + "gen --exp 9").code == 1);
    CHECK(cli(in(d) + "frobnicate").code == 1);
    CHECK(cli(in(d) + "gen --exp 1 --domain 1:0,0:1").code == 1);
    CHECK(cli(in(d) + "report").code == 1);
    CHECK(cli("--help").code == 0);
}

TEST_CASE("missing and stale artifacts exit with 3") {
    const auto d = scratch("stale");
    const auto before = cli(in(d) + "interpret");
    CHECK(before.code == 3);
    CHECK(before.err.find("extract") != std::string::npos);

    REQUIRE(cli(in(d) + "gen --exp 1 --n 300 --seed 1").code == 0);
    REQUIRE(cli(in(d) + "train --exp 1 --seed 1 --hidden 8 --epochs 5").code == 0);
    REQUIRE(cli(in(d) + "extract").code == 0);

    // A model edited after extraction makes the gradients stale.
    { std::ofstream(d / "model.json", std::ios::app) << "\n"; }
    CHECK(cli(in(d) + "interpret --iterations 2").code == 3);
    CHECK(cli(in(d) + "extract").code == 3);

    // Deleting an intermediate artifact fails loudly instead of recomputing.
    REQUIRE(cli(in(d) + "train --exp 1 --seed 1 --hidden 8 --epochs 5").code == 0);
    fs::remove(d / "gradients.csv");
    CHECK(cli(in(d) + "interpret --iterations 2").code == 3);
    CHECK_FALSE(fs::exists(d / "gradients.csv"));
}

TEST_CASE("data problems exit with 2") {
    const auto d = scratch("data");
    REQUIRE(cli(in(d) + "gen --exp 1 --n 300 --seed 1").code == 0);
    REQUIRE(cli(in(d) + "train --exp 1 --seed 1 --hidden 8 --epochs 5").code == 0);
    // A margin of almost one half leaves no point inside the band.
    CHECK(cli(in(d) + "extract --delta 0.4999999").code == 2);
}

TEST_CASE("the artifact root can come from the environment and options from a file") {
    const auto d = scratch("env");
    std::ofstream(d / "opts.ini") << "[gen]\nexp=2\nn=50\nseed=3\n";
    const auto r = cli("-q --config \"" + (d / "opts.ini").string() + "\" gen", "SYMGRAD_ROOT=\"" + d.string() + "\"");
    CHECK(r.code == 0);
    REQUIRE(fs::exists(d / "exp2.csv"));
    CHECK(symgrad::read_dataset(d / "exp2.csv").size() == 50);
}

TEST_CASE("small pipelines are byte-reproducible") {
    const auto a = scratch("repro_a");
    const auto b = scratch("repro_b");
    for (const auto& d : {a, b}) {
        REQUIRE(cli(in(d) + "gen --exp 3 --n 500 --seed 2").code == 0);
        REQUIRE(cli(in(d) + "train --exp 3 --seed 2 --hidden 16,16 --epochs 20").code == 0);
        REQUIRE(cli(in(d) + "extract").code == 0);
        REQUIRE(cli(in(d) + "interpret --seed 2 --iterations 15 --populations 2").code == 0);
        REQUIRE(cli(in(d) + "symclass --seed 2 --iterations 10 --populations 2").code == 0);
    }
    for (const char* name : {"exp3.csv", "train.csv", "val.csv", "model.json", "history.csv", "gradients.csv", "gradients.meta",
                             "front.csv", "front.meta", "symclass_front.csv"}) {
        CHECK_MESSAGE(slurp(a / name) == slurp(b / name), name);
    }
}

TEST_CASE("full experiment 1 pipeline") {
    const auto d = scratch("exp1");
    REQUIRE(cli(in(d) + "gen --exp 1 --n 2000 --seed 1").code == 0);
    REQUIRE(cli(in(d) + "train --exp 1 --seed 1").code == 0);
    REQUIRE(cli(in(d) + "extract").code == 0);
    const auto interp = cli(in(d) + "interpret --seed 1");
    REQUIRE(interp.code == 0);
    CHECK(interp.out.find("knee") != std::string::npos);

    const auto front = symgrad::read_front(d / "front.csv");
    const auto& k = front[symgrad::knee(front).index];
    CHECK(interp.out.find(symgrad::to_string(k.expression)) != std::string::npos);
    const auto probes = symgrad::read_dataset(d / "val.csv").X;
    const auto fit = forms::affine_fit(k.expression, probes,
                                       {[](std::span<const double> x) { return x[0] * x[0]; },
                                        [](std::span<const double> x) { return x[1] * x[1]; }});
    CHECK(fit.r2 >= 0.999);
    CHECK(fit.coef[1] / fit.coef[0] == doctest::Approx(2.0).epsilon(0.1));

    const auto verify = cli(in(d) + "verify --exp 1");
    CHECK(verify.code == 0);
    CHECK(fs::exists(d / "verify.csv"));
    CHECK(cli(in(d) + "verify --exp 2").code != 0);

    REQUIRE(cli(in(d) + "symclass --seed 1 --iterations 30").code == 0);
    const auto report = cli(in(d) + "report");
    CHECK(report.code == 0);
    const auto md = slurp(d / "report.md");
    CHECK(md.find("**") != std::string::npos);
    CHECK(fs::exists(d / "gradient_front.tsv"));
    CHECK(fs::exists(d / "hinge_front.tsv"));
    CHECK(slurp(d / "manifest.json").find("\"front.csv\"") != std::string::npos);
}
