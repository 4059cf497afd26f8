#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "faim/dataset.hpp"
#include "faim/transport.hpp"
#include "faim/model.hpp"
#include "faim/serialize.hpp"

using namespace faim;
namespace fs = std::filesystem;

namespace {

const std::string kCli = FAIM_CLI_PATH;

int run_cli(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / ("faim_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& sub = "") const { return (path / sub).string(); }
};

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

// Small single-group dataset whose per-bin positive fractions equal the bin
// centers, so a calibration-only run is a fixed point.
std::string calibrated_csv() {
    std::ostringstream out;
    out << "id,group,raw_score,ground_truth\n";
    ScoreGrid grid(0.25);
    int id = 0;
    for (std::size_t b = 0; b < grid.bins(); ++b) {
        const int positives = static_cast<int>(b) * 2 + 1;
        for (int i = 0; i < 8; ++i)
            out << ++id << ",g," << format_double(grid.center(b)) << ','
                << (i < positives ? 1 : 0) << '\n';
    }
    return out.str();
}

} // namespace

TEST_CASE("cli: synth is deterministic and prints/writes the expected files") {
    TempDir a("synth_a"), b("synth_b");
    REQUIRE(run_cli("synth --n 2000 --seed 7 --output-dir " + a.str()) == 0);
    REQUIRE(run_cli("synth --n 2000 --seed 7 --output-dir " + b.str()) == 0);
    CHECK(slurp(a.path / "synthetic.csv") == slurp(b.path / "synthetic.csv"));
    CHECK(slurp(a.path / "synthetic_true_scores.csv") ==
          slurp(b.path / "synthetic_true_scores.csv"));
    // A different seed changes the bytes.
    TempDir c("synth_c");
    REQUIRE(run_cli("synth --n 2000 --seed 8 --output-dir " + c.str()) == 0);
    CHECK(slurp(a.path / "synthetic.csv") != slurp(c.path / "synthetic.csv"));
}

TEST_CASE("cli: exit codes") {
    TempDir dir("codes");
    SUBCASE("n = 0 is a config error") {
        CHECK(run_cli("synth --n 0 --output-dir " + dir.str()) == 2);
    }
    SUBCASE("unknown flag") {
        CHECK(run_cli("synth --output-dir " + dir.str() + " --bogus 1") == 2);
    }
    SUBCASE("missing subcommand") { CHECK(run_cli("") == 2); }
    SUBCASE("missing theta for a present group") {
        write_file(dir.path / "data.csv", calibrated_csv());
        write_file(dir.path / "thetas.cfg", "[other]\ntheta_a=1\ntheta_b=0\ntheta_c=0\n");
        CHECK(run_cli("run --input " + dir.str("data.csv") + " --stepsize 0.25 --thetas " +
                      dir.str("thetas.cfg") + " --output-dir " + dir.str("out")) == 2);
    }
    SUBCASE("degenerate class with positive theta is a data error") {
        write_file(dir.path / "degenerate.csv",
                   "id,group,raw_score,ground_truth\n"
                   "1,a,0.1,0\n2,a,0.3,1\n3,b,0.6,1\n4,b,0.9,1\n");
        CHECK(run_cli("run --input " + dir.str("degenerate.csv") +
                      " --stepsize 0.25 --theta 0,1,0 --output-dir " + dir.str("out")) == 3);
    }
    SUBCASE("unreadable input") {
        CHECK(run_cli("run --input " + dir.str("missing.csv") +
                      " --theta 1,0,0 --output-dir " + dir.str("out")) == 2);
    }
}

TEST_CASE("cli: run produces an identity map table on calibrated data") {
    TempDir dir("identity");
    write_file(dir.path / "data.csv", calibrated_csv());
    REQUIRE(run_cli("run --input " + dir.str("data.csv") +
                    " --stepsize 0.25 --theta 1,0,0 --output-dir " + dir.str("out")) == 0);
    const std::string map = slurp(dir.path / "out" / "map_g.tsv");
    std::istringstream in(map);
    std::string header;
    std::getline(in, header);
    CHECK(header == "raw_score\tfair_score\tdefined");
    std::string raw, fair;
    int defined;
    while (in >> raw >> fair >> defined) {
        CHECK(raw == fair);
        CHECK(defined == 1);
    }
}

TEST_CASE("cli: run outputs, model reload, and fair-score round trip") {
    TempDir dir("roundtrip");
    REQUIRE(run_cli("synth --n 3000 --seed 11 --output-dir " + dir.str()) == 0);
    REQUIRE(run_cli("run --input " + dir.str("synthetic.csv") +
                    " --stepsize 0.02 --theta 1/3,1/3,1/3 --output-dir " + dir.str("run1")) == 0);
    REQUIRE(run_cli("run --input " + dir.str("synthetic.csv") +
                    " --stepsize 0.02 --theta 1/3,1/3,1/3 --output-dir " + dir.str("run2")) == 0);

    SUBCASE("identical runs produce identical bytes") {
        CHECK(slurp(dir.path / "run1" / "fair_scores.csv") ==
              slurp(dir.path / "run2" / "fair_scores.csv"));
        CHECK(slurp(dir.path / "run1" / "model.json") == slurp(dir.path / "run2" / "model.json"));
        CHECK(slurp(dir.path / "run1" / "map_blue.tsv") ==
              slurp(dir.path / "run2" / "map_blue.tsv"));
    }
    SUBCASE("inputs are never mutated") {
        const std::string before = slurp(dir.path / "synthetic.csv");
        REQUIRE(run_cli("run --input " + dir.str("synthetic.csv") +
                        " --stepsize 0.02 --theta 1/3,1/3,1/3 --output-dir " +
                        dir.str("run3")) == 0);
        CHECK(slurp(dir.path / "synthetic.csv") == before);
    }
    SUBCASE("reloading the serialized model reproduces the fair scores bit-exactly") {
        const auto model = load_model(dir.str("run1/model.json"));
        const auto data = load_csv(dir.str("synthetic.csv"),
                                   {"id", "group", "raw_score", "ground_truth"});
        const auto snapped = truncate_scores(data.scores(), model.grid, false);
        const auto loaded = load_csv(dir.str("run1/fair_scores.csv"),
                                     {"id", "group", "fair_score", "ground_truth"});
        REQUIRE(loaded.records.size() == data.records.size());
        for (std::size_t i = 0; i < data.records.size(); ++i) {
            const double fair = apply(model, data.records[i].group, snapped[i]);
            CHECK(fair == loaded.records[i].raw_score);
        }
    }
}

TEST_CASE("cli: evaluate") {
    TempDir dir("evaluate");
    REQUIRE(run_cli("synth --n 3000 --seed 19 --output-dir " + dir.str()) == 0);

    SUBCASE("before == after gives all-zero deltas") {
        REQUIRE(run_cli("evaluate --before " + dir.str("synthetic.csv") + " --after " +
                        dir.str("synthetic.csv") + " --threshold 0.5 --output-dir " +
                        dir.str("eval")) == 0);
        const std::string csv = slurp(dir.path / "eval" / "evaluation.csv");
        std::istringstream in(csv);
        std::string line;
        std::getline(in, line); // header
        while (std::getline(in, line)) {
            std::vector<std::string> cells;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            REQUIRE(cells.size() == 11);
            for (std::size_t k = 6; k < cells.size(); ++k)
                if (!cells[k].empty() && cells[k] != "undefined")
                    CHECK(std::stod(cells[k]) == 0.0);
        }
    }
    SUBCASE("per-score mode emits a per-bin csv") {
        REQUIRE(run_cli("run --input " + dir.str("synthetic.csv") +
                        " --stepsize 0.05 --theta 0,1,0 --output-dir " + dir.str("runb")) == 0);
        REQUIRE(run_cli("evaluate --before " + dir.str("synthetic.csv") + " --after " +
                        dir.str("runb/fair_scores.csv") + " --threshold 0.5 --per-score "
                        "--stepsize 0.05 --output-dir " + dir.str("evalb")) == 0);
        const std::string csv = slurp(dir.path / "evalb" / "evaluation_per_score.csv");
        CHECK(csv.rfind("bin_center,phase,scope,", 0) == 0);
        CHECK(csv.find("before") != std::string::npos);
        CHECK(csv.find("after") != std::string::npos);
    }
    SUBCASE("scope mismatch between files") {
        write_file(dir.path / "other.csv",
                   "id,group,raw_score,ground_truth\n1,x,0.5,1\n2,x,0.2,0\n");
        CHECK(run_cli("evaluate --before " + dir.str("synthetic.csv") + " --after " +
                      dir.str("other.csv") + " --threshold 0.5 --output-dir " +
                      dir.str("evalc")) == 3);
    }
}

TEST_CASE("cli: export-plots") {
    TempDir dir("plots");
    write_file(dir.path / "data.csv", calibrated_csv());
    REQUIRE(run_cli("run --input " + dir.str("data.csv") +
                    " --stepsize 0.25 --theta 1,0,0 --output-dir " + dir.str("out")) == 0);
    REQUIRE(run_cli("export-plots --model " + dir.str("out/model.json") + " --input " +
                    dir.str("data.csv") + " --output-dir " + dir.str("plots")) == 0);

    SUBCASE("identity model: map value columns are equal") {
        std::istringstream in(slurp(dir.path / "plots" / "map_g.tsv"));
        std::string header, raw, fair;
        int defined;
        std::getline(in, header);
        while (in >> raw >> fair >> defined) CHECK(raw == fair);
    }
    SUBCASE("histograms sum to one") {
        for (const char* name : {"hist_raw_g.tsv", "hist_fair_g.tsv", "hist_fair_negative_g.tsv",
                                 "hist_fair_positive_g.tsv"}) {
            std::istringstream in(slurp(dir.path / "plots" / name));
            std::string header, center;
            double mass, total = 0.0;
            std::getline(in, header);
            while (in >> center >> mass) total += mass;
            CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("cli: negative-balance run aligns the groups' negative-class fair histograms") {
    TempDir dir("balance_export");
    REQUIRE(run_cli("synth --n 100000 --seed 31 --output-dir " + dir.str()) == 0);
    REQUIRE(run_cli("run --input " + dir.str("synthetic.csv") +
                    " --stepsize 0.01 --theta 0,1,0 --output-dir " + dir.str("out")) == 0);
    REQUIRE(run_cli("export-plots --model " + dir.str("out/model.json") + " --input " +
                    dir.str("synthetic.csv") + " --output-dir " + dir.str("plots")) == 0);
    auto read_masses = [&](const std::string& name) {
        std::istringstream in(slurp(dir.path / "plots" / name));
        std::string header, center;
        double mass;
        std::vector<double> masses;
        std::getline(in, header);
        while (in >> center >> mass) masses.push_back(mass);
        return masses;
    };
    const auto blue = read_masses("hist_fair_negative_blue.tsv");
    const auto orange = read_masses("hist_fair_negative_orange.tsv");
    REQUIRE(blue.size() == orange.size());

    // The final map is fitted on the whole group, so realized negative-class
    // distributions approach the shared barycenter without coinciding (the
    // exact statement holds for the conditional push-forwards, covered in the
    // acceptance suite). Exported histograms must close most of the raw gap.
    const ScoreGrid grid(0.01);
    const double w2_after =
        wasserstein2(ScoreHistogram(grid, blue), ScoreHistogram(grid, orange));
    const auto data = load_csv(dir.str("synthetic.csv"),
                               {"id", "group", "raw_score", "ground_truth"});
    std::map<std::string, std::vector<double>> raw_negatives;
    for (const auto& r : data.records)
        if (!r.positive) raw_negatives[r.group].push_back(grid.snap(r.raw_score));
    const double w2_before = wasserstein2(histogram_from_scores(raw_negatives.at("blue"), grid),
                                          histogram_from_scores(raw_negatives.at("orange"), grid));
    CHECK(w2_after < 0.5 * w2_before);
    double sup = 0.0;
    for (std::size_t b = 0; b < blue.size(); ++b)
        sup = std::max(sup, std::abs(blue[b] - orange[b]));
    CHECK(sup <= 0.1);
}

TEST_CASE("cli: theta file with wildcard section and flag override") {
    TempDir dir("thetafile");
    REQUIRE(run_cli("synth --n 1500 --seed 23 --output-dir " + dir.str()) == 0);
    write_file(dir.path / "thetas.cfg",
               "# per-group weights\n"
               "[*]\ntheta_a = 1/3\ntheta_b = 1/3\ntheta_c = 1/3\n"
               "[blue]\ntheta_a = 1\ntheta_b = 0\ntheta_c = 0\n");
    REQUIRE(run_cli("run --input " + dir.str("synthetic.csv") + " --stepsize 0.05 --thetas " +
                    dir.str("thetas.cfg") + " --output-dir " + dir.str("out")) == 0);
    const auto model = load_model(dir.str("out/model.json"));
    CHECK(model.thetas.at("blue").a == 1.0);
    CHECK(model.thetas.at("orange").a == doctest::Approx(1.0 / 3.0));

    // The --theta flag overrides every file entry.
    REQUIRE(run_cli("run --input " + dir.str("synthetic.csv") + " --stepsize 0.05 --thetas " +
                    dir.str("thetas.cfg") + " --theta 0,0,1 --output-dir " +
                    dir.str("out2")) == 0);
    const auto model2 = load_model(dir.str("out2/model.json"));
    CHECK(model2.thetas.at("blue").c == 1.0);
    CHECK(model2.thetas.at("orange").c == 1.0);
}
