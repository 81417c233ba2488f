#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "narsal/corpus_io.hpp"

using namespace narsal;
namespace fs = std::filesystem;

namespace {

std::string binary() {
    const char* bin = std::getenv("NARSAL_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "NARSAL_BIN must point at the narsal executable");
    return bin;
}

int run(const std::string& args) {
    const std::string cmd = binary() + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / "narsal_pipeline_test") {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
};

} // namespace

TEST_CASE("synth -> train -> score -> eval round trip") {
    TempDir dir;

    // Tiny encoder and trainer configs keep this a smoke test.
    {
        std::ofstream enc(dir.file("encoder.json"));
        enc << R"({"dim":16,"layers":1,"heads":2,"ff_dim":24,"max_len":128,"dropout":0.1})";
        std::ofstream cfg(dir.file("train.json"));
        cfg << R"({"mode":"narrative-twins","temperature":0.05,"batch_size":8,"epochs":2,)"
            << R"("learning_rate":0.002,"use_distractors":true,"seed":5})";
    }

    REQUIRE(run("synth --out " + dir.file("corpus.jsonl") + " --labels " +
                dir.file("labels.jsonl") + " --stories 24 --seed 11") == 0);
    REQUIRE(fs::exists(dir.file("corpus.jsonl")));
    const auto records = read_corpus(dir.file("corpus.jsonl"));
    CHECK(records.size() == 24);
    CHECK(records[0].twin.has_value());
    CHECK(records[0].distractor.has_value());

    REQUIRE(run("train --corpus " + dir.file("corpus.jsonl") + " --config " +
                dir.file("train.json") + " --encoder-config " + dir.file("encoder.json") +
                " --out-dir " + dir.file("run")) == 0);
    REQUIRE(fs::exists(dir.path / "run" / "checkpoint_epoch0.nck"));
    REQUIRE(fs::exists(dir.path / "run" / "checkpoint_epoch2.nck"));
    REQUIRE(fs::exists(dir.path / "run" / "metrics.csv"));
    {
        std::ifstream metrics(dir.path / "run" / "metrics.csv");
        std::string header;
        std::getline(metrics, header);
        CHECK(header == "step,loss");
        int lines = 0;
        std::string line;
        while (std::getline(metrics, line)) lines += line.empty() ? 0 : 1;
        CHECK(lines == 6); // 24 stories / batch 8 * 2 epochs
    }

    REQUIRE(run("score --checkpoint " + (dir.path / "run" / "checkpoint_epoch2.nck").string() +
                " --corpus " + dir.file("corpus.jsonl") + " --out-csv " + dir.file("scores.csv") +
                " --out-json " + dir.file("scores.json") + " --threads 2") == 0);
    const auto scores = read_score_csv(dir.file("scores.csv"));
    CHECK(scores.size() == 24);
    CHECK(scores[0].sentence_count() == 5);

    REQUIRE(run("eval --scores " + dir.file("scores.csv") + " --labels " +
                dir.file("labels.jsonl") + " --out " + dir.file("report.json") +
                " --n-perm 200") == 0);
    std::ifstream report_in(dir.file("report.json"));
    nlohmann::json report;
    report_in >> report;
    CHECK(report.at("mode") == "story");
    CHECK(report.at("systems").size() == 7);
    CHECK(report.at("stories") == 24);
}

TEST_CASE("long-form align and window-level train/score/eval") {
    TempDir dir;
    {
        std::ofstream enc(dir.file("encoder.json"));
        enc << R"({"dim":16,"layers":1,"heads":2,"ff_dim":24,"max_len":512,"dropout":0.1})";
        std::ofstream cfg(dir.file("train.json"));
        cfg << R"({"mode":"narrative-twins","temperature":0.05,"batch_size":4,"epochs":1,)"
            << R"("learning_rate":0.002,"use_distractors":false,"use_in_story_negatives":true,)"
            << R"("window_level":true,"window_count":5,"seed":6})";
    }

    REQUIRE(run("synth --out " + dir.file("long.jsonl") + " --labels " + dir.file("long_labels.jsonl") +
                " --stories 8 --seed 12 --windows 5") == 0);

    // An untrained checkpoint provides the sentence encoder for alignment.
    {
        std::ofstream cfg(dir.file("init.json"));
        cfg << R"({"mode":"dropout-twins","batch_size":4,"epochs":1,"learning_rate":0.001,)"
            << R"("use_distractors":true,"seed":6})";
    }
    REQUIRE(run("train --corpus " + dir.file("long.jsonl") + " --config " + dir.file("init.json") +
                " --encoder-config " + dir.file("encoder.json") + " --out-dir " +
                dir.file("init_run")) == 0);
    const std::string init_ckpt = (dir.path / "init_run" / "checkpoint_epoch0.nck").string();

    REQUIRE(run("align --checkpoint " + init_ckpt + " --corpus " + dir.file("long.jsonl") +
                " --out " + dir.file("alignments.jsonl") + " --windows 5") == 0);
    std::ifstream align_in(dir.file("alignments.jsonl"));
    std::string line;
    int kept = 0, total = 0;
    while (std::getline(align_in, line)) {
        if (line.empty()) continue;
        total += 1;
        if (nlohmann::json::parse(line).at("kept").get<bool>()) kept += 1;
    }
    CHECK(total == 8);
    CHECK(kept > 0);

    REQUIRE(run("train --corpus " + dir.file("long.jsonl") + " --config " + dir.file("train.json") +
                " --encoder-config " + dir.file("encoder.json") + " --alignments " +
                dir.file("alignments.jsonl") + " --out-dir " + dir.file("win_run")) == 0);

    REQUIRE(run("score --checkpoint " + (dir.path / "win_run" / "checkpoint_epoch1.nck").string() +
                " --corpus " + dir.file("long.jsonl") + " --out-csv " + dir.file("win_scores.csv") +
                " --windows 5 --threads 2") == 0);

    REQUIRE(run("eval --scores " + dir.file("win_scores.csv") + " --labels " +
                dir.file("long_labels.jsonl") + " --out " + dir.file("win_report.json") +
                " --windows 5 --n-perm 100") == 0);
    std::ifstream report_in(dir.file("win_report.json"));
    nlohmann::json report;
    report_in >> report;
    CHECK(report.at("mode") == "window");
    CHECK(report.at("window_skip_rate").get<double>() == 0.0); // every window has its peak
}

TEST_CASE("invalid inputs produce a nonzero exit") {
    TempDir dir;
    CHECK(run("score --checkpoint /nonexistent.nck --corpus /nonexistent.jsonl --out-csv " +
              dir.file("x.csv")) != 0);
    CHECK(run("eval --scores /nonexistent.csv --labels /nonexistent.jsonl") != 0);
}
