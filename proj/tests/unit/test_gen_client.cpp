#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "narsal/gen_client.hpp"

using namespace narsal;

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path fixtures_dir() {
    // Tests run from the build tree; fixtures live in the source tree.
    return std::filesystem::path(__FILE__).parent_path().parent_path() / "fixtures" / "prompts";
}

/// Stub completions endpoint capturing request bodies.
struct StubServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::vector<std::string> bodies;
    std::mutex mutex;
    std::atomic<int> hits{0};

    explicit StubServer(std::function<std::string(int hit)> reply) {
        server.Post("/v1/chat/completions",
                    [this, reply](const httplib::Request& req, httplib::Response& res) {
                        {
                            std::lock_guard<std::mutex> lock(mutex);
                            bodies.push_back(req.body);
                        }
                        const int hit = hits.fetch_add(1);
                        const std::string content = reply(hit);
                        nlohmann::json out = {
                            {"choices",
                             nlohmann::json::array(
                                 {{{"message", {{"role", "assistant"}, {"content", content}}}}})}};
                        res.set_content(out.dump(), "application/json");
                    });
        port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~StubServer() {
        server.stop();
        thread.join();
    }

    std::string endpoint() const {
        return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    }
};

GenClientConfig stub_config(const std::string& endpoint) {
    GenClientConfig cfg;
    cfg.endpoint = endpoint;
    cfg.max_retries = 2;
    cfg.backoff_ms = 1;
    cfg.timeout_seconds = 5;
    cfg.api_key_env.clear();
    return cfg;
}

} // namespace

TEST_CASE("prompt templates are byte-identical to the repository fixtures") {
    for (PromptKind kind : {PromptKind::verbose, PromptKind::retell, PromptKind::negative,
                            PromptKind::wiki_negative}) {
        const auto path = fixtures_dir() / (prompt_kind_to_string(kind) + ".txt");
        CHECK(prompt_template(kind) == read_file(path));
    }
}

TEST_CASE("render_prompt substitutes the single story placeholder") {
    const std::string prompt = render_prompt(PromptKind::retell, "A story.");
    CHECK(prompt.rfind("A story.\n\nImagine that you want to tell", 0) == 0);
    CHECK(prompt.find("{STORY}") == std::string::npos);
}

TEST_CASE("sentence splitting handles terminators and newlines") {
    CHECK(split_sentences("One. Two! Three?") ==
          std::vector<std::string>{"One.", "Two!", "Three?"});
    CHECK(split_sentences("Line one.\nLine two.") ==
          std::vector<std::string>{"Line one.", "Line two."});
    CHECK(split_sentences("No terminator") == std::vector<std::string>{"No terminator"});
    CHECK(split_sentences("").empty());
}

TEST_CASE("a five-sentence retell is accepted and the wire prompt matches the fixture") {
    StubServer stub([](int) { return std::string("A. B. C. D. E."); });
    const GenClient client(stub_config(stub.endpoint()));
    const GenOutcome out = client.generate(PromptKind::retell, "Long verbose story text.");
    CHECK(out.ok);
    CHECK(out.sentences.size() == 5);
    CHECK(out.attempts == 1);

    REQUIRE(stub.bodies.size() == 1);
    const nlohmann::json body = nlohmann::json::parse(stub.bodies[0]);
    CHECK(body.at("model") == "gpt-4.1-mini");
    CHECK(body.at("messages").at(0).at("role") == "user");
    CHECK(body.at("messages").at(0).at("content") ==
          render_prompt(PromptKind::retell, "Long verbose story text."));
}

TEST_CASE("a four-sentence retell is a validation failure, not a retry") {
    StubServer stub([](int) { return std::string("A. B. C. D."); });
    const GenClient client(stub_config(stub.endpoint()));
    const GenOutcome out = client.generate(PromptKind::retell, "text");
    CHECK_FALSE(out.ok);
    CHECK(out.attempts == 1);
    CHECK(out.error.find("5 sentences") != std::string::npos);
    CHECK(out.raw == "A. B. C. D.");
}

TEST_CASE("transport failures retry exactly max_retries times") {
    // Grab a port with no listener behind it.
    int dead_port;
    {
        httplib::Server probe;
        dead_port = probe.bind_to_any_port("127.0.0.1");
    }
    GenClientConfig cfg = stub_config("http://127.0.0.1:" + std::to_string(dead_port));
    cfg.timeout_seconds = 1;
    const GenClient client(cfg);
    const GenOutcome out = client.generate(PromptKind::verbose, "text");
    CHECK_FALSE(out.ok);
    CHECK(out.attempts == 3); // initial try + 2 retries
    CHECK(out.error.find("transport") != std::string::npos);
}

TEST_CASE("http 500 responses are retried until the budget runs out") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        hits.fetch_add(1);
        res.status = 500;
        res.set_content("busy", "text/plain");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    const GenClient client(stub_config("http://127.0.0.1:" + std::to_string(port)));
    const GenOutcome out = client.generate(PromptKind::verbose, "text");
    server.stop();
    thread.join();
    CHECK_FALSE(out.ok);
    CHECK(hits.load() == 3);
    CHECK(out.error.find("500") != std::string::npos);
}

TEST_CASE("generate_for_corpus appends fields and preserves everything else") {
    const auto in_path = std::filesystem::temp_directory_path() / "narsal_gen_in.jsonl";
    const auto out_path = std::filesystem::temp_directory_path() / "narsal_gen_out.jsonl";
    {
        std::ofstream out(in_path);
        out << R"({"id":"a","anchor":["One.","Two."],"custom_field":7,"verbose":["V one.","V two."]})"
            << "\n";
        out << R"({"id":"b","anchor":["Three."],"twin":["Already here."]})" << "\n";
        out << R"({"id":"c","anchor":["Four."]})" << "\n"; // no verbose: must fail for retell
    }
    StubServer stub([](int) { return std::string("A. B. C. D. E."); });
    const GenRunStats stats =
        generate_for_corpus(in_path, out_path, PromptKind::retell, stub_config(stub.endpoint()));
    CHECK(stats.ok == 1);
    CHECK(stats.skipped == 1);
    CHECK(stats.failed == 1);

    std::ifstream in(out_path);
    std::string line;
    std::getline(in, line);
    const nlohmann::json a = nlohmann::json::parse(line);
    CHECK(a.at("custom_field") == 7); // untouched passthrough
    CHECK(a.at("twin").size() == 5);
    CHECK(a.at("anchor").size() == 2);
    std::getline(in, line);
    const nlohmann::json b = nlohmann::json::parse(line);
    CHECK(b.at("twin") == nlohmann::json::array({"Already here."}));
    std::getline(in, line);
    const nlohmann::json c = nlohmann::json::parse(line);
    CHECK(c.contains("generation_error"));
    CHECK_FALSE(c.contains("twin"));
    std::filesystem::remove(in_path);
    std::filesystem::remove(out_path);
}

TEST_CASE("concurrent generation preserves input order") {
    const auto in_path = std::filesystem::temp_directory_path() / "narsal_gen_conc_in.jsonl";
    const auto out_path = std::filesystem::temp_directory_path() / "narsal_gen_conc_out.jsonl";
    {
        std::ofstream out(in_path);
        for (int i = 0; i < 12; ++i) {
            out << R"({"id":"s)" << i << R"(","anchor":["Sentence."]})" << "\n";
        }
    }
    StubServer stub([](int) { return std::string("Only one reply."); });
    GenClientConfig cfg = stub_config(stub.endpoint());
    cfg.concurrency = 4;
    const GenRunStats stats = generate_for_corpus(in_path, out_path, PromptKind::verbose, cfg);
    CHECK(stats.ok == 12);
    std::ifstream in(out_path);
    std::string line;
    int idx = 0;
    while (std::getline(in, line)) {
        const nlohmann::json rec = nlohmann::json::parse(line);
        CHECK(rec.at("id") == "s" + std::to_string(idx));
        idx += 1;
    }
    CHECK(idx == 12);
    std::filesystem::remove(in_path);
    std::filesystem::remove(out_path);
}

TEST_CASE("endpoint URLs are validated") {
    GenClientConfig cfg;
    cfg.endpoint = "not-a-url";
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.endpoint = "http://host.example";
    CHECK_NOTHROW(cfg.validate());
    cfg.max_retries = -1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
